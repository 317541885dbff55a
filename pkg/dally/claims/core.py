from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, Tuple

from dally.analytic.formulas import acquisition_probability, forward_efficiency, mean_contention_slots
from dally.claims.expr import safe_eval
from dally.config.schema import (
    DEFAULT_CAPACITY_C,
    DEFAULT_SLOT_T,
    DEFAULT_TAU,
    ClaimsConfig,
    EtherParams,
    LinkModel,
    RetransmitPolicy,
    RunConfig,
)
from dally.csmacd.contention import simulate_contention
from dally.oae.ladder import FRAME_BITS, OaeFrame
from dally.oae.stream import run_frame, run_stream
from dally.report.compare import compare_regimes
from dally.simkernel.rng import SeededRng

log = logging.getLogger(__name__)

Metrics = Dict[str, Any]


def _ether(p: Dict[str, Any], tau_default: float = 0.0) -> EtherParams:
    return EtherParams(
        capacity_C=p.get("C", DEFAULT_CAPACITY_C),
        slot_T=p.get("T", DEFAULT_SLOT_T),
        packet_P=p.get("P", 4096),
        stations_Q=p.get("Q", 1),
        propagation_tau=p.get("tau", tau_default),
    )


def _forward(p: Dict[str, Any]) -> Metrics:
    stats = forward_efficiency(_ether(p))
    return {"A": stats.acquisition_A, "W": stats.mean_slots_W, "E": stats.efficiency_E}


def _contention(p: Dict[str, Any]) -> Metrics:
    params = _ether(p)
    n = int(p.get("n", 100_000))
    report = simulate_contention(params, n, int(p.get("seed", 0)))
    a = acquisition_probability(params.stations_Q)
    return {
        "empirical_E": report.empirical_E,
        "analytic_E": forward_efficiency(params).efficiency_E,
        "empirical_W": report.empirical_W,
        "analytic_W": mean_contention_slots(a),
        # Standard error of the mean of a geometric count.
        "W_sigma": math.sqrt((1.0 - a) / a**2 / n),
        "E_stderr": report.efficiency_stderr,
    }


def _compare(p: Dict[str, Any]) -> Metrics:
    config = RunConfig(
        command="compare",
        params=_ether({"Q": 256, **p}, tau_default=DEFAULT_TAU),
        loss=p.get("loss", 0.0),
        corrupt=p.get("corrupt", 0.0),
        n=p.get("n", 200),
        seed=p.get("seed", 0),
        file_bits=p.get("file_bits"),
    )
    cmp = compare_regimes(config)
    e, eftp_row, oae_row = (row.value for row in cmp.rows)
    return {
        "E": e,
        "E_B_eftp": eftp_row,
        "E_B_oae": oae_row,
        "committed_eftp": cmp.eftp.n_committed / cmp.eftp.n_attempted,
        "committed_oae": cmp.oae.frames_committed / cmp.oae.frames_attempted,
    }


def _oae_stream(p: Dict[str, Any]) -> Metrics:
    c = p.get("C", DEFAULT_CAPACITY_C)
    tau = p.get("tau", DEFAULT_TAU)
    n = int(p.get("n_frames", 10_000))
    link = LinkModel(
        capacity_C=c, propagation_tau=tau, loss_prob=p.get("loss", 0.0), corrupt_prob=p.get("corrupt", 0.0), duplex="full"
    )
    seed = int(p.get("seed", 0))
    report = run_stream(n, link, RetransmitPolicy(budget=p.get("budget", 5)), seed)
    isolated = run_frame(link.model_copy(update={"loss_prob": 0.0, "corrupt_prob": 0.0}), OaeFrame(frame_id=0), 0.0, SeededRng(seed))
    return {
        "delta_t_commit": report.delta_t_commit,
        "isolated_delta": isolated.t_commit - isolated.t_forward_done,
        "stream_duration": report.stream_duration,
        "expected_duration": n * FRAME_BITS / c + 2 * tau,
        "committed": report.frames_committed / report.frames_attempted,
        "E_B": report.e_b_oae,
        "tau": tau,
    }


_KINDS: Dict[str, Callable[[Dict[str, Any]], Metrics]] = {
    "forward": _forward,
    "contention": _contention,
    "compare": _compare,
    "oae_stream": _oae_stream,
}


def claim_metrics(kind: str, params: Dict[str, Any]) -> Metrics:
    return _KINDS[kind](params)


def run_claims(cfg: ClaimsConfig) -> Tuple[int, list[str]]:
    """Returns (fail_count, lines)."""
    lines: list[str] = []
    fails = 0
    for claim in cfg.claims:
        metrics = claim_metrics(claim.kind, claim.params)
        ok = bool(safe_eval(claim.expect, metrics))
        shown = ", ".join(f"{k}={v:.6g}" for k, v in sorted(metrics.items()) if isinstance(v, float))
        if ok:
            lines.append(f"✓ {claim.name}  ({claim.expect}) => {shown}")
        else:
            fails += 1
            lines.append(f"✗ {claim.name}  ({claim.expect}) => {shown}")
        log.debug("claim %s: %s", claim.name, "pass" if ok else "fail")
    return fails, lines
