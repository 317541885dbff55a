import math

import pytest
from pydantic import ValidationError

from dally.analytic.formulas import (
    BilateralInputs,
    acquisition_probability,
    bilateral_efficiency,
    bilateral_grid,
    efficiency_grid,
    eftp_transaction_time,
    forward_efficiency,
    mean_contention_slots,
    station_counts,
    validate_causal_closure,
)
from dally.config.schema import DEFAULT_PACKET_SIZES, EtherParams
from dally.errors import DomainError, UsageError


def ether(p=4096, q=1, c=3e6, t=16e-6, tau=0.0):
    return EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q, propagation_tau=tau)


@pytest.mark.parametrize(
    "q, expected",
    [(1, 1.0), (2, 0.5), (10, 0.387420489), (256, 0.368599597067582)],
)
def test_acquisition_probability(q, expected):
    assert acquisition_probability(q) == pytest.approx(expected, abs=1e-12)


def test_acquisition_probability_lone_station_is_exact():
    assert acquisition_probability(1) == 1.0
    assert mean_contention_slots(1.0) == 0.0


@pytest.mark.parametrize("q", [0, -3])
def test_acquisition_probability_rejects_empty_ether(q):
    with pytest.raises(DomainError):
        acquisition_probability(q)


@pytest.mark.parametrize("a, expected", [(1.0, 0.0), (0.5, 1.0), (0.368599597067582, 1.712970952642288)])
def test_mean_contention_slots(a, expected):
    assert mean_contention_slots(a) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("a", [0.0, -0.1, 1.0000001])
def test_mean_contention_slots_domain(a):
    with pytest.raises(DomainError):
        mean_contention_slots(a)


def test_forward_efficiency_stays_above_98_percent_at_256_stations():
    stats = forward_efficiency(ether(p=4096, q=256))
    assert stats.efficiency_E > 0.98
    assert stats.efficiency_E == pytest.approx(0.98032115244, abs=1e-9)


def test_forward_efficiency_single_station_is_exactly_one():
    stats = forward_efficiency(ether(p=4096, q=1))
    assert (stats.acquisition_A, stats.mean_slots_W, stats.efficiency_E) == (1.0, 0.0, 1.0)


def test_forward_efficiency_small_packets():
    # P/C equals one slot here, so E collapses to A.
    stats = forward_efficiency(ether(p=48, q=256))
    assert stats.efficiency_E == pytest.approx(0.368, abs=1e-3)
    assert stats.efficiency_E == pytest.approx(stats.acquisition_A, rel=1e-12)


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0, 1000.0])
def test_forward_efficiency_depends_on_p_over_c_only(k):
    base = forward_efficiency(ether(p=1024, q=16, c=3e6)).efficiency_E
    scaled = forward_efficiency(ether(p=int(1024 * k), q=16, c=3e6 * k)).efficiency_E
    assert scaled == pytest.approx(base, abs=1e-12)


def test_forward_efficiency_falls_with_more_stations():
    es = [forward_efficiency(ether(p=512, q=q)).efficiency_E for q in (1, 2, 4, 16, 64, 256)]
    assert all(a > b for a, b in zip(es, es[1:]))
    # ...towards 1/e acquisition, never below the Q -> infinity limit.
    limit = (512 / 3e6) / (512 / 3e6 + (math.e - 1) * 16e-6)
    assert es[-1] > limit


def test_efficiency_grid_default_shape_and_order():
    cells = efficiency_grid(DEFAULT_PACKET_SIZES, station_counts(256))
    assert len(cells) == 36
    assert [(c.packet_P, c.stations_Q) for c in cells[:3]] == [(48, 1), (48, 2), (48, 4)]
    assert cells[-1].packet_P == 4096 and cells[-1].stations_Q == 256
    assert cells[-1].stats.efficiency_E > 0.98


def test_efficiency_grid_hand_evaluated_cell():
    (cell,) = efficiency_grid([48], [2])
    assert cell.stats.efficiency_E == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("p_list, q_list", [([], [1]), ([48], [])])
def test_efficiency_grid_rejects_empty_axes(p_list, q_list):
    with pytest.raises(UsageError):
        efficiency_grid(p_list, q_list)


def test_station_counts():
    assert station_counts(256) == [1, 2, 4, 8, 16, 32, 64, 128, 256]
    assert station_counts(10, 3) == [1, 4, 7, 10]
    assert station_counts(1) == [1]
    with pytest.raises(UsageError):
        station_counts(0)
    with pytest.raises(UsageError):
        station_counts(8, 0)


def test_bilateral_efficiency_identities():
    assert bilateral_efficiency(BilateralInputs(n_committed=100, n_attempted=100, payload_duration_Peff=3.0)) == 1.0
    zero = BilateralInputs(n_committed=0, n_attempted=100, payload_duration_Peff=1e-4, commit_overhead_dTc=2e-5)
    assert bilateral_efficiency(zero) == 0.0


def test_bilateral_efficiency_forced_arithmetic():
    inputs = BilateralInputs(n_committed=90, n_attempted=100, payload_duration_Peff=100e-6, commit_overhead_dTc=25e-6)
    assert bilateral_efficiency(inputs) == pytest.approx(0.72, abs=1e-12)


def test_bilateral_efficiency_never_exceeds_commit_rate():
    for dtc in (0.0, 1e-6, 1e-3, 10.0):
        inputs = BilateralInputs(n_committed=7, n_attempted=9, payload_duration_Peff=1e-3, commit_overhead_dTc=dtc)
        assert bilateral_efficiency(inputs) <= 7 / 9


def test_bilateral_efficiency_undefined_without_attempts():
    with pytest.raises(DomainError):
        bilateral_efficiency(BilateralInputs(n_committed=0, n_attempted=0, payload_duration_Peff=0.0))


def test_bilateral_inputs_validation():
    with pytest.raises(ValidationError):
        BilateralInputs(n_committed=5, n_attempted=4, payload_duration_Peff=1.0)
    with pytest.raises(ValidationError):
        BilateralInputs(n_committed=1, n_attempted=1, payload_duration_Peff=1.0, commit_overhead_dTc=-1.0)


@pytest.mark.parametrize(
    "t, tau, expected",
    [(16e-6, 8e-6, True), (16e-6, 9e-6, False), (16e-6, 0.0, True)],
)
def test_validate_causal_closure(t, tau, expected):
    assert validate_causal_closure(t, tau) is expected


def test_validate_causal_closure_rejects_negative_times():
    with pytest.raises(DomainError):
        validate_causal_closure(16e-6, -1e-6)
    with pytest.raises(DomainError):
        validate_causal_closure(-1.0, 0.0)


def test_ether_params_validation():
    with pytest.raises(ValidationError):
        EtherParams(capacity_C=0)
    with pytest.raises(ValidationError):
        EtherParams(packet_P=0)
    with pytest.raises(ValidationError):
        EtherParams(stations_Q=0)
    # Causal-closure violations are constructible; they are linted, not rejected.
    assert EtherParams(slot_T=1e-6, propagation_tau=1e-3).propagation_tau == 1e-3


def test_eftp_transaction_time_single_station():
    params = ether(p=4096, q=1, tau=8e-6)
    # No contention: data + four control frames, each serialized and propagated.
    expected = 4096 / 3e6 + 8e-6 + 4 * (48 / 3e6 + 8e-6)
    assert eftp_transaction_time(params) == pytest.approx(expected, rel=1e-12)
    assert eftp_transaction_time(params, dally_s=10.0) == pytest.approx(expected + 10.0, rel=1e-12)


def test_bilateral_grid_sits_below_forward_grid():
    cells = bilateral_grid(DEFAULT_PACKET_SIZES, station_counts(256))
    assert len(cells) == 36
    for cell in cells:
        assert cell.bilateral_E_B_worst < cell.bilateral_E_B < cell.forward_E
    big = cells[-1]
    assert big.forward_E > 0.98
    assert big.bilateral_E_B_worst < 1e-3  # a 10 s dally dwarfs a 1.4 ms packet


SPARSE_Q = sorted({2**k for k in range(21)} | {10**k for k in range(7)} | {3 * 10**k for k in range(6)})


@pytest.mark.parametrize("q", SPARSE_Q)
def test_acquisition_probability_bounds_and_limit(q):
    a = acquisition_probability(q)
    assert 0.3678 < a <= 1.0
    if q > 1:
        assert abs(a - math.exp(-1)) < 1 / q


def test_acquisition_probability_never_increases_with_stations():
    dense = [acquisition_probability(q) for q in range(1, 5001)]
    assert all(a >= b for a, b in zip(dense, dense[1:]))
    sparse = [acquisition_probability(q) for q in SPARSE_Q]
    assert all(a >= b for a, b in zip(sparse, sparse[1:]))


def test_mean_contention_slots_never_decreases_with_stations():
    for qs in (range(1, 5001), SPARSE_Q):
        w = [mean_contention_slots(acquisition_probability(q)) for q in qs]
        assert all(x <= y for x, y in zip(w, w[1:]))
    assert mean_contention_slots(acquisition_probability(10**6)) < math.e - 1
