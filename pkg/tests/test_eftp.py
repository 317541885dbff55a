import math

import pytest

from dally.config.schema import EftpTimeouts, LinkModel
from dally.eftp.machine import (
    AckArrived,
    DallyDeadline,
    DataArrived,
    Depart,
    EchoArrived,
    EndArrived,
    EndReplyArrived,
    ReceiverPhase,
    ReceiverState,
    SendAck,
    SendData,
    SendEcho,
    SendEnd,
    SendEndReply,
    SenderPhase,
    SenderState,
    Start,
    Timeout,
    receiver_step,
    sender_depart,
    sender_step,
)
from dally.eftp.oracle import closed_form_exchange, exchange_success, packets_for, transfer_odds
from dally.eftp.transfer import Outcome, check_commit_chain, classify, measure_bilateral_efficiency_eftp, run_transfer
from dally.errors import DomainError, SimulationLogicError
from dally.simkernel.link import FaultInjector
from dally.simkernel.rng import derive_seed

CLEAN = LinkModel(capacity_C=3e6, propagation_tau=8e-6)


# ---- sender ----


def test_sender_start_sends_first_packet():
    step = sender_step(SenderState.initial(4, 5), Start())
    assert step.actions == (SendData(0),)
    assert step.state.phase == SenderPhase.SENDING


def test_sender_ack_advances():
    state = SenderState(total_packets=8, max_retries=5, phase=SenderPhase.AWAITING_ACK, next_seq=3, retries_left=2, started=True)
    step = sender_step(state, AckArrived(3))
    assert step.state.phase == SenderPhase.SENDING
    assert step.state.next_seq == 4
    assert step.state.retries_left == 5
    assert step.actions == (SendData(4),)


def test_sender_last_ack_sends_end_with_next_sequence():
    state = SenderState(total_packets=4, max_retries=5, next_seq=3, retries_left=5, started=True)
    step = sender_step(state, AckArrived(3))
    assert step.state.phase == SenderPhase.END_SENT
    assert step.actions == (SendEnd(4),)


def test_sender_stale_ack_is_ignored():
    state = SenderState(total_packets=4, max_retries=5, next_seq=2, retries_left=5, started=True)
    step = sender_step(state, AckArrived(1))
    assert step.ignored and step.state == state and step.actions == ()


def test_sender_timeout_retransmits_until_budget_runs_out():
    state = SenderState(total_packets=4, max_retries=1, next_seq=2, retries_left=1, started=True)
    step = sender_step(state, Timeout())
    assert step.state.phase == SenderPhase.AWAITING_ACK
    assert step.actions == (SendData(2),)
    step = sender_step(step.state, Timeout())
    assert step.state.phase == SenderPhase.DEPARTED_UNASSURED
    assert step.actions == (Depart(False),)


def test_sender_end_reply_matching_departs_assured():
    state = SenderState(total_packets=4, max_retries=5, phase=SenderPhase.AWAITING_END_REPLY, next_seq=4, retries_left=3, started=True)
    step = sender_step(state, EndReplyArrived(4))
    assert step.state.phase == SenderPhase.ECHO_SENT
    assert step.actions == (SendEcho(4), Depart(True))
    assert sender_depart(step.state, True).phase == SenderPhase.DEPARTED_ASSURED


def test_sender_end_reply_sequence_must_match():
    state = SenderState(total_packets=4, max_retries=5, phase=SenderPhase.END_SENT, next_seq=4, retries_left=5, started=True)
    assert sender_step(state, EndReplyArrived(3)).ignored


def test_sender_timeout_in_end_phase_resends_end():
    state = SenderState(total_packets=2, max_retries=5, phase=SenderPhase.END_SENT, next_seq=2, retries_left=5, started=True)
    step = sender_step(state, Timeout())
    assert step.state.phase == SenderPhase.AWAITING_END_REPLY
    assert step.actions == (SendEnd(2),)


def test_sender_cannot_depart_assured_without_end_reply():
    state = SenderState(total_packets=4, max_retries=5, next_seq=1, retries_left=5, started=True)
    with pytest.raises(SimulationLogicError):
        sender_depart(state, True)


def test_sender_initial_needs_a_packet():
    with pytest.raises(ValueError):
        SenderState.initial(0, 5)


# ---- receiver ----


def test_receiver_accepts_in_order_data():
    step = receiver_step(ReceiverState(expected_seq=3), DataArrived(3))
    assert step.actions == (SendAck(3),)
    assert step.state.expected_seq == 4


def test_receiver_discards_damaged_data():
    state = ReceiverState(expected_seq=3)
    step = receiver_step(state, DataArrived(3, ok=False))
    assert step.state == state and step.actions == ()


def test_receiver_reacks_duplicates_without_redelivery():
    step = receiver_step(ReceiverState(expected_seq=4), DataArrived(3))
    assert step.actions == (SendAck(3),)
    assert step.state.expected_seq == 4


def test_receiver_end_starts_the_dally():
    step = receiver_step(ReceiverState(expected_seq=2), EndArrived(2), now=1.0, dally_s=10.0)
    assert step.state.phase == ReceiverPhase.END_REPLY_SENT
    assert step.state.dally_deadline == 11.0
    assert step.actions == (SendEndReply(2),)


def test_receiver_duplicate_end_resends_end_reply():
    state = ReceiverState(phase=ReceiverPhase.END_REPLY_SENT, expected_seq=2, end_seq=2, dally_deadline=11.0)
    step = receiver_step(state, EndArrived(2), now=3.0)
    assert step.state.phase == ReceiverPhase.DALLYING
    assert step.state.dally_deadline == 11.0
    assert step.actions == (SendEndReply(2),)


def test_receiver_echo_during_dally_departs_assured():
    state = ReceiverState(phase=ReceiverPhase.DALLYING, expected_seq=2, end_seq=2, dally_deadline=11.0)
    step = receiver_step(state, EchoArrived(2))
    assert step.state.phase == ReceiverPhase.DEPARTED_ASSURED
    assert step.actions == (Depart(True),)


def test_receiver_dally_expiry_without_echo():
    state = ReceiverState(phase=ReceiverPhase.DALLYING, expected_seq=2, end_seq=2, dally_deadline=11.0)
    step = receiver_step(state, DallyDeadline())
    assert step.state.phase == ReceiverPhase.DALLY_EXPIRED
    assert step.actions == (Depart(False),)


def test_receiver_ignores_everything_after_departure():
    state = ReceiverState(phase=ReceiverPhase.DEPARTED_ASSURED, expected_seq=2, end_seq=2)
    assert receiver_step(state, EndArrived(2)).ignored


def test_classify():
    assert classify(True, True) == Outcome.COMMITTED
    assert classify(True, False) == Outcome.SENDER_ONLY_ASSURED
    assert classify(False, True) == Outcome.RECEIVER_ONLY_ASSURED
    assert classify(False, False) == Outcome.FAILED


# ---- oracle ----


@pytest.mark.parametrize("s", [0.0, 0.5, 0.9, 1.0])
@pytest.mark.parametrize("attempts", [1, 2, 6])
def test_exchange_enumeration_matches_closed_form(s, attempts):
    assert exchange_success(s, attempts) == pytest.approx(closed_form_exchange(s, attempts), abs=1e-12)


def test_transfer_odds_partition_unity():
    odds = transfer_odds(0.1, 0.02, 3, 5)
    assert odds.committed + odds.sender_only + odds.failed == pytest.approx(1.0)
    assert transfer_odds(0.0, 0.0, 3, 5).committed == 1.0
    assert packets_for(4097, 4096) == 2


# ---- transfers ----


def test_clean_transfer_commits_without_retransmissions():
    rec = run_transfer(4 * 4096, 4096, CLEAN, EftpTimeouts(), seed=0, keep_trace=True)
    assert rec.outcome == Outcome.COMMITTED
    assert rec.sender_assured and rec.receiver_assured
    assert rec.retransmissions == 0
    assert rec.accepted == [0, 1, 2, 3]
    assert rec.bytes_transferred == 4 * 4096 // 8
    assert rec.t_start <= rec.t_forward_done <= rec.t_commit
    assert check_commit_chain(rec)


def test_clean_commit_overhead_is_four_control_hops():
    rec = run_transfer(4096, 4096, CLEAN, EftpTimeouts(), seed=0)
    hop = 48 / 3e6 + 8e-6
    # final ACK, END, ENDREPLY, echo
    assert rec.t_commit - rec.t_forward_done == pytest.approx(4 * hop, rel=1e-9)


def test_lost_echo_leaves_only_the_sender_assured():
    for i in range(20):
        rec = run_transfer(
            2 * 4096, 4096, CLEAN, EftpTimeouts(), seed=i, injector=FaultInjector(drop={"echo": 1}), keep_trace=True
        )
        assert rec.outcome == Outcome.SENDER_ONLY_ASSURED
        assert rec.t_commit is None
        assert rec.trace[-1].phase_after == ReceiverPhase.DALLY_EXPIRED


def test_dead_return_channel_fails_both_sides():
    rec = run_transfer(4096, 4096, CLEAN, EftpTimeouts(retries=2), seed=0, injector=FaultInjector(drop={"ack": -1}))
    assert rec.outcome == Outcome.FAILED
    assert rec.retransmissions == 2


def test_lost_end_reply_is_recovered_by_retransmitting_end():
    rec = run_transfer(4096, 4096, CLEAN, EftpTimeouts(), seed=0, injector=FaultInjector(drop={"endreply": 1}))
    assert rec.outcome == Outcome.COMMITTED
    assert rec.retransmissions == 1


def test_corrupted_data_is_retransmitted():
    rec = run_transfer(2 * 4096, 4096, CLEAN, EftpTimeouts(), seed=0, injector=FaultInjector(corrupt={"data": 1}))
    assert rec.outcome == Outcome.COMMITTED
    assert rec.accepted == [0, 1]
    assert rec.retransmissions == 1


def test_short_last_packet():
    rec = run_transfer(4096 + 100, 4096, CLEAN, EftpTimeouts(), seed=0)
    assert rec.accepted == [0, 1]
    assert rec.bytes_transferred == (4096 + 100) // 8


def test_run_transfer_domain():
    with pytest.raises(DomainError):
        run_transfer(100, 4096, CLEAN, EftpTimeouts(), seed=0)


def test_fuzzed_lossy_transfers_never_break_the_commit_chain():
    lossy = LinkModel(capacity_C=3e6, propagation_tau=8e-6, loss_prob=0.2, corrupt_prob=0.05)
    for i in range(10_000):
        rec = run_transfer(2 * 512, 512, lossy, EftpTimeouts(retries=3), seed=derive_seed(99, i), keep_trace=True)
        assert check_commit_chain(rec)
        if rec.sender_assured:
            assert any(line.event == "EndReplyArrived" and line.actor == "sender" for line in rec.trace)
        assert rec.accepted == list(range(len(rec.accepted)))
        assert rec.outcome != Outcome.RECEIVER_ONLY_ASSURED


def test_committed_fraction_matches_retry_tree_oracle():
    n, loss = 1000, 0.1
    link = LinkModel(capacity_C=3e6, propagation_tau=8e-6, loss_prob=loss)
    report = measure_bilateral_efficiency_eftp(n, 4096, 4096, link, EftpTimeouts(), seed=17)
    p = transfer_odds(loss, 0.0, 1, 5).committed
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(report.n_committed / n - p) < 3 * sigma


def test_bilateral_efficiency_on_clean_link_sits_below_one():
    report = measure_bilateral_efficiency_eftp(10, 4096, 4096, CLEAN, EftpTimeouts(), seed=1)
    p_eff = 4096 / 3e6
    delta = 4 * (48 / 3e6 + 8e-6)
    assert report.n_committed == 10
    assert report.delta_t_commit == pytest.approx(delta, rel=1e-9)
    assert report.e_b == pytest.approx(p_eff / (p_eff + delta), rel=1e-9)
    assert report.e_b < 0.98


def test_degenerate_link_reaches_unit_bilateral_efficiency():
    link = LinkModel(capacity_C=3e6, propagation_tau=0.0)
    report = measure_bilateral_efficiency_eftp(5, 4096, 4096, link, EftpTimeouts(control_bits=0), seed=0)
    assert report.delta_t_commit == 0.0
    assert report.e_b == 1.0


def test_no_commits_reports_absent_overhead():
    link = LinkModel(loss_prob=1.0)
    report = measure_bilateral_efficiency_eftp(3, 4096, 4096, link, EftpTimeouts(retries=1), seed=0)
    assert report.n_committed == 0
    assert report.delta_t_commit is None
    assert report.e_b == 0.0
    assert report.outcome_counts["Failed"] == 3


def test_measurement_is_deterministic():
    link = LinkModel(loss_prob=0.05, propagation_tau=8e-6)
    a = measure_bilateral_efficiency_eftp(200, 8192, 4096, link, EftpTimeouts(), seed=5)
    b = measure_bilateral_efficiency_eftp(200, 8192, 4096, link, EftpTimeouts(), seed=5)
    assert a.model_dump_json() == b.model_dump_json()
