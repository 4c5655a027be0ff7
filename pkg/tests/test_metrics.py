import dataclasses
import math

import numpy as np
import pytest

from wurlab.analytic import evaluate_scheme
from wurlab.config import MacScheme
from wurlab.metrics import (EstimationError, Tolerances, compare,
                            estimate_queue_stats, estimate_round_stats)
from wurlab.protocol.queue_sim import QueueLog, run_queue_mode
from wurlab.protocol.round_sim import run_round_mode

from conftest import with_lambda, with_n


def synthetic_log(n_frames=400, busy_per_frame=0, won=True, horizon=100.0):
    start = np.linspace(1.0, horizon - 1.0, n_frames)
    return QueueLog(
        n_nodes=1, horizon=horizon,
        frame_start=start, frame_end=start + 0.001,
        frame_busy=np.full(n_frames, busy_per_frame, dtype=np.int32),
        frame_won=np.full(n_frames, won, dtype=bool),
        frame_node=np.zeros(n_frames, dtype=np.int32),
        cycle_frames=np.ones(n_frames, dtype=np.int64),
        cycle_end=start + 0.002,
        tx_intervals=np.zeros((0, 2)),
        state_durations=np.zeros((1, 4)),
        blocked_arrivals=0, total_arrivals=n_frames,
    )


def test_all_idle_log_gives_zero_alpha():
    st = estimate_queue_stats(synthetic_log(), warmup_fraction=0.0)
    assert st.empirical_alpha == 0.0
    assert st.ci_alpha == 0.0
    assert st.empirical_p_loss == 0.0


def test_counting_estimate_thirty_seventy():
    # 100 frames, each with 3 busy verdicts and 7 idle wins is not
    # constructible frame-wise; use 30 losing-style frames instead:
    # 70 frames win on the first try, 30 frames see one busy then win.
    start = np.linspace(1.0, 99.0, 100)
    busy = np.zeros(100, dtype=np.int32)
    busy[:30] = 3
    log = synthetic_log(100)
    log = dataclasses.replace(log, frame_busy=busy)
    st = estimate_queue_stats(log, warmup_fraction=0.0)
    assert st.empirical_alpha == pytest.approx(90 / 190)


def test_low_data_flag():
    st = estimate_queue_stats(synthetic_log(150), warmup_fraction=0.0)
    assert st.low_data
    st = estimate_queue_stats(synthetic_log(400), warmup_fraction=0.0)
    assert not st.low_data


def test_warmup_excludes_leading_frames():
    log = synthetic_log(400)
    st = estimate_queue_stats(log, warmup_fraction=0.5)
    assert st.n_frames < 400
    assert st.n_frames >= 190


def test_estimator_input_validation():
    with pytest.raises(EstimationError):
        estimate_queue_stats(synthetic_log(), warmup_fraction=0.9)
    with pytest.raises(EstimationError):
        estimate_queue_stats(synthetic_log(), warmup_fraction=0.0, batches=1)


def test_ci_shrinks_with_horizon(config):
    cfg = with_n(config, 10)
    short = estimate_queue_stats(
        run_queue_mode(cfg, MacScheme.CCA, horizon=300.0), 0.1)
    long = estimate_queue_stats(
        run_queue_mode(cfg, MacScheme.CCA, horizon=600.0), 0.1)
    # doubling the horizon shrinks the interval by about 1/sqrt(2)
    ratio = long.ci_alpha / short.ci_alpha
    assert 0.707 / 1.3 < ratio < 0.707 * 1.3


def test_round_stats_basic(config):
    traces = run_round_mode(with_n(config, 10), MacScheme.CCA, rounds=40)
    st = estimate_round_stats(traces, MacScheme.CCA)
    assert 0.0 <= st.clustering_success_rate <= 1.0
    assert st.mean_round_energy > 0
    assert st.mean_round_delay > 0
    assert st.n_rounds == 40


def test_round_stats_all_asleep_reports_absent(config):
    starved = with_lambda(with_n(config, 4), 1e-6)
    traces = run_round_mode(starved, MacScheme.CCA, rounds=5)
    st = estimate_round_stats(traces, MacScheme.CCA)
    assert st.clustering_success_rate is None
    assert math.isnan(st.mean_round_delay)


def test_compare_identical_passes(config):
    an = evaluate_scheme(with_n(config, 10), MacScheme.CCA)
    log = run_queue_mode(with_n(config, 10), MacScheme.CCA, horizon=100.0)
    st = estimate_queue_stats(log, 0.1, scheme=MacScheme.CCA)
    fake = dataclasses.replace(st, empirical_alpha=an.alpha,
                               empirical_p_loss=an.p_loss)
    point = compare(an, queue_stats=fake)
    assert point.passed
    assert all(d.delta == 0.0 for d in point.deltas if d.gating)


def test_compare_flags_only_breached_metric(config):
    an = evaluate_scheme(with_n(config, 10), MacScheme.CCA)
    log = run_queue_mode(with_n(config, 10), MacScheme.CCA, horizon=100.0)
    st = estimate_queue_stats(log, 0.1, scheme=MacScheme.CCA)
    doctored = dataclasses.replace(st, empirical_alpha=an.alpha + 0.06,
                                   empirical_p_loss=an.p_loss)
    point = compare(an, queue_stats=doctored)
    assert not point.passed
    outcome = {d.metric: d.ok for d in point.deltas if d.gating}
    assert outcome == {"alpha": False, "p_loss": True}


def test_compare_is_symmetric_in_sign(config):
    an = evaluate_scheme(with_n(config, 10), MacScheme.CCA)
    log = run_queue_mode(with_n(config, 10), MacScheme.CCA, horizon=100.0)
    st = estimate_queue_stats(log, 0.1, scheme=MacScheme.CCA)
    up = dataclasses.replace(st, empirical_alpha=an.alpha + 0.02)
    down = dataclasses.replace(st, empirical_alpha=an.alpha - 0.02)
    d_up = {d.metric: d.delta for d in compare(an, queue_stats=up).deltas}
    d_down = {d.metric: d.delta for d in compare(an, queue_stats=down).deltas}
    assert d_up["alpha"] == pytest.approx(d_down["alpha"])


def test_compare_rejects_mismatched_configuration(config):
    an = evaluate_scheme(with_n(config, 10), MacScheme.CCA)
    log = run_queue_mode(with_n(config, 12), MacScheme.CCA, horizon=50.0)
    st = estimate_queue_stats(log, 0.1, scheme=MacScheme.CCA)
    with pytest.raises(EstimationError, match="mismatched"):
        compare(an, queue_stats=st)


def test_corrupted_timing_fails_alpha(config):
    """Fault injection: a 10x sensing window on the simulated side only."""
    broken = config.replace(link=dataclasses.replace(
        config.link, cca_duration=19.2e-3))
    an = evaluate_scheme(with_n(config, 2), MacScheme.CCA)
    log = run_queue_mode(with_n(broken, 2), MacScheme.CCA, horizon=300.0)
    st = estimate_queue_stats(log, 0.1, scheme=MacScheme.CCA)
    point = compare(an, queue_stats=st)
    assert not point.passed
    outcome = {d.metric: d.ok for d in point.deltas if d.gating}
    assert outcome == {"alpha": False, "p_loss": True}


def test_batch_boundaries_do_not_move_point_estimates():
    log = synthetic_log(397)
    a = estimate_queue_stats(log, 0.0, batches=20)
    b = estimate_queue_stats(log, 0.0, batches=13)
    assert a.empirical_alpha == b.empirical_alpha
    assert a.empirical_p_loss == b.empirical_p_loss


def test_report_serialization_shape(config):
    from wurlab.metrics import ComparisonReport
    an = evaluate_scheme(with_n(config, 10), MacScheme.CCA)
    log = run_queue_mode(with_n(config, 10), MacScheme.CCA, horizon=60.0)
    st = estimate_queue_stats(log, 0.1, scheme=MacScheme.CCA)
    report = ComparisonReport(points=(compare(an, queue_stats=st),),
                              tolerances=Tolerances())
    tree = report.to_dict()
    assert set(tree) == {"passed", "tolerances", "points"}
    point = tree["points"][0]
    assert point["scheme"] == "CCA" and point["n"] == 10
    assert "alpha" in point["metrics"]

def test_compare_rejects_queue_stats_for_baseline(config):
    an = evaluate_scheme(with_n(config, 10), MacScheme.SCM)
    log = run_queue_mode(with_n(config, 10), MacScheme.CCA, horizon=30.0)
    st = estimate_queue_stats(log, 0.1)
    with pytest.raises(EstimationError, match="baseline"):
        compare(an, queue_stats=st)
