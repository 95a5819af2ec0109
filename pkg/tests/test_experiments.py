import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakdoa.array_model import ArrayGeometry, SourceScenario, generate_snapshots, make_scenario, true_subspace_model
from leakdoa.experiments import (
    ExperimentConfig,
    TrialRecord,
    compute_metrics,
    empirical_root_probabilities,
    match_signal_roots,
    resolution_event,
    root_events,
    run_monte_carlo,
    squared_error,
    stochastic_crb,
    trial_seed,
)
from leakdoa.rootmusic import RootSet, root_music, root_set_from_covariance
from leakdoa.subspace import sample_covariance

from conftest import DOAS_DEG

TRUE = np.deg2rad(np.array(DOAS_DEG))


def test_exact_estimate_resolves():
    assert resolution_event(TRUE, TRUE)


def test_two_degree_miss_does_not_resolve():
    assert not resolution_event(TRUE + np.deg2rad([2.0, 0.0]), TRUE)


def test_just_inside_one_degree_resolves():
    assert resolution_event(TRUE + np.deg2rad([0.99, -0.99]), TRUE)


def test_exactly_one_degree_does_not_resolve():
    assert not resolution_event(TRUE + np.deg2rad([1.0, 0.0]), TRUE)


def test_errors_pair_sorted_lists():
    assert squared_error(TRUE[::-1], TRUE) == 0.0
    assert squared_error(np.array([0.3, 0.1]), np.array([0.0, 0.5])) == pytest.approx(0.1**2 + 0.2**2)


def test_near_noiseless_single_trial():
    table = run_monte_carlo(ExperimentConfig(snr_db=(60.0,), trials=1, methods=("rm",)))
    assert table.rows[0]["mse"] <= 1e-8


def test_methods_see_identical_snapshots():
    cfg = ExperimentConfig(snr_db=(5.0, 15.0), trials=20, methods=("rm", "urm+2step", "rsurm"), seed=3)
    flipped = ExperimentConfig(snr_db=(5.0, 15.0), trials=20, methods=("rsurm", "rm", "urm+2step"), seed=3)
    assert run_monte_carlo(cfg).sorted_rows() == run_monte_carlo(flipped).sorted_rows()


def test_thread_count_does_not_change_results():
    cfg = ExperimentConfig(snr_db=(8.0,), trials=12, methods=("rm", "rsurm+pnr5"), seed=1)
    assert run_monte_carlo(cfg, threads=1).sorted_rows() == run_monte_carlo(cfg, threads=4).sorted_rows()


def test_trial_seeds_distinct():
    a = generate_snapshots(make_scenario(0.0), trial_seed(0, 0, 0))
    b = generate_snapshots(make_scenario(0.0), trial_seed(0, 0, 1))
    c = generate_snapshots(make_scenario(0.0), trial_seed(0, 1, 0))
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(snr_db=())
    with pytest.raises(ValueError):
        ExperimentConfig(methods=("music",))
    with pytest.raises(ValueError):
        ExperimentConfig(methods=("rm", "rm"))


def test_noiseless_trials_have_no_root_events():
    base = make_scenario(10.0, DOAS_DEG)
    sc = SourceScenario(base.geometry, base.doas, base.source_covariance, 0.0, 10)
    model = true_subspace_model(base)
    records = []
    for t in range(5):
        roots = root_set_from_covariance(sample_covariance(generate_snapshots(sc, t)), 2)
        records.append((roots, (0, 1)))
    assert empirical_root_probabilities(records, model) == (0.0, 0.0)


def test_root_event_rules():
    truth = np.exp(1j * np.array([0.5, 0.6]))
    # estimated roots: signal roots pulled inward, a noise root closer to the circle
    roots = RootSet(np.array([0.97 * np.exp(1j * 2.0), 0.95 * np.exp(1j * 0.5), 0.9 * np.exp(1j * 0.61)]))
    np.testing.assert_array_equal(match_signal_roots(roots.roots, truth), [1, 2])
    assert root_events(roots, truth, (1, 2)) == (True, False)
    assert root_events(roots, truth, (0, 1)) == (True, True)
    clean = RootSet(np.array([0.99 * np.exp(1j * 0.5), 0.98 * np.exp(1j * 0.6), 0.5]))
    assert root_events(clean, truth, (0, 1)) == (False, False)


@given(st.integers(0, 10_000), st.floats(-5, 20))
def test_probabilities_in_unit_interval(seed, snr):
    sc = make_scenario(snr, DOAS_DEG)
    model = true_subspace_model(sc)
    records = []
    for t in range(3):
        roots = root_set_from_covariance(sample_covariance(generate_snapshots(sc, [seed, t])), 2)
        records.append((roots, (0, 2)))
    swap, fail = empirical_root_probabilities(records, model)
    assert 0.0 <= swap <= 1.0 and 0.0 <= fail <= 1.0


def test_crb_scales_inversely_with_snapshots():
    base = make_scenario(10.0, DOAS_DEG)
    traces = []
    for N in (10, 40):
        sc = SourceScenario(base.geometry, base.doas, base.source_covariance, 1.0, N)
        traces.append(np.trace(stochastic_crb(sc)))
    assert traces[1] == pytest.approx(traces[0] / 4, rel=1e-12)


def test_crb_positive_definite():
    crb = stochastic_crb(make_scenario(10.0, DOAS_DEG))
    np.testing.assert_array_equal(crb, crb.T)
    assert np.all(np.linalg.eigvalsh(crb) > 0)


def test_crb_single_source_closed_form():
    # one source: CRB = 6 / (N M (M^2-1) (dw/dtheta)^2) * (1 + 1/(M snr)) / snr
    M, N, snr = 10, 10, 100.0
    sc = SourceScenario(ArrayGeometry(M), np.array([0.3]), snr * np.eye(1), 1.0, N)
    dw = np.pi * np.cos(0.3)
    expected = 6.0 / (N * M * (M**2 - 1) * dw**2) * (1 + 1 / (M * snr)) / snr
    assert stochastic_crb(sc)[0, 0] == pytest.approx(expected, rel=1e-10)


def test_single_source_mse_above_crb():
    sc = SourceScenario(ArrayGeometry(10), np.array([np.deg2rad(35.0)]), 100.0 * np.eye(1), 1.0, 10)
    err = []
    for t in range(10_000):
        est, _ = root_music(sample_covariance(generate_snapshots(sc, [12, t])), 1, sc.geometry)
        err.append(squared_error(est, sc.doas))
    assert np.mean(err) >= np.trace(stochastic_crb(sc))


def _rec(err, resolved, leak2=math.nan):
    return TrialRecord(err, resolved, False, False, 0.1, leak2)


def test_all_resolved_cmse_equals_mse():
    row = compute_metrics([_rec(0.1, True), _rec(0.3, True)])
    assert row["cmse"] == row["mse"] == pytest.approx(0.2)


def test_nothing_resolved():
    row = compute_metrics([_rec(0.1, False), _rec(0.3, False)])
    assert math.isnan(row["cmse"])
    assert row["resolution_prob"] == 0.0


def test_hand_computed_records():
    recs = [
        TrialRecord(0.01, True, False, False, 0.10, 0.05),
        TrialRecord(0.04, True, True, False, 0.20, 0.10),
        TrialRecord(1.00, False, True, True, 0.60, 0.50),
        None,
        TrialRecord(0.09, True, False, False, 0.30, 0.20),
        TrialRecord(2.50, False, True, True, 0.80, 0.90),
    ]
    row = compute_metrics(recs, "rm", 3.0, 0.5)
    assert row["trials_used"] == 5
    assert row["mse"] == pytest.approx(3.64 / 5)
    assert row["cmse"] == pytest.approx(0.14 / 3)
    assert row["resolution_prob"] == pytest.approx(0.6)
    assert row["rootswap_prob"] == pytest.approx(0.6)
    assert row["mlfail_prob"] == pytest.approx(0.4)
    assert row["leakage_step1"] == pytest.approx(0.4)
    assert row["leakage_step2"] == pytest.approx(0.35)
    assert row["crb_trace"] == 0.5


def test_empty_records():
    row = compute_metrics([None, None], "rm", 0.0)
    assert row["trials_used"] == 0 and math.isnan(row["mse"])


def test_resolution_at_top_of_grid():
    # top of the documented default grid -5:1:20
    cfg = ExperimentConfig(snr_db=(20.0,), trials=1000, methods=("rm", "urm", "urm+2step", "rsurm", "rsurm+pnr"), seed=42)
    for row in run_monte_carlo(cfg).rows:
        assert row["resolution_prob"] >= 0.99, row["method"]
