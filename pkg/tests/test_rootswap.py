import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakdoa.array_model import SourceScenario, generate_snapshots, make_scenario, true_subspace_model
from leakdoa.experiments import resolution_event
from leakdoa.rootmusic import root_music
from leakdoa.rootswap import (
    candidate_combinations,
    combination_count,
    q_function,
    root_swap_estimate,
    root_swap_probability,
    root_swap_select,
    swap_probability_from_spread,
)
from leakdoa.subspace import sample_covariance
from leakdoa.twostep import sml_objective

from conftest import DOAS_DEG


def test_paper_operating_point_count():
    assert candidate_combinations(10, 2, 1, 0).count == 8


def test_unconstrained_count():
    assert candidate_combinations(10, 2, 0, 0).count == math.comb(9, 2) == 36


def test_all_fixed_single_combination():
    plan = candidate_combinations(10, 2, 2, 0)
    assert plan.count == 1 == combination_count(10, 2, 2, 0)
    assert list(plan.candidates()) == [(0, 1)]


def test_infeasible_plan():
    with pytest.raises(ValueError):
        candidate_combinations(5, 2, 0, 3)


def _cov(snr, seed, N=10):
    base = make_scenario(snr, DOAS_DEG)
    sc = SourceScenario(base.geometry, base.doas, base.source_covariance, 1.0, N)
    return sc, sample_covariance(generate_snapshots(sc, seed))


def test_single_candidate_is_conventional():
    sc, R = _cov(5.0, 1)
    conv, roots = root_music(R, 2, sc.geometry)
    est = root_swap_estimate(R, roots, 2, sc.geometry, candidate_combinations(10, 2, 2, 0))
    np.testing.assert_array_equal(est.thetas, conv.thetas)


def test_noiseless_selection_is_conventional(reference_model):
    m = reference_model
    conv, roots = root_music(m.covariance, 2, m.scenario.geometry)
    est = root_swap_estimate(m.covariance, roots, 2, m.scenario.geometry, candidate_combinations(10, 2))
    np.testing.assert_array_equal(est.thetas, conv.thetas)


@given(st.integers(0, 10_000), st.sampled_from([(1, 0), (0, 0), (1, 2), (2, 0)]))
def test_selection_never_worse_than_conventional(seed, pq):
    sc, R = _cov(3.0, seed)
    conv, roots = root_music(R, 2, sc.geometry)
    est, values = root_swap_select(R, roots, 2, sc.geometry, candidate_combinations(10, 2, *pq))
    # conventional picks (0, 1) are always a candidate for these plans
    assert sml_objective(R, est.thetas, sc.geometry) <= sml_objective(R, conv.thetas, sc.geometry) + 1e-12
    assert min(values) == pytest.approx(sml_objective(R, est.thetas, sc.geometry), abs=1e-12)


def test_root_swap_resolves_at_least_as_often_at_0db():
    conv_hits = swap_hits = 0
    plan = candidate_combinations(10, 2)
    for t in range(1000):
        sc, R = _cov(0.0, np.random.SeedSequence([5, t]))
        conv, roots = root_music(R, 2, sc.geometry)
        est = root_swap_estimate(R, roots, 2, sc.geometry, plan)
        conv_hits += resolution_event(conv, sc.doas)
        swap_hits += resolution_event(est, sc.doas)
    assert swap_hits >= conv_hits


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert abs(q_function(-40.0) - 1.0) <= 1e-15
    assert abs(q_function(1.6449) - 0.05) <= 1e-4


def test_q_function_tail_against_erfc_series():
    # Mills-ratio asymptote Q(x) ~ phi(x)/x (1 - 1/x^2 + 3/x^4)
    x = 8.0
    approx = np.exp(-x * x / 2) / (x * np.sqrt(2 * np.pi)) * (1 - 1 / x**2 + 3 / x**4)
    assert q_function(x) == pytest.approx(approx, rel=1e-3)


def test_near_noiseless_probability_vanishes():
    model = true_subspace_model(make_scenario(60.0, DOAS_DEG))
    assert root_swap_probability(model).probability <= 1e-6


def test_noise_root_on_circle():
    p = swap_probability_from_spread([0.01], [1.0], 10, 2)
    q = q_function(2 * np.sqrt(7.25))
    assert q == pytest.approx(3.6e-8, rel=0.05)
    assert p == pytest.approx(1 - q, abs=1e-15)


def test_probability_non_increasing_in_snr():
    probs = [root_swap_probability(true_subspace_model(make_scenario(s, DOAS_DEG))).probability for s in range(-5, 16)]
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert all(b <= a for a, b in zip(probs, probs[1:]))


@given(st.floats(-5, 25), st.sampled_from([0.0, 0.5, 0.9]))
def test_more_snapshots_lower_probability(snr, r):
    probs = []
    for N in (10, 40):
        base = make_scenario(snr, DOAS_DEG, correlation=r)
        sc = SourceScenario(base.geometry, base.doas, base.source_covariance, 1.0, N)
        probs.append(root_swap_probability(true_subspace_model(sc)).probability)
    assert 0.0 <= probs[1] <= probs[0] <= 1.0


def test_approximation_flag():
    small = make_scenario(10.0, (0.0, 20.0), num_sensors=5)
    assert not root_swap_probability(true_subspace_model(small)).approximation_ok
    assert root_swap_probability(true_subspace_model(make_scenario(10.0))).approximation_ok


def test_mismatched_scenario_rejected():
    model = true_subspace_model(make_scenario(10.0))
    with pytest.raises(ValueError):
        root_swap_probability(model, make_scenario(11.0))
