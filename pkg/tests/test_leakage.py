import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakdoa.array_model import ArrayGeometry, SourceScenario, generate_snapshots, make_scenario, steering_matrix, true_subspace_model
from leakdoa.leakage import (
    empirical_leakage,
    expected_leakage_step1,
    expected_leakage_step2,
    first_order_doa_error,
    leakage_step2_terms,
)
from leakdoa.rootmusic import root_music
from leakdoa.subspace import eigendecompose, hermitize, sample_covariance
from leakdoa.twostep import DEFAULT_GAMMA_GRID, cross_term, modified_covariance

from conftest import DOAS_DEG, random_hermitian, random_unitary


def _paper_model(snr=15.0, r=0.0, N=10):
    base = make_scenario(snr, DOAS_DEG, correlation=r)
    return true_subspace_model(SourceScenario(base.geometry, base.doas, base.source_covariance, 1.0, N))


def test_identical_projectors_leak_nothing(reference_model):
    P = reference_model.signal_projector
    assert empirical_leakage(P, P, 2) == pytest.approx(0.0, abs=1e-12)


def test_projector_inside_noise_subspace_leaks_everything(reference_model):
    m = reference_model
    G = m.noise_basis[:, :2]
    assert empirical_leakage(G @ G.conj().T, m.signal_projector, 2) == pytest.approx(1.0, abs=1e-12)


def test_leakage_equals_noise_energy_of_estimated_vectors(reference_model):
    m = reference_model
    R = sample_covariance(generate_snapshots(m.scenario, 4))
    E_hat = eigendecompose(R, 2).signal_basis
    direct = np.mean([np.linalg.norm(m.noise_projector @ E_hat[:, k]) ** 2 for k in range(2)])
    assert empirical_leakage(E_hat @ E_hat.conj().T, m.signal_projector, 2) == pytest.approx(direct, abs=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_leakage_ignores_basis_rotation(seed):
    rng = np.random.default_rng(seed)
    Q = random_unitary(rng, 6)
    E, F = Q[:, :2], random_unitary(rng, 6)[:, :2]
    U = random_unitary(rng, 2)
    P = E @ E.conj().T
    base = empirical_leakage(F @ F.conj().T, P, 2)
    G = F @ U
    assert empirical_leakage(G @ G.conj().T, P, 2) == pytest.approx(base, abs=1e-12)
    assert 0.0 <= base <= 1.0


def test_rank_mismatch_rejected(reference_model):
    with pytest.raises(ValueError):
        empirical_leakage(np.eye(10), reference_model.signal_projector, 2)


def test_step1_single_source_closed_form():
    for N in (1, 7, 10):
        sc = SourceScenario(ArrayGeometry(2), np.array([0.2]), np.eye(1), 1.0, N)
        assert expected_leakage_step1(true_subspace_model(sc)) == pytest.approx(0.75 / N, rel=1e-14)


def test_step1_inverse_in_snapshots():
    m = _paper_model()
    assert expected_leakage_step1(m, 20) == pytest.approx(expected_leakage_step1(m, 10) / 2, rel=1e-14)


def test_doa_error_of_zero_perturbation(reference_model):
    assert first_order_doa_error(reference_model, np.zeros((10, 10)), 0) == 0.0


def test_doa_error_is_real_for_hermitian_input(reference_model, rng):
    for k in range(2):
        val = first_order_doa_error(reference_model, random_hermitian(rng, 10), k)
        assert isinstance(val, float)


def test_doa_error_rejects_non_hermitian(reference_model, rng):
    with pytest.raises(ValueError):
        first_order_doa_error(reference_model, rng.standard_normal((10, 10)), 0)


def test_doa_error_matches_root_music_at_30db():
    # the linearization is only accurate once the perturbation is small, hence N = 1e5
    m = _paper_model(30.0, N=100_000)
    R = sample_covariance(generate_snapshots(m.scenario, 21))
    est, _ = root_music(R, 2, m.scenario.geometry)
    actual = np.sort(m.scenario.geometry.omega(est.thetas)) - np.sort(m.omegas)
    order = np.argsort(m.omegas)
    predicted = np.array([first_order_doa_error(m, R - m.covariance, k) for k in order])
    # relative to the size of the error vector: one component can land near zero in a given draw
    assert np.max(np.abs(predicted - actual)) <= 0.10 * np.max(np.abs(actual))
    assert np.all(np.sign(predicted) == np.sign(actual))


def test_gamma_one_keeps_only_double_sum(reference_model):
    first, cross, quad = leakage_step2_terms(reference_model)
    assert expected_leakage_step2(reference_model, 1.0) == quad


@given(st.floats(0, 1), st.sampled_from([0.0, 0.9]), st.floats(0, 30))
def test_step2_is_quadratic_in_gamma(g, r, snr):
    m = _paper_model(snr, r)
    gs = np.array([0.0, 0.5, 1.0])
    vals = np.array([expected_leakage_step2(m, x) for x in gs])
    coeffs = np.polyfit(gs, vals, 2)
    assert expected_leakage_step2(m, g) == pytest.approx(np.polyval(coeffs, g), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("snr", [10.0, 15.0, 20.0, 30.0])
@pytest.mark.parametrize("r", [0.0, 0.9])
def test_grid_minimum_beats_step1(snr, r):
    m = _paper_model(snr, r)
    assert min(expected_leakage_step2(m, g) for g in DEFAULT_GAMMA_GRID) < expected_leakage_step1(m)


def _linearized_leakage(model, gamma, draws, eps=1e-4, seed=0):
    """Mean of leakage / eps^2 when the true covariance is perturbed by eps * (R_hat - R)."""
    geom = model.scenario.geometry
    P = model.signal_projector
    out = []
    for t in range(draws):
        dR = sample_covariance(generate_snapshots(model.scenario, np.random.SeedSequence([seed, t]))) - model.covariance
        R = hermitize(model.covariance + eps * dR)
        est, _ = root_music(R, 2, geom)
        C = modified_covariance(R, cross_term(R, steering_matrix(geom, est.thetas)), gamma) if gamma else R
        out.append(empirical_leakage(eigendecompose(C, 2).signal_projector, P, 2) / eps**2)
    return float(np.mean(out))


@pytest.mark.parametrize("r", [0.0, 0.9])
@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0])
def test_closed_forms_match_linearized_monte_carlo(gamma, r):
    m = _paper_model(15.0, r)
    theory = expected_leakage_step2(m, gamma)
    mc = _linearized_leakage(m, gamma, draws=3000, seed=int(10 * gamma + 100 * r))
    assert mc == pytest.approx(theory, rel=0.06)
