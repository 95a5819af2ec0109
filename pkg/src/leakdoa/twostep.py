"""
Two-step root-MUSIC.

Step 1 estimates the DOAs from ``R``. Step 2 rebuilds the steering matrix
from those estimates, estimates the signal/noise cross term
``T = P_A R (I - P_A)`` and re-runs the estimator on
``R - gamma (T + T^H)``; ``gamma`` is picked from a grid by the stochastic
ML criterion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .array_model import ArrayGeometry, steering_matrix
from .errors import IllConditionedError, LeakDoaError
from .rootmusic import DoaEstimate, RootSet, root_music
from .subspace import forward_backward_average, hermitize, sample_covariance

DEFAULT_GAMMA_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
MAX_CONDITION = 1e8
EIG_FLOOR = 1e-300


def _check_conditioning(A: np.ndarray):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(f"steering matrix condition number {cond:.3g} exceeds {MAX_CONDITION:g}")


def ls_source_and_noise(snapshots: np.ndarray, A: np.ndarray):
    """Least-squares source amplitudes ``s(t) = (A^H A)^{-1} A^H x(t)`` and residuals.

    Returns ``(amplitudes, residuals)`` of shapes (K, N) and (M, N).
    """
    X = np.asarray(snapshots)
    _check_conditioning(A)
    s, *_ = np.linalg.lstsq(A, X, rcond=None)
    return s, X - A @ s


def projection_matrix(A: np.ndarray) -> np.ndarray:
    """``A (A^H A)^{-1} A^H`` computed from an orthonormal basis of ``range(A)``."""
    _check_conditioning(A)
    Q, _ = np.linalg.qr(A)
    return hermitize(Q @ Q.conj().T)


def doa_projector(thetas, geometry: ArrayGeometry) -> np.ndarray:
    return projection_matrix(steering_matrix(geometry, thetas))


def cross_term(R: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``T = P_A R (I - P_A)``."""
    P = projection_matrix(A)
    return P @ R @ (np.eye(R.shape[0]) - P)


def modified_covariance(R: np.ndarray, T: np.ndarray, gamma: float) -> np.ndarray:
    """``R - gamma (T + T^H)``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0:
        return np.array(R, copy=True)
    return hermitize(R - gamma * (T + T.conj().T))


def sml_from_projector(R: np.ndarray, P: np.ndarray, num_sources: int) -> float:
    M = R.shape[0]
    P_perp = np.eye(M) - P
    noise = np.real(np.trace(P_perp @ R)) / (M - num_sources)
    arg = hermitize(P @ R @ P + noise * P_perp)
    lam = np.linalg.eigvalsh(arg)
    return float(np.sum(np.log(np.maximum(lam, EIG_FLOOR))))


def sml_objective(R: np.ndarray, thetas, geometry: ArrayGeometry) -> float:
    """Stochastic ML criterion of a candidate DOA set against a covariance ``R``.

    ``ln det(P R P + Tr(P_perp R)/(M-K) P_perp)`` with ``P`` the projector
    onto the span of the candidate steering vectors. The number of sources
    is ``len(thetas)``.
    """
    thetas = np.atleast_1d(thetas)
    return sml_from_projector(np.asarray(R), doa_projector(thetas, geometry), thetas.size)


@dataclass
class TwoStepResult:
    step1: DoaEstimate
    step2: DoaEstimate
    chosen_gamma: float
    sml_values: list
    modified_covariance: np.ndarray
    step1_roots: RootSet
    step2_roots: RootSet
    skipped: list = field(default_factory=list)
    fallback: bool = False


def covariance_for_base(R: np.ndarray, base: str) -> np.ndarray:
    if base == "rm":
        return R
    if base == "urm":
        return forward_backward_average(R)
    raise ValueError(f"unknown base estimator {base!r}; expected 'rm' or 'urm'")


def two_step_from_covariance(
    R: np.ndarray,
    num_sources: int,
    geometry: ArrayGeometry,
    gamma_grid=DEFAULT_GAMMA_GRID,
    base: str = "rm",
    fb_order: str = "pre",
    estimator=None,
) -> TwoStepResult:
    """Two-step estimate from a raw sample covariance ``R``.

    ``base='urm'`` runs the estimator on forward-backward averaged
    covariances. With ``fb_order='pre'`` the average is taken before the
    cross term is estimated and removed; with ``'post'`` the modification is
    applied to the raw ``R`` and the result is averaged afterwards.
    ``estimator(cov, K, geometry) -> (DoaEstimate, RootSet)`` replaces
    conventional root selection (root-swap selection plugs in here).
    Candidate sets are always scored against the raw ``R``.
    """
    gammas = sorted(float(g) for g in gamma_grid)
    if not gammas or gammas[0] != 0.0 or gammas[-1] > 1.0:
        raise ValueError("gamma grid must lie in [0, 1] and contain 0")
    if fb_order not in ("pre", "post"):
        raise ValueError("fb_order must be 'pre' or 'post'")
    if estimator is None:
        estimator = root_music
    R = hermitize(np.asarray(R))

    if fb_order == "pre":
        R_mod = covariance_for_base(R, base)
        finish = lambda C: C  # noqa: E731
    else:
        R_mod = R
        finish = lambda C: covariance_for_base(C, base)  # noqa: E731

    step1, roots1 = estimator(finish(R_mod), num_sources, geometry)

    try:
        T = cross_term(R_mod, steering_matrix(geometry, step1.thetas))
    except IllConditionedError as exc:
        warnings.warn(f"two-step fell back to step 1: {exc}", RuntimeWarning, stacklevel=2)
        return TwoStepResult(step1, step1, 0.0, [], finish(R_mod), roots1, roots1, fallback=True)

    best = None
    sml_values = []
    skipped = []
    for gamma in gammas:
        C = finish(modified_covariance(R_mod, T, gamma))
        try:
            est, roots = (step1, roots1) if gamma == 0.0 else estimator(C, num_sources, geometry)
            value = sml_objective(R, est.thetas, geometry)
        except LeakDoaError as exc:
            skipped.append((gamma, str(exc)))
            continue
        sml_values.append((gamma, value))
        # strict '<' keeps the smaller gamma on ties
        if best is None or value < best[0]:
            best = (value, gamma, est, roots, C)

    if best is None:
        warnings.warn("two-step: every gamma failed, returning step 1", RuntimeWarning, stacklevel=2)
        return TwoStepResult(step1, step1, 0.0, [], finish(R_mod), roots1, roots1, skipped, fallback=True)
    _, gamma, est, roots, C = best
    return TwoStepResult(step1, est, gamma, sml_values, C, roots1, roots, skipped)


def two_step_estimate(
    snapshots: np.ndarray,
    num_sources: int,
    geometry: ArrayGeometry,
    gamma_grid=DEFAULT_GAMMA_GRID,
    base: str = "rm",
    fb_order: str = "pre",
    estimator=None,
) -> TwoStepResult:
    """Two-step root-MUSIC on an (M, N) snapshot matrix.

    See :func:`two_step_from_covariance`; the cross term
    ``A {(1/N) sum s(t) n(t)^H}`` built from least-squares amplitudes equals
    ``P_A R (I - P_A)``, so only the sample covariance is needed.
    """
    return two_step_from_covariance(
        sample_covariance(snapshots), num_sources, geometry, gamma_grid, base, fb_order, estimator
    )
