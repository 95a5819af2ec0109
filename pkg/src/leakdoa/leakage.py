"""
Subspace leakage: the share of estimated signal-subspace energy that falls
into the true noise subspace, ``rho = 1 - Tr(P_hat P) / K``.

Besides the empirical measure, this module evaluates the first-order
predictions of the expected leakage for the sample covariance (step 1) and
for the two-step modified covariance at a fixed ``gamma`` (step 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import TrueModel
from .errors import DegenerateModelError


@dataclass(frozen=True)
class LeakageReport:
    empirical_rho1: float
    empirical_rho2: float
    theoretical_rho1: float
    theoretical_rho2: float
    gamma: float
    trials: int


def empirical_leakage(P_hat: np.ndarray, P: np.ndarray, num_sources: int) -> float:
    """``1 - Tr(P_hat P) / K`` clipped to [0, 1]."""
    rank_hat = np.real(np.trace(P_hat))
    rank = np.real(np.trace(P))
    if abs(rank_hat - num_sources) > 1e-6 or abs(rank - num_sources) > 1e-6:
        raise ValueError(f"projector ranks {rank_hat:.6g}, {rank:.6g} do not match K={num_sources}")
    rho = 1.0 - np.real(np.sum(P_hat * P.T)) / num_sources
    return float(min(1.0, max(0.0, rho)))


def _signal_gaps(model: TrueModel) -> np.ndarray:
    gaps = model.signal_eigenvalues - model.noise_power
    if np.any(gaps <= 1e-9 * max(1.0, model.noise_power)):
        raise DegenerateModelError("signal eigenvalue coincides with the noise power")
    return gaps


def expected_leakage_step1(model: TrueModel, num_snapshots: int | None = None) -> float:
    """``sigma^2 (M-K) / (N K) * sum_k lam_k / (lam_k - sigma^2)^2`` over signal eigenvalues."""
    N = model.scenario.num_snapshots if num_snapshots is None else num_snapshots
    M = model.scenario.geometry.num_sensors
    K = model.num_sources
    sigma2 = model.noise_power
    lam = model.signal_eigenvalues
    gaps = _signal_gaps(model)
    return float(sigma2 * (M - K) / (N * K) * np.sum(lam / gaps**2))


def _a1_noise_norms(model: TrueModel) -> np.ndarray:
    A1 = model.steering_derivatives
    return np.real(np.einsum("mk,mn,nk->k", A1.conj(), model.noise_projector, A1))


def first_order_doa_error(model: TrueModel, delta_R: np.ndarray, k: int) -> float:
    """First-order error of the ``k``-th electrical angle caused by ``delta_R``.

    ``(a1^H P_perp dR V+ a - a^H V+ dR P_perp a1) / (2j a1^H P_perp a1)``,
    which is real for Hermitian ``dR``.
    """
    dR = np.asarray(delta_R)
    if np.max(np.abs(dR - dR.conj().T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(dR), initial=0.0)):
        raise ValueError("delta_R must be Hermitian")
    a = model.steering[:, k]
    a1 = model.steering_derivatives[:, k]
    Pp = model.noise_projector
    Vd = model.v_pseudoinverse
    num = a1.conj() @ Pp @ dR @ Vd @ a - a.conj() @ Vd @ dR @ Pp @ a1
    val = num / (2j * np.real(a1.conj() @ Pp @ a1))
    scale = max(abs(val), 1e-300)
    if abs(val.imag) > 1e-8 * scale + 1e-14:
        raise ValueError(f"first-order error has imaginary residue {val.imag:.3g}")
    return float(val.real)


def steering_omega_derivatives(model: TrueModel) -> list:
    """``dA/d omega_k`` for each k: an (M, K) matrix with ``j a1_k`` in column k."""
    M = model.scenario.geometry.num_sensors
    K = model.num_sources
    A1 = model.steering_derivatives
    out = []
    for k in range(K):
        D = np.zeros((M, K), dtype=complex)
        D[:, k] = 1j * A1[:, k]
        out.append(D)
    return out


def leakage_step2_terms(model: TrueModel, num_snapshots: int | None = None):
    """The three gamma-independent pieces of the step-2 expectation.

    ``E{rho2} = (1-g)^2 * first + 2 (g - g^2) * cross + g^2 * quad``.
    """
    N = model.scenario.num_snapshots if num_snapshots is None else num_snapshots
    K = model.num_sources
    sigma2 = model.noise_power
    _signal_gaps(model)
    A = model.steering
    A1 = model.steering_derivatives
    Pp = model.noise_projector
    R = model.covariance
    Vd = model.v_pseudoinverse
    W = Vd @ R @ Vd
    gram_inv = np.linalg.inv(A.conj().T @ A)
    pinv_rows = gram_inv @ A.conj().T
    dA = steering_omega_derivatives(model)
    d = _a1_noise_norms(model)

    first = expected_leakage_step1(model, N)

    cross = 0.0 + 0.0j
    for k in range(K):
        a_k = A[:, k]
        cross += (A1[:, k].conj() @ Pp @ dA[k] @ pinv_rows @ W @ a_k) / (2j * d[k])
    cross = sigma2 / (N * K) * cross.real

    quad = 0.0
    for k in range(K):
        for i in range(K):
            tr = np.trace(dA[k].conj().T @ Pp @ dA[i] @ gram_inv)
            coupling = A[:, i].conj() @ W @ A[:, k] * (A1[:, k].conj() @ Pp @ A1[:, i])
            val = tr / (d[k] * d[i]) * coupling.real
            quad += val.real
    quad = sigma2 / (2.0 * N * K) * quad
    return first, float(cross), float(quad)


def expected_leakage_step2(model: TrueModel, gamma: float, num_snapshots: int | None = None) -> float:
    """First-order expected leakage of the two-step covariance at a fixed ``gamma``."""
    first, cross, quad = leakage_step2_terms(model, num_snapshots)
    g = float(gamma)
    return float((1.0 - 2.0 * g + g * g) * first + 2.0 * (g - g * g) * cross + g * g * quad)
