"""Covariance estimation and eigen-subspace extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LeakDoaError


def hermitize(R: np.ndarray) -> np.ndarray:
    return 0.5 * (R + R.conj().T)


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    """``(1/N) sum_t x(t) x(t)^H`` for an (M, N) snapshot matrix."""
    X = np.asarray(snapshots)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("snapshots must be an (M, N) matrix with N >= 1")
    return hermitize(X @ X.conj().T / X.shape[1])


def exchange_matrix(M: int) -> np.ndarray:
    return np.eye(M)[::-1]


def forward_backward_average(R: np.ndarray) -> np.ndarray:
    """``(R + J R^* J) / 2`` with ``J`` the exchange matrix.

    The result is persymmetric; applying the average twice changes nothing.
    """
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("expected a square matrix")
    # J R^* J is an index reversal along both axes
    return hermitize(0.5 * (R + R.conj()[::-1, ::-1]))


def projector(basis: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    """Orthogonal projector ``B B^H`` onto the span of orthonormal columns."""
    B = np.atleast_2d(np.asarray(basis))
    if B.shape[0] < B.shape[1]:
        raise ValueError("basis has more columns than rows")
    gram = B.conj().T @ B
    if np.max(np.abs(gram - np.eye(B.shape[1])), initial=0.0) > atol:
        raise ValueError("basis columns are not orthonormal")
    return hermitize(B @ B.conj().T)


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Eigenvalues (ascending) and the split into noise and signal bases."""

    eigenvalues: np.ndarray
    noise_basis: np.ndarray
    signal_basis: np.ndarray

    @property
    def signal_projector(self) -> np.ndarray:
        return hermitize(self.signal_basis @ self.signal_basis.conj().T)

    @property
    def noise_projector(self) -> np.ndarray:
        return hermitize(self.noise_basis @ self.noise_basis.conj().T)


def eigendecompose(R: np.ndarray, num_sources: int) -> SubspaceDecomposition:
    """Hermitian eigendecomposition split into ``M-K`` noise and ``K`` signal vectors."""
    R = np.asarray(R)
    M = R.shape[0]
    if not 0 < num_sources < M:
        raise ValueError(f"need 0 < K < M, got K={num_sources}, M={M}")
    try:
        lam, Q = np.linalg.eigh(hermitize(R))
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(R) if np.all(np.isfinite(R)) else np.inf
        raise LeakDoaError(f"eigendecomposition failed (cond={cond:.3g})") from exc
    return SubspaceDecomposition(
        eigenvalues=lam,
        noise_basis=Q[:, : M - num_sources],
        signal_basis=Q[:, M - num_sources :],
    )


def noise_power_estimate(R: np.ndarray, num_sources: int) -> float:
    """Mean of the ``M-K`` smallest eigenvalues of ``R``."""
    lam = np.linalg.eigvalsh(hermitize(np.asarray(R)))
    return float(np.mean(lam[: lam.size - num_sources]))
