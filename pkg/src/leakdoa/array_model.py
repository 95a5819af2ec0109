"""
Ground-truth model of a uniform linear array (ULA).

Steering vectors, the exact data covariance, its eigen-structure and
synthetic complex Gaussian snapshots. All angles are in radians.

The steering vector convention is

    a(theta)[m] = exp(-j * omega * m),   omega = 2*pi*(d/lambda)*sin(theta)

so that ``z = exp(j*omega)`` is a root of the noiseless root-MUSIC
polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateModelError


@dataclass(frozen=True)
class ArrayGeometry:
    """ULA with ``num_sensors`` elements spaced ``spacing_ratio`` wavelengths apart."""

    num_sensors: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if int(self.num_sensors) != self.num_sensors or self.num_sensors < 2:
            raise ValueError(f"num_sensors must be an integer >= 2, got {self.num_sensors}")
        if not 0.0 < self.spacing_ratio <= 0.5:
            raise ValueError(f"spacing_ratio must lie in (0, 0.5], got {self.spacing_ratio}")

    def omega(self, theta):
        """Electrical angle ``2*pi*(d/lambda)*sin(theta)``."""
        return 2.0 * np.pi * self.spacing_ratio * np.sin(theta)


@dataclass(frozen=True)
class SourceScenario:
    """Narrowband far-field sources seen by an :class:`ArrayGeometry`.

    Parameters
    ----------
    geometry : ArrayGeometry
    doas : sequence of float
        Strictly ascending source directions in radians.
    source_covariance : (K, K) complex array
        Hermitian PSD covariance of the source amplitudes.
    noise_power : float
        White noise variance per sensor (0 gives noiseless data).
    num_snapshots : int
    """

    geometry: ArrayGeometry
    doas: np.ndarray
    source_covariance: np.ndarray
    noise_power: float
    num_snapshots: int

    def __post_init__(self):
        doas = np.asarray(self.doas, dtype=float).reshape(-1)
        S = np.atleast_2d(np.asarray(self.source_covariance, dtype=complex))
        object.__setattr__(self, "doas", doas)
        object.__setattr__(self, "source_covariance", S)
        K = doas.size
        M = self.geometry.num_sensors
        if K < 1 or K >= M:
            raise ValueError(f"need 1 <= K < M, got K={K}, M={M}")
        if np.any(np.abs(doas) > np.pi / 2):
            raise ValueError("DOAs must lie in [-pi/2, pi/2]")
        if np.any(np.diff(doas) <= 0):
            raise ValueError("DOAs must be strictly ascending")
        if S.shape != (K, K):
            raise ValueError(f"source covariance must be {K}x{K}, got {S.shape}")
        if np.max(np.abs(S - S.conj().T), initial=0.0) > 1e-12:
            raise ValueError("source covariance is not Hermitian")
        if np.linalg.eigvalsh(S).min() < -1e-12:
            raise ValueError("source covariance is not positive semidefinite")
        # zero noise is allowed for noiseless fixtures
        if not self.noise_power >= 0:
            raise ValueError("noise_power must be non-negative")
        if int(self.num_snapshots) != self.num_snapshots or self.num_snapshots < 1:
            raise ValueError("num_snapshots must be a positive integer")

    @property
    def num_sources(self) -> int:
        return self.doas.size

    @property
    def omegas(self) -> np.ndarray:
        return self.geometry.omega(self.doas)


def two_source_covariance(source_power: float, correlation: float) -> np.ndarray:
    """``source_power * [[1, r], [r, 1]]``."""
    if not 0.0 <= correlation <= 1.0:
        raise ValueError("correlation must lie in [0, 1]")
    return source_power * np.array([[1.0, correlation], [correlation, 1.0]], dtype=complex)


def make_scenario(
    snr_db: float,
    doas_deg: Sequence[float] = (35.0, 37.0),
    num_sensors: int = 10,
    spacing_ratio: float = 0.5,
    correlation: float = 0.0,
    num_snapshots: int = 10,
    noise_power: float = 1.0,
) -> SourceScenario:
    """Equal-power sources with a common pairwise correlation coefficient.

    SNR is ``10*log10(source_power / noise_power)``. The defaults are the
    two-source, ten-sensor, ten-snapshot setting used throughout the tests.
    """
    doas = np.deg2rad(np.asarray(doas_deg, dtype=float))
    K = doas.size
    if not 0.0 <= correlation <= 1.0:
        raise ValueError("correlation must lie in [0, 1]")
    source_power = noise_power * 10.0 ** (snr_db / 10.0)
    S = np.full((K, K), correlation, dtype=complex)
    np.fill_diagonal(S, 1.0)
    return SourceScenario(
        geometry=ArrayGeometry(num_sensors, spacing_ratio),
        doas=doas,
        source_covariance=source_power * S,
        noise_power=noise_power,
        num_snapshots=num_snapshots,
    )


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > np.pi / 2):
        raise ValueError("theta must lie in [-pi/2, pi/2]")
    return theta


def steering_vector(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """Array response ``a(theta)``; element 0 is 1."""
    theta = _check_theta(theta)
    m = np.arange(geometry.num_sensors)
    return np.exp(-1j * geometry.omega(theta) * m)


def steering_matrix(geometry: ArrayGeometry, thetas) -> np.ndarray:
    """Vandermonde matrix ``[a(theta_1), ..., a(theta_K)]`` of shape (M, K)."""
    thetas = _check_theta(np.atleast_1d(thetas))
    m = np.arange(geometry.num_sensors)[:, None]
    return np.exp(-1j * m * geometry.omega(thetas)[None, :])


def steering_derivative(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """``a1 = -[0, e^{-jw}, 2e^{-j2w}, ..., (M-1)e^{-j(M-1)w}]``.

    With this sign, ``d a / d omega = j * a1``.
    """
    theta = _check_theta(theta)
    return steering_derivative_omega(geometry.num_sensors, geometry.omega(theta))


def steering_derivative_omega(num_sensors: int, omega: float) -> np.ndarray:
    m = np.arange(num_sensors)
    return -m * np.exp(-1j * omega * m)


def true_covariance(scenario: SourceScenario) -> np.ndarray:
    """``R = A S A^H + sigma_n^2 I``, symmetrized."""
    A = steering_matrix(scenario.geometry, scenario.doas)
    R = A @ scenario.source_covariance @ A.conj().T
    R = R + scenario.noise_power * np.eye(scenario.geometry.num_sensors)
    return 0.5 * (R + R.conj().T)


def _source_factor(S: np.ndarray) -> np.ndarray:
    # Cholesky fails on the r = 1 boundary; fall back to an eigen factor.
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(S)
        if w.min() < -1e-12 * max(1.0, w.max()):
            raise ValueError("source covariance is not positive semidefinite")
        return U * np.sqrt(np.clip(w, 0.0, None))


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_snapshots(scenario: SourceScenario, seed) -> np.ndarray:
    """Draw an (M, N) matrix of snapshots ``x(t) = A s(t) + n(t)``.

    ``s(t) ~ N_C(0, S)`` and ``n(t) ~ N_C(0, sigma_n^2 I)``, independent over
    ``t``. ``seed`` is anything accepted by :func:`numpy.random.default_rng`;
    identical seeds give bit-identical output.
    """
    rng = np.random.default_rng(seed)
    M = scenario.geometry.num_sensors
    K = scenario.num_sources
    N = scenario.num_snapshots
    L = _source_factor(scenario.source_covariance)
    s = L @ _complex_normal(rng, (K, N))
    n = np.sqrt(scenario.noise_power) * _complex_normal(rng, (M, N))
    A = steering_matrix(scenario.geometry, scenario.doas)
    return A @ s + n


@dataclass(frozen=True)
class TrueModel:
    """Exact second-order structure of a :class:`SourceScenario`.

    ``eigenvalues`` are ascending; ``noise_basis`` holds the first ``M-K``
    eigenvectors and ``signal_basis`` the last ``K``. ``v_matrix`` is
    ``R - sigma_n^2 I`` and ``v_pseudoinverse`` its Moore-Penrose inverse.
    ``true_roots`` are the ``M-1`` roots of the exact root-MUSIC polynomial
    on or inside the unit circle, by descending magnitude.
    """

    scenario: SourceScenario
    covariance: np.ndarray
    eigenvalues: np.ndarray
    signal_basis: np.ndarray
    noise_basis: np.ndarray
    signal_projector: np.ndarray
    noise_projector: np.ndarray
    v_matrix: np.ndarray
    v_pseudoinverse: np.ndarray
    true_roots: np.ndarray
    omegas: np.ndarray = field(repr=False)

    @property
    def num_sources(self) -> int:
        return self.scenario.num_sources

    @property
    def noise_power(self) -> float:
        return self.scenario.noise_power

    @property
    def signal_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[-self.num_sources :]

    @property
    def steering(self) -> np.ndarray:
        return steering_matrix(self.scenario.geometry, self.scenario.doas)

    @property
    def steering_derivatives(self) -> np.ndarray:
        """Columns ``a1_k`` for each source (shape (M, K))."""
        M = self.scenario.geometry.num_sensors
        return np.column_stack([steering_derivative_omega(M, w) for w in self.omegas])

    @property
    def signal_roots(self) -> np.ndarray:
        return self.true_roots[: self.num_sources]

    @property
    def noise_roots(self) -> np.ndarray:
        return self.true_roots[self.num_sources :]


def true_subspace_model(scenario: SourceScenario) -> TrueModel:
    # imported here: rootmusic depends on this module for steering vectors
    from .rootmusic import null_spectrum_polynomial, polynomial_roots, select_inside_and_closest

    M = scenario.geometry.num_sensors
    K = scenario.num_sources
    sigma2 = scenario.noise_power
    R = true_covariance(scenario)
    lam, Q = np.linalg.eigh(R)
    gaps = lam[M - K :] - sigma2
    if np.any(gaps <= 1e-9 * max(1.0, sigma2)):
        raise DegenerateModelError(
            f"signal eigenvalues {lam[M - K:]} are not separated from the noise power {sigma2}"
        )
    G = Q[:, : M - K]
    E = Q[:, M - K :]
    P = E @ E.conj().T
    P_perp = G @ G.conj().T
    V = (E * gaps) @ E.conj().T
    V_dag = (E / gaps) @ E.conj().T
    coeffs = null_spectrum_polynomial(G)
    root_set, _ = select_inside_and_closest(polynomial_roots(coeffs), K)
    return TrueModel(
        scenario=scenario,
        covariance=R,
        eigenvalues=lam,
        signal_basis=E,
        noise_basis=G,
        signal_projector=P,
        noise_projector=P_perp,
        v_matrix=V,
        v_pseudoinverse=V_dag,
        true_roots=root_set.roots,
        omegas=scenario.omegas,
    )
