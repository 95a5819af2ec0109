"""
root-MUSIC: null-spectrum polynomial, rooting, root selection and the
map from roots to directions.

The null spectrum of a noise basis ``G`` is ``p(z) = a^T(1/z) G G^H a(z)``
with ``a(z) = [1, 1/z, ..., z^{-(M-1)}]``. After multiplying through by
``z^{M-1}`` it is an ordinary polynomial of degree ``2(M-1)`` whose roots
come in pairs ``(z, 1/conj(z))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_model import ArrayGeometry
from .errors import PolynomialDegreeError, RootPairingError
from .subspace import eigendecompose

UNIT_CIRCLE_TOL = 1e-8
# pairs whose magnitudes differ by less than this are rounding-split double roots
PAIR_MERGE_TOL = 1e-6


@dataclass(frozen=True)
class RootSet:
    """The ``M-1`` roots on or inside the unit circle, by descending magnitude."""

    roots: np.ndarray

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.roots)

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.roots)

    def __len__(self):
        return self.roots.size


@dataclass(frozen=True)
class DoaEstimate:
    """Ascending DOA estimates and the roots they came from.

    ``root_indices`` index into the :class:`RootSet` the roots were picked
    from (``None`` when the estimate was not produced by root selection).
    ``duplicate`` flags two roots that mapped to the same angle.
    """

    thetas: np.ndarray
    source_roots: np.ndarray
    root_indices: tuple | None = None
    duplicate: bool = field(default=False)

    @property
    def degrees(self) -> np.ndarray:
        return np.rad2deg(self.thetas)


def null_spectrum_from_projector(C: np.ndarray) -> np.ndarray:
    """Coefficients (ascending powers of ``z``) of ``z^{M-1} a^T(1/z) C a(z)``.

    The coefficient of ``z^{M-1+l}`` is the sum of the entries ``C[m, n]``
    with ``m - n = l``.
    """
    C = np.asarray(C)
    M = C.shape[0]
    return np.array([np.trace(C, offset=-l) for l in range(-(M - 1), M)])


def null_spectrum_polynomial(noise_basis: np.ndarray) -> np.ndarray:
    """Null-spectrum polynomial of a noise basis, ascending coefficients of length ``2M-1``."""
    G = np.atleast_2d(np.asarray(noise_basis))
    if G.shape[1] == 0 or not np.all(np.isfinite(G)):
        raise ValueError("degenerate noise basis")
    return null_spectrum_from_projector(G @ G.conj().T)


def polyval_ascending(coeffs: np.ndarray, z) -> np.ndarray:
    return np.polynomial.polynomial.polyval(z, coeffs)


def polynomial_roots(coeffs: np.ndarray, residual_tol: float = 1e-6) -> np.ndarray:
    """All roots of the polynomial with ascending coefficients ``coeffs``.

    Roots are the eigenvalues of the companion matrix (LAPACK balances it
    before the QR iteration). Each root is checked against
    ``|p(z)| <= residual_tol * sum_i |c_i| |z|^i``.
    """
    c = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0 or abs(c[-1]) <= 1e-14 * scale:
        raise PolynomialDegreeError("leading coefficient vanishes")
    n = c.size - 1
    companion = np.zeros((n, n), dtype=complex)
    companion[1:, :-1] = np.eye(n - 1)
    companion[:, -1] = -c[:-1] / c[-1]
    roots = np.linalg.eigvals(companion)
    mags = np.abs(roots)
    powers = mags[:, None] ** np.arange(n + 1)[None, :]
    bound = powers @ np.abs(c)
    resid = np.abs(polyval_ascending(c, roots))
    bad = resid > residual_tol * bound
    if np.any(bad):
        raise PolynomialDegreeError(
            f"root residual check failed: max relative residual {np.max(resid / bound):.3g}"
        )
    return roots


def pair_roots(roots: np.ndarray) -> np.ndarray:
    """Keep the inner member of every conjugate-reciprocal pair.

    Near-coincident pairs on the unit circle are merged into their midpoint.

    Greedy pairing: the innermost unpaired root is matched with the
    unpaired root closest to its mirror image ``1/conj(z)``. Pairing,
    rather than a plain ``|z| <= 1`` cut, is robust to rounding that
    pushes both members of a near-circle pair to the same side.
    """
    roots = np.asarray(roots)
    if roots.size % 2:
        raise RootPairingError("odd number of roots")
    remaining = list(roots[np.argsort(np.abs(roots), kind="stable")])
    inside = []
    while remaining:
        z = remaining.pop(0)
        if z == 0:
            raise RootPairingError("root at the origin has no reciprocal partner")
        mirror = 1.0 / np.conj(z)
        j = int(np.argmin([abs(w - mirror) for w in remaining]))
        w = remaining.pop(j)
        lo, hi = sorted((abs(z), abs(w)))
        if hi - lo < PAIR_MERGE_TOL:
            # A double root split by rounding (error ~ sqrt(eps)): its centre
            # is well conditioned, the individual members are not.
            phase = np.angle(z) + 0.5 * np.angle(w * np.conj(z))
            inside.append(min(1.0, 0.5 * (lo + hi)) * np.exp(1j * phase))
        else:
            inside.append(z if abs(z) <= abs(w) else w)
    inside = np.array(inside)
    if np.any(np.abs(inside) > 1.0 + UNIT_CIRCLE_TOL):
        raise RootPairingError("paired root lies outside the unit circle")
    return inside


def select_inside_and_closest(roots: np.ndarray, num_sources: int):
    """Split ``2(M-1)`` roots into the inner :class:`RootSet` and the ``K`` closest to the circle.

    Returns
    -------
    root_set : RootSet
        ``M-1`` inner roots sorted by descending magnitude (ties keep the
        pairing order).
    picks : ndarray
        The first ``num_sources`` entries of ``root_set``.
    """
    inside = pair_roots(roots)
    if num_sources > inside.size:
        raise RootPairingError(f"asked for {num_sources} roots but only {inside.size} are inside")
    order = np.argsort(-np.abs(inside), kind="stable")
    root_set = RootSet(inside[order])
    return root_set, root_set.roots[:num_sources]


def roots_to_doas(roots, geometry: ArrayGeometry, root_indices=None) -> DoaEstimate:
    """``theta = arcsin(clip(angle(z) / (2 pi d/lambda), -1, 1))``, sorted ascending."""
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    s = np.angle(roots) / (2.0 * np.pi * geometry.spacing_ratio)
    thetas = np.arcsin(np.clip(s, -1.0, 1.0))
    order = np.argsort(thetas, kind="stable")
    thetas = thetas[order]
    if root_indices is not None:
        root_indices = tuple(int(root_indices[i]) for i in order)
    return DoaEstimate(
        thetas=thetas,
        source_roots=roots[order],
        root_indices=root_indices,
        duplicate=bool(np.any(np.diff(thetas) == 0)),
    )


def null_spectrum_root_set(coeffs: np.ndarray, num_sources: int) -> RootSet:
    """Inner roots of a null-spectrum polynomial.

    A vanishing outer coefficient pair means a root at the origin paired
    with one at infinity (e.g. an axis-aligned noise basis of a white
    covariance); those are trimmed and reported as roots at zero.
    """
    c = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        raise PolynomialDegreeError("null-spectrum polynomial is identically zero")
    half = (c.size - 1) // 2
    k = 0
    while k < half and abs(c[-1 - k]) <= 1e-14 * scale and abs(c[k]) <= 1e-14 * scale:
        k += 1
    if k == 0:
        return select_inside_and_closest(polynomial_roots(c), num_sources)[0]
    inner = c[k : c.size - k]
    inside = pair_roots(polynomial_roots(inner)) if inner.size > 1 else np.empty(0, dtype=complex)
    inside = np.concatenate([inside, np.zeros(k, dtype=complex)])
    if num_sources > inside.size:
        raise RootPairingError(f"asked for {num_sources} roots but only {inside.size} are inside")
    return RootSet(inside[np.argsort(-np.abs(inside), kind="stable")])


def root_set_from_covariance(R: np.ndarray, num_sources: int) -> RootSet:
    decomp = eigendecompose(R, num_sources)
    return null_spectrum_root_set(null_spectrum_polynomial(decomp.noise_basis), num_sources)


def root_music(R: np.ndarray, num_sources: int, geometry: ArrayGeometry):
    """Conventional root-MUSIC on a covariance matrix.

    Returns
    -------
    estimate : DoaEstimate
    root_set : RootSet
    """
    root_set = root_set_from_covariance(R, num_sources)
    idx = np.arange(num_sources)
    return roots_to_doas(root_set.roots[idx], geometry, idx), root_set
