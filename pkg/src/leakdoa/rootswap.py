"""
Root-swap root-MUSIC and the normal approximation of the root-swap probability.

A root swap happens when an estimated noise root ends up closer to the unit
circle than an estimated signal root, so conventional selection picks the
wrong root. The estimator here instead scores combinations of inner roots
with the stochastic ML criterion.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .array_model import SourceScenario, TrueModel
from .errors import EstimationError, LeakDoaError
from .rootmusic import DoaEstimate, RootSet, roots_to_doas
from .twostep import sml_objective


@dataclass(frozen=True)
class CombinationPlan:
    """Candidate root subsets for root-swap selection.

    Roots are indexed by descending magnitude. The first ``p`` are always
    kept, the innermost ``q`` are never considered, and every
    ``(K-p)``-subset of the rest is a candidate.
    """

    num_sensors: int
    num_sources: int
    p: int
    q: int
    combinations: tuple

    @property
    def count(self) -> int:
        return len(self.combinations)

    @property
    def fixed(self) -> tuple:
        return tuple(range(self.p))

    def candidates(self):
        """Full index tuples, fixed roots first, in enumeration order."""
        for combo in self.combinations:
            yield self.fixed + combo


def combination_count(M: int, K: int, p: int, q: int) -> int:
    """``(M-p-q-1)! / ((K-p)! (M-K-q-1)!)``."""
    return math.factorial(M - p - q - 1) // (math.factorial(K - p) * math.factorial(M - K - q - 1))


def candidate_combinations(M: int, K: int, p: int = 1, q: int = 0) -> CombinationPlan:
    if not (0 <= p <= K and 0 <= q <= M - K - 1 and K - p <= M - p - q - 1):
        raise ValueError(f"infeasible root-swap plan (M={M}, K={K}, p={p}, q={q})")
    middle = range(p, M - 1 - q)
    combos = tuple(itertools.combinations(middle, K - p))
    return CombinationPlan(M, K, p, q, combos)


def root_swap_select(R: np.ndarray, root_set: RootSet, num_sources: int, geometry, plan: CombinationPlan):
    """Score every candidate subset of ``root_set`` and return the best.

    Returns
    -------
    estimate : DoaEstimate
        DOAs of the SML-minimizing candidate; ``root_indices`` record which
        roots were used. Ties keep the earlier candidate, which favours
        roots closer to the unit circle.
    sml_values : list of float
        Criterion per candidate (``nan`` where a candidate failed).
    """
    if plan.num_sources != num_sources or plan.num_sensors != len(root_set) + 1:
        raise ValueError("combination plan does not match the root set")
    best = None
    values = []
    failures = []
    for idx in plan.candidates():
        est = roots_to_doas(root_set.roots[list(idx)], geometry, idx)
        try:
            value = sml_objective(R, est.thetas, geometry)
        except LeakDoaError as exc:
            values.append(np.nan)
            failures.append((idx, str(exc)))
            continue
        values.append(value)
        if best is None or value < best[0]:
            best = (value, est)
    if best is None:
        raise EstimationError(f"every root combination failed: {failures}")
    return best[1], values


def root_swap_estimate(R, root_set: RootSet, num_sources: int, geometry, plan: CombinationPlan) -> DoaEstimate:
    """DOAs from the SML-best combination of roots, scored against ``R``."""
    return root_swap_select(R, root_set, num_sources, geometry, plan)[0]


def q_function(x):
    """Standard normal tail probability ``Q(x) = erfc(x / sqrt 2) / 2``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass(frozen=True)
class RootSwapProbabilityReport:
    sigma2: np.ndarray
    noise_root_magnitudes: np.ndarray
    probability: float
    approximation_ok: bool


def signal_root_spread(model: TrueModel) -> np.ndarray:
    """Per-source ``sigma_k^2`` of the signal-root magnitude perturbation.

    ``sigma_n^2 / (N a1_k^H P_perp a1_k) * sum_i lam_i/(lam_i - sigma_n^2)^2 |e_i^H a_k|^2``
    where ``i`` runs over the signal eigenpairs.
    """
    sc = model.scenario
    sigma2 = sc.noise_power
    lam = model.signal_eigenvalues
    weights = lam / (lam - sigma2) ** 2
    A = model.steering
    A1 = model.steering_derivatives
    Pp = model.noise_projector
    out = np.empty(sc.num_sources)
    for k in range(sc.num_sources):
        denom = np.real(A1[:, k].conj() @ Pp @ A1[:, k])
        proj = np.abs(model.signal_basis.conj().T @ A[:, k]) ** 2
        out[k] = sigma2 / (sc.num_snapshots * denom) * np.sum(weights * proj)
    return out


def _same_scenario(a: SourceScenario, b: SourceScenario) -> bool:
    return (
        a.geometry == b.geometry
        and a.num_snapshots == b.num_snapshots
        and a.noise_power == b.noise_power
        and np.array_equal(a.doas, b.doas)
        and np.array_equal(a.source_covariance, b.source_covariance)
    )


def root_swap_probability(model: TrueModel, scenario: SourceScenario | None = None) -> RootSwapProbabilityReport:
    """Normal approximation of the probability of at least one root swap.

    ``1 - prod_k prod_m Q((r_m - 1 + sigma_k sqrt(M-K-3/4)) / (sigma_k/2))``,
    treating the (signal, noise) pair events as independent and neglecting
    the perturbation of the noise roots. The approximation assumes
    ``M - K >> 1``; ``approximation_ok`` is False when ``M - K < 4``.
    """
    if scenario is not None and not _same_scenario(scenario, model.scenario):
        raise ValueError("scenario does not match the model")
    sc = model.scenario
    M = sc.geometry.num_sensors
    K = sc.num_sources
    sigma2 = signal_root_spread(model)
    r = np.abs(model.noise_roots)
    prob = swap_probability_from_spread(sigma2, r, M, K)
    return RootSwapProbabilityReport(sigma2, r, prob, M - K >= 4)


def swap_probability_from_spread(sigma2, noise_root_magnitudes, num_sensors: int, num_sources: int) -> float:
    """``1 - prod_k prod_m Q((r_m - 1 + sigma_k sqrt(M-K-3/4)) / (sigma_k/2))``.

    ``sigma2`` holds the per-source variances, ``noise_root_magnitudes``
    the ``r_m``.
    """
    sigma = np.sqrt(np.asarray(sigma2, dtype=float))
    r = np.asarray(noise_root_magnitudes, dtype=float)
    shift = np.sqrt(num_sensors - num_sources - 0.75)
    with np.errstate(divide="ignore", invalid="ignore"):
        args = (r[None, :] - 1.0 + sigma[:, None] * shift) / (sigma[:, None] / 2.0)
    # sigma -> 0 sends every argument to -inf (no swap possible)
    args = np.where(sigma[:, None] > 0, args, -np.inf)
    keep = float(np.prod(q_function(args)))
    return min(1.0, max(0.0, 1.0 - keep))
