"""
Deterministic Monte Carlo harness: MSE, conditioned MSE, resolution and
root-event probabilities, leakage curves and the stochastic CRB.

Every trial draws its snapshots from ``SeedSequence([seed, snr_index, t])``
so all methods in a run see the same data, and per-trial records are
reduced in trial order whatever the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .array_model import SourceScenario, TrueModel, generate_snapshots, make_scenario, steering_matrix, true_subspace_model
from .errors import DegenerateModelError, LeakDoaError
from .leakage import LeakageReport, empirical_leakage, expected_leakage_step1, expected_leakage_step2
from .methods import MethodSettings, MethodSpec, run_method
from .rootmusic import RootSet, root_music
from .rootswap import candidate_combinations, root_swap_probability, root_swap_select
from .subspace import eigendecompose, sample_covariance
from .twostep import DEFAULT_GAMMA_GRID, cross_term, modified_covariance, two_step_from_covariance

RESOLUTION_LIMIT = np.deg2rad(1.0)

METRIC_COLUMNS = (
    "method",
    "snr_db",
    "mse",
    "cmse",
    "resolution_prob",
    "rootswap_prob",
    "mlfail_prob",
    "leakage_step1",
    "leakage_step2",
    "crb_trace",
    "trials_used",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Scenario template, SNR grid and method list of a Monte Carlo run.

    Angles are in degrees here; everything downstream uses radians.
    """

    num_sensors: int = 10
    spacing_ratio: float = 0.5
    doas_deg: tuple = (35.0, 37.0)
    correlation: float = 0.0
    num_snapshots: int = 10
    snr_db: tuple = (0.0,)
    trials: int = 100
    methods: tuple = ("rm",)
    seed: int = 0
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    p: int = 1
    q: int = 0
    pnr_iterations: int = 50
    pnr_noise_scale: float = 1.0
    fb_order: str = "pre"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if len(self.snr_db) == 0:
            raise ValueError("SNR grid is empty")
        if not self.methods:
            raise ValueError("no methods given")
        if len(set(self.method_specs)) != len(self.method_specs):
            raise ValueError("duplicate methods")
        candidate_combinations(self.num_sensors, len(self.doas_deg), self.p, self.q)
        if self.fb_order not in ("pre", "post"):
            raise ValueError("fb_order must be 'pre' or 'post'")
        # validates the rest of the scenario template
        self.scenario(self.snr_db[0])

    @property
    def num_sources(self) -> int:
        return len(self.doas_deg)

    @property
    def method_specs(self) -> tuple:
        return tuple(MethodSpec.parse(m, self.pnr_iterations) for m in self.methods)

    @property
    def settings(self) -> MethodSettings:
        return MethodSettings(self.p, self.q, tuple(self.gamma_grid), self.fb_order, self.pnr_noise_scale)

    def scenario(self, snr_db: float) -> SourceScenario:
        return make_scenario(
            snr_db,
            doas_deg=self.doas_deg,
            num_sensors=self.num_sensors,
            spacing_ratio=self.spacing_ratio,
            correlation=self.correlation,
            num_snapshots=self.num_snapshots,
        )


def trial_seed(base_seed: int, snr_index: int, trial: int, stream: int = 0) -> np.random.SeedSequence:
    """Seed of one trial; ``stream`` separates snapshot draws from pseudo-noise."""
    return np.random.SeedSequence([int(base_seed), int(snr_index), int(trial), int(stream)])


def _pnr_seed(base_seed, snr_index, trial) -> int:
    return int(trial_seed(base_seed, snr_index, trial, 1).generate_state(1)[0])


def resolution_event(estimate, true_doas) -> bool:
    """True iff every sorted estimate is strictly within one degree of its sorted true DOA."""
    est = np.sort(np.asarray(getattr(estimate, "thetas", estimate), dtype=float))
    ref = np.sort(np.asarray(true_doas, dtype=float))
    if est.shape != ref.shape:
        raise ValueError("estimate and truth differ in length")
    return bool(np.all(np.abs(est - ref) < RESOLUTION_LIMIT))


def squared_error(estimate, true_doas) -> float:
    est = np.sort(np.asarray(getattr(estimate, "thetas", estimate), dtype=float))
    return float(np.sum((est - np.sort(np.asarray(true_doas, dtype=float))) ** 2))


def match_signal_roots(roots: np.ndarray, true_signal_roots: np.ndarray) -> np.ndarray:
    """Index of the estimated root matched to each true signal root.

    Greedy on complex distance: the closest (true, estimated) pair is fixed
    first, then the closest among the rest, and so on.
    """
    roots = np.asarray(roots)
    truth = np.asarray(true_signal_roots)
    dist = np.abs(truth[:, None] - roots[None, :])
    matched = np.full(truth.size, -1)
    for _ in range(truth.size):
        k, i = np.unravel_index(np.argmin(dist), dist.shape)
        matched[k] = i
        dist[k, :] = np.inf
        dist[:, i] = np.inf
    return matched


def root_events(root_set: RootSet, true_signal_roots, selected) -> tuple:
    """``(root_swap, ml_failure)`` for one trial.

    A root swap is any unmatched root with larger magnitude than some
    matched signal root; an ML failure is a selected root that is not a
    matched signal root.
    """
    matched = match_signal_roots(root_set.roots, true_signal_roots)
    mags = root_set.magnitudes
    others = np.setdiff1d(np.arange(len(root_set)), matched)
    swap = bool(others.size and np.max(mags[others]) > np.min(mags[matched]))
    fail = bool(set(int(i) for i in selected) - set(int(i) for i in matched))
    return swap, fail


def empirical_root_probabilities(records, true_model: TrueModel) -> tuple:
    """Root-swap and ML-failure frequencies over ``(RootSet, selected indices)`` records."""
    records = list(records)
    if not records:
        return math.nan, math.nan
    events = [root_events(rs, true_model.signal_roots, sel) for rs, sel in records]
    swaps = sum(e[0] for e in events)
    fails = sum(e[1] for e in events)
    return swaps / len(events), fails / len(events)


def stochastic_crb(scenario: SourceScenario) -> np.ndarray:
    """Stochastic (unconditional) CRB on the DOAs in radians, a K x K matrix.

    ``sigma^2/(2N) * inv(Re[(D^H P_perp D) * (S A^H R^-1 A S)^T])`` with
    ``D[:, k] = da/dtheta_k`` and ``P_perp`` the projector orthogonal to the
    steering vectors.
    """
    geom = scenario.geometry
    A = steering_matrix(geom, scenario.doas)
    M = geom.num_sensors
    m = np.arange(M)[:, None]
    dw = 2.0 * np.pi * geom.spacing_ratio * np.cos(scenario.doas)[None, :]
    D = -1j * m * A * dw
    Q, _ = np.linalg.qr(A)
    P_perp = np.eye(M) - Q @ Q.conj().T
    S = scenario.source_covariance
    R = A @ S @ A.conj().T + scenario.noise_power * np.eye(M)
    inner = S @ A.conj().T @ np.linalg.solve(R, A @ S)
    F = np.real((D.conj().T @ P_perp @ D) * inner.T)
    F = 0.5 * (F + F.T)
    if np.linalg.cond(F) > 1e14:
        raise DegenerateModelError("Fisher information matrix is singular")
    crb = scenario.noise_power / (2.0 * scenario.num_snapshots) * np.linalg.inv(F)
    return 0.5 * (crb + crb.T)


@dataclass(frozen=True)
class TrialRecord:
    squared_error: float
    resolved: bool
    root_swap: bool
    ml_failure: bool
    leakage_step1: float
    leakage_step2: float


def compute_metrics(records, method: str = "", snr_db: float = math.nan, crb_trace: float = math.nan) -> dict:
    """Reduce trial records (``None`` marks a failed trial) to one table row."""
    ok = [r for r in records if r is not None]
    n = len(ok)
    row = dict.fromkeys(METRIC_COLUMNS, math.nan)
    row.update(method=method, snr_db=float(snr_db), crb_trace=float(crb_trace), trials_used=n)
    if not n:
        return row
    err = np.array([r.squared_error for r in ok])
    resolved = np.array([r.resolved for r in ok])
    row["mse"] = float(np.mean(err))
    row["cmse"] = float(np.mean(err[resolved])) if resolved.any() else math.nan
    row["resolution_prob"] = float(np.mean(resolved))
    row["rootswap_prob"] = float(np.mean([r.root_swap for r in ok]))
    row["mlfail_prob"] = float(np.mean([r.ml_failure for r in ok]))
    row["leakage_step1"] = float(np.mean([r.leakage_step1 for r in ok]))
    leak2 = np.array([r.leakage_step2 for r in ok])
    row["leakage_step2"] = float(np.mean(leak2)) if np.all(np.isfinite(leak2)) else math.nan
    return row


@dataclass
class MetricsTable:
    """Rows keyed by (method, snr_db) with the columns of ``METRIC_COLUMNS``.

    ``records`` maps the same keys to the per-trial records (``None`` for
    failed trials), kept for paired comparisons between methods.
    """

    rows: list = field(default_factory=list)
    records: dict = field(default_factory=dict, repr=False)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r["method"], r["snr_db"]))

    def row(self, method: str, snr_db: float) -> dict:
        for r in self.rows:
            if r["method"] == method and r["snr_db"] == snr_db:
                return r
        raise KeyError((method, snr_db))

    def __len__(self):
        return len(self.rows)


def _evaluate(spec, X, model, config, settings, plan, pnr_seed) -> TrialRecord | None:
    K = config.num_sources
    geom = model.scenario.geometry
    try:
        out = run_method(spec, X, K, geom, settings, pnr_seed)
        R = sample_covariance(X)
        leak1 = empirical_leakage(eigendecompose(out.base_covariance, K).signal_projector, model.signal_projector, K)
        leak2 = math.nan
        if out.modified_covariance is not None:
            leak2 = empirical_leakage(
                eigendecompose(out.modified_covariance, K).signal_projector, model.signal_projector, K
            )
        selected, _ = root_swap_select(R, out.step1_roots, K, geom, plan)
        swap, fail = root_events(out.step1_roots, model.signal_roots, selected.root_indices)
    except LeakDoaError:
        return None
    return TrialRecord(
        squared_error(out.estimate, model.scenario.doas),
        resolution_event(out.estimate, model.scenario.doas),
        swap,
        fail,
        leak1,
        leak2,
    )


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_monte_carlo(config: ExperimentConfig, threads: int = 1) -> MetricsTable:
    """Run every method at every SNR of ``config``.

    Methods are evaluated on identical snapshots per trial. Failed trials
    are dropped and show up as a lower ``trials_used``.
    """
    specs = config.method_specs
    settings = config.settings
    K = config.num_sources
    plan = candidate_combinations(config.num_sensors, K, config.p, config.q)
    table = MetricsTable()
    for si, snr in enumerate(config.snr_db):
        scenario = config.scenario(snr)
        model = true_subspace_model(scenario)
        crb_trace = float(np.trace(stochastic_crb(scenario)))

        def trial(t, scenario=scenario, model=model, si=si):
            X = generate_snapshots(scenario, trial_seed(config.seed, si, t))
            pnr_seed = _pnr_seed(config.seed, si, t)
            return [_evaluate(s, X, model, config, settings, plan, pnr_seed) for s in specs]

        results = _map(trial, range(config.trials), threads)
        for j, spec in enumerate(config.methods):
            records = [r[j] for r in results]
            table.records[(spec, float(snr))] = records
            table.rows.append(compute_metrics(records, spec, snr, crb_trace))
    table.rows = table.sorted_rows()
    return table


def leakage_curve(config: ExperimentConfig, gamma="0.5", threads: int = 1) -> list:
    """Empirical vs predicted leakage of the sample and two-step covariances.

    ``gamma`` is a number in [0, 1] or ``'sml'``; with ``'sml'`` the
    two-step weight is chosen per trial from ``config.gamma_grid``, the
    reported ``gamma`` is the mean choice and no prediction is given for
    step 2. Root-MUSIC on the sample covariance supplies the step-1 DOAs.
    """
    K = config.num_sources
    sml_mode = str(gamma).lower() == "sml"
    g = None if sml_mode else float(gamma)
    reports = []
    for si, snr in enumerate(config.snr_db):
        scenario = config.scenario(snr)
        model = true_subspace_model(scenario)
        geom = scenario.geometry
        P = model.signal_projector

        def trial(t, scenario=scenario, si=si):
            R = sample_covariance(generate_snapshots(scenario, trial_seed(config.seed, si, t)))
            try:
                rho1 = empirical_leakage(eigendecompose(R, K).signal_projector, P, K)
                if sml_mode:
                    res = two_step_from_covariance(R, K, geom, config.gamma_grid)
                    C, used = res.modified_covariance, res.chosen_gamma
                else:
                    est, _ = root_music(R, K, geom)
                    C = modified_covariance(R, cross_term(R, steering_matrix(geom, est.thetas)), g)
                    used = g
                rho2 = empirical_leakage(eigendecompose(C, K).signal_projector, P, K)
            except LeakDoaError:
                return None
            return rho1, rho2, used

        results = [r for r in _map(trial, range(config.trials), threads) if r is not None]
        arr = np.array(results, dtype=float).reshape(-1, 3)
        mean = arr.mean(axis=0) if arr.size else np.full(3, math.nan)
        reports.append(
            (
                float(snr),
                LeakageReport(
                    empirical_rho1=float(mean[0]),
                    empirical_rho2=float(mean[1]),
                    theoretical_rho1=expected_leakage_step1(model),
                    theoretical_rho2=math.nan if sml_mode else expected_leakage_step2(model, g),
                    gamma=float(mean[2]) if sml_mode else g,
                    trials=len(results),
                ),
            )
        )
    return reports


@dataclass(frozen=True)
class RootSwapPoint:
    snr_db: float
    approx_prob: float
    rootswap_prob: float
    mlfail_prob: float
    approximation_ok: bool
    trials: int


def rootswap_curve(config: ExperimentConfig, base: str = "rm", threads: int = 1) -> list:
    """Approximate vs empirical root-swap probability and ML-failure frequency.

    Root events are taken from the roots of the ``base`` covariance
    (``'rm'`` or ``'urm'``) with root-swap selection under ``(p, q)``.
    """
    K = config.num_sources
    plan = candidate_combinations(config.num_sensors, K, config.p, config.q)
    spec = MethodSpec(base=base)
    points = []
    for si, snr in enumerate(config.snr_db):
        scenario = config.scenario(snr)
        model = true_subspace_model(scenario)
        geom = scenario.geometry

        def trial(t, scenario=scenario, si=si):
            X = generate_snapshots(scenario, trial_seed(config.seed, si, t))
            try:
                out = run_method(spec, X, K, geom, config.settings)
                selected, _ = root_swap_select(sample_covariance(X), out.step1_roots, K, geom, plan)
            except LeakDoaError:
                return None
            return out.step1_roots, selected.root_indices

        records = [r for r in _map(trial, range(config.trials), threads) if r is not None]
        swap, fail = empirical_root_probabilities(records, model)
        approx = root_swap_probability(model)
        points.append(RootSwapPoint(float(snr), approx.probability, swap, fail, approx.approximation_ok, len(records)))
    return points


def single_estimate(config: ExperimentConfig, method: str, snr_db: float, seed: int = 0) -> tuple:
    """One draw of snapshots and the full output of one method on it.

    Returns ``(scenario, MethodOutput)``.
    """
    scenario = config.scenario(snr_db)
    X = generate_snapshots(scenario, trial_seed(seed, 0, 0))
    spec = MethodSpec.parse(method, config.pnr_iterations)
    out = run_method(spec, X, config.num_sources, scenario.geometry, config.settings, _pnr_seed(seed, 0, 0))
    return scenario, out


__all__ = [
    "ExperimentConfig",
    "MetricsTable",
    "METRIC_COLUMNS",
    "TrialRecord",
    "RootSwapPoint",
    "compute_metrics",
    "empirical_root_probabilities",
    "leakage_curve",
    "match_signal_roots",
    "resolution_event",
    "root_events",
    "rootswap_curve",
    "run_monte_carlo",
    "single_estimate",
    "squared_error",
    "stochastic_crb",
    "trial_seed",
]
