"""
Composite estimators built from the base pieces.

A method name is a ``+``-joined list of tokens:

``rm`` / ``urm``
    root-MUSIC on the sample covariance / on its forward-backward average.
``rsrm`` / ``rsurm``
    the same with root-swap (SML) root selection.
``2step``
    two-step covariance modification on top of the base estimator.
``pnr`` or ``pnr<P>``
    pseudo-noise resampling with ``P`` runs (default taken from settings).

Examples: ``rm``, ``urm+2step``, ``rsurm+pnr``, ``rsurm+2step+pnr50``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_model import ArrayGeometry
from .resampling import ResamplingConfig, pseudo_noise_resample_detailed
from .rootmusic import DoaEstimate, RootSet, root_set_from_covariance, roots_to_doas
from .rootswap import CombinationPlan, candidate_combinations, root_swap_select
from .subspace import sample_covariance
from .twostep import DEFAULT_GAMMA_GRID, covariance_for_base, two_step_from_covariance

BASES = {"rm": ("rm", False), "urm": ("urm", False), "rsrm": ("rm", True), "rsurm": ("urm", True)}


@dataclass(frozen=True)
class MethodSpec:
    base: str = "rm"
    root_swap: bool = False
    two_step: bool = False
    resampling: int = 0

    @classmethod
    def parse(cls, text: str, default_pnr: int = 50) -> "MethodSpec":
        tokens = [t.strip().lower() for t in text.split("+")]
        if not tokens or tokens[0] not in BASES:
            raise ValueError(f"unknown method {text!r}: must start with one of {sorted(BASES)}")
        base, rs = BASES[tokens[0]]
        two_step = False
        pnr = 0
        for tok in tokens[1:]:
            if tok == "2step" and not two_step:
                two_step = True
            elif tok.startswith("pnr") and not pnr:
                digits = tok[3:]
                pnr = int(digits) if digits else default_pnr
                if pnr < 1:
                    raise ValueError(f"resampling count must be positive in {text!r}")
            else:
                raise ValueError(f"bad token {tok!r} in method {text!r}")
        return cls(base, rs, two_step, pnr)

    @property
    def name(self) -> str:
        parts = [("rs" if self.root_swap else "") + self.base]
        if self.two_step:
            parts.append("2step")
        if self.resampling:
            parts.append(f"pnr{self.resampling}")
        return "+".join(parts)


@dataclass(frozen=True)
class MethodSettings:
    """Knobs shared by every method in a run."""

    p: int = 1
    q: int = 0
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    fb_order: str = "pre"
    noise_scale: float = 1.0


@dataclass
class MethodOutput:
    """Final estimate plus the step-1 diagnostics of the unperturbed data."""

    estimate: DoaEstimate
    step1: DoaEstimate
    step1_roots: RootSet
    base_covariance: np.ndarray
    modified_covariance: np.ndarray | None = None
    chosen_gamma: float | None = None
    extras: dict = field(default_factory=dict)


def make_root_estimator(R_raw: np.ndarray, plan: CombinationPlan | None):
    """``(cov, K, geometry) -> (DoaEstimate, RootSet)``; root-swap candidates are scored against ``R_raw``."""

    def estimate(cov, num_sources, geometry):
        roots = root_set_from_covariance(cov, num_sources)
        if plan is None:
            idx = np.arange(num_sources)
            return roots_to_doas(roots.roots[idx], geometry, idx), roots
        est, _ = root_swap_select(R_raw, roots, num_sources, geometry, plan)
        return est, roots

    return estimate


def _single_run(spec: MethodSpec, X, num_sources, geometry, settings: MethodSettings) -> MethodOutput:
    R = sample_covariance(X)
    plan = candidate_combinations(geometry.num_sensors, num_sources, settings.p, settings.q) if spec.root_swap else None
    estimator = make_root_estimator(R, plan)
    Rb = covariance_for_base(R, spec.base)
    if spec.two_step:
        res = two_step_from_covariance(
            R, num_sources, geometry, settings.gamma_grid, spec.base, settings.fb_order, estimator
        )
        return MethodOutput(
            estimate=res.step2,
            step1=res.step1,
            step1_roots=res.step1_roots,
            base_covariance=Rb,
            modified_covariance=res.modified_covariance,
            chosen_gamma=res.chosen_gamma,
            extras={"sml_values": res.sml_values, "fallback": res.fallback},
        )
    est, roots = estimator(Rb, num_sources, geometry)
    return MethodOutput(estimate=est, step1=est, step1_roots=roots, base_covariance=Rb)


def run_method(
    spec: MethodSpec,
    snapshots: np.ndarray,
    num_sources: int,
    geometry: ArrayGeometry,
    settings: MethodSettings = MethodSettings(),
    seed: int = 0,
) -> MethodOutput:
    """Apply a composite method to one (M, N) snapshot matrix.

    ``seed`` only drives the pseudo-noise of resampling methods.
    """
    out = _single_run(spec, snapshots, num_sources, geometry, settings)
    if not spec.resampling:
        return out
    cfg = ResamplingConfig(iterations=spec.resampling, noise_scale=settings.noise_scale, seed=seed)

    def inner(data):
        if data is snapshots:
            return out.estimate
        return _single_run(spec, data, num_sources, geometry, settings).estimate

    res = pseudo_noise_resample_detailed(snapshots, num_sources, geometry, inner, cfg)
    out.extras["resampling_index"] = res.chosen_index
    out.estimate = res.estimate
    return out
