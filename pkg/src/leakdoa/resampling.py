"""Pseudo-noise resampling around any snapshot-based DOA estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import ArrayGeometry
from .errors import EstimationError, LeakDoaError
from .subspace import noise_power_estimate, sample_covariance
from .twostep import sml_objective


@dataclass(frozen=True)
class ResamplingConfig:
    """``iterations`` perturbed runs with pseudo-noise of variance ``noise_scale * sigma_hat^2``."""

    iterations: int = 50
    noise_scale: float = 1.0
    seed: int = 0
    include_original: bool = True

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be positive")


@dataclass
class ResamplingResult:
    estimate: object
    sml_value: float
    bank: list
    sml_values: list
    chosen_index: int
    failures: int


def _pseudo_noise(shape, variance, seed, iteration):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), iteration]))
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.sqrt(variance / 2.0) * z


def pseudo_noise_resample_detailed(
    snapshots: np.ndarray,
    num_sources: int,
    geometry: ArrayGeometry,
    estimator,
    config: ResamplingConfig = ResamplingConfig(),
) -> ResamplingResult:
    """Run ``estimator(snapshots) -> DoaEstimate`` on perturbed copies of the data.

    The bank holds the estimate from the original data (unless
    ``include_original`` is False) followed by one estimate per pseudo-noise
    draw. The member with the smallest SML criterion against the original
    sample covariance is returned; ties keep the earlier member.
    """
    X = np.asarray(snapshots)
    R = sample_covariance(X)
    variance = config.noise_scale * max(noise_power_estimate(R, num_sources), 0.0)

    bank = []
    values = []
    failures = 0
    runs = [None] if config.include_original else []
    runs += list(range(config.iterations))
    for it in runs:
        data = X if it is None else X + _pseudo_noise(X.shape, variance, config.seed, it)
        try:
            est = estimator(data)
            value = sml_objective(R, est.thetas, geometry)
        except LeakDoaError:
            failures += 1
            continue
        bank.append(est)
        values.append(value)
    if not bank:
        raise EstimationError("every resampling run failed")
    best = int(np.argmin(values))
    return ResamplingResult(bank[best], values[best], bank, values, best, failures)


def pseudo_noise_resample(snapshots, num_sources, geometry, estimator, config=ResamplingConfig()):
    """Best-SML member of the pseudo-noise estimate bank (a ``DoaEstimate``)."""
    return pseudo_noise_resample_detailed(snapshots, num_sources, geometry, estimator, config).estimate
