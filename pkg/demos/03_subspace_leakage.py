"""Predicted versus measured subspace leakage before and after the covariance fix.

Leakage is the fraction of signal-subspace energy that the estimated
noise subspace absorbs. The prediction is first order in the covariance
error, so agreement improves as the snapshot count grows.
"""

from leakdoa.experiments import ExperimentConfig, leakage_curve

for n in (10, 100):
    config = ExperimentConfig(snr_db=(5.0, 15.0, 25.0), trials=1000, num_snapshots=n, seed=2)
    print(f"N = {n} snapshots, fixed gamma = 0.5")
    print(f"{'snr':>5} {'step1 pred':>11} {'step1 emp':>10} {'step2 pred':>11} {'step2 emp':>10}")
    for snr, rep in leakage_curve(config, gamma="0.5"):
        print(
            f"{snr:5.0f} {rep.theoretical_rho1:11.5f} {rep.empirical_rho1:10.5f}"
            f" {rep.theoretical_rho2:11.5f} {rep.empirical_rho2:10.5f}"
        )
    print()
