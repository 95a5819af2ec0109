"""How often a noise root outranks a signal root, and how often ML selection is fooled.

The analytic approximation treats each signal root's radial error as
Gaussian; it saturates at one well below the threshold.
"""

from leakdoa.experiments import ExperimentConfig, rootswap_curve
from leakdoa.rootswap import candidate_combinations

plan = candidate_combinations(10, 2, p=1, q=0)
print(f"root-swap selection scores {plan.count} candidate root pairs")

config = ExperimentConfig(snr_db=tuple(float(s) for s in range(-4, 17, 4)), trials=300, seed=4)
print(f"{'snr':>5} {'approx':>7} {'swap':>6} {'mlfail':>7}")
for point in rootswap_curve(config):
    print(f"{point.snr_db:5.0f} {point.approx_prob:7.3f} {point.rootswap_prob:6.3f} {point.mlfail_prob:7.3f}")
