"""A stochastic neuron under a large signal spikes almost periodically.

Prints the interspike statistics, the regularity verdict and where the
output process settles compared with its geometric-series benchmarks.
"""

import numpy as np

from hhcircuit.neuron import NoiseParams, output_path, simulate_neuron
from hhcircuit.regimes import classify_regular
from hhcircuit.statistics import interspike_intervals

params = NoiseParams(theta=10.0, tau=0.7, sigma=0.83666)
run = simulate_neuron(params, t_end=500.0, seed=1, burn_in=100.0, record_every=None)
isis = interspike_intervals(run.train)
verdict = classify_regular(run.train, 500.0, c1=0.02)
path = output_path(run.train, 0.02)

print(f"{len(run.train)} spikes, ISI range [{isis.min():.2f}, {isis.max():.2f}], median {verdict.median:.3f}")
print(f"quantile ratios r05={verdict.r05:.4f} r10={verdict.r10:.4f} r25={verdict.r25:.4f}")
print(f"regular: {verdict.regular}")
print(f"benchmarks u2={verdict.u2:.3f} u1={verdict.u1:.3f}")
print(f"late output peaks {np.mean(path.after_spike[-10:]):.3f}, troughs {np.mean(path.before_spike[-10:]):.3f}")
