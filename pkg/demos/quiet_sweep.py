"""Quiet fraction of a small-signal neuron as the OU back-driving force grows.

Runs a reduced sweep (3 runs per tau) through the experiment runner so the
output directory has the same layout as ``hhcircuit quiet-sweep``.
"""

import sys

from hhcircuit.experiments import ExperimentConfig, format_table, run_experiment

out = sys.argv[1] if len(sys.argv) > 1 else "demo-quiet"
cfg = ExperimentConfig.from_dict({"kind": "quiet-sweep", "seed": 0,
                                  "params": {"taus": [2.0, 2.2, 2.4], "runs": 3}})
result = run_experiment(cfg, out)
for rec in result.records:
    s = rec.stats
    print(f"tau={rec.params['tau']}: N={s['n_spikes']:3d} dDF={s['delta_df']:.4f} "
          f"dLT={s['delta_lt']:.4f} -> {s['branch']}")
print(format_table(result.summary))
