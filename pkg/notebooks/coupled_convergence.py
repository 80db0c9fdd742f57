# coding: utf-8

# # Watching S_n / n settle on S
#
# Each replication uses one stream of seeds.  QuickVal and QuickQuant run on
# growing prefixes of it, and S is summed along the pivots the stream itself
# produces, so the three numbers are coupled path by path.

# In[1]:

import numpy as np

from qscost import KeyCost, SymbolCost, uniform_binary
from qscost.harness import ExperimentConfig, convergence_experiment, coupled_runs


# One path, key comparisons, median target.

# In[2]:

r = coupled_runs(1, 0, uniform_binary(), KeyCost(), 0.5, [64, 256, 1024, 4096])
print("S =", r.limit)
for n, v, q in zip(r.n, r.quickval, r.quickquant):
    print(n, v, q)


# Mean absolute deviations over 50 replications shrink with n for both algorithms.

# In[3]:

cfg = ExperimentConfig(cost="symbol", alpha=0.5, n_grid=[64, 256, 1024, 4096], reps=50,
                       p_values=[1.0], delta=1e-4)
rep = convergence_experiment(cfg)
for algo in ("quickval", "quickquant"):
    print(algo, np.round(rep.estimates(algo, 1.0), 4))
print("KS at the largest n:", rep.ks)
