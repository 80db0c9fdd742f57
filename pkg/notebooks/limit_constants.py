# coding: utf-8

# # Limiting constants of QuickSelect-type costs
#
# This walk-through evaluates E S, the limit of (expected cost) / n, in three
# independent ways for the symbol-comparison cost on two binary sources.

# In[1]:

import numpy as np

from qscost import (KeyCost, SymbolCost, TruncationPolicy, bernoulli, expected_key_closed,
                    expected_quickrand, expected_S_integral, expected_S_series, sample_S_many,
                    uniform_binary)


# Key comparisons have a closed form, 2 at the extremes and 2(1 + ln 2) at the median.

# In[2]:

for a in (0.0, 0.25, 0.5):
    print(a, expected_key_closed(a), expected_S_integral(uniform_binary(), KeyCost(), a).value)


# Counting symbol comparisons instead, QuickMin on fair bits costs about 5.279 n.

# In[3]:

r = expected_S_series(uniform_binary(), 0.0, tol=1e-4)
print(r.value, "+-", r.error)


# The same number from the integral form and from Monte Carlo draws of S.
# A biased source (P(0) = 0.3) costs more: its keys share longer prefixes.

# In[4]:

rng = np.random.default_rng(0)
for src in (uniform_binary(), bernoulli(0.3)):
    pol = TruncationPolicy.for_cost(SymbolCost(), src, 1e-3)
    s = expected_S_series(src, 0.25, 1e-3)
    i = expected_S_integral(src, SymbolCost(), 0.25, 1e-3)
    v, _, _ = sample_S_many(rng, src, SymbolCost(), 0.25, pol, 20_000)
    print(src.describe(), s.value, i.value, v.mean(), v.std() / np.sqrt(len(v)))


# Averaging over a uniform target gives the slope for random-rank selection:
# 3 for keys and roughly 8.207 for symbols.

# In[5]:

print(expected_quickrand(uniform_binary(), KeyCost()).value)
print(expected_quickrand(uniform_binary(), SymbolCost(), panels=16, order=2, tol=1e-2).value)
