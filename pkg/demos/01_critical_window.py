"""
Largest clusters across the critical window
===========================================

Pareto(4) weights are rescaled so that nu_n = 1, then the graph is explored
at a few values of the tilt parameter t.  The top cluster sizes, divided by
n^{2/3}, stay of order one for every fixed t and grow with t.
"""
import numpy as np

from rank1crit import DistributionSpec, TiltParams, component_sizes, criticalize, explore, quantile_weights
from rank1crit.analysis import rescaled_sizes

n = 200_000
ws = criticalize(quantile_weights(DistributionSpec.pareto(4, 1), n))
print(f"n={n}  nu_n={ws.nu_n:.6f}  max weight={ws.w.max():.2f}")

# a few replicas per t, same seeds across t so the trend is easy to see
for t in (-2.0, -1.0, 0.0, 1.0, 2.0):
    tops = []
    for seed in range(10):
        tr = explore(ws, TiltParams(t, n), seed, surplus=False, log_power_sums=False)
        tops.append(rescaled_sizes(component_sizes(tr), n).top(3)[0])
    tops = np.mean(tops, axis=0)
    print(f"t={t:+.0f}  mean n^-2/3 * (C1, C2, C3) = {np.round(tops, 3)}")
