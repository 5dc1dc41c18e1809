"""
The exploration walk and its compensator
========================================

Every explored vertex adds its number of new children minus one to the walk
Z.  Summing the conditional means gives the drift A, summing conditional
variances gives B.  On the n^{2/3} time scale A should follow the parabola
u t - u^2 sigma3 / (2 mu^2) and B should grow like u sigma3 / mu.
"""
import numpy as np

from rank1crit import DistributionSpec, TiltParams, criticalize, decompose, explore, quantile_weights
from rank1crit.exploration import rescale_walk, walk

n, t = 10**6, 1.0
dist = DistributionSpec.pareto(4, 1)
crit = dist.scaled(dist.critical_scale())
mu, sigma3 = crit.mu, crit.sigma3

ws = criticalize(quantile_weights(dist, n))
tr = explore(ws, TiltParams(t, n), seed=7, surplus=False)
d = decompose(tr)

scale = n ** (2 / 3)
print(f"limit moments of the criticalized law: mu={mu:.4f} sigma3={sigma3:.4f}")
print(" u     A/n^1/3   parabola   B/n^2/3   u*sigma3/mu")
for u in (0.25, 0.5, 1.0, 1.5, 2.0):
    k = int(u * scale)
    if k >= len(d.A):
        break
    parabola = u * t - u**2 * sigma3 / (2 * mu**2)
    print(f"{u:4.2f}  {d.A[k] / n ** (1 / 3):8.4f}  {parabola:8.4f}  {d.B[k] / scale:8.4f}  {u * sigma3 / mu:8.4f}")

s, z, _ = rescale_walk(walk(tr), 3.0)
print(f"rescaled walk: {s.size} points, minimum {z.min():.3f} at s={s[np.argmin(z)]:.3f}")
