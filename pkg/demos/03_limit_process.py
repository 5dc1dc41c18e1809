"""
Excursions of the limiting process
==================================

Brownian motion with parabolic drift, reflected at its running minimum.
Its excursion lengths, ranked, are the limits of the rescaled cluster sizes.
The second half checks the scaling relation: a (mu, sigma3) process is a
rescaled copy of the standard one at an effective t.
"""
import numpy as np

from rank1crit import LimitParams, extract_excursions, simulate_limit_path
from rank1crit.analysis import ks_two_sample
from rank1crit.limit import limit_excursion_samples, scaling_map

p = LimitParams(mu=1.0, sigma3=1.0, t=0.0, horizon=10.0, dt=1e-4, seed=3)
exc = extract_excursions(simulate_limit_path(p))
top, _ = exc.ranked_lengths.top(5)
print(f"one standard path: {len(exc.intervals)} excursions, top five lengths {np.round(top, 3)}")

mu, sigma3, t = 1.0, 8.0, 0.0
t_eff, size_factor, time_factor = scaling_map(mu, sigma3, t)
print(f"mu={mu} sigma3={sigma3}: t_eff={t_eff}, size factor={size_factor}, time factor={time_factor}")

direct, _ = limit_excursion_samples(mu, sigma3, t, 300, k=1, dt=1e-3, seed=1)
mapped, _ = limit_excursion_samples(mu, sigma3, t, 300, k=1, dt=1e-3, seed=2, via_standard=True)
d, p_value = ks_two_sample(direct[:, 0], mapped[:, 0])
print(f"longest excursion, direct vs mapped from standard: KS={d:.3f} p={p_value:.3f}")
