"""The limiting diffusion and its ranked excursion lengths.

The process is ``W(s) = sqrt(sigma3/mu) B(s) + s t - s^2 sigma3 / (2 mu^2)``,
simulated by Euler-Maruyama on a uniform grid, reflected at its running
minimum, and cut into excursions away from zero.  Normals come from numpy's
``Generator.standard_normal`` (ziggurat) on a PCG64 stream seeded per path,
so every path is reproducible from its seed alone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import RankedSizes
from .seeding import derive_seed, rng_for


@dataclass(frozen=True)
class LimitParams:
    mu: float
    sigma3: float
    t: float = 0.0
    horizon: float = 10.0
    dt: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not (self.mu > 0 and self.sigma3 > 0):
            raise ValueError("mu and sigma3 must be positive")
        if not (self.horizon > 0 and self.dt > 0):
            raise ValueError("horizon and dt must be positive")
        if self.dt > self.horizon / 100 * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} must be at most horizon/100={self.horizon / 100}")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True, eq=False)
class LimitPath:
    grid: np.ndarray
    w: np.ndarray
    reflected: np.ndarray
    running_min: np.ndarray
    params: LimitParams

    def to_csv(self, path):
        data = np.column_stack((self.grid, self.w, self.reflected))
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header="s,w,reflected", comments="")


@dataclass(frozen=True, eq=False)
class ExcursionSet:
    intervals: np.ndarray  # (k, 2) start, end in time order
    truncated: np.ndarray  # per interval: runs into the horizon
    ranked_lengths: RankedSizes

    @property
    def truncated_count(self):
        return int(np.count_nonzero(self.truncated))

    def to_json(self):
        return {
            "intervals": self.intervals.tolist(),
            "lengths": self.ranked_lengths.sizes.tolist(),
            "truncated_count": self.truncated_count,
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")


def simulate_limit_path(p, noise=True):
    """Euler-Maruyama path of the drifted Brownian motion on ``s_k = k dt``.

    ``noise=False`` zeroes the Gaussian increments (drift-only path).
    """
    k = p.steps
    dt = p.dt
    s = np.arange(k + 1) * dt
    drift = (p.t - s[:-1] * p.sigma3 / p.mu**2) * dt
    incr = drift
    if noise:
        g = rng_for(p.seed).standard_normal(k)
        incr = drift + np.sqrt(p.sigma3 / p.mu) * np.sqrt(dt) * g
    w = np.concatenate(([0.0], np.cumsum(incr)))
    running_min = np.minimum.accumulate(w)
    return LimitPath(s, w, w - running_min, running_min, p)


def reflect(values):
    """``x - min_{j <= k} x_j``, pointwise."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("reflect needs a non-empty path")
    return x - np.minimum.accumulate(x)


def extract_excursions(path, zero_tol=0.0, refine=False):
    """Maximal grid intervals on which the reflected path exceeds ``zero_tol``.

    An excursion runs from the last grid point at zero before it turns
    positive to the first grid point at zero afterwards.  One that is still
    open at the horizon ends there and is flagged as truncated.

    ``refine=True`` (needs a ``LimitPath``) moves each closing end back to
    the linearly interpolated time at which the path crosses its previous
    running minimum.
    """
    r = path.reflected if isinstance(path, LimitPath) else np.asarray(path, dtype=float)
    grid = path.grid if isinstance(path, LimitPath) else np.arange(r.size, dtype=float)
    pos = r > zero_tol
    if not pos.any():
        empty = np.empty((0, 2))
        return ExcursionSet(empty, np.zeros(0, dtype=bool), RankedSizes(np.zeros(0)))
    edges = np.diff(pos.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1  # first index back at zero
    if pos[0]:
        starts = np.concatenate(([0], starts))
    truncated = np.zeros(starts.size, dtype=bool)
    if pos[-1]:
        ends = np.concatenate((ends, [r.size - 1]))
        truncated[-1] = True
    lo = grid[np.maximum(starts - 1, 0)]
    hi = grid[ends].astype(float)
    if refine and isinstance(path, LimitPath):
        closed = ~truncated
        e = ends[closed]
        level = path.running_min[e - 1]
        drop = path.w[e - 1] - path.w[e]
        frac = np.where(drop > 0, (path.w[e - 1] - level) / np.where(drop > 0, drop, 1.0), 1.0)
        hi[closed] = grid[e - 1] + np.clip(frac, 0.0, 1.0) * (grid[e] - grid[e - 1])
    intervals = np.column_stack((lo, hi))
    lengths = hi - lo
    return ExcursionSet(intervals, truncated, RankedSizes.from_values(lengths))


def scaling_map(mu, sigma3, t):
    """``(t_eff, size_factor, time_factor)`` relating the ``(mu, sigma3)`` process
    to the standard one: ranked lengths at ``t`` equal ``size_factor`` times
    the standard ranked lengths at ``t_eff``.
    """
    if not (mu > 0 and sigma3 > 0):
        raise ValueError("mu and sigma3 must be positive")
    return t * mu * sigma3 ** (-2.0 / 3.0), mu * sigma3 ** (-1.0 / 3.0), sigma3 ** (1.0 / 3.0) / mu


def inverse_scaling_map(mu, sigma3, t_eff):
    """Undo :func:`scaling_map`: returns ``(t, 1/size_factor, 1/time_factor)``."""
    _, size_factor, time_factor = scaling_map(mu, sigma3, 0.0)
    return t_eff / (mu * sigma3 ** (-2.0 / 3.0)), 1.0 / size_factor, 1.0 / time_factor


def limit_excursion_samples(mu, sigma3, t, count, k=10, horizon=10.0, dt=1e-4, seed=0,
                            via_standard=False, zero_tol=0.0):
    """Top-``k`` ranked excursion lengths of ``count`` independent paths.

    With ``via_standard=True`` each path is drawn from the standard process
    at ``t_eff`` and its lengths multiplied by ``size_factor`` (the horizon
    is stretched by ``time_factor`` accordingly).  Returns
    ``(lengths, truncated)`` with ``lengths`` of shape ``(count, k)`` and a
    boolean flag per path whose top-``k`` touches a truncated excursion.
    """
    out = np.zeros((count, k))
    flags = np.zeros(count, dtype=bool)
    if via_standard:
        t_run, size_factor, time_factor = scaling_map(mu, sigma3, t)
        base = dict(mu=1.0, sigma3=1.0, t=t_run, horizon=horizon * time_factor, dt=dt)
    else:
        size_factor = 1.0
        base = dict(mu=mu, sigma3=sigma3, t=t, horizon=horizon, dt=dt)
    for i in range(count):
        p = LimitParams(seed=derive_seed(seed, "limit", i), **base)
        exc = extract_excursions(simulate_limit_path(p), zero_tol)
        top, _ = exc.ranked_lengths.top(k)
        out[i] = size_factor * top
        if exc.truncated.any():
            cut = exc.intervals[exc.truncated, 1] - exc.intervals[exc.truncated, 0]
            flags[i] = bool(np.any(cut >= top[-1]))
    return out, flags
