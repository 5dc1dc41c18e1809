"""Breadth-first, size-biased exploration of ``G_n^t(w)``.

The exploration builds the graph while it walks it.  Vertex ``j`` carries an
exponential clock ``T_j`` with rate ``tilt * w_j / l_n``; exploring vertex
``v`` consumes a window of clock time of length ``w_v``, and every still
neutral vertex whose clock rings inside that window becomes a child of ``v``.
When no active vertex remains, the next vertex to ring starts a new
component and the window restarts at its arrival.  By memorylessness each
neutral ``j`` is a child of ``v`` with probability
``1 - exp(-tilt w_v w_j / l_n)``, independently, children come out in race
order, and the overall visiting order is the size-biased ordering of the
vertices.  Because all windows are laid on one clock, the walk vectorizes:
only sorting and prefix maxima are needed.

``explore_stepwise`` runs the same construction literally, one explored
vertex at a time, and is kept as an independent reference (and for the
linearized kernel, which has no clock representation).
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import RankedSizes, edge_prob, pstar_prob
from .seeding import rng_for


@dataclass(frozen=True, eq=False)
class ExplorationTrace:
    n: int
    order: np.ndarray           # v(1..n), 0-based vertex ids
    child_counts: np.ndarray    # c(1..n)
    boundaries: np.ndarray      # eta(0)=0 < eta(1) < ... < eta(k)=n
    realized_edges: np.ndarray  # (m, 2), i < j
    discovered: np.ndarray      # vertices found after each step
    cond_mean: np.ndarray | None
    cond_second: np.ndarray | None
    cond_mean_filtration: np.ndarray | None
    cond_second_filtration: np.ndarray | None
    neutral_power_sums_log: np.ndarray | None  # (n, 5): S1..S5 of {v(i),...,v(n)}
    ordered_weights: np.ndarray  # w_{v(1)}, ..., w_{v(n)}
    seed: int | None
    params: object
    kernel: str = "exact"
    clamp_count: int = 0
    tree_edge_count: int = 0

    @property
    def roots(self):
        """Step indices (0-based) at which a new component starts."""
        return self.boundaries[:-1]

    def to_json(self):
        return {
            "n": self.n,
            "seed": self.seed,
            "t": self.params.t,
            "kernel": self.kernel,
            "component_sizes": component_sizes(self).sizes.tolist(),
            "boundaries": self.boundaries.tolist(),
            "edges": int(len(self.realized_edges)),
            "clamp_count": self.clamp_count,
        }

    def to_csv(self, path):
        """Per-step table ``step, vertex, c, z, A, B`` (A, B empty without a power-sum log)."""
        z = walk(self).z
        if self.neutral_power_sums_log is not None:
            d = decompose(self)
            a_col = [repr(float(x)) for x in d.A[1:]]
            b_col = [repr(float(x)) for x in d.B[1:]]
        else:
            a_col = b_col = [""] * self.n
        rows = ["step,vertex,c,z,A,B"]
        for i in range(self.n):
            rows.append(f"{i + 1},{self.order[i]},{self.child_counts[i]},{z[i + 1]},{a_col[i]},{b_col[i]}")
        Path(path).write_text("\n".join(rows) + "\n")


@dataclass(frozen=True, eq=False)
class WalkSeries:
    z: np.ndarray  # length n+1, z[0] = 0
    n: int
    exponents: tuple = (-1.0 / 3.0, 2.0 / 3.0)


@dataclass(frozen=True, eq=False)
class DecompositionSeries:
    A: np.ndarray  # cumulative conditional drift, A[0] = 0
    M: np.ndarray  # martingale part, Z - A
    B: np.ndarray  # cumulative conditional variance, B[0] = 0
    max_jump_sq: float
    max_child: int
    variant: str = "unified"


def explore(ws, params, seed, kernel="exact", surplus=True, log_power_sums=True):
    """Run the size-biased breadth-first exploration of ``G_n^t(w)``.

    With ``surplus=True`` the pairs the exploration never examines (between
    two vertices that are both active at the same time) are sampled too, so
    ``realized_edges`` is a full sample of the graph.  ``kernel="pstar"``
    uses the linearized probabilities ``min(tilt w_i w_j / l_n, 1)`` through
    the stepwise explorer.
    """
    if params.n != ws.n:
        raise ValueError(f"TiltParams.n={params.n} does not match weight sequence n={ws.n}")
    if kernel == "pstar":
        return explore_stepwise(ws, params, seed, kernel="pstar", surplus=surplus,
                                log_power_sums=log_power_sums)
    if kernel != "exact":
        raise ValueError(f"unknown kernel {kernel!r}")

    rng = rng_for(seed)
    n, w, l_n, tilt = ws.n, ws.w, ws.l_n, params.tilt
    arrival = rng.standard_exponential(n) * (l_n / (tilt * w))
    order = np.argsort(arrival, kind="stable")
    wo = w[order]
    c, found, found_before, is_root = _clock_walk(arrival[order], wo)

    # parent of each non-root vertex: the step whose window caught it
    pos = np.arange(n)
    parent = np.searchsorted(found, pos, side="right")
    child = ~is_root
    tree = np.column_stack((order[parent[child]], order[pos[child]]))

    edges = [tree]
    if surplus:
        edges.append(_surplus_edges(wo, order, found_before, l_n, tilt, rng, "exact")[0])
    return _build_trace(ws, params, seed, order, c, np.concatenate(edges), kernel="exact",
                        log_power_sums=log_power_sums, tree_edges=len(tree))


def _clock_walk(a, wo):
    """Child counts from sorted arrival times ``a`` and ordered weights ``wo``.

    Works row-wise on 2-D input (one replica per row).
    """
    n = wo.shape[-1]
    cum = np.cumsum(wo, axis=-1)
    # clock offset jumps forward at every new root
    offset = np.maximum.accumulate(a - (cum - wo), axis=-1)
    window_end = cum + offset
    if a.ndim == 1:
        found = np.searchsorted(a, window_end, side="right")
    else:
        found = (a[..., None, :] <= window_end[..., :, None]).sum(axis=-1)
    steps = np.arange(1, n + 1)
    found = np.maximum(found, steps)
    found_before = np.concatenate((np.zeros(found.shape[:-1] + (1,), dtype=found.dtype), found[..., :-1]), axis=-1)
    is_root = found_before == steps - 1
    return found - found_before - is_root, found, found_before, is_root


def explore_batch_sizes(ws, params, seed, count):
    """Component sizes of ``count`` independent explorations (tiny n only).

    Runs the same clock walk as :func:`explore` on a ``(count, n)`` block.
    Returns a ``(count, n)`` integer array, each row sorted non-increasing
    and zero-padded.
    """
    if params.n != ws.n:
        raise ValueError(f"TiltParams.n={params.n} does not match weight sequence n={ws.n}")
    n = ws.n
    if n > 64:
        raise ValueError("explore_batch_sizes is meant for n <= 64")
    rng = rng_for(seed)
    arrival = rng.standard_exponential((count, n)) * (ws.l_n / (params.tilt * ws.w))
    order = np.argsort(arrival, axis=1, kind="stable")
    a = np.take_along_axis(arrival, order, axis=1)
    c, *_ = _clock_walk(a, ws.w[order])
    return sizes_from_counts(c)


def sizes_from_counts(c):
    """Ranked component sizes from child counts, row-wise for 2-D input."""
    c = np.atleast_2d(c)
    r, n = c.shape
    z = np.concatenate((np.zeros((r, 1), dtype=np.int64), np.cumsum(c - 1, axis=1)), axis=1)
    runmin = np.minimum.accumulate(z, axis=1)
    newmin = z[:, 1:] < runmin[:, :-1]  # step i closes a component
    label = np.cumsum(newmin, axis=1) - newmin
    flat = label + np.arange(r)[:, None] * n
    sizes = np.bincount(flat.ravel(), minlength=r * n).reshape(r, n)
    return -np.sort(-sizes, axis=1)


def _surplus_edges(wo, order, found_before, l_n, tilt, rng, kernel):
    # At step i the active vertices occupy positions i+1 .. found_before[i]-1;
    # those pairs with v(i) are never examined by the exploration.
    n = wo.size
    idx = np.arange(n)
    counts = np.maximum(found_before - idx - 1, 0)
    total = int(counts.sum())
    if total == 0:
        return np.empty((0, 2), dtype=np.int64), 0
    i_rep = np.repeat(idx, counts)
    starts = np.cumsum(counts) - counts
    m = i_rep + 1 + (np.arange(total) - np.repeat(starts, counts))
    if kernel == "exact":
        p = edge_prob(wo[i_rep], wo[m], l_n, tilt)
        clamps = 0
    else:
        raw = tilt * wo[i_rep] * wo[m] / l_n
        clamps = int(np.count_nonzero(raw > 1))
        p = np.minimum(raw, 1.0)
    hit = rng.random(total) < p
    return np.column_stack((order[i_rep[hit]], order[m[hit]])), clamps


def explore_stepwise(ws, params, seed, kernel="exact", surplus=True, log_power_sums=True):
    """Literal one-vertex-at-a-time exploration; O(n^2), meant for small n.

    Roots are drawn size-biased among neutral vertices; each neutral vertex
    becomes a child of the explored vertex ``v`` by an independent Bernoulli
    trial, and children are ordered by their race values, drawn from the
    exponential law truncated to the window ``[0, w_v]``.
    """
    if params.n != ws.n:
        raise ValueError(f"TiltParams.n={params.n} does not match weight sequence n={ws.n}")
    if kernel not in ("exact", "pstar"):
        raise ValueError(f"unknown kernel {kernel!r}")
    rng = rng_for(seed)
    n, w, l_n, tilt = ws.n, ws.w, ws.l_n, params.tilt
    prob = edge_prob if kernel == "exact" else pstar_prob
    neutral = np.ones(n, dtype=bool)
    queue = deque()
    order, c = [], []
    edges = []
    clamps = 0
    tree_edges = 0
    while len(order) < n:
        if not queue:
            cand = np.flatnonzero(neutral)
            root = cand[np.searchsorted(np.cumsum(w[cand]), rng.random() * w[cand].sum(), side="right")]
            neutral[root] = False
            queue.append(int(root))
        v = queue.popleft()
        order.append(v)
        if surplus and queue:
            act = np.fromiter(queue, dtype=np.int64)
            hit = rng.random(act.size) < prob(w[v], w[act], l_n, tilt)
            edges.extend((v, int(j)) for j in act[hit])
        cand = np.flatnonzero(neutral)
        if kernel == "pstar":
            clamps += int(np.count_nonzero(tilt * w[v] * w[cand] / l_n > 1))
        kids = cand[rng.random(cand.size) < prob(w[v], w[cand], l_n, tilt)]
        if kids.size:
            rate = tilt * w[kids] / l_n
            race = -np.log1p(rng.random(kids.size) * np.expm1(-rate * w[v])) / rate
            kids = kids[np.argsort(race, kind="stable")]
            neutral[kids] = False
            queue.extend(int(k) for k in kids)
            edges.extend((v, int(k)) for k in kids)
            tree_edges += kids.size
        c.append(kids.size)
    edge_arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return _build_trace(ws, params, seed, np.array(order, dtype=np.int64), np.array(c, dtype=np.int64),
                        edge_arr, kernel=kernel, log_power_sums=log_power_sums,
                        clamp_count=clamps, tree_edges=tree_edges)


def _suffix_power_sums(wo):
    # out[i, k-1] = sum_{m >= i} wo[m]^k, with a zero row at i = n
    n = wo.size
    out = np.zeros((n + 1, 5))
    p = np.ones_like(wo)
    for k in range(5):
        p = p * wo
        out[:n, k] = np.cumsum(p[::-1])[::-1]
    return out


def _root_moments(S, scale):
    # v drawn size-biased from a set with power sums S; children among the rest
    S1, S2, S3, S4, S5 = S.T
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = scale * (S1 * S2 - S3) / S1
        second = (scale * (S1 * S2 - S3)
                  - scale**2 * (S2 * S3 - S5)
                  + scale**2 * (S1 * S1 * S3 - 2 * S1 * S4 + S5)) / S1
    return np.nan_to_num(mean), np.nan_to_num(second)


def _build_trace(ws, params, seed, order, c, edges, kernel, log_power_sums=True, clamp_count=0, tree_edges=0):
    n = ws.n
    z = np.concatenate(([0], np.cumsum(c - 1)))
    runmin = np.minimum.accumulate(z)
    newmin = np.flatnonzero(z[1:] < runmin[:-1]) + 1
    boundaries = np.concatenate(([0], newmin)).astype(np.int64)
    # found[i] = vertices discovered after step i+1 = (i+1) + active count
    found = np.arange(1, n + 1) + (z[1:] - runmin[1:])
    found_before = np.concatenate(([0], found[:-1]))

    edges = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
    if len(edges):
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]

    wo = ws.w[order]
    cm = cs = fm = fs = log = None
    if log_power_sums:
        suffix = _suffix_power_sums(wo)
        scale = params.tilt / ws.l_n
        log = suffix[:n]
        cm, cs = _root_moments(log, scale)
        # exact filtration: the neutral set at step i is positions >= found_before[i]
        neutral = suffix[found_before]
        rm, rs = _root_moments(neutral, scale)
        x = scale * wo
        am = x * neutral[:, 0]
        asec = am - x * x * neutral[:, 1] + am * am
        root = found_before == np.arange(n)
        fm = np.where(root, rm, am)
        fs = np.where(root, rs, asec)

    return ExplorationTrace(
        n=n, order=order, child_counts=np.asarray(c, dtype=np.int64), boundaries=boundaries,
        realized_edges=edges, discovered=found, cond_mean=cm, cond_second=cs,
        cond_mean_filtration=fm, cond_second_filtration=fs, neutral_power_sums_log=log, ordered_weights=wo,
        seed=seed, params=params, kernel=kernel, clamp_count=clamp_count, tree_edge_count=tree_edges,
    )


def walk(trace):
    """Breadth-first walk ``Z(0)=0, Z(i) = Z(i-1) + c(i) - 1``."""
    z = np.concatenate(([0], np.cumsum(np.asarray(trace.child_counts) - 1)))
    return WalkSeries(z, len(trace.child_counts))


def walk_from_counts(c):
    c = np.asarray(c, dtype=np.int64)
    return WalkSeries(np.concatenate(([0], np.cumsum(c - 1))), c.size)


def stopping_times(wseries):
    """``eta(j) = min{i : Z(i) = -j}`` for j = 0, 1, ..."""
    z = wseries.z
    runmin = np.minimum.accumulate(z)
    return np.concatenate(([0], np.flatnonzero(z[1:] < runmin[:-1]) + 1))


def component_sizes(trace):
    """Component sizes ``eta(j) - eta(j-1)``, largest first."""
    sizes = np.diff(trace.boundaries)
    return RankedSizes(np.sort(sizes)[::-1], trace.n)


def decompose(trace, variant="unified"):
    """Split the walk as ``Z = M + A`` with predictable drift ``A``.

    ``variant="unified"`` conditions as if the next explored vertex were a
    size-biased draw from all vertices not yet explored (the computation
    used for the diffusion limit).  ``"filtration"`` conditions on the full
    exploration history, so an already-discovered next vertex is known.
    """
    if trace.neutral_power_sums_log is None:
        raise ValueError("trace has no neutral power-sum log; rerun explore with log_power_sums=True")
    if variant == "unified":
        mean, second = trace.cond_mean, trace.cond_second
    elif variant == "filtration":
        mean, second = trace.cond_mean_filtration, trace.cond_second_filtration
    else:
        raise ValueError(f"unknown variant {variant!r}")
    z = walk(trace).z.astype(float)
    A = np.concatenate(([0.0], np.cumsum(mean - 1.0)))
    B = np.concatenate(([0.0], np.cumsum(np.maximum(second - mean * mean, 0.0))))
    M = z - A
    jumps = np.diff(M)
    c = np.asarray(trace.child_counts)
    return DecompositionSeries(A, M, B, float(np.max(jumps**2)) if jumps.size else 0.0,
                               int(c.max()) if c.size else 0, variant)


def rescale_walk(wseries, s_max):
    """``Zbar(s) = n^{-1/3} Z(floor(n^{2/3} s))`` on the grid ``s_k = k n^{-2/3}``.

    Returns ``(s, zbar, truncated)``; the grid is cut at the end of the walk
    when ``s_max`` reaches past it.
    """
    n = wseries.n
    steps = int(np.floor(s_max * n ** (2.0 / 3.0) + 1e-9))
    last = len(wseries.z) - 1
    truncated = steps > last
    k = np.arange(min(steps, last) + 1)
    return k * n ** (-2.0 / 3.0), wseries.z[k] * n ** (-1.0 / 3.0), truncated


def size_biased_sum_path(trace, u_max, mu, sigma3):
    """``H(u) = n^{-2/3} sum_{i <= u n^{2/3}} w_{v(i)}^2`` on the canonical grid.

    Returns ``(u, H, sup_deviation)``, the deviation being measured against
    the line ``(sigma3 / mu) u``.
    """
    n = trace.n
    steps = int(np.floor(u_max * n ** (2.0 / 3.0) + 1e-9))
    if steps > n:
        raise ValueError(f"u_max={u_max} reaches past the end of the walk (n={n})")
    wo = trace.ordered_weights[:steps]
    H = np.concatenate(([0.0], np.cumsum(wo * wo))) * n ** (-2.0 / 3.0)
    u = np.arange(steps + 1) * n ** (-2.0 / 3.0)
    return u, H, float(np.max(np.abs(H - sigma3 / mu * u)))


def write_summary(trace, path):
    Path(path).write_text(json.dumps(trace.to_json(), indent=2, sort_keys=True) + "\n")
