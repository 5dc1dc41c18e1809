"""Direct sampling of the tilted rank-1 graph and its components.

This is deliberately independent of the exploration walk: the edge set is
drawn pair by pair (or by skip sampling on the sorted weights) and the
components are found by union-find, so the two routes can check each other.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import derive_seed, rng_for

NAIVE_MAX_N = 20_000
EXACT_MAX_N = 10
ENUMERATE_MAX_N = 6


@dataclass(frozen=True)
class TiltParams:
    """Critical-window parameter ``t``; edges use weights ``(1 + t n^{-1/3}) w``."""

    t: float
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be >= 1")
        if not 1.0 + self.tau > 0:
            raise ValueError(f"tilt 1 + t n^(-1/3) = {1 + self.tau} must be positive (t={self.t}, n={self.n})")

    @property
    def tau(self):
        return self.t * self.n ** (-1.0 / 3.0)

    @property
    def tilt(self):
        return 1.0 + self.tau


@dataclass(frozen=True, eq=False)
class RankedSizes:
    """Non-increasing sequence of non-negative sizes."""

    sizes: np.ndarray
    n_origin: int | None = None

    def __post_init__(self):
        s = np.asarray(self.sizes)
        if s.ndim != 1:
            raise ValueError("sizes must be one-dimensional")
        if s.size and (np.any(s < 0) or np.any(np.diff(s) > 0)):
            raise ValueError("sizes must be non-negative and non-increasing")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sizes", s)

    @classmethod
    def from_values(cls, values, n_origin=None):
        v = np.asarray(values)
        return cls(np.sort(v)[::-1], n_origin)

    def __len__(self):
        return self.sizes.size

    def __getitem__(self, i):
        return self.sizes[i]

    def __eq__(self, other):
        if not isinstance(other, RankedSizes):
            return NotImplemented
        return np.array_equal(self.sizes, other.sizes)

    def top(self, k):
        """First ``k`` entries, zero-padded; also returns whether padding was needed."""
        out = np.zeros(k, dtype=float)
        m = min(k, self.sizes.size)
        out[:m] = self.sizes[:m]
        return out, self.sizes.size < k

    def __repr__(self):
        head = ", ".join(f"{x:g}" for x in self.sizes[:8])
        more = ", ..." if self.sizes.size > 8 else ""
        return f"RankedSizes([{head}{more}], n_origin={self.n_origin})"


@dataclass(frozen=True, eq=False)
class GraphSample:
    n: int
    edges: np.ndarray  # (m, 2) with i < j, rows sorted
    seed: int | None
    params: TiltParams
    kernel: str = "exact"
    workers: int = 1
    clamp_count: int = 0

    def to_csv(self, path, weights_ref=None):
        """Write ``i,j`` rows plus a JSON sidecar ``<path>.json``."""
        path = Path(path)
        np.savetxt(path, self.edges, fmt="%d", delimiter=",", header="i,j", comments="")
        sidecar = {
            "n": self.n,
            "t": self.params.t,
            "seed": self.seed,
            "kernel": self.kernel,
            "workers": self.workers,
            "weights_ref": weights_ref,
            "edges": int(len(self.edges)),
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        meta = json.loads(Path(str(path) + ".json").read_text())
        edges = np.loadtxt(path, dtype=np.int64, delimiter=",", skiprows=1, ndmin=2).reshape(-1, 2)
        return cls(meta["n"], edges, meta["seed"], TiltParams(meta["t"], meta["n"]),
                   meta.get("kernel", "exact"), meta.get("workers", 1))


def edge_prob(w_i, w_j, l_n, tilt):
    """``1 - exp(-tilt * w_i * w_j / l_n)``, vectorized."""
    return -np.expm1(-tilt * np.multiply(w_i, w_j) / l_n)


def pstar_prob(w_i, w_j, l_n, tilt):
    """Linearized kernel ``tilt * w_i * w_j / l_n`` clamped at 1."""
    return np.minimum(tilt * np.multiply(w_i, w_j) / l_n, 1.0)


def _check_params(ws, params):
    if params.n != ws.n:
        raise ValueError(f"TiltParams.n={params.n} does not match weight sequence n={ws.n}")


def _naive_rows(w, l_n, tilt, rows, rng, kernel):
    out = []
    clamps = 0
    for i in rows:
        rest = w[i + 1:]
        if rest.size == 0:
            continue
        if kernel == "exact":
            p = edge_prob(w[i], rest, l_n, tilt)
        else:
            raw = tilt * w[i] * rest / l_n
            clamps += int(np.count_nonzero(raw > 1))
            p = np.minimum(raw, 1.0)
        hit = np.flatnonzero(rng.random(rest.size) < p)
        if hit.size:
            out.append(np.column_stack((np.full(hit.size, i), hit + i + 1)))
    return out, clamps


def _skip_rows(w_sorted, l_n, tilt, rows, rng, kernel):
    # Skip sampling along the non-increasing order with bound
    # q = min(tilt w_a w_b / l_n, 1); accept with true/bound.
    n = w_sorted.size
    out = []
    clamps = 0
    for a in rows:
        wa = w_sorted[a]
        b = a + 1
        if b >= n:
            continue
        p = min(tilt * wa * w_sorted[b] / l_n, 1.0)
        while b < n and p > 0:
            if p < 1.0:
                r = rng.random()
                b += int(math.floor(math.log1p(-r) / math.log1p(-p)))
            if b >= n:
                break
            lin = tilt * wa * w_sorted[b] / l_n
            q = min(lin, 1.0)
            true = -math.expm1(-lin) if kernel == "exact" else q
            if rng.random() < true / p:
                out.append((a, b))
                if kernel != "exact" and lin > 1:
                    clamps += 1
            p = q
            b += 1
    return out, clamps


def sample_graph(ws, params, seed, kernel="exact", method="auto", workers=1):
    """Sample ``G_n^t(w)``: each pair independently with ``edge_prob``.

    ``method`` is ``"naive"`` (pair scan), ``"skip"`` (skip sampling on the
    sorted weights) or ``"auto"`` (naive up to ``NAIVE_MAX_N`` vertices).
    Rows are split into ``workers`` contiguous ranges, each with its own
    derived seed, so results depend on ``(seed, workers)``.
    """
    _check_params(ws, params)
    if kernel not in ("exact", "pstar"):
        raise ValueError(f"unknown kernel {kernel!r}")
    n = ws.n
    if method == "auto":
        method = "naive" if n <= NAIVE_MAX_N else "skip"
    workers = max(1, int(workers))
    tilt, l_n = params.tilt, ws.l_n

    if method == "naive":
        w = ws.w
        perm = None
        fn = _naive_rows
    elif method == "skip":
        perm = np.argsort(-ws.w, kind="stable")
        w = ws.w[perm]
        fn = _skip_rows
    else:
        raise ValueError(f"unknown method {method!r}")

    bounds = np.linspace(0, n, workers + 1).astype(int)

    def run(k):
        rng = rng_for(derive_seed(seed, "sample_graph", k))
        return fn(w, l_n, tilt, range(bounds[k], bounds[k + 1]), rng, kernel)

    if workers == 1:
        results = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(workers)))

    chunks = []
    clamps = 0
    for part, c in results:
        clamps += c
        if method == "naive":
            chunks.extend(part)
        elif part:
            chunks.append(np.asarray(part, dtype=np.int64))
    edges = np.concatenate(chunks).astype(np.int64) if chunks else np.empty((0, 2), dtype=np.int64)
    if perm is not None and len(edges):
        edges = perm[edges]
    edges = _canonical_edges(edges)
    return GraphSample(n, edges, seed, params, kernel, workers, clamps)


def _canonical_edges(edges):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if not len(edges):
        return edges
    edges = np.sort(edges, axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def union_find_labels(n, edges):
    """Component label (the smallest vertex id) of every vertex.

    Vectorized union-find: roots are hooked onto the smaller root of each
    crossing edge, then paths are fully compressed, until no edge crosses.
    """
    parent = np.arange(n, dtype=np.int64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if not len(edges):
        return parent
    u, v = edges[:, 0], edges[:, 1]
    while True:
        ru, rv = parent[u], parent[v]
        cross = ru != rv
        if not cross.any():
            return parent
        ru, rv = ru[cross], rv[cross]
        np.minimum.at(parent, np.maximum(ru, rv), np.minimum(ru, rv))
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt
        u, v = u[cross], v[cross]


def components_union_find(g):
    """Connected-component sizes of a ``GraphSample``, largest first."""
    labels = union_find_labels(g.n, g.edges)
    sizes = np.bincount(labels, minlength=g.n)
    sizes = sizes[sizes > 0]
    return RankedSizes(np.sort(sizes)[::-1], g.n)


# -- exact law of the largest component for tiny n ---------------------------

def _pair_probs(ws, params, kernel):
    w = ws.w
    if kernel == "exact":
        return edge_prob(w[:, None], w[None, :], ws.l_n, params.tilt)
    return pstar_prob(w[:, None], w[None, :], ws.l_n, params.tilt)


def _law_by_enumeration(p):
    n = p.shape[0]
    pairs = list(itertools.combinations(range(n), 2))
    m = len(pairs)
    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    pp = np.array([p[i, j] for i, j in pairs])
    with np.errstate(divide="ignore"):
        logw = np.where(bits, np.log(pp), np.log1p(-pp)).sum(axis=1)
    weight = np.exp(logw)
    labels = np.tile(np.arange(n), (masks.size, 1))
    for _ in range(n):
        for e, (i, j) in enumerate(pairs):
            on = bits[:, e]
            lo = np.minimum(labels[:, i], labels[:, j])
            labels[on, i] = lo[on]
            labels[on, j] = lo[on]
    counts = np.zeros((masks.size, n), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(masks.size), n), labels.ravel()), 1)
    largest = counts.max(axis=1)
    pmf = np.zeros(n + 1)
    np.add.at(pmf, largest, weight)
    return pmf


def _law_by_subsets(p):
    # Exact recursion over vertex subsets: conn[S] is the probability that the
    # graph induced on S is connected; g[S] the probability that every
    # component of the graph induced on S has at most m vertices.
    n = p.shape[0]
    full = (1 << n) - 1
    with np.errstate(divide="ignore"):
        lq = np.log1p(-np.minimum(p, 1.0))
    # row[i, S] = sum_{j in S} log(1 - p_ij)
    row = np.zeros((n, 1 << n))
    for S in range(1, 1 << n):
        low = (S & -S).bit_length() - 1
        row[:, S] = row[:, S & (S - 1)] + lq[:, low]
    bits = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
    size = bits.sum(axis=1).astype(int)

    # splits[S]: (T, R, P(no edge between T and R)) for T containing min(S)
    splits = [[] for _ in range(1 << n)]
    for S in range(1, 1 << n):
        low = S & -S
        rest = S ^ low
        sub = rest
        while True:
            T = sub | low
            R = S ^ T
            splits[S].append((T, R, math.exp(float(bits[T] @ row[:, R]))))
            if sub == 0:
                break
            sub = (sub - 1) & rest

    conn = np.zeros(1 << n)
    for S in range(1, 1 << n):
        conn[S] = 1.0 - sum(conn[T] * q for T, R, q in splits[S] if R)

    cdf = np.zeros(n + 1)
    for m in range(1, n + 1):
        g = np.zeros(1 << n)
        g[0] = 1.0
        for S in range(1, 1 << n):
            g[S] = sum(conn[T] * q * g[R] for T, R, q in splits[S] if size[T] <= m)
        cdf[m] = g[full]
    pmf = np.diff(cdf, prepend=0.0)
    pmf[0] = 0.0
    return pmf


def exact_component_law(ws, params, kernel="exact", method="auto"):
    """Exact pmf of the largest component size, as an array indexed by size.

    ``method="enumerate"`` sums over all ``2^(n(n-1)/2)`` edge subsets
    (feasible up to n=6); ``"subsets"`` uses an exact recursion over vertex
    subsets (up to n=10).  ``"auto"`` enumerates when feasible.
    """
    _check_params(ws, params)
    n = ws.n
    if n > EXACT_MAX_N:
        raise ValueError(f"exact_component_law supports n <= {EXACT_MAX_N}, got n={n}")
    if method == "auto":
        method = "enumerate" if n <= ENUMERATE_MAX_N else "subsets"
    if method == "enumerate" and n > ENUMERATE_MAX_N:
        raise ValueError(f"edge-subset enumeration supports n <= {ENUMERATE_MAX_N}, got n={n}")
    if n == 1:
        return np.array([0.0, 1.0])
    p = _pair_probs(ws, params, kernel)
    if method == "enumerate":
        return _law_by_enumeration(p)
    if method == "subsets":
        return _law_by_subsets(p)
    raise ValueError(f"unknown method {method!r}")


def batch_largest_components(ws, params, seed, count, kernel="exact", chunk=20_000):
    """Largest component sizes of ``count`` independent graphs (tiny n only).

    Same pair-by-pair law as :func:`sample_graph`, drawn for a whole block of
    replicas at once; connectivity by repeated boolean squaring of the
    reachability matrix.
    """
    _check_params(ws, params)
    n = ws.n
    if n > 16:
        raise ValueError("batch_largest_components is meant for n <= 16")
    rng = rng_for(seed)
    p = _pair_probs(ws, params, kernel)
    iu, ju = np.triu_indices(n, 1)
    pp = p[iu, ju]
    out = np.empty(count, dtype=np.int64)
    rounds = max(1, math.ceil(math.log2(max(n, 2))))
    for lo in range(0, count, chunk):
        m = min(chunk, count - lo)
        hit = rng.random((m, pp.size)) < pp
        reach = np.zeros((m, n, n), dtype=np.uint8)
        reach[:, iu, ju] = hit
        reach[:, ju, iu] = hit
        reach[:, np.arange(n), np.arange(n)] = 1
        for _ in range(rounds):
            reach = (np.matmul(reach, reach) > 0).astype(np.uint8)
        out[lo:lo + m] = reach.sum(axis=2).max(axis=1)
    return out
