"""Putting exploration output and limit output on a common footing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import kolmogorov

from .graph import RankedSizes, union_find_labels
from .limit import scaling_map
from .seeding import rng_for


def rescaled_sizes(sizes, n):
    """Multiply ranked component sizes by ``n^{-2/3}``."""
    return RankedSizes(np.asarray(sizes.sizes, dtype=float) * n ** (-2.0 / 3.0), sizes.n_origin)


def l2_distance(x, y):
    """Euclidean distance between ranked sequences, zero-padding the shorter."""
    a = np.asarray(x.sizes if isinstance(x, RankedSizes) else x, dtype=float)
    b = np.asarray(y.sizes if isinstance(y, RankedSizes) else y, dtype=float)
    m = max(a.size, b.size)
    a = np.pad(a, (0, m - a.size))
    b = np.pad(b, (0, m - b.size))
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _grid_steps(n, u):
    return int(np.floor(u * n ** (2.0 / 3.0) + 1e-9))


def drift_check(d, n, mu, sigma3, t, u_max):
    """``sup_{s <= u_max} |n^{-1/3} A(floor(n^{2/3} s)) + s^2 sigma3/(2 mu^2) - s t|``."""
    k = np.arange(min(_grid_steps(n, u_max), len(d.A) - 1) + 1)
    s = k * n ** (-2.0 / 3.0)
    dev = d.A[k] * n ** (-1.0 / 3.0) + s**2 * sigma3 / (2 * mu**2) - s * t
    return float(np.max(np.abs(dev)))


def variance_check(d, n, mu, sigma3, u):
    """``|n^{-2/3} B(n^{2/3} u) - sigma3 u / mu|``."""
    k = min(_grid_steps(n, u), len(d.B) - 1)
    return float(abs(d.B[k] * n ** (-2.0 / 3.0) - sigma3 * u / mu))


def max_jump_check(d, n, u_max=None):
    """``n^{-2/3} (1 + max c(k))^2``, which dominates the squared largest jump
    of the rescaled martingale.  ``u_max`` restricts to ``k <= u_max n^{2/3}``
    (needs a trace, so it is only honoured for ``DecompositionSeries`` built
    with ``max_child`` over the full walk when ``u_max`` is None).
    """
    if u_max is not None:
        raise ValueError("max_jump_check over a prefix needs child counts; use max_jump_from_counts")
    return n ** (-2.0 / 3.0) * (1 + d.max_child) ** 2


def max_jump_from_counts(child_counts, n, u_max=None):
    c = np.asarray(child_counts)
    if u_max is not None:
        c = c[: _grid_steps(n, u_max)]
    return n ** (-2.0 / 3.0) * (1 + (int(c.max()) if c.size else 0)) ** 2


def poisson_counter_check(ws, seed, s_max):
    """Sup-deviation of the rescaled arrival counter from the identity.

    Independent clocks ``T_j ~ Exp(w_j / l_n)``, ``N(t) = #{j : T_j <= t}``;
    returns ``(sup_{s <= s_max} |n^{-2/3} N(s n^{2/3}) - s|, arrivals)``
    where ``arrivals`` are the rescaled sorted ring times up to ``s_max``.
    The supremum is exact: it is attained at a ring time or at ``s_max``.
    """
    n = ws.n
    rng = rng_for(seed)
    T = np.sort(rng.standard_exponential(n) * (ws.l_n / ws.w))
    scale = n ** (-2.0 / 3.0)
    s = T * scale
    s = s[s <= s_max]
    k = np.arange(1, s.size + 1)
    after = np.abs(k * scale - s)
    before = np.abs((k - 1) * scale - s)
    end = abs(s.size * scale - s_max)
    dev = max(float(after.max()) if s.size else 0.0, float(before.max()) if s.size else 0.0, end)
    return dev, s


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample needs two non-empty samples")
    pts = np.concatenate((a, b))
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = np.sqrt(a.size * b.size / (a.size + b.size))
    return d, float(min(1.0, max(0.0, kolmogorov(en * d))))


def ks_critical_value(n1, n2, level=0.01):
    """Asymptotic critical value ``c(level) sqrt((n1+n2)/(n1 n2))``."""
    c = np.sqrt(-0.5 * np.log(level / 2))
    return float(c * np.sqrt((n1 + n2) / (n1 * n2)))


@dataclass
class ComparisonReport:
    ks_stat_per_rank: list
    p_values: list
    sample_sizes: tuple
    threshold: float
    verdicts: list
    padded: dict
    l2_mean_top10: float
    metadata: dict = field(default_factory=dict)

    @property
    def all_pass(self):
        return all(self.verdicts)

    def to_json(self):
        return {
            "ks_stat_per_rank": self.ks_stat_per_rank,
            "p_values": self.p_values,
            "sample_sizes": list(self.sample_sizes),
            "threshold": self.threshold,
            "verdicts": self.verdicts,
            "padded": self.padded,
            "l2_mean_top10": self.l2_mean_top10,
            "metadata": self.metadata,
            "note": "thresholds are empirical calibration; no finite-n rate is available",
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def _as_matrix(samples, k):
    rows = []
    padded = 0
    for s in samples:
        if isinstance(s, RankedSizes):
            top, pad = s.top(k)
        else:
            v = np.asarray(s, dtype=float)
            top = np.zeros(k)
            top[: min(k, v.size)] = v[:k]
            pad = v.size < k
        rows.append(top)
        padded += bool(pad)
    return np.array(rows).reshape(-1, k), padded


def compare_to_limit(replica_sizes, excursion_samples, k=3, threshold=0.05,
                     graph_params=None, limit_params=None, metadata=None):
    """Per-rank KS statistics between rescaled component sizes and excursion lengths.

    ``graph_params`` and ``limit_params`` are optional ``(mu, sigma3, t)``
    triples; they must agree, otherwise the comparison is meaningless.
    Samples with fewer than ``k`` (or 10) entries are zero-padded and counted.
    """
    if graph_params is not None and limit_params is not None:
        if not np.allclose(graph_params, limit_params, rtol=1e-9, atol=1e-12):
            raise ValueError(f"parameter mismatch: graph {graph_params} vs limit {limit_params}")
    kk = max(k, 10)
    X, pad_x = _as_matrix(replica_sizes, kk)
    Y, pad_y = _as_matrix(excursion_samples, kk)
    stats, pvals = [], []
    for r in range(k):
        d, p = ks_two_sample(X[:, r], Y[:, r])
        stats.append(d)
        pvals.append(p)
    meta = dict(metadata or {})
    if graph_params is not None:
        meta.setdefault("mu", graph_params[0])
        meta.setdefault("sigma3", graph_params[1])
        meta.setdefault("t", graph_params[2])
    return ComparisonReport(
        ks_stat_per_rank=stats,
        p_values=pvals,
        sample_sizes=(len(X), len(Y)),
        threshold=threshold,
        verdicts=[d <= threshold for d in stats],
        padded={"replicas": pad_x, "limit": pad_y},
        l2_mean_top10=l2_distance(X[:, :10].mean(axis=0), Y[:, :10].mean(axis=0)),
        metadata=meta,
    )


def write_rank_ecdfs(path, replica_matrix, limit_matrix, k=3):
    """CSV of per-rank empirical CDFs: ``source,rank,value,ecdf``."""
    lines = ["source,rank,value,ecdf"]
    for name, mat in (("replicas", np.asarray(replica_matrix)), ("limit", np.asarray(limit_matrix))):
        for r in range(min(k, mat.shape[1])):
            v = np.sort(mat[:, r])
            for i, x in enumerate(v, start=1):
                lines.append(f"{name},{r + 1},{x!r},{i / v.size!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def cluster_weight_sizes(source, ws):
    """Ranked cluster weights ``sum_{a in C} w_a`` and the rescaling factor
    ``(sum w^3)^{1/3} / sum w^2`` under which they match the standard limit.

    ``source`` is an exploration trace or a graph sample.
    """
    w = ws.w
    if hasattr(source, "boundaries"):
        comp = np.repeat(np.arange(len(source.boundaries) - 1), np.diff(source.boundaries))
        cw = np.bincount(comp, weights=w[source.order])
    else:
        labels = union_find_labels(source.n, source.edges)
        cw = np.bincount(labels, weights=w, minlength=source.n)
        cw = cw[np.bincount(labels, minlength=source.n) > 0]
    factor = ws.S(3) ** (1.0 / 3.0) / ws.S(2)
    return RankedSizes.from_values(cw), factor


def limit_params_for(mu, sigma3, t):
    """Standard-process parameters and length factor for ``(mu, sigma3, t)``."""
    t_eff, size_factor, _ = scaling_map(mu, sigma3, t)
    return t_eff, size_factor


def digest(values):
    h = hashlib.sha256()
    for v in values:
        h.update(str(v).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]
