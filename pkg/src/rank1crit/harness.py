"""Replicated experiments driven by a JSON config.

A run writes, under ``output_dir``::

    config.json      resolved config
    results.json     aggregate diagnostics, comparison and verdicts
    replicas.csv     one row per replica
    limit.csv        one row per limit path
    ecdf.csv         per-rank empirical CDFs of both samples
    manifest.json    sha256 of every file above
    timing.json      wall times (not in the manifest; never byte-stable)

Everything except ``timing.json`` is a deterministic function of the config.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import analysis
from .exploration import decompose, explore, explore_batch_sizes, size_biased_sum_path
from .graph import TiltParams, batch_largest_components, exact_component_law
from .limit import limit_excursion_samples
from .seeding import derive_seed
from .weights import DistributionSpec, WeightSequence, check_conditions, criticalize, iid_weights, quantile_weights

__all__ = [
    "ConfigError", "ExperimentConfig", "ReplicaReport", "ExperimentResult",
    "run_experiment", "verify_manifest", "derive_seed", "oracle_suite", "OracleRow",
]

TOP = 10

# Default thresholds, from pilot runs at n = 1e5..1e6 (see README).
DEFAULT_CHECKS = {
    "drift": {"u_max": 1.0, "threshold": 0.1},
    "variance": {"u": 1.0, "threshold": 0.05},
    "max_jump": {"threshold": 0.01},
    "poisson": {"s_max": 2.0, "threshold": 0.05},
    "size_biased": {"u_max": 1.0, "threshold": 0.05},
    "ks": {"ranks": 3, "threshold": 0.05},
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _num(d, key, path, kind=float, default=None, positive=False, minimum=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    v = d[key]
    try:
        if isinstance(v, bool):
            raise TypeError
        out = kind(v)
        if kind is int and out != v:
            raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}" if path else key, f"expected {kind.__name__}, got {v!r}") from None
    if positive and not out > 0:
        raise ConfigError(f"{path}.{key}" if path else key, f"must be positive, got {v!r}")
    if minimum is not None and out < minimum:
        raise ConfigError(f"{path}.{key}" if path else key, f"must be >= {minimum}, got {v!r}")
    return out


@dataclass
class ExperimentConfig:
    dist: DistributionSpec
    n: int
    t: float = 0.0
    criticalize: bool = True
    provenance: str = "quantile"  # or "iid"
    fresh_weights: bool | None = None  # default: True for iid, False for quantile
    replicas: int = 1
    mu: float | None = None  # None: derived from dist
    sigma3: float | None = None
    horizon: float = 10.0
    dt: float = 1e-4
    limit_replicas: int = 0
    checks: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = set(cls.__dataclass_fields__) | {"limit"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        if "dist" not in d:
            raise ConfigError("dist", "missing required field")
        try:
            dist = d["dist"] if isinstance(d["dist"], DistributionSpec) else DistributionSpec.from_json(d["dist"])
        except (ValueError, TypeError, KeyError, OSError) as e:
            raise ConfigError("dist", str(e)) from None
        lim = d.get("limit", {})
        if not isinstance(lim, dict):
            raise ConfigError("limit", "expected an object")
        for k in lim:
            if k not in ("mu", "sigma3", "horizon", "dt", "replicas"):
                raise ConfigError(f"limit.{k}", "unknown field")
        merged = dict(d)
        for k, v in lim.items():
            merged["limit_replicas" if k == "replicas" else k] = v

        prov = merged.get("provenance", "quantile")
        if prov not in ("quantile", "iid"):
            raise ConfigError("provenance", f"expected 'quantile' or 'iid', got {prov!r}")
        crit = merged.get("criticalize", True)
        if not isinstance(crit, bool):
            raise ConfigError("criticalize", f"expected a boolean, got {crit!r}")
        fresh = merged.get("fresh_weights")
        if fresh is not None and not isinstance(fresh, bool):
            raise ConfigError("fresh_weights", f"expected a boolean, got {fresh!r}")

        mu = merged.get("mu")
        sigma3 = merged.get("sigma3")
        lp = "limit" if "limit" in d else ""
        if mu is not None and mu != "auto":
            mu = _num(merged, "mu", lp, positive=True)
        else:
            mu = None
        if sigma3 is not None and sigma3 != "auto":
            sigma3 = _num(merged, "sigma3", lp, positive=True)
        else:
            sigma3 = None

        checks = merged.get("checks", {})
        if isinstance(checks, list):
            checks = {name: {} for name in checks}
        if not isinstance(checks, dict):
            raise ConfigError("checks", "expected an object or a list of names")
        resolved = {}
        for name, opts in checks.items():
            if name not in DEFAULT_CHECKS and name != "conditions":
                raise ConfigError(f"checks.{name}", "unknown check")
            if opts is None:
                opts = {}
            if not isinstance(opts, dict):
                raise ConfigError(f"checks.{name}", "expected an object")
            base = dict(DEFAULT_CHECKS.get(name, {}))
            for k, v in opts.items():
                if name != "conditions" and k not in base:
                    raise ConfigError(f"checks.{name}.{k}", "unknown option")
                base[k] = v
            resolved[name] = base

        cfg = cls(
            dist=dist,
            n=_num(merged, "n", "", int, minimum=1),
            t=_num(merged, "t", "", default=0.0),
            criticalize=crit,
            provenance=prov,
            fresh_weights=fresh,
            replicas=_num(merged, "replicas", "", int, default=1, minimum=1),
            mu=mu,
            sigma3=sigma3,
            horizon=_num(merged, "horizon", lp, default=10.0, positive=True),
            dt=_num(merged, "dt", lp, default=1e-4, positive=True),
            limit_replicas=_num(merged, "limit_replicas", lp, int, default=0, minimum=0),
            checks=resolved,
            seed=_num(merged, "seed", "", int, default=0, minimum=0),
            output_dir=str(merged.get("output_dir", "out")),
            workers=_num(merged, "workers", "", int, default=1, minimum=1),
        )
        if cfg.limit_replicas and cfg.dt > cfg.horizon / 100:
            raise ConfigError(f"{lp}.dt" if lp else "dt", "must be at most horizon/100")
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"invalid JSON: {e}") from None
        return cls.from_dict(d)

    def to_dict(self):
        d = asdict(self)
        d["dist"] = self.dist.to_json()
        return d

    @property
    def uses_fresh_weights(self):
        return self.provenance == "iid" if self.fresh_weights is None else self.fresh_weights

    def effective_dist(self):
        """The weight law after criticalization at the distribution level."""
        return self.dist.scaled(self.dist.critical_scale()) if self.criticalize else self.dist

    def limit_moments(self):
        """``(mu, sigma3)`` for the limit: overrides, else moments of the effective law."""
        eff = self.effective_dist()
        mu = self.mu if self.mu is not None else eff.mu
        sigma3 = self.sigma3 if self.sigma3 is not None else eff.sigma3
        return float(mu), float(sigma3)


@dataclass
class ReplicaReport:
    index: int
    seed: int
    sizes: list
    rescaled: list
    diagnostics: dict
    flags: dict
    wall_time: float = 0.0

    def row(self, diag_names):
        top = list(self.rescaled[:TOP]) + [0.0] * max(0, TOP - len(self.rescaled))
        vals = [self.diagnostics.get(k, "") for k in diag_names]
        return [self.index, self.seed, *top, *vals]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicas: list
    limit: np.ndarray | None
    summary: dict
    verdicts: dict
    output_dir: Path | None = None

    @property
    def all_pass(self):
        return all(self.verdicts.values())


def _weights(cfg, index):
    n = cfg.n
    if cfg.provenance == "iid":
        seed = derive_seed(cfg.seed, "weights", index if cfg.uses_fresh_weights else 0)
        ws = iid_weights(cfg.dist, n, seed)
    else:
        ws = quantile_weights(cfg.dist, n)
    return criticalize(ws) if cfg.criticalize else ws


def _run_replica(cfg, index, ws=None):
    start = time.perf_counter()
    if ws is None:
        ws = _weights(cfg, index)
    seed = derive_seed(cfg.seed, "replica", index)
    params = TiltParams(cfg.t, cfg.n)
    need_log = any(k in cfg.checks for k in ("drift", "variance"))
    trace = explore(ws, params, seed, surplus=False, log_power_sums=need_log)
    sizes = np.sort(np.diff(trace.boundaries))[::-1]
    n = cfg.n
    mu, sigma3 = cfg.limit_moments()
    diag = {}
    ch = cfg.checks
    if need_log:
        d = decompose(trace)
        if "drift" in ch:
            diag["drift"] = analysis.drift_check(d, n, mu, sigma3, cfg.t, float(ch["drift"]["u_max"]))
        if "variance" in ch:
            diag["variance"] = analysis.variance_check(d, n, mu, sigma3, float(ch["variance"]["u"]))
    if "max_jump" in ch:
        diag["max_jump"] = analysis.max_jump_from_counts(trace.child_counts, n)
    if "poisson" in ch:
        diag["poisson"] = analysis.poisson_counter_check(
            ws, derive_seed(cfg.seed, "poisson", index), float(ch["poisson"]["s_max"]))[0]
    if "size_biased" in ch:
        diag["size_biased"] = size_biased_sum_path(trace, float(ch["size_biased"]["u_max"]), mu, sigma3)[2]
    flags = {}
    if "conditions" in ch:
        rep = check_conditions(ws)
        flags["conditions_pass"] = rep.all_pass
    scale = n ** (-2.0 / 3.0)
    return ReplicaReport(index, seed, sizes[:TOP].tolist(), (sizes[:TOP] * scale).tolist(), diag, flags,
                         time.perf_counter() - start)


def _run_block(cfg_dict, indices):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    shared = None if cfg.uses_fresh_weights else _weights(cfg, 0)
    return [_run_replica(cfg, i, shared) for i in indices]


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def verify_manifest(output_dir):
    """Re-hash every artifact listed in ``manifest.json``; returns the list of mismatches."""
    out = Path(output_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    bad = []
    for name, digest in manifest["files"].items():
        p = out / name
        if not p.exists() or _sha256(p) != digest:
            bad.append(name)
    return bad


def run_experiment(cfg, write=True):
    """Run ``cfg.replicas`` explorations and ``cfg.limit_replicas`` limit paths,
    evaluate the enabled checks, and write the artifacts under ``cfg.output_dir``."""
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    timings = {}
    t0 = time.perf_counter()
    indices = list(range(cfg.replicas))
    if cfg.workers > 1 and cfg.replicas > 1:
        blocks = [indices[k::cfg.workers] for k in range(cfg.workers)]
        cd = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_block, [cd] * len(blocks), blocks))
        reps = sorted((r for part in parts for r in part), key=lambda r: r.index)
    else:
        shared = None if cfg.uses_fresh_weights else _weights(cfg, 0)
        reps = [_run_replica(cfg, i, shared) for i in indices]
    timings["replicas"] = time.perf_counter() - t0

    mu, sigma3 = cfg.limit_moments()
    summary = {"n": cfg.n, "t": cfg.t, "mu": mu, "sigma3": sigma3, "replicas": cfg.replicas,
               "seeds_digest": analysis.digest(r.seed for r in reps)}
    verdicts = {}
    diag_names = [k for k in DEFAULT_CHECKS if k in cfg.checks and k != "ks"]
    for name in diag_names:
        vals = np.array([r.diagnostics[name] for r in reps])
        thr = float(cfg.checks[name]["threshold"])
        summary[name] = {"mean": float(vals.mean()), "max": float(vals.max()), "threshold": thr}
        verdicts[name] = bool(vals.mean() <= thr)
    if "conditions" in cfg.checks:
        ok = [r.flags["conditions_pass"] for r in reps]
        summary["conditions"] = {"pass_fraction": float(np.mean(ok))}
        verdicts["conditions"] = bool(all(ok))

    limit = None
    comparison = None
    if cfg.limit_replicas:
        t1 = time.perf_counter()
        limit, trunc = limit_excursion_samples(mu, sigma3, cfg.t, cfg.limit_replicas, k=TOP,
                                               horizon=cfg.horizon, dt=cfg.dt, seed=cfg.seed)
        timings["limit"] = time.perf_counter() - t1
        summary["limit"] = {"paths": cfg.limit_replicas, "dt": cfg.dt, "horizon": cfg.horizon,
                            "truncated_excluded": int(trunc.sum())}
        kept = limit[~trunc]
        if "ks" in cfg.checks and len(kept):
            k = int(cfg.checks["ks"]["ranks"])
            thr = float(cfg.checks["ks"]["threshold"])
            comparison = analysis.compare_to_limit(
                [np.array(r.rescaled) for r in reps], list(kept), k=k, threshold=thr,
                graph_params=(mu, sigma3, cfg.t), limit_params=(mu, sigma3, cfg.t),
                metadata={"n": cfg.n, "dt": cfg.dt, "seeds_digest": summary["seeds_digest"]})
            summary["comparison"] = comparison.to_json()
            verdicts["ks"] = comparison.all_pass

    result = ExperimentResult(cfg, reps, limit, summary, verdicts)
    timings["total"] = time.perf_counter() - t0
    if write:
        result.output_dir = _write_outputs(result, diag_names, timings)
    return result


def _write_outputs(result, diag_names, timings):
    cfg = result.config
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    files.append("config.json")

    body = {"summary": result.summary, "verdicts": result.verdicts, "all_pass": result.all_pass}
    (out / "results.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    files.append("results.json")

    header = ["replica", "seed"] + [f"size_{i + 1}" for i in range(TOP)] + diag_names
    _write_csv(out / "replicas.csv", header, [r.row(diag_names) for r in result.replicas])
    files.append("replicas.csv")

    if result.limit is not None:
        header = ["path", "seed"] + [f"length_{i + 1}" for i in range(TOP)]
        rows = [[i, derive_seed(cfg.seed, "limit", i), *row] for i, row in enumerate(result.limit)]
        _write_csv(out / "limit.csv", header, rows)
        files.append("limit.csv")
        rep = np.array([list(r.rescaled) + [0.0] * (TOP - len(r.rescaled)) for r in result.replicas])
        analysis.write_rank_ecdfs(out / "ecdf.csv", rep, result.limit)
        files.append("ecdf.csv")

    manifest = {"files": {name: _sha256(out / name) for name in files}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(
        {**timings, "replica_wall_times": [r.wall_time for r in result.replicas]}, indent=2) + "\n")
    return out


# -- brute-force oracle -------------------------------------------------------

@dataclass
class OracleRow:
    n: int
    weights: str
    t: float
    sampler: str
    statistic: float
    p_value: float
    passed: bool
    empirical: list
    exact: list

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} n={self.n} weights={self.weights} t={self.t:+g} sampler={self.sampler} "
                f"chi2={self.statistic:.3f} p={self.p_value:.4f}")


def chi_square_pmf(counts, pmf, min_expected=5.0):
    """Chi-square goodness of fit of integer ``counts`` against ``pmf``, pooling
    adjacent cells (from the top) until each has expected count >= ``min_expected``."""
    counts = np.asarray(counts, dtype=float)
    pmf = np.asarray(pmf, dtype=float)
    total = counts.sum()
    exp = pmf * total
    keep = pmf > 0
    if np.any(counts[~keep] > 0):
        return float("inf"), 0.0
    obs, ex = counts[keep], exp[keep]
    pooled_o, pooled_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs[::-1], ex[::-1]):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if pooled_o:
            pooled_o[-1] += acc_o
            pooled_e[-1] += acc_e
        else:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
    if len(pooled_o) < 2:
        return 0.0, 1.0
    res = stats.chisquare(pooled_o, pooled_e)
    return float(res.statistic), float(res.pvalue)


def oracle_battery(n):
    """Weight/t battery used by :func:`oracle_suite` for one n."""
    ones = WeightSequence(np.ones(n), provenance="constant")
    ramp = criticalize(WeightSequence(np.arange(1.0, n + 1), provenance="explicit"))
    return [("ones", ones, 0.0), ("ramp", ramp, 0.0), ("ramp", ramp, 1.0)]


def oracle_check(ws, params, samples, seed, label="custom", level=0.01):
    """Chi-square of both samplers' largest-component pmf against the exact law.

    Returns three rows: graph sampler, exploration, and the two samplers
    against each other (homogeneity test).
    """
    exact = exact_component_law(ws, params)
    n = ws.n
    g = batch_largest_components(ws, params, derive_seed(seed, "oracle_graph", n), samples)
    e = explore_batch_sizes(ws, params, derive_seed(seed, "oracle_explore", n), samples)[:, 0]
    cg = np.bincount(g, minlength=n + 1)
    ce = np.bincount(e, minlength=n + 1)
    rows = []
    for name, c in (("graph", cg), ("explore", ce)):
        stat, p = chi_square_pmf(c, exact)
        rows.append(OracleRow(n, label, params.t, name, stat, p, p > level,
                              (c / samples).tolist(), exact.tolist()))
    table = np.array([cg[1:], ce[1:]])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] >= 2:
        res = stats.chi2_contingency(table)
        stat, p = float(res.statistic), float(res.pvalue)
    else:
        stat, p = 0.0, 1.0
    rows.append(OracleRow(n, label, params.t, "graph-vs-explore", stat, p, p > level,
                          [(cg / samples).tolist(), (ce / samples).tolist()], exact.tolist()))
    return rows


def oracle_suite(max_n=8, samples=100_000, seed=0, level=0.01, dump_dir=None):
    """Compare both samplers with the exact largest-component law for n <= ``max_n``.

    Failing rows carry both empirical pmfs; with ``dump_dir`` they are also
    written to ``oracle_failures.json`` there.
    """
    if not 1 <= max_n <= 8:
        raise ValueError(f"max_n must be in 1..8, got {max_n}")
    rows = []
    for n in range(1, max_n + 1):
        for label, ws, t in oracle_battery(n):
            rows.extend(oracle_check(ws, TiltParams(t, n), samples, derive_seed(seed, label, int(t * 10)),
                                     label, level))
    failures = [asdict(r) for r in rows if not r.passed]
    if failures and dump_dir is not None:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
        (Path(dump_dir) / "oracle_failures.json").write_text(json.dumps(failures, indent=2) + "\n")
    return rows
