"""Command line entry point: ``rank1crit <command> ...``.

Exit codes: 0 all checks pass, 1 some check failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .exploration import component_sizes, explore, write_summary
from .graph import TiltParams, components_union_find, sample_graph
from .harness import ConfigError, ExperimentConfig, oracle_suite, run_experiment
from .limit import LimitParams, extract_excursions, limit_excursion_samples, simulate_limit_path
from .weights import (ConditionThresholds, DistributionSpec, WeightSequence, check_conditions, criticalize,
                      iid_weights, quantile_weights)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _dist_from_args(a):
    if a.dist:
        text = Path(a.dist).read_text() if Path(a.dist).is_file() else a.dist
        return DistributionSpec.from_json(text)
    if a.family == "constant":
        return DistributionSpec.constant(a.value)
    if a.family == "pareto":
        return DistributionSpec.pareto(a.alpha, a.x_min)
    raise ValueError("use --dist for discrete or empirical laws")


def _weights_from_args(a):
    if getattr(a, "weights", None):
        return WeightSequence.from_csv(a.weights)
    if a.n is None:
        raise ValueError("--n is required unless --weights is given")
    dist = _dist_from_args(a)
    ws = iid_weights(dist, a.n, a.weight_seed) if a.provenance == "iid" else quantile_weights(dist, a.n)
    return criticalize(ws) if a.criticalize else ws


def _add_weight_args(p, from_file=True):
    if from_file:
        p.add_argument("--weights", help="weight CSV written by the weights command")
    p.add_argument("--dist", help="distribution as JSON text or a JSON file")
    p.add_argument("--family", choices=["constant", "pareto"], default="constant")
    p.add_argument("--value", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--x-min", type=float, default=1.0)
    p.add_argument("--n", type=int)
    p.add_argument("--provenance", choices=["quantile", "iid"], default="quantile")
    p.add_argument("--weight-seed", type=int, default=0)
    p.add_argument("--no-criticalize", dest="criticalize", action="store_false")


def cmd_weights(a):
    ws = _weights_from_args(a)
    if a.out:
        ws.to_csv(a.out)
    info = {"n": ws.n, "l_n": ws.l_n, "nu_n": ws.nu_n, "scale": ws.scale, "notes": list(ws.notes)}
    code = EXIT_OK
    if a.check:
        th = ConditionThresholds.from_dict(json.loads(a.thresholds)) if a.thresholds else None
        rep = check_conditions(ws, thresholds=th)
        info["conditions"] = rep.to_json()
        code = EXIT_OK if rep.all_pass else EXIT_FAIL
    print(json.dumps(info, indent=2))
    return code


def cmd_sample(a):
    ws = _weights_from_args(a)
    g = sample_graph(ws, TiltParams(a.t, ws.n), a.seed, kernel=a.kernel, method=a.method, workers=a.workers)
    if a.out:
        g.to_csv(a.out, weights_ref=a.weights)
    sizes = components_union_find(g)
    print(json.dumps({"n": g.n, "edges": int(len(g.edges)), "top_sizes": sizes.sizes[:10].tolist(),
                      "clamp_count": g.clamp_count}))
    return EXIT_OK


def cmd_explore(a):
    ws = _weights_from_args(a)
    tr = explore(ws, TiltParams(a.t, ws.n), a.seed, kernel=a.kernel, log_power_sums=not a.no_log)
    if a.out:
        tr.to_csv(a.out)
    if a.summary:
        write_summary(tr, a.summary)
    sizes = component_sizes(tr)
    print(json.dumps({"n": tr.n, "components": len(sizes), "top_sizes": sizes.sizes[:10].tolist(),
                      "edges": int(len(tr.realized_edges))}))
    return EXIT_OK


def cmd_limit(a):
    if a.paths <= 1:
        path = simulate_limit_path(LimitParams(a.mu, a.sigma3, a.t, a.horizon, a.dt, a.seed))
        exc = extract_excursions(path, a.zero_tol)
        if a.out:
            path.to_csv(a.out)
        if a.excursions:
            exc.write_json(a.excursions)
        print(json.dumps({"top_lengths": exc.ranked_lengths.sizes[:10].tolist(),
                          "truncated_count": exc.truncated_count}))
        return EXIT_OK
    lengths, trunc = limit_excursion_samples(a.mu, a.sigma3, a.t, a.paths, horizon=a.horizon, dt=a.dt,
                                             seed=a.seed, zero_tol=a.zero_tol)
    if a.out:
        header = ",".join(f"length_{i + 1}" for i in range(lengths.shape[1]))
        np.savetxt(a.out, lengths, fmt="%.17g", delimiter=",", header=header, comments="")
    print(json.dumps({"paths": a.paths, "mean_top": lengths[:, 0].mean(), "truncated": int(trunc.sum())}))
    return EXIT_OK


def _read_ranked(path, prefix):
    with open(path) as f:
        header = f.readline().strip().split(",")
    cols = [i for i, h in enumerate(header) if h.startswith(prefix)]
    if not cols:
        raise ValueError(f"{path}: no columns starting with {prefix!r}")
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, usecols=cols))


def cmd_compare(a):
    x = _read_ranked(a.replicas, "size_")
    y = _read_ranked(a.limit, "length_")
    rep = analysis.compare_to_limit(list(x), list(y), k=a.k, threshold=a.threshold)
    if a.out:
        rep.write_json(a.out)
    if a.ecdf:
        analysis.write_rank_ecdfs(a.ecdf, x, y, a.k)
    for r, (d, p, ok) in enumerate(zip(rep.ks_stat_per_rank, rep.p_values, rep.verdicts), start=1):
        print(f"{'PASS' if ok else 'FAIL'} rank {r}: KS={d:.4f} p={p:.4f} threshold={a.threshold}")
    return EXIT_OK if rep.all_pass else EXIT_FAIL


def cmd_oracle(a):
    rows = oracle_suite(a.max_n, a.samples, a.seed, a.level, dump_dir=a.dump_dir)
    for r in rows:
        print(r.line())
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


RUN_OVERRIDES = ("n", "t", "replicas", "seed", "output_dir", "workers", "provenance")
LIMIT_OVERRIDES = ("mu", "sigma3", "horizon", "dt")


def cmd_run(a):
    d = json.loads(Path(a.config).read_text()) if a.config else {}
    if a.dist:
        d["dist"] = json.loads(Path(a.dist).read_text() if Path(a.dist).is_file() else a.dist)
    for k in RUN_OVERRIDES:
        v = getattr(a, k)
        if v is not None:
            d[k] = v
    lim = dict(d.get("limit", {}))
    for k in LIMIT_OVERRIDES:
        v = getattr(a, k)
        if v is not None:
            lim[k] = v
    if a.limit_replicas is not None:
        lim["replicas"] = a.limit_replicas
    if lim:
        d["limit"] = lim
    if a.no_criticalize:
        d["criticalize"] = False
    if a.checks:
        d["checks"] = a.checks.split(",")
    cfg = ExperimentConfig.from_dict(d)
    res = run_experiment(cfg)
    for name, ok in res.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"outputs in {res.output_dir}")
    return EXIT_OK if res.all_pass else EXIT_FAIL


def build_parser():
    ap = argparse.ArgumentParser(prog="rank1crit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", help="build a weight sequence and check its conditions")
    _add_weight_args(p, from_file=False)
    p.add_argument("--out")
    p.add_argument("--check", action="store_true")
    p.add_argument("--thresholds", help="JSON object overriding condition thresholds")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("sample", help="sample a graph directly and report its components")
    _add_weight_args(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel", choices=["exact", "pstar"], default="exact")
    p.add_argument("--method", choices=["auto", "naive", "skip"], default="auto")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("explore", help="run the exploration walk")
    _add_weight_args(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel", choices=["exact", "pstar"], default="exact")
    p.add_argument("--no-log", action="store_true", help="skip the conditional-moment log")
    p.add_argument("--out", help="per-step CSV")
    p.add_argument("--summary", help="JSON summary")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("limit", help="simulate the limiting process")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sigma3", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--zero-tol", type=float, default=0.0)
    p.add_argument("--out")
    p.add_argument("--excursions")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("compare", help="per-rank KS between replicas.csv and limit.csv")
    p.add_argument("--replicas", required=True)
    p.add_argument("--limit", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out")
    p.add_argument("--ecdf")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exact-law check of both samplers for tiny n")
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.01)
    p.add_argument("--dump-dir")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("run", help="full experiment from a JSON config")
    p.add_argument("--config")
    p.add_argument("--dist")
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--provenance", choices=["quantile", "iid"])
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma3", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--limit-replicas", type=int)
    p.add_argument("--no-criticalize", action="store_true")
    p.add_argument("--checks", help="comma-separated check names")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return a.func(a)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
