"""
Comparing cluster sizes with the limit
======================================

The harness runs many independent replicas, simulates matching limit paths
and compares the rank-wise distributions with two-sample KS statistics.
Everything lands in one output directory together with a sha256 manifest.
"""
import json
import sys
import tempfile
from pathlib import Path

from rank1crit import ExperimentConfig, run_experiment

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="rank1crit-"))
config = {
    "dist": {"family": "pareto", "alpha": 4, "x_min": 1},
    "n": 20_000,
    "t": 0.0,
    "replicas": 200,
    "seed": 11,
    "checks": ["drift", "variance", "ks"],
    "limit": {"replicas": 200, "dt": 1e-3},
    "output_dir": str(out),
}
res = run_experiment(config)

summary = json.loads((out / "results.json").read_text())["summary"]
print("limit moments:", ExperimentConfig.from_dict(config).limit_moments())
print("KS per rank:", [round(x, 4) for x in summary["comparison"]["ks_stat_per_rank"]])
print("verdicts:", res.verdicts)
print("artifacts in", out, sorted(p.name for p in out.iterdir()))
