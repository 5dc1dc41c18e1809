"""Weight sequences for rank-1 random graphs.

Two constructions are supported: i.i.d. draws from a distribution ``F`` and
the deterministic quantile choice ``w_i = [1-F]^{-1}(i/n)``.  Both can be
rescaled to criticality (``sum w^2 / sum w == 1``) and checked against the
moment and maximal-weight conditions under which the critical scaling limit
holds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FAMILIES = ("constant", "pareto", "discrete", "empirical")

# Pareto needs alpha > 3 for a finite third moment.
PARETO_MIN_ALPHA = 3.0


@dataclass(frozen=True)
class DistributionSpec:
    """Law of a single weight ``W = scale * X``.

    ``atoms`` holds ``(value, prob)`` pairs for the discrete and empirical
    families, sorted by value.  ``scale`` is applied on top of the family
    (criticalization multiplies weights by a constant).
    """

    family: str
    value: float = 1.0
    alpha: float = 4.0
    x_min: float = 1.0
    atoms: tuple = ()
    path: str | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.family == "constant" and not self.value > 0:
            raise ValueError("constant value must be positive")
        if self.family == "pareto":
            if not self.x_min > 0:
                raise ValueError("pareto x_min must be positive")
            if not self.alpha > PARETO_MIN_ALPHA:
                raise ValueError(
                    f"pareto alpha must exceed {PARETO_MIN_ALPHA} (finite third moment), got {self.alpha}"
                )
        if self.family in ("discrete", "empirical"):
            if not self.atoms:
                raise ValueError(f"{self.family} distribution needs atoms")
            vals = [float(v) for v, _ in self.atoms]
            probs = [float(p) for _, p in self.atoms]
            if min(vals) <= 0:
                raise ValueError("atom values must be positive")
            if min(probs) < 0 or abs(math.fsum(probs) - 1.0) > 1e-9:
                raise ValueError("atom probabilities must be non-negative and sum to 1")
            merged: dict[float, float] = {}
            for v, p in zip(vals, probs):
                merged[v] = merged.get(v, 0.0) + p
            object.__setattr__(self, "atoms", tuple(sorted(merged.items())))

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def pareto(cls, alpha, x_min=1.0):
        return cls("pareto", alpha=float(alpha), x_min=float(x_min))

    @classmethod
    def discrete(cls, atoms):
        return cls("discrete", atoms=tuple((float(v), float(p)) for v, p in atoms))

    @classmethod
    def empirical(cls, path):
        """Uniform law on the values listed in ``path`` (one per line)."""
        values = np.atleast_1d(np.loadtxt(path, dtype=float, comments="#", delimiter=","))
        values = values.ravel()
        if values.size == 0:
            raise ValueError(f"no values in {path}")
        uniq, counts = np.unique(values, return_counts=True)
        atoms = tuple((float(v), c / values.size) for v, c in zip(uniq, counts))
        return cls("empirical", atoms=atoms, path=str(path))

    @classmethod
    def from_json(cls, obj):
        """Parse ``{"family": ..., params...}`` (a dict or a JSON string)."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        obj = dict(obj)
        family = obj.pop("family", None)
        if family is None:
            raise ValueError("distribution object needs a 'family' field")
        scale = float(obj.pop("scale", 1.0))
        if family == "constant":
            spec = cls.constant(obj.pop("value", obj.pop("c", 1.0)))
        elif family == "pareto":
            spec = cls.pareto(obj.pop("alpha"), obj.pop("x_min", 1.0))
        elif family == "discrete":
            spec = cls.discrete(obj.pop("atoms"))
        elif family == "empirical":
            spec = cls.empirical(obj.pop("path", obj.pop("file", None)))
        else:
            raise ValueError(f"unknown family {family!r}")
        if obj:
            raise ValueError(f"unexpected fields for {family}: {sorted(obj)}")
        return spec.scaled(scale) if scale != 1.0 else spec

    def to_json(self):
        out = {"family": self.family}
        if self.family == "constant":
            out["value"] = self.value
        elif self.family == "pareto":
            out.update(alpha=self.alpha, x_min=self.x_min)
        elif self.family == "discrete":
            out["atoms"] = [list(a) for a in self.atoms]
        else:
            out["path"] = self.path
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    def scaled(self, c):
        return replace(self, scale=self.scale * float(c))

    # -- distributional quantities ---------------------------------------

    def moment(self, k):
        """``E[W^k]``; ``inf`` when it diverges."""
        s = self.scale**k
        if self.family == "constant":
            return s * self.value**k
        if self.family == "pareto":
            if self.alpha <= k:
                return math.inf
            return s * self.alpha * self.x_min**k / (self.alpha - k)
        return s * math.fsum(p * v**k for v, p in self.atoms)

    @property
    def mu(self):
        return self.moment(1)

    @property
    def sigma3(self):
        return self.moment(3)

    @property
    def nu(self):
        return self.moment(2) / self.moment(1)

    def critical_scale(self):
        """Factor ``c`` with ``E[(cW)^2] / E[cW] == 1``."""
        return self.moment(1) / self.moment(2)

    def support_min(self):
        if self.family == "constant":
            return self.scale * self.value
        if self.family == "pareto":
            return self.scale * self.x_min
        return self.scale * self.atoms[0][0]

    def cdf(self, x):
        x = np.asarray(x, dtype=float) / self.scale
        if self.family == "constant":
            return (x >= self.value).astype(float)
        if self.family == "pareto":
            with np.errstate(divide="ignore"):
                surv = np.where(x >= self.x_min, (self.x_min / np.maximum(x, self.x_min)) ** self.alpha, 1.0)
            return 1.0 - surv
        vals = np.array([v for v, _ in self.atoms])
        cum = np.cumsum([p for _, p in self.atoms])
        idx = np.searchsorted(vals, x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def survival_inverse(self, u):
        """Generalized inverse ``inf{s : 1 - F(s) <= u}`` for ``u`` in (0, 1].

        At ``u = 1`` this returns the infimum of the support.
        """
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u > 1)):
            raise ValueError("survival_inverse needs u in (0, 1]")
        if self.family == "constant":
            return np.full(u.shape, self.scale * self.value)
        if self.family == "pareto":
            return self.scale * self.x_min * u ** (-1.0 / self.alpha)
        vals = np.array([v for v, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        # tail[k] = P(W > vals[k])
        tail = np.concatenate((np.cumsum(probs[::-1])[::-1][1:], [0.0]))
        # smallest k with tail[k] <= u; tail is non-increasing
        k = np.searchsorted(-tail, -u - 1e-12, side="left")
        return self.scale * vals[np.minimum(k, len(vals) - 1)]

    def continuity_grid(self, size=512):
        """Points at which ``F`` is continuous, spread over the quantiles."""
        q = np.arange(1, size + 1) / (size + 1)
        if self.family == "pareto":
            return self.survival_inverse(1.0 - q)
        vals = self.scale * np.array([v for v, _ in self.atoms] if self.atoms else [self.value])
        mids = (vals[1:] + vals[:-1]) / 2
        return np.concatenate(([vals[0] / 2], mids, [vals[-1] * 2]))


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Positive weights with cached power sums ``S_k = sum w^k`` (k=1..5)."""

    w: np.ndarray
    provenance: str = "explicit"
    seed: int | None = None
    dist: DistributionSpec | None = None
    scale: float = 1.0
    notes: tuple = ()
    power_sums: tuple = field(init=False)

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("weight sequence must be non-empty")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "power_sums", power_sums(w))

    @property
    def n(self):
        return self.w.size

    @property
    def l_n(self):
        return self.power_sums[0]

    @property
    def nu_n(self):
        return self.power_sums[1] / self.power_sums[0]

    def S(self, k):
        return self.power_sums[k - 1]

    def to_csv(self, path):
        path = Path(path)
        header = [
            f"n: {self.n}",
            f"provenance: {self.provenance}",
            f"seed: {'' if self.seed is None else self.seed}",
            f"scale: {self.scale!r}",
        ]
        if self.dist is not None:
            header.append(f"dist: {json.dumps(self.dist.to_json(), sort_keys=True)}")
        header.append("weight")
        np.savetxt(path, self.w, fmt="%.17g", header="\n".join(header), comments="# ")
        # savetxt prefixes the column name too; rewrite it as a plain header row
        lines = path.read_text().splitlines()
        lines[len(header) - 1] = "weight"
        path.write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        meta = {}
        with open(path) as fh:
            lines = fh.read().splitlines()
        body = []
        for line in lines:
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                meta[key] = val
            elif line.strip() and line.strip() != "weight":
                body.append(float(line))
        seed = meta.get("seed") or None
        dist = DistributionSpec.from_json(meta["dist"]) if "dist" in meta else None
        ws = cls(
            np.array(body),
            provenance=meta.get("provenance", "explicit"),
            seed=None if seed is None else int(seed),
            dist=dist,
            scale=float(meta.get("scale", 1.0)),
        )
        if "n" in meta and int(meta["n"]) != ws.n:
            raise ValueError(f"{path}: header says n={meta['n']} but found {ws.n} rows")
        return ws


def power_sums(w, kmax=5):
    """Compensated (exactly rounded) power sums ``sum w^k`` for k=1..kmax."""
    w = np.asarray(w, dtype=float)
    out = []
    p = np.ones_like(w)
    for _ in range(kmax):
        p = p * w
        out.append(math.fsum(p))
    return tuple(out)


def quantile_weights(dist, n, literal_endpoint=False):
    """``w_i = [1-F]^{-1}(i/n)`` for i = 1..n (non-increasing in i).

    The generalized inverse at ``u = 1`` is taken as the infimum of the
    support so that the last vertex keeps a positive weight.  With
    ``literal_endpoint=True`` the last weight is set to 0 instead, which is
    rejected since every vertex needs a positive weight.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if literal_endpoint:
        raise ValueError("literal endpoint convention gives w_n = 0, which is not a valid weight")
    u = np.arange(1, n + 1) / n
    w = np.asarray(dist.survival_inverse(u), dtype=float)
    notes = ("last weight set to the support infimum",)
    return WeightSequence(w, provenance="quantile", dist=dist, notes=notes)


def iid_weights(dist, n, seed):
    """n i.i.d. draws from ``dist`` by inverse transform, seeded."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(n)  # (0, 1]
    w = np.asarray(dist.survival_inverse(u), dtype=float)
    return WeightSequence(w, provenance="iid", seed=int(seed), dist=dist)


def criticalize(ws):
    """Rescale by ``S1/S2`` so that ``nu_n == 1``.

    A sequence already critical to within rounding is returned unchanged,
    which makes the operation idempotent.
    """
    c = ws.S(1) / ws.S(2)
    if abs(c - 1.0) <= 1e-12:
        return ws
    return WeightSequence(
        ws.w * c,
        provenance=ws.provenance,
        seed=ws.seed,
        dist=ws.dist,
        scale=ws.scale * c,
        notes=ws.notes + (f"criticalized by factor {c!r}",),
    )


@dataclass
class ConditionThresholds:
    """Pass thresholds for the weight conditions.

    These are calibration choices: the conditions themselves are asymptotic
    (and only hold in probability for random weights), so a single
    realization can only be compared against fixed cut-offs.
    """

    max_weight_ratio: float = 1.0
    scaled_first: float = 1.0
    scaled_second: float = 1.0
    third: float = 0.5
    cdf_gap: float = 0.05

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(v) for k, v in (d or {}).items()})


@dataclass
class ConditionReport:
    n: int
    max_weight_ratio: float
    moment_residuals: tuple
    scaled_residuals: tuple
    cdf_sup_gap: float
    nu_n: float
    passes: dict
    note: str = (
        "single-realization residuals; thresholds are calibration choices and "
        "cannot distinguish in-probability from deterministic compliance"
    )

    @property
    def all_pass(self):
        return all(self.passes.values())

    def to_json(self):
        return {
            "n": self.n,
            "max_weight_ratio": self.max_weight_ratio,
            "moment_residuals": list(self.moment_residuals),
            "scaled_residuals": list(self.scaled_residuals),
            "cdf_sup_gap": self.cdf_sup_gap,
            "nu_n": self.nu_n,
            "passes": dict(self.passes),
            "note": self.note,
        }


def check_conditions(ws, dist=None, thresholds=None):
    """Measure the maximal-weight, weak-convergence and moment conditions.

    If ``dist`` is omitted the sequence's own distribution is used, scaled by
    any criticalization factor applied to ``ws``.
    """
    if dist is None:
        if ws.dist is None:
            raise ValueError("no distribution to compare against")
        dist = ws.dist.scaled(ws.scale)
    th = thresholds if thresholds is not None else ConditionThresholds()
    n = ws.n
    targets = [dist.moment(k) for k in (1, 2, 3)]
    for k, m in zip((1, 2, 3), targets):
        if not math.isfinite(m):
            raise ValueError(f"condition (c): E[W^{k}] is infinite for {dist.to_json()}")
    resid = tuple(abs(ws.S(k) / n - m) for k, m in zip((1, 2, 3), targets))
    scaled = (resid[0] * n ** (1 / 3), resid[1] * n ** (1 / 3))
    ratio = float(ws.w.max()) / n ** (1 / 3)

    grid = dist.continuity_grid()
    ws_sorted = np.sort(ws.w)
    emp = np.searchsorted(ws_sorted, grid, side="right") / n
    gap = float(np.max(np.abs(emp - dist.cdf(grid))))

    passes = {
        "max_weight": ratio <= th.max_weight_ratio,
        "weak_convergence": gap <= th.cdf_gap,
        "first_moment": scaled[0] <= th.scaled_first,
        "second_moment": scaled[1] <= th.scaled_second,
        "third_moment": resid[2] <= th.third,
    }
    return ConditionReport(n, ratio, resid, scaled, gap, ws.nu_n, passes)
