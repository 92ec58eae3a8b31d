"""Per-variable features computed from the formulation and the root LP."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lp import LpResult, lp_relax
from .mip import FREE, MipInstance

SENTINEL = 1e6
INT_TOL = 1e-9

_STATS = ("sum", "mean", "std", "max", "min")

FEATURE_NAMES: tuple[str, ...] = (
    ("obj", "obj_pos", "obj_neg")
    + ("n_coef", "n_coef_pos", "n_coef_neg")
    + ("lp_x", "lp_x_minus_floor", "lp_ceil_minus_x", "lp_is_frac")
    + ("pc_up", "pc_down", "pc_ratio", "pc_sum", "pc_prod", "reduced_cost")
    + ("lb", "ub")
    + ("deg_mean", "deg_std", "deg_min", "deg_max")
    + ("lhs_rhs_max", "lhs_rhs_min")
    + tuple(f"coef_pos_{s}" for s in _STATS)
    + tuple(f"coef_neg_{s}" for s in _STATS)
    + tuple(f"w_unit_{s}" for s in _STATS)
    + tuple(f"w_dual_{s}" for s in _STATS)
    + tuple(f"w_invsum_{s}" for s in _STATS)
)
NFEAT = len(FEATURE_NAMES)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    @property
    def nvars(self) -> int:
        return self.values.shape[0]

    @property
    def nfeat(self) -> int:
        return self.values.shape[1]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "rows": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMatrix":
        names = tuple(d["names"])
        vals = np.array(d["rows"], dtype=float).reshape(-1, len(names))
        return cls(vals, names)


@dataclass
class RootStats:
    lp: LpResult
    pseudo_up: np.ndarray
    pseudo_down: np.ndarray


def write_features(F: FeatureMatrix, path) -> None:
    Path(path).write_text(json.dumps(F.to_dict()) + "\n", encoding="utf-8")


def read_features(path) -> FeatureMatrix:
    return FeatureMatrix.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _agg(values) -> list[float]:
    """sum, mean, std, max, min of ``values``; zeros when empty.

    Values are sorted first so the result does not depend on row order.
    """
    if len(values) == 0:
        return [0.0] * 5
    v = np.sort(np.asarray(values, dtype=float))
    return [float(v.sum()), float(v.mean()), float(v.std()), float(v.max()), float(v.min())]


def root_pseudocosts(inst: MipInstance, root_lp: LpResult, iter_cap: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit objective degradation of fixing each fractional variable up/down.

    Child LPs are capped at ``iter_cap`` iterations; a capped child still in
    phase 1 yields the default 1, an infeasible child yields ``SENTINEL``.
    Variables integral at the root get (1, 1).
    """
    n = inst.nvars
    up = np.ones(n)
    down = np.ones(n)
    sgn = -1.0 if inst.maximize else 1.0
    x = root_lp.primal
    for i in range(n):
        frac = x[i] - np.floor(x[i])
        if frac <= INT_TOL or frac >= 1 - INT_TOL:
            continue
        for val, dist, out in ((1, 1.0 - x[i], up), (0, x[i], down)):
            fx = np.full(n, FREE, dtype=np.int8)
            fx[i] = val
            child = lp_relax(inst, fx, iter_cap=iter_cap)
            if child.status == "infeasible":
                out[i] = SENTINEL
            elif not np.isfinite(child.objective):
                out[i] = 1.0
            else:
                out[i] = max(0.0, sgn * (child.objective - root_lp.objective)) / dist
    return up, down


def root_stats(inst: MipInstance, iter_cap: int = 50) -> RootStats:
    lp = lp_relax(inst)
    if not lp.optimal:
        raise ValueError(f"root LP of {inst.name!r} is {lp.status}")
    up, down = root_pseudocosts(inst, lp, iter_cap)
    return RootStats(lp, up, down)


def extract_features(inst: MipInstance, rs: RootStats, fixings=None) -> FeatureMatrix:
    """Raw (unnormalized) feature matrix, one row per variable."""
    if not rs.lp.optimal:
        raise ValueError("features need an optimal root LP")
    n = inst.nvars
    A = inst.matrix.tocsc()
    deg = np.diff(inst.matrix.indptr).astype(float)
    rhs = np.array([r.rhs for r in inst.rows], dtype=float)
    absum = np.asarray(abs(inst.matrix).sum(axis=1)).ravel()
    inv_sum = np.where(absum > 0, 1.0 / np.where(absum > 0, absum, 1.0), 0.0)
    duals = rs.lp.duals
    lb = np.zeros(n)
    ub = np.ones(n)
    if fixings is not None:
        fx = np.asarray(fixings)
        lb[fx != FREE] = fx[fx != FREE]
        ub[fx != FREE] = fx[fx != FREE]

    out = np.zeros((n, NFEAT))
    for j in range(n):
        lo, hi = A.indptr[j], A.indptr[j + 1]
        rows = A.indices[lo:hi]
        coefs = A.data[lo:hi]
        c = inst.obj[j]
        pos = coefs[coefs > 0]
        neg = -coefs[coefs < 0]

        x = rs.lp.primal[j]
        if abs(x - round(x)) <= INT_TOL:
            x = float(round(x))
        fl = x - np.floor(x)
        ce = np.ceil(x) - x
        is_frac = 1.0 if fl > 0 else 0.0

        pu, pd = rs.pseudo_up[j], rs.pseudo_down[j]
        ratio = pu / pd if pd > 0 else (0.0 if pu == 0 else SENTINEL)

        if len(rows):
            d = np.sort(deg[rows])
            deg_stats = [d.mean(), d.std(), d.min(), d.max()]
            r = rhs[rows]
            lr = np.sort(np.where(r != 0, coefs / np.where(r != 0, r, 1.0), 0.0))
            lhs_rhs = [lr.max(), lr.min()]
        else:
            deg_stats = [0.0] * 4
            lhs_rhs = [0.0, 0.0]

        feats = [c, max(c, 0.0), max(-c, 0.0), len(coefs), len(pos), len(neg)]
        feats += [x, fl, ce, is_frac]
        feats += [pu, pd, ratio, pu + pd, pu * pd, rs.lp.reduced_costs[j]]
        feats += [lb[j], ub[j]]
        feats += deg_stats + lhs_rhs
        feats += _agg(pos) + _agg(neg)
        feats += _agg(coefs) + _agg(coefs * duals[rows]) + _agg(coefs * inv_sum[rows])
        out[j] = feats
    return FeatureMatrix(out)


def minmax_normalize(F: FeatureMatrix) -> FeatureMatrix:
    """Scale each column to [0, 1] over the variables; constant columns become 0."""
    v = F.values
    lo = v.min(axis=0) if len(v) else np.zeros(v.shape[1])
    hi = v.max(axis=0) if len(v) else np.zeros(v.shape[1])
    rng = hi - lo
    safe = np.where(rng > 0, rng, 1.0)
    out = np.where(rng > 0, (v - lo) / safe, 0.0)
    return FeatureMatrix(np.clip(out, 0.0, 1.0), F.names)


def instance_features(inst: MipInstance, iter_cap: int = 50) -> FeatureMatrix:
    """Normalized features straight from an instance."""
    return minmax_normalize(extract_features(inst, root_stats(inst, iter_cap)))
