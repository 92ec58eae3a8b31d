"""LP-based tree search over binary MIPs.

``pb_dfs`` runs probabilistic branching with a guided depth-first node order,
``baseline_dfs`` is the same engine with index-order branching, and
``solve_exact`` is a best-bound branch-and-bound used to label training data.
All searches minimize internally and report objectives in the instance's sense.
"""
from __future__ import annotations

import csv
import heapq
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .lp import lp_relax
from .mip import FREE, MipInstance, check_feasible, free_assignment, objective_value

INT_TOL = 1e-6
BOUND_TOL = 1e-6
VARIANTS = ("max", "p", "one_minus_p")
_VARIANT_ALIASES = {"max_p_1mp": "max", "1-p": "one_minus_p"}


@dataclass(frozen=True)
class Termination:
    """When a search stops: ``first_feasible``, ``time_limit``, ``node_limit`` or ``none``."""

    kind: str = "first_feasible"
    limit: float | None = None

    @classmethod
    def first_feasible(cls):
        return cls("first_feasible")

    @classmethod
    def time_limit(cls, seconds: float):
        return cls("time_limit", float(seconds))

    @classmethod
    def node_limit(cls, nodes: int):
        return cls("node_limit", int(nodes))

    @classmethod
    def exhaustive(cls):
        return cls("none")

    @classmethod
    def parse(cls, text: str) -> "Termination":
        """``first_feasible``, ``time:SECONDS``, ``nodes:COUNT`` or ``none``."""
        if text in ("first_feasible", "none"):
            return cls(text)
        kind, _, val = text.partition(":")
        if kind == "time" and val:
            return cls.time_limit(float(val))
        if kind == "nodes" and val:
            return cls.node_limit(int(val))
        raise ValueError(f"bad termination {text!r}")

    def __str__(self):
        if self.kind == "time_limit":
            return f"time:{self.limit:g}"
        if self.kind == "node_limit":
            return f"nodes:{int(self.limit)}"
        return self.kind


@dataclass
class Incumbent:
    solution: np.ndarray
    objective: float
    found_at: float


@dataclass
class TrajectoryEvent:
    time: float
    objective: float
    event: str
    solution: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass
class Trajectory:
    events: list[TrajectoryEvent] = field(default_factory=list)

    def __len__(self):
        return len(self.events)

    def incumbents(self) -> list[TrajectoryEvent]:
        return [e for e in self.events if e.event == "incumbent"]

    def is_strictly_improving(self, maximize: bool) -> bool:
        objs = [e.objective for e in self.incumbents()]
        times = [e.time for e in self.events]
        better = (lambda a, b: b > a) if maximize else (lambda a, b: b < a)
        return all(better(a, b) for a, b in zip(objs, objs[1:])) and times == sorted(times)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "objective", "event"])
            for e in self.events:
                w.writerow([f"{e.time:.3f}", repr(float(e.objective)), e.event])

    @classmethod
    def read_csv(cls, path) -> "Trajectory":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([TrajectoryEvent(float(r["time_s"]), float(r["objective"]), r["event"]) for r in rows])


@dataclass
class SearchStats:
    nodes: int = 0
    lp_solves: int = 0
    backtracks: int = 0
    best_objective: float | None = None
    best_time_s: float | None = None
    proved_optimal: bool = False
    wall_time_s: float = 0.0
    pruned_infeasible: int = 0
    pruned_bound: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


@dataclass
class SearchResult:
    incumbent: Incumbent | None
    trajectory: Trajectory
    stats: SearchStats


def _variant(v: str) -> str:
    v = _VARIANT_ALIASES.get(v, v)
    if v not in VARIANTS:
        raise ValueError(f"unknown score variant {v!r}; expected one of {VARIANTS}")
    return v


def score(p, variant: str = "max") -> np.ndarray:
    """Branching score per variable: ``max(p, 1-p)``, ``p`` or ``1-p``."""
    p = np.asarray(p, dtype=float)
    v = _variant(variant)
    if v == "max":
        return np.maximum(p, 1.0 - p)
    if v == "p":
        return p.copy()
    return 1.0 - p


def select_branch_var(z, candidates) -> int:
    """Highest-scoring candidate; ties go to the lowest index."""
    cand = np.sort(np.asarray(candidates, dtype=np.int64))
    if len(cand) == 0:
        raise ValueError("no candidate variables to branch on")
    return int(cand[np.argmax(np.asarray(z)[cand])])


def preferred_child(p_i: float, variant: str = "max") -> int:
    v = _variant(variant)
    if v == "p":
        return 1
    if v == "one_minus_p":
        return 0
    return 1 if p_i >= 0.5 else 0


def _is_integral(x) -> bool:
    return bool(np.all(np.abs(x - np.round(x)) <= INT_TOL))


def _node_bound(inst: MipInstance, internal_obj: float) -> float:
    if inst.integral_objective:
        return math.ceil(internal_obj - BOUND_TOL)
    return internal_obj


def _guided_dfs(inst: MipInstance, z: np.ndarray, pref: np.ndarray, term: Termination, trace=None) -> SearchResult:
    """Depth-first search that always resumes at the deepest open node (LIFO among equals)."""
    sgn = -1.0 if inst.maximize else 1.0
    start = time.perf_counter()
    stats = SearchStats()
    traj = Trajectory()
    best: Incumbent | None = None
    best_internal = math.inf
    counter = 0
    heap = [(0, 0, free_assignment(inst.nvars))]
    expected = 0
    stopped = False

    while heap:
        elapsed = time.perf_counter() - start
        if term.kind == "time_limit" and elapsed >= term.limit:
            stopped = True
            break
        if term.kind == "node_limit" and stats.nodes >= term.limit:
            stopped = True
            break
        _, cid, fix = heapq.heappop(heap)
        if expected is not None and cid != expected:
            stats.backtracks += 1
        expected = None
        depth = int(np.count_nonzero(fix != FREE))

        lp = lp_relax(inst, fix)
        stats.nodes += 1
        stats.lp_solves += 1
        if not lp.optimal:
            stats.pruned_infeasible += 1
            continue
        bound = _node_bound(inst, sgn * lp.objective)
        if bound >= best_internal - BOUND_TOL:
            stats.pruned_bound += 1
            continue
        if _is_integral(lp.primal):
            sol = np.round(lp.primal).astype(np.int8)
            if check_feasible(inst, sol)[0]:
                obj = objective_value(inst, sol)
                if sgn * obj < best_internal - BOUND_TOL:
                    t = time.perf_counter() - start
                    best = Incumbent(sol, obj, t)
                    best_internal = sgn * obj
                    traj.events.append(TrajectoryEvent(t, obj, "incumbent", sol))
                    if term.kind == "first_feasible":
                        stopped = True
                        break
                continue
        if trace is not None:
            trace.append((depth, bound, best_internal))
        cand = np.flatnonzero(fix == FREE)
        i = select_branch_var(z, cand)
        first = int(pref[i])
        for val in (1 - first, first):
            child = fix.copy()
            child[i] = val
            counter += 1
            heapq.heappush(heap, (-(depth + 1), -counter, child))
        expected = -counter

    stats.wall_time_s = time.perf_counter() - start
    stats.proved_optimal = not stopped and not heap
    if best is not None:
        stats.best_objective = best.objective
        stats.best_time_s = best.found_at
        traj.events.append(TrajectoryEvent(max(stats.wall_time_s, best.found_at), best.objective, "end"))
    return SearchResult(best, traj, stats)


def pb_dfs(inst: MipInstance, probs, variant: str = "max", term: Termination | None = None, trace=None) -> SearchResult:
    """Probabilistic branching with guided DFS.

    Branches on the unfixed variable with the highest score and explores the
    child that agrees with the prediction first.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (inst.nvars,):
        raise ValueError(f"probability vector has shape {p.shape}, expected ({inst.nvars},)")
    v = _variant(variant)
    pref = np.array([preferred_child(pi, v) for pi in p], dtype=np.int8)
    return _guided_dfs(inst, score(p, v), pref, term or Termination.first_feasible(), trace)


def baseline_dfs(inst: MipInstance, term: Termination | None = None, trace=None) -> SearchResult:
    """Same engine as ``pb_dfs`` with lowest-index branching and the 1-child first."""
    n = inst.nvars
    return _guided_dfs(inst, np.zeros(n), np.ones(n, dtype=np.int8), term or Termination.first_feasible(), trace)


@dataclass
class ExactResult:
    solution: np.ndarray | None
    objective: float | None
    proved_optimal: bool
    stats: SearchStats


def solve_exact(inst: MipInstance, node_limit: int | None = None, time_limit: float | None = None) -> ExactResult:
    """Best-bound branch-and-bound with most-fractional branching.

    Without limits the result is provably optimal (or proves infeasibility
    when ``solution`` is None).  Hitting a limit returns the best solution
    found so far with ``proved_optimal=False``.
    """
    sgn = -1.0 if inst.maximize else 1.0
    start = time.perf_counter()
    stats = SearchStats()
    best_sol = None
    best_internal = math.inf
    counter = 0
    heap = [(-math.inf, 0, free_assignment(inst.nvars))]
    stopped = False
    while heap:
        if node_limit is not None and stats.nodes >= node_limit:
            stopped = True
            break
        if time_limit is not None and time.perf_counter() - start >= time_limit:
            stopped = True
            break
        parent_bound, _, fix = heapq.heappop(heap)
        if parent_bound >= best_internal - BOUND_TOL:
            stats.pruned_bound += 1
            continue
        lp = lp_relax(inst, fix)
        stats.nodes += 1
        stats.lp_solves += 1
        if not lp.optimal:
            stats.pruned_infeasible += 1
            continue
        bound = _node_bound(inst, sgn * lp.objective)
        if bound >= best_internal - BOUND_TOL:
            stats.pruned_bound += 1
            continue
        x = lp.primal
        if _is_integral(x):
            sol = np.round(x).astype(np.int8)
            if check_feasible(inst, sol)[0]:
                obj = objective_value(inst, sol)
                if sgn * obj < best_internal - BOUND_TOL:
                    best_sol, best_internal = sol, sgn * obj
                    stats.best_objective = obj
                    stats.best_time_s = time.perf_counter() - start
                continue
        frac = np.minimum(x - np.floor(x), np.ceil(x) - x)
        frac[fix != FREE] = -1.0
        i = int(np.argmax(frac))
        for val in (0, 1):
            child = fix.copy()
            child[i] = val
            counter += 1
            heapq.heappush(heap, (bound, counter, child))
    stats.wall_time_s = time.perf_counter() - start
    stats.proved_optimal = not stopped
    return ExactResult(best_sol, stats.best_objective, stats.proved_optimal, stats)


def lp_rounding(inst: MipInstance) -> Incumbent | None:
    """Round the root LP solution to the nearest integers (0.5 goes up); keep it only if feasible."""
    start = time.perf_counter()
    lp = lp_relax(inst)
    if not lp.optimal:
        return None
    sol = np.floor(lp.primal + 0.5 + 1e-9).astype(np.int8)
    if not check_feasible(inst, sol)[0]:
        return None
    return Incumbent(sol, objective_value(inst, sol), time.perf_counter() - start)
