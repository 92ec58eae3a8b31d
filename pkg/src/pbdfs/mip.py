"""Binary MIP instances: representation, evaluation, feasibility and JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

FORMAT_VERSION = 1
FREE = -1
RELATIONS = ("le", "ge", "eq")
SENSES = ("min", "max")
FEAS_TOL = 1e-6


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""


@dataclass(frozen=True)
class ConstraintRow:
    """One linear row ``sum(val * x[col]) rel rhs`` with sparse coefficients."""

    coefs: tuple[tuple[int, float], ...]
    rel: str
    rhs: float

    @classmethod
    def make(cls, pairs: Iterable[tuple[int, float]], rel: str, rhs: float) -> "ConstraintRow":
        """Build a row from unsorted pairs, dropping explicit zeros."""
        coefs = tuple(sorted((int(j), float(v)) for j, v in pairs if v != 0))
        return cls(coefs, rel, float(rhs))

    @property
    def cols(self) -> list[int]:
        return [j for j, _ in self.coefs]

    @property
    def vals(self) -> list[float]:
        return [v for _, v in self.coefs]

    def activity(self, x: np.ndarray) -> float:
        return float(sum(v * x[j] for j, v in self.coefs))

    def holds(self, lhs: float, tol: float = FEAS_TOL) -> bool:
        if self.rel == "le":
            return lhs <= self.rhs + tol
        if self.rel == "ge":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass(eq=False)
class MipInstance:
    """A binary MIP ``opt obj @ x  s.t. rows`` with every variable in {0, 1}."""

    name: str
    sense: str
    nvars: int
    obj: np.ndarray
    rows: list[ConstraintRow] = field(default_factory=list)

    def __post_init__(self):
        self.obj = np.asarray(self.obj, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, MipInstance):
            return NotImplemented
        return (
            self.name == other.name
            and self.sense == other.sense
            and self.nvars == other.nvars
            and np.array_equal(self.obj, other.obj)
            and self.rows == other.rows
        )

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def maximize(self) -> bool:
        return self.sense == "max"

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix A as CSR (m x n)."""
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for row in self.rows:
            for j, v in row.coefs:
                indices.append(j)
                data.append(v)
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
            shape=(len(self.rows), self.nvars),
        )

    @cached_property
    def integral_objective(self) -> bool:
        """True when every objective coefficient is an integer, so objective values are too."""
        return bool(np.all(self.obj == np.round(self.obj)))


def free_assignment(n: int) -> np.ndarray:
    """An assignment with every variable free."""
    return np.full(n, FREE, dtype=np.int8)


def is_complete(a: np.ndarray) -> bool:
    return bool(np.all(np.asarray(a) != FREE))


def _require_complete(inst: MipInstance, a) -> np.ndarray:
    a = np.asarray(a)
    if a.shape != (inst.nvars,):
        raise ValueError(f"assignment length {a.shape} does not match nvars={inst.nvars}")
    if not is_complete(a):
        raise ValueError("assignment has free variables")
    return a.astype(float)


def validate(inst: MipInstance) -> list[str]:
    """Return every structural problem found in ``inst``; an empty list means ok."""
    errors = []
    if inst.nvars < 1:
        errors.append(f"nvars must be >= 1, got {inst.nvars}")
    if inst.sense not in SENSES:
        errors.append(f"unknown sense {inst.sense!r}")
    if inst.obj.shape != (inst.nvars,):
        errors.append(f"obj has shape {inst.obj.shape}, expected ({inst.nvars},)")
    elif not np.all(np.isfinite(inst.obj)):
        errors.append("obj has non-finite entries")
    for i, row in enumerate(inst.rows):
        if row.rel not in RELATIONS:
            errors.append(f"row {i}: unknown relation {row.rel!r}")
        if not math.isfinite(row.rhs):
            errors.append(f"row {i}: non-finite rhs")
        cols = row.cols
        seen = set()
        for j in cols:
            if not 0 <= j < inst.nvars:
                errors.append(f"row {i}: column out of range ({j})")
            if j in seen:
                errors.append(f"row {i}: duplicate column ({j})")
            seen.add(j)
        if cols != sorted(cols):
            errors.append(f"row {i}: coefficients not sorted by column")
        for j, v in row.coefs:
            if v == 0:
                errors.append(f"row {i}: stored zero coefficient at column {j}")
            elif not math.isfinite(v):
                errors.append(f"row {i}: non-finite coefficient at column {j}")
    return errors


def objective_value(inst: MipInstance, a) -> float:
    """``obj @ a`` for a complete assignment, summed exactly (order-independent)."""
    x = _require_complete(inst, a)
    return math.fsum(inst.obj[x != 0] * x[x != 0])


def check_feasible(inst: MipInstance, a, tol: float = FEAS_TOL) -> tuple[bool, list[int]]:
    """Check every row against a complete 0/1 assignment.

    Returns ``(ok, violated)`` where ``violated`` lists row indices in order.
    """
    x = _require_complete(inst, a)
    violated = [i for i, row in enumerate(inst.rows) if not row.holds(row.activity(x), tol)]
    return not violated, violated


# -- JSON file format -------------------------------------------------------


def instance_to_dict(inst: MipInstance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "name": inst.name,
        "sense": inst.sense,
        "nvars": inst.nvars,
        "obj": [float(c) for c in inst.obj],
        "rows": [
            {"coefs": [[j, v] for j, v in row.coefs], "rel": row.rel, "rhs": row.rhs}
            for row in inst.rows
        ],
    }


def instance_from_dict(d: dict) -> MipInstance:
    try:
        version = d.get("version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise InstanceFormatError(f"unsupported instance version {version}")
        sense = d["sense"]
        if sense not in SENSES:
            raise InstanceFormatError(f"unknown sense {sense!r}")
        rows = []
        for k, r in enumerate(d["rows"]):
            if r["rel"] not in RELATIONS:
                raise InstanceFormatError(f"row {k}: unknown relation {r['rel']!r}")
            coefs = tuple((int(j), float(v)) for j, v in r["coefs"])
            rows.append(ConstraintRow(coefs, r["rel"], float(r["rhs"])))
        inst = MipInstance(str(d["name"]), sense, int(d["nvars"]), np.array(d["obj"], dtype=float), rows)
    except InstanceFormatError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InstanceFormatError(f"malformed instance: {exc}") from exc
    errors = validate(inst)
    if errors:
        raise InstanceFormatError("; ".join(errors))
    return inst


def write_instance(inst: MipInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst)) + "\n", encoding="utf-8")


def read_instance(path) -> MipInstance:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise InstanceFormatError(f"{path}: top level must be an object")
    return instance_from_dict(d)


def make_instance(name: str, sense: str, obj: Sequence[float], rows: Iterable[tuple]) -> MipInstance:
    """Convenience constructor: ``rows`` holds ``(pairs, rel, rhs)`` triples."""
    obj = np.asarray(obj, dtype=float)
    return MipInstance(name, sense, len(obj), obj, [ConstraintRow.make(p, rel, rhs) for p, rel, rhs in rows])
