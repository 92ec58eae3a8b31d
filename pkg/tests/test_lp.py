import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from oracles import brute_force, random_lp_instance, small_instance
from pbdfs.generators import PROBLEMS, UGraph, formulate_misp, formulate_vcp
from pbdfs.lp import lp_relax
from pbdfs.mip import FREE, make_instance, objective_value

EDGE = UGraph.from_edges(2, [(0, 1)])
TRIANGLE = UGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def test_triangle_vcp():
    r = lp_relax(formulate_vcp(TRIANGLE))
    assert r.optimal
    assert r.objective == pytest.approx(1.5, abs=1e-9)
    assert np.allclose(r.primal, 0.5)


def test_single_edge_misp():
    assert lp_relax(formulate_misp(EDGE)).objective == pytest.approx(1.0, abs=1e-9)


def test_fixed_infeasible():
    r = lp_relax(formulate_vcp(EDGE), np.array([0, 0], dtype=np.int8))
    assert r.status == "infeasible" and not r.optimal


def test_five_cycle_misp():
    g = UGraph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    assert lp_relax(formulate_misp(g)).objective == pytest.approx(2.5, abs=1e-9)


def test_no_rows_takes_best_bound():
    r = lp_relax(make_instance("b", "max", [3, -2, 0.5], []))
    assert np.allclose(r.primal, [1, 0, 1]) and r.objective == pytest.approx(3.5)


def test_iteration_cap_reports_status():
    inst, _ = __import__("pbdfs.generators", fromlist=["generate"]).generate("vcp", (60, 0), 1)
    r = lp_relax(inst, iter_cap=1)
    assert r.status == "iteration_limit" and not r.optimal


def _highs(inst, fixings):
    A = inst.matrix.toarray()
    aub, bub, aeq, beq = [], [], [], []
    for i, row in enumerate(inst.rows):
        if row.rel == "le":
            aub.append(A[i]); bub.append(row.rhs)
        elif row.rel == "ge":
            aub.append(-A[i]); bub.append(-row.rhs)
        else:
            aeq.append(A[i]); beq.append(row.rhs)
    bounds = [(float(f), float(f)) if f != FREE else (0.0, 1.0) for f in fixings]
    sgn = -1.0 if inst.maximize else 1.0
    s = linprog(sgn * inst.obj, A_ub=np.array(aub) if aub else None, b_ub=bub or None,
                A_eq=np.array(aeq) if aeq else None, b_eq=beq or None, bounds=bounds, method="highs")
    return None if s.status == 2 else sgn * s.fun


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_highs_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    inst = random_lp_instance(rng)
    fx = np.full(inst.nvars, FREE, dtype=np.int8)
    mask = rng.random(inst.nvars) < 0.3
    fx[mask] = rng.integers(0, 2, mask.sum())
    ref = _highs(inst, fx)
    r = lp_relax(inst, fx)
    if ref is None:
        assert r.status == "infeasible"
        return
    assert r.optimal
    assert r.objective == pytest.approx(ref, abs=1e-6)
    for row in inst.rows:
        assert row.holds(row.activity(r.primal), 1e-6)
    assert np.all(r.primal >= -1e-9) and np.all(r.primal <= 1 + 1e-9)
    assert np.allclose(inst.obj, inst.matrix.T @ r.duals + r.reduced_costs)


def _lagrangian_bound(inst, r):
    """Objective of the Lagrangian dual at the reported multipliers (valid bound only when signs are right)."""
    sgn = -1.0 if inst.maximize else 1.0
    y = sgn * r.duals
    d = sgn * r.reduced_costs
    for row, yi in zip(inst.rows, y):
        if row.rel == "le":
            assert yi <= 1e-9
        elif row.rel == "ge":
            assert yi >= -1e-9
    rhs = np.array([row.rhs for row in inst.rows])
    return sgn * (float(rhs @ y) + float(np.minimum(d, 0.0).sum()))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duals_certify_optimality(seed):
    # rows with a single entry are folded into bounds and carry no multiplier, so exclude them
    rng = np.random.default_rng(seed)
    inst = random_lp_instance(rng)
    if any(len(row.coefs) < 2 for row in inst.rows):
        return
    r = lp_relax(inst)
    if not r.optimal:
        return
    assert _lagrangian_bound(inst, r) == pytest.approx(r.objective, abs=1e-6)


@pytest.mark.parametrize("problem", ["misp", "vcp", "cap"])
def test_duals_certify_generated(problem):
    rng = np.random.default_rng(5)
    for s in range(10):
        inst = small_instance(problem, rng, s, nmax=30)
        if any(len(row.coefs) < 2 for row in inst.rows):
            continue
        r = lp_relax(inst)
        assert _lagrangian_bound(inst, r) == pytest.approx(r.objective, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(PROBLEMS), st.integers(0, 10**6))
def test_relaxation_bounds_integer_optimum(problem, seed):
    inst = small_instance(problem, np.random.default_rng(seed), seed, nmax=12)
    opt, sol = brute_force(inst)
    r = lp_relax(inst)
    if opt is None:
        return
    if inst.maximize:
        assert r.objective >= opt - 1e-6
    else:
        assert r.objective <= opt + 1e-6
    full = lp_relax(inst, sol)
    assert full.optimal
    assert full.objective == pytest.approx(objective_value(inst, sol), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deterministic(seed):
    rng = np.random.default_rng(seed)
    inst = random_lp_instance(rng)
    fx = np.where(rng.random(inst.nvars) < 0.2, 1, FREE).astype(np.int8)
    a, b = lp_relax(inst, fx), lp_relax(inst, fx)
    assert a.status == b.status and a.iterations == b.iterations
    for f in ("primal", "duals", "reduced_costs"):
        assert np.array_equal(getattr(a, f), getattr(b, f), equal_nan=True)
    assert a.objective == b.objective or (np.isnan(a.objective) and np.isnan(b.objective))
