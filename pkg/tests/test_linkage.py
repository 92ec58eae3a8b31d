import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import small_instance
from pbdfs.generators import PROBLEMS, UGraph, formulate_misp, gen_graph
from pbdfs.linkage import build_linkage_graph, normalized_laplacian, write_edgelist
from pbdfs.mip import MipInstance, make_instance


def test_two_rows_chain():
    inst = make_instance("c", "min", [1, 1, 1], [([(0, 1), (1, 1)], "le", 1), ([(1, 1), (2, 1)], "le", 1)])
    assert set(build_linkage_graph(inst).edges()) == {(0, 1), (1, 2)}


def test_misp_triangle_adjacency():
    tri = UGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert set(build_linkage_graph(formulate_misp(tri)).edges()) == set(tri.edges)


def test_single_row_clique():
    inst = make_instance("r", "min", [1, 1, 1], [([(0, 1), (1, 2), (2, 3)], "ge", 1)])
    assert set(build_linkage_graph(inst).edges()) == {(0, 1), (0, 2), (1, 2)}


def _dense(inst):
    return normalized_laplacian(build_linkage_graph(inst)).toarray()


def test_laplacian_k2():
    assert np.allclose(_dense(formulate_misp(UGraph.from_edges(2, [(0, 1)]))), [[1, -1], [-1, 1]])


def test_laplacian_p3():
    L = _dense(formulate_misp(UGraph.from_edges(3, [(0, 1), (1, 2)])))
    r = -1 / np.sqrt(2)
    assert np.allclose(L, [[1, r, 0], [r, 1, r], [0, r, 1]])


def test_laplacian_edgeless_identity():
    assert np.array_equal(_dense(formulate_misp(UGraph(3, ()))), np.eye(3))


def test_edgelist(tmp_path):
    g = build_linkage_graph(formulate_misp(UGraph.from_edges(3, [(0, 1), (1, 2)])))
    write_edgelist(g, tmp_path / "e.txt")
    assert (tmp_path / "e.txt").read_text().split("\n")[:2] == ["0 1", "1 2"]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 100), st.integers(1, 6), st.integers(0, 10**6))
def test_misp_linkage_equals_graph(n, aff, seed):
    g = gen_graph(n, aff, seed)
    assert set(build_linkage_graph(formulate_misp(g)).edges()) == set(g.edges)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(PROBLEMS), st.integers(0, 10**6))
def test_symmetry_and_laplacian_rows(problem, seed):
    inst = small_instance(problem, np.random.default_rng(seed), seed, nmax=40)
    g = build_linkage_graph(inst)
    A = g.adjacency().toarray()
    assert np.array_equal(A, A.T) and not np.any(np.diag(A))
    L = normalized_laplacian(g).toarray()
    deg = np.asarray(g.degrees, dtype=float)
    for i, d in enumerate(deg):
        if d >= 1:
            assert L[i, i] == pytest.approx(1.0)
            # L is similar to I - D^-1 A, whose absolute row sums are exactly 2
            assert (np.abs(L[i]) * np.sqrt(deg / d)).sum() == pytest.approx(2.0)
        else:
            assert np.array_equal(L[i], np.eye(len(L))[i])
    ev = np.linalg.eigvalsh(L)
    assert ev.min() >= -1e-9 and ev.max() <= 2 + 1e-9


def test_plain_row_sum_can_exceed_two():
    # the unweighted absolute row sum is not bounded by 2: star center gives 1 + 3/sqrt(3)
    star = formulate_misp(UGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)]))
    L = _dense(star)
    assert np.abs(L[0]).sum() == pytest.approx(1 + np.sqrt(3))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(PROBLEMS), st.integers(0, 10**6))
def test_row_order_irrelevant(problem, seed):
    inst = small_instance(problem, np.random.default_rng(seed), seed, nmax=30)
    rows = list(inst.rows)
    np.random.default_rng(seed).shuffle(rows)
    shuffled = MipInstance(inst.name, inst.sense, inst.nvars, inst.obj, rows)
    assert build_linkage_graph(shuffled) == build_linkage_graph(inst)
