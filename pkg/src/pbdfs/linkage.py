"""Variable linkage graph of a MIP and its symmetric normalized Laplacian."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mip import MipInstance


@dataclass(frozen=True)
class LinkageGraph:
    """Graph over decision variables; ``neighbors[i]`` is sorted."""

    nnodes: int
    neighbors: tuple[tuple[int, ...], ...]

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    def edges(self) -> set[tuple[int, int]]:
        return {(u, v) for u, nb in enumerate(self.neighbors) for v in nb if u < v}

    def adjacency(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.nnodes), self.degrees)
        cols = np.fromiter((v for nb in self.neighbors for v in nb), dtype=np.int64, count=int(self.degrees.sum()))
        data = np.ones(len(cols))
        return sp.csr_matrix((data, (rows, cols)), shape=(self.nnodes, self.nnodes))


def build_linkage_graph(inst: MipInstance) -> LinkageGraph:
    """Connect every pair of variables that share a constraint row."""
    nbrs: list[set[int]] = [set() for _ in range(inst.nvars)]
    for row in inst.rows:
        cols = [j for j, v in row.coefs if v != 0]
        for k in cols:
            nbrs[k].update(cols)
    for i, s in enumerate(nbrs):
        s.discard(i)
    return LinkageGraph(inst.nvars, tuple(tuple(sorted(s)) for s in nbrs))


def normalized_laplacian(g: LinkageGraph) -> sp.csr_matrix:
    """``I - D^-1/2 A D^-1/2``; isolated nodes get ``D^-1/2 = 0`` (an identity row)."""
    adj = g.adjacency()
    deg = g.degrees.astype(float)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    scale = sp.diags(inv_sqrt)
    lap = sp.identity(g.nnodes, format="csr") - scale @ adj @ scale
    return sp.csr_matrix(lap)


def write_edgelist(g: LinkageGraph, path) -> None:
    lines = [f"{u} {v}" for u, v in sorted(g.edges())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
