"""Random graphs and the four benchmark problem families as binary MIPs.

MISP, DSP and VCP are formulated on Erdos-Renyi graphs; CAP instances come
from a small correlated-bundle bid generator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .mip import ConstraintRow, MipInstance

PROBLEMS = ("misp", "dsp", "vcp", "cap")


@dataclass(frozen=True)
class UGraph:
    """Undirected simple graph; ``edges`` are ``(u, v)`` pairs with ``u < v``, sorted."""

    nnodes: int
    edges: tuple[tuple[int, int], ...]

    @classmethod
    def from_edges(cls, nnodes: int, edges: Iterable[tuple[int, int]]) -> "UGraph":
        norm = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < nnodes and 0 <= v < nnodes):
                raise ValueError(f"edge ({u}, {v}) out of range for {nnodes} nodes")
            norm.add((min(u, v), max(u, v)))
        return cls(nnodes, tuple(sorted(norm)))

    def neighbors(self) -> list[list[int]]:
        nb: list[list[int]] = [[] for _ in range(self.nnodes)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return [sorted(x) for x in nb]


@dataclass(frozen=True)
class CapBid:
    bundle: tuple[int, ...]
    price: float


def gen_graph(n: int, affinity: int, seed: int) -> UGraph:
    """Erdos-Renyi graph where each pair appears with probability ``min(1, affinity / (n - 1))``."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if affinity < 1:
        raise ValueError(f"affinity must be >= 1, got {affinity}")
    p = min(1.0, affinity / (n - 1))
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = tuple(zip(iu[keep].tolist(), ju[keep].tolist()))
    return UGraph(n, edges)


def formulate_misp(g: UGraph, name: str = "misp") -> MipInstance:
    rows = [ConstraintRow(((u, 1.0), (v, 1.0)), "le", 1.0) for u, v in g.edges]
    return MipInstance(name, "max", g.nnodes, np.ones(g.nnodes), rows)


def formulate_dsp(g: UGraph, name: str = "dsp") -> MipInstance:
    rows = [
        ConstraintRow(tuple((u, 1.0) for u in sorted([v, *nb])), "ge", 1.0)
        for v, nb in enumerate(g.neighbors())
    ]
    return MipInstance(name, "min", g.nnodes, np.ones(g.nnodes), rows)


def formulate_vcp(g: UGraph, name: str = "vcp") -> MipInstance:
    rows = [ConstraintRow(((u, 1.0), (v, 1.0)), "ge", 1.0) for u, v in g.edges]
    return MipInstance(name, "min", g.nnodes, np.ones(g.nnodes), rows)


def gen_cap_bids(n_items: int, n_bids: int, seed: int, mean_bundle: float = 5.0) -> list[CapBid]:
    """Correlated bundles from weighted random walks over an item-compatibility matrix.

    Each bundle starts at a uniform item and keeps adding the next item with
    probability ``1 - 1/mean_bundle``; the next item is drawn among unused
    items in proportion to its compatibility with the last one added.
    Prices are ``10 * |bundle| * (1 + U(-0.2, 0.2))``.
    """
    if n_items < 1 or n_bids < 1:
        raise ValueError("n_items and n_bids must be >= 1")
    rng = np.random.default_rng(seed)
    compat = rng.random((n_items, n_items))
    compat = (compat + compat.T) / 2
    np.fill_diagonal(compat, 0.0)
    stop_p = 1.0 / mean_bundle
    bids = []
    for _ in range(n_bids):
        cur = int(rng.integers(n_items))
        bundle = [cur]
        used = np.zeros(n_items, dtype=bool)
        used[cur] = True
        while len(bundle) < n_items and rng.random() >= stop_p:
            w = np.where(used, 0.0, compat[cur])
            total = w.sum()
            if total <= 0:
                w = (~used).astype(float)
                total = w.sum()
            cur = int(rng.choice(n_items, p=w / total))
            used[cur] = True
            bundle.append(cur)
        price = 10.0 * len(bundle) * (1.0 + rng.uniform(-0.2, 0.2))
        bids.append(CapBid(tuple(sorted(bundle)), float(price)))
    return bids


def formulate_cap(bids: list[CapBid], n_items: int, name: str = "cap") -> MipInstance:
    """Winner determination: each item sold at most once, maximize revenue."""
    holders: list[list[int]] = [[] for _ in range(n_items)]
    for i, bid in enumerate(bids):
        if not bid.bundle:
            raise ValueError(f"bid {i} has an empty bundle")
        if bid.price <= 0:
            raise ValueError(f"bid {i} has non-positive price")
        for j in bid.bundle:
            holders[j].append(i)
    rows = [ConstraintRow(tuple((i, 1.0) for i in h), "le", 1.0) for h in holders if h]
    return MipInstance(name, "max", len(bids), np.array([b.price for b in bids]), rows)


def gen_cap(n_items: int, n_bids: int, seed: int, name: str = "cap") -> MipInstance:
    return formulate_cap(gen_cap_bids(n_items, n_bids, seed), n_items, name=name)


def generate(problem: str, size: tuple[int, int], seed: int, affinity: int = 4) -> tuple[MipInstance, dict]:
    """One instance of ``problem`` plus its sidecar metadata.

    ``size`` is ``(nodes, 0)`` for graph problems and ``(items, bids)`` for CAP.
    """
    name = f"{problem}-{seed}"
    if problem == "cap":
        n_items, n_bids = size
        inst = gen_cap(n_items, n_bids, seed, name=name)
        params = {"n_items": n_items, "n_bids": n_bids}
    elif problem in ("misp", "dsp", "vcp"):
        n = size[0]
        g = gen_graph(n, affinity, seed)
        inst = {"misp": formulate_misp, "dsp": formulate_dsp, "vcp": formulate_vcp}[problem](g, name=name)
        params = {"n": n, "affinity": affinity, "nedges": len(g.edges)}
    else:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    meta = {"generator": problem, "params": params, "seed": seed}
    return inst, meta
