"""Synthetic graphs and chains for tests and benchmarks."""

from __future__ import annotations

import networkx as nx
import numpy as np

from .chain import MarkovChain, build_chain, chain_from_matrix

MODELS = ("regular", "er", "powerlaw")


def random_regular_edges(n: int, d: int, seed: int = 0) -> list[tuple[int, int]]:
    """Both directions of every edge of a random undirected d-regular graph."""
    g = nx.random_regular_graph(d, n, seed=seed)
    edges = [(u, v) for u, v in g.edges()] + [(v, u) for u, v in g.edges()]
    return sorted(edges)


def erdos_renyi_edges(n: int, avg_degree: float, seed: int = 0) -> list[tuple[int, int]]:
    """Directed G(n, p) with ``p = avg_degree / (n - 1)``, no self-loops."""
    rng = np.random.default_rng(seed)
    p = avg_degree / (n - 1)
    edges = []
    for u in range(n):
        nbrs = np.flatnonzero(rng.random(n) < p)
        edges.extend((u, int(v)) for v in nbrs if v != u)
    return edges


def power_law_edges(n: int, min_degree: int = 3, exponent: float = 2.5, seed: int = 0
                    ) -> list[tuple[int, int]]:
    """Directed graph with Pareto-distributed out-degrees.

    Out-degree of each node is ``floor(min_degree * U^(-1/(exponent-1)))``
    capped at ``n - 1``; destinations are distinct and uniform.
    """
    rng = np.random.default_rng(seed)
    deg = np.floor(min_degree * rng.random(n) ** (-1.0 / (exponent - 1))).astype(np.int64)
    np.clip(deg, 1, n - 1, out=deg)
    edges = []
    for u in range(n):
        nbrs = rng.choice(n - 1, size=deg[u], replace=False)
        nbrs[nbrs >= u] += 1
        edges.extend((u, int(v)) for v in np.sort(nbrs))
    return edges


def synthetic_edges(model: str, n: int, degree: float, seed: int = 0):
    if model == "regular":
        return random_regular_edges(n, int(degree), seed)
    if model == "er":
        return erdos_renyi_edges(n, degree, seed)
    if model == "powerlaw":
        return power_law_edges(n, max(1, int(degree)), seed=seed)
    raise ValueError(f"unknown graph model {model!r}; choose from {MODELS}")


def synthetic_chain(model: str, n: int, degree: float, seed: int = 0) -> MarkovChain:
    return build_chain(synthetic_edges(model, n, degree, seed))


def random_chain(n: int, rng: np.random.Generator, max_out: int | None = None,
                 self_loops: bool = True) -> MarkovChain:
    """Random weighted chain; every row has between 1 and ``max_out`` entries."""
    max_out = n if max_out is None else min(max_out, n)
    P = np.zeros((n, n))
    for u in range(n):
        k = int(rng.integers(1, max_out + 1))
        cols = rng.choice(n, size=k, replace=False)
        if not self_loops and k < n:
            cols = np.where(cols == u, (u + 1) % n, cols)
            cols = np.unique(cols)
        P[u, cols] = rng.random(len(cols)) + 0.05
        P[u] /= P[u].sum()
    return chain_from_matrix(P)
