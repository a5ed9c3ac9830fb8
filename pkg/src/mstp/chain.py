"""Sparse finite Markov chains with forward and reverse adjacency.

A chain is stored twice in compressed form: out-edges (row access, used to
sample walks) and in-edges (column access, used by reverse pushes). Both are
built once at load time and never mutated afterwards.
"""

from __future__ import annotations

import math
import os
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

ROW_SUM_TOL = 1e-9


class GraphFormatError(ValueError):
    """Raised for malformed or invalid edge-list input."""


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Row-stochastic transition structure over dense state ids ``0..n-1``.

    ``labels[i]`` is the original node label of state ``i``.
    """

    labels: tuple
    out_indptr: np.ndarray
    out_indices: np.ndarray
    out_weights: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray
    in_weights: np.ndarray
    _label_index: dict = field(repr=False)
    _in_lists: tuple = field(repr=False)
    _step_keys: np.ndarray = field(repr=False)
    _uniform_rows: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return int(self.out_indices.shape[0])

    @property
    def avg_in_degree(self) -> float:
        return self.num_edges / self.n

    def in_degree(self, v: int) -> int:
        return int(self.in_indptr[v + 1] - self.in_indptr[v])

    def out_degree(self, u: int) -> int:
        return int(self.out_indptr[u + 1] - self.out_indptr[u])

    def index_of(self, label) -> int:
        """Dense state id of an original node label."""
        try:
            return self._label_index[label]
        except KeyError:
            raise KeyError(f"unknown state label {label!r}") from None

    def out_neighbors(self, u: int) -> list[tuple[int, float]]:
        lo, hi = self.out_indptr[u], self.out_indptr[u + 1]
        return list(zip(self.out_indices[lo:hi].tolist(), self.out_weights[lo:hi].tolist()))

    def in_neighbors(self, v: int) -> list[tuple[int, float]]:
        """Nonzero entries ``(u, P[u][v])`` of column ``v``."""
        _check_state(self, v)
        return list(self._in_lists[v])

    def transition_matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.out_weights, self.out_indices, self.out_indptr), shape=(self.n, self.n)
        )

    def dense(self) -> np.ndarray:
        return self.transition_matrix().toarray()

    def step(self, u: int, rng: np.random.Generator) -> int:
        _check_state(self, u)
        return int(self.step_many(np.array([u], dtype=np.int64), rng)[0])

    def step_many(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Advance every entry of ``states`` by one transition.

        Consumes exactly ``len(states)`` uniforms from ``rng``.
        """
        lo = self.out_indptr[states]
        hi = self.out_indptr[states + 1] - 1
        u = rng.random(states.shape[0])
        j = lo + (u * (hi - lo + 1)).astype(np.int64)
        weighted = ~self._uniform_rows[states]
        if weighted.any():
            s = states[weighted]
            h = hi[weighted]
            # Row s occupies keys in (s, s + 1]; offsetting by the row id turns
            # a per-row inverse-CDF lookup into one global searchsorted.
            x = s + u[weighted] * (self._step_keys[h] - s)
            j[weighted] = np.searchsorted(self._step_keys, x, side="right")
        np.clip(j, lo, hi, out=j)
        return self.out_indices[j]


def _check_state(chain: MarkovChain, v: int) -> None:
    if not 0 <= v < chain.n:
        raise IndexError(f"state {v} out of range [0, {chain.n})")


def in_neighbors(chain: MarkovChain, v: int) -> list[tuple[int, float]]:
    return chain.in_neighbors(v)


def step(chain: MarkovChain, u: int, rng: np.random.Generator) -> int:
    return chain.step(u, rng)


def _sort_labels(labels: list) -> list:
    if all(isinstance(x, (int, np.integer)) and not isinstance(x, bool) for x in labels):
        return sorted(labels)
    return labels


def build_chain(edges: Iterable[Sequence], *, _lines: Sequence[int] | None = None) -> MarkovChain:
    """Build a chain from ``(src, dst)`` or ``(src, dst, weight)`` tuples.

    Unweighted rows are uniform over their out-neighbors; weighted rows are
    normalized by their row sum. Duplicate ``(src, dst)`` pairs are merged by
    summing weights. States without out-edges get a unit self-loop.

    Integer labels are ordered numerically, so ``0..n-1`` keep their ids;
    any other labels get ids in order of first appearance.
    """
    edges = list(edges)
    if not edges:
        raise GraphFormatError("edge list is empty")

    seen: dict[Hashable, None] = {}
    triples = []
    for pos, e in enumerate(edges):
        where = f"line {_lines[pos]}" if _lines is not None else f"edge {pos}"
        if len(e) == 2:
            src, dst = e
            w = 1.0
        elif len(e) == 3:
            src, dst, w = e
            try:
                w = float(w)
            except (TypeError, ValueError):
                raise GraphFormatError(f"{where}: weight {w!r} is not a number") from None
            if not math.isfinite(w) or w < 0:
                raise GraphFormatError(f"{where}: invalid weight {w!r}")
        else:
            raise GraphFormatError(f"{where}: expected 2 or 3 fields, got {len(e)}")
        seen.setdefault(src)
        seen.setdefault(dst)
        triples.append((src, dst, w, where))

    labels = _sort_labels(list(seen))
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)

    rows: list[dict[int, float]] = [dict() for _ in range(n)]
    has_edge = np.zeros(n, dtype=bool)
    first_line: dict[int, str] = {}
    for src, dst, w, where in triples:
        u, v = index[src], index[dst]
        has_edge[u] = True
        first_line.setdefault(u, where)
        if w > 0:
            rows[u][v] = rows[u].get(v, 0.0) + w

    for u in range(n):
        if not has_edge[u]:
            rows[u][u] = 1.0
        elif not rows[u]:
            raise GraphFormatError(
                f"{first_line[u]}: state {labels[u]!r} has zero total out-weight"
            )

    counts = np.fromiter((len(r) for r in rows), dtype=np.int64, count=n)
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=out_indptr[1:])
    out_indices = np.empty(out_indptr[-1], dtype=np.int64)
    out_weights = np.empty(out_indptr[-1], dtype=np.float64)
    for u, row in enumerate(rows):
        lo = out_indptr[u]
        items = sorted(row.items())
        total = math.fsum(w for _, w in items)
        out_indices[lo : lo + len(items)] = [v for v, _ in items]
        out_weights[lo : lo + len(items)] = [w / total for _, w in items]

    return _assemble(tuple(labels), index, out_indptr, out_indices, out_weights)


def _assemble(labels, index, out_indptr, out_indices, out_weights) -> MarkovChain:
    n = len(labels)
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(out_indptr))
    order = np.lexsort((src, out_indices))
    in_indices = src[order]
    in_weights = out_weights[order]
    in_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(out_indices, minlength=n), out=in_indptr[1:])

    in_lists = tuple(
        tuple(zip(in_indices[in_indptr[v] : in_indptr[v + 1]].tolist(),
                  in_weights[in_indptr[v] : in_indptr[v + 1]].tolist()))
        for v in range(n)
    )

    within = np.empty_like(out_weights)
    for u in range(n):
        lo, hi = out_indptr[u], out_indptr[u + 1]
        within[lo:hi] = np.cumsum(out_weights[lo:hi])
    step_keys = src.astype(np.float64) + within
    deg = np.diff(out_indptr)
    row_max = np.maximum.reduceat(out_weights, out_indptr[:-1]) if n else np.zeros(0)
    row_min = np.minimum.reduceat(out_weights, out_indptr[:-1]) if n else np.zeros(0)
    uniform_rows = (row_max == row_min) & (deg > 0)

    return MarkovChain(
        labels=labels,
        out_indptr=out_indptr,
        out_indices=out_indices,
        out_weights=out_weights,
        in_indptr=in_indptr,
        in_indices=in_indices,
        in_weights=in_weights,
        _label_index=index,
        _in_lists=in_lists,
        _step_keys=step_keys,
        _uniform_rows=uniform_rows,
    )


def chain_from_matrix(P) -> MarkovChain:
    """Wrap a (dense or sparse) row-stochastic matrix; labels are ``0..n-1``."""
    P = sp.csr_matrix(P, dtype=np.float64)
    P.eliminate_zeros()
    P.sort_indices()
    if P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if P.data.size and (P.data.min() < 0 or not np.isfinite(P.data).all()):
        raise ValueError("transition matrix has negative or non-finite entries")
    sums = np.asarray(P.sum(axis=1)).ravel()
    if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
        raise ValueError("transition matrix rows must sum to 1")
    n = P.shape[0]
    labels = tuple(range(n))
    return _assemble(
        labels,
        {i: i for i in labels},
        P.indptr.astype(np.int64),
        P.indices.astype(np.int64),
        P.data.copy(),
    )


def _parse_token(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def read_edge_list(path: str | os.PathLike) -> MarkovChain:
    """Load ``src dst [weight]`` lines; ``#`` lines and blank lines are skipped."""
    edges = []
    lines = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"line {lineno}: expected 'src dst [weight]', got {line!r}")
            edges.append(tuple(parts))
            lines.append(lineno)
    if not edges:
        raise GraphFormatError(f"{path}: no edges found")

    # Labels are integers only if every label token parses as one.
    labels = [p for e in edges for p in e[:2]]
    as_int = all(_parse_token(x).__class__ is int for x in labels)
    conv = _parse_token if as_int else str
    parsed = [
        (conv(e[0]), conv(e[1])) if len(e) == 2 else (conv(e[0]), conv(e[1]), e[2])
        for e in edges
    ]
    if any(len(e) == 3 for e in parsed):
        parsed = [e if len(e) == 3 else (e[0], e[1], 1.0) for e in parsed]
    return build_chain(parsed, _lines=lines)


def write_edge_list(path: str | os.PathLike, edges: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in edges:
            fh.write(" ".join(str(x) for x in e) + "\n")


class SourceDistribution:
    """Sparse probability vector over states."""

    def __init__(self, entries):
        if isinstance(entries, dict):
            entries = list(entries.items())
        states = [int(s) for s, _ in entries]
        probs = [float(p) for _, p in entries]
        if not states:
            raise ValueError("source distribution is empty")
        if len(set(states)) != len(states):
            raise ValueError("duplicate states in source distribution")
        if any(not (p > 0 and math.isfinite(p)) for p in probs):
            raise ValueError("source probabilities must be strictly positive")
        if abs(math.fsum(probs) - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"source probabilities sum to {math.fsum(probs)!r}, not 1")
        self.states = np.asarray(states, dtype=np.int64)
        self.probs = np.asarray(probs, dtype=np.float64)
        self._cum = np.cumsum(self.probs)

    @classmethod
    def point(cls, s: int) -> "SourceDistribution":
        return cls([(s, 1.0)])

    @classmethod
    def uniform(cls, n: int) -> "SourceDistribution":
        return cls([(s, 1.0 / n) for s in range(n)])

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.states.tolist(), self.probs.tolist()))

    def dense(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[self.states] = self.probs
        return x

    def dot(self, vec: dict[int, float]) -> float:
        """Inner product with a sparse ``{state: value}`` vector."""
        return math.fsum(p * vec.get(s, 0.0) for s, p in zip(self.states.tolist(), self.probs.tolist()))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.states.shape[0] == 1:
            rng.random(size)  # keep stream consumption independent of support size
            return np.full(size, self.states[0], dtype=np.int64)
        j = np.searchsorted(self._cum, rng.random(size) * self._cum[-1], side="right")
        np.clip(j, 0, self.states.shape[0] - 1, out=j)
        return self.states[j]

    def validate_for(self, chain: MarkovChain) -> None:
        if self.states.min() < 0 or self.states.max() >= chain.n:
            raise IndexError("source distribution references a state outside the chain")

    def __repr__(self) -> str:
        return f"SourceDistribution({self.entries!r})"
