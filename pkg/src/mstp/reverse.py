"""Reverse local push from a target state.

For a target ``t`` the workspace keeps, per walk length ``k``, an estimate
vector ``q[k]`` (settled path mass into ``t``) and a residual vector ``r[k]``
(unsettled mass). Every push preserves, for all sources ``sigma`` and lengths
``l <= max_len``::

    p_sigma^l[t] = <sigma, q[l]> + sum_{k<=l} <sigma P^k, r[l-k]>

so the residuals can later be sampled along forward walks without bias.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .chain import MarkovChain


@dataclass
class ReverseWorkspace:
    target: int
    max_len: int
    threshold: float
    q: list[dict[int, float]]
    r: list[dict[int, float]]
    push_count: int = 0
    touch_count: int = 0
    # First-passage variant: mass reaching the target at level >= 1 is
    # absorbed into q and never pushed back.
    absorb_target: bool = False
    _table: tuple | None = field(default=None, repr=False, compare=False)

    def max_residual(self) -> float:
        return max((max(level.values(), default=0.0) for level in self.r), default=0.0)

    def q_component(self, sigma) -> np.ndarray:
        """``<sigma, q[l]>`` for every ``l``."""
        return np.array([sigma.dot(level) for level in self.q])

    def residual_table(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Dense lookup form of the residuals for vectorized scoring.

        Returns ``(slot, table)``: ``slot[v]`` is the column of state ``v`` in
        ``table`` (shape ``(max_len + 1, m + 1)``), and unsupported states map
        to the final all-zero column.
        """
        if self._table is None:
            support = sorted({v for level in self.r for v in level})
            m = len(support)
            slot = np.full(n, m, dtype=np.int64)
            slot[support] = np.arange(m)
            table = np.zeros((self.max_len + 1, m + 1))
            for k, level in enumerate(self.r):
                for v, x in level.items():
                    table[k, slot[v]] = x
            self._table = (slot, table)
        return self._table

    def snapshot_rows(self) -> list[tuple[str, int, int, float]]:
        """``(kind, level, state, value)`` rows, level- then state-sorted."""
        rows = []
        for kind, vecs in (("q", self.q), ("r", self.r)):
            for k, level in enumerate(vecs):
                rows.extend((kind, k, v, level[v]) for v in sorted(level))
        return rows

    def write_snapshot(self, path: str | os.PathLike, labels=None) -> None:
        """Write ``level state value`` rows, one section per vector family."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# target {labels[self.target] if labels else self.target}"
                     f" max_len {self.max_len} threshold {self.threshold!r}\n")
            current = None
            for kind, k, v, x in self.snapshot_rows():
                if kind != current:
                    fh.write(f"[{kind}]\n")
                    current = kind
                fh.write(f"{k}\t{labels[v] if labels else v}\t{x!r}\n")


def new_workspace(chain: MarkovChain, t: int, max_len: int, threshold: float,
                  *, absorb_target: bool = False) -> ReverseWorkspace:
    if not 0 <= t < chain.n:
        raise IndexError(f"target {t} out of range [0, {chain.n})")
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    q = [dict() for _ in range(max_len + 1)]
    r = [dict() for _ in range(max_len + 1)]
    r[0][t] = 1.0
    return ReverseWorkspace(target=t, max_len=max_len, threshold=threshold, q=q, r=r,
                            absorb_target=absorb_target)


def reverse_push(ws: ReverseWorkspace, chain: MarkovChain, v: int, i: int) -> None:
    """Settle the residual at ``(v, i)`` and spread it to level ``i + 1``.

    At ``i == max_len`` the spread is skipped: no estimate above ``max_len``
    is ever read.
    """
    if not 0 <= i <= ws.max_len:
        raise IndexError(f"level {i} out of range [0, {ws.max_len}]")
    ri = ws.r[i]
    m = ri.pop(v, 0.0)
    if m == 0.0:
        return
    ws._table = None
    qi = ws.q[i]
    qi[v] = qi.get(v, 0.0) + m
    ws.push_count += 1
    if ws.absorb_target and i >= 1 and v == ws.target:
        ws.touch_count += 1
        return
    nbrs = chain._in_lists[v]
    ws.touch_count += len(nbrs) + 1
    if i < ws.max_len:
        nxt = ws.r[i + 1]
        for u, p in nbrs:
            nxt[u] = nxt.get(u, 0.0) + m * p


def run_reverse_phase(ws: ReverseWorkspace, chain: MarkovChain) -> None:
    """Push level by level until no residual exceeds the threshold.

    Within a level, states are pushed in the order their residual entry was
    first created. Pushes at level ``i`` only feed level ``i + 1``, so one
    pass per level suffices.
    """
    thr = ws.threshold
    t = ws.target
    for i in range(ws.max_len + 1):
        ri = ws.r[i]
        if ws.absorb_target and i >= 1 and t in ri:
            reverse_push(ws, chain, t, i)
        for v in [v for v, x in ri.items() if x > thr]:
            reverse_push(ws, chain, v, i)
