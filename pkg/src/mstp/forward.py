"""Forward random walks and residual scoring.

Walks are generated in fixed-size blocks. Block ``b`` draws from its own
stream derived from ``(seed, b)``, so results do not depend on how many
workers process the blocks.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

from .chain import MarkovChain, SourceDistribution
from .reverse import ReverseWorkspace

BLOCK_SIZE = 4096

T = TypeVar("T")


class ScoreMode(enum.Enum):
    EXACT_SUM = "exact"
    SAMPLED_LEVEL = "sampled"


def block_streams(seed: int, block: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (walk, level-choice) generators for one block."""
    walk_ss, level_ss = np.random.SeedSequence(seed, spawn_key=(block,)).spawn(2)
    return np.random.default_rng(walk_ss), np.random.default_rng(level_ss)


def map_blocks(num_walks: int, fn: Callable[[int, int], T], workers: int = 1,
               block_size: int = BLOCK_SIZE) -> list[T]:
    """Apply ``fn(block_index, block_len)`` to every block, in block order."""
    nblocks = -(-num_walks // block_size)
    sizes = [min(block_size, num_walks - b * block_size) for b in range(nblocks)]
    if workers <= 1 or nblocks <= 1:
        return [fn(b, s) for b, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(nblocks), sizes))


def sample_walks(chain: MarkovChain, sigma: SourceDistribution, max_len: int,
                 size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` trajectories as an int array of shape ``(size, max_len + 1)``."""
    walks = np.empty((size, max_len + 1), dtype=np.int64)
    walks[:, 0] = sigma.sample(size, rng)
    for j in range(max_len):
        walks[:, j + 1] = chain.step_many(walks[:, j], rng)
    return walks


def sample_trajectory(chain: MarkovChain, sigma: SourceDistribution, max_len: int,
                      rng: np.random.Generator) -> list[int]:
    return sample_walks(chain, sigma, max_len, 1, rng)[0].tolist()


def score_trajectory(ws: ReverseWorkspace, traj, mode: ScoreMode = ScoreMode.EXACT_SUM,
                     rng: np.random.Generator | None = None,
                     ell_multiplier: bool = False) -> list[float]:
    """Per-length residual scores of one trajectory (scalar reference path).

    ``EXACT_SUM`` gives ``S[l] = sum_k r[l-k][V_k]``. ``SAMPLED_LEVEL`` draws
    one ``k`` uniformly from ``0..l`` per length and returns
    ``(l + 1) * r[l-k][V_k]`` (``l * ...`` with ``ell_multiplier``).
    """
    L = min(ws.max_len, len(traj) - 1)
    r = ws.r
    t = ws.target
    hit = None
    if ws.absorb_target:
        hit = next((k for k in range(1, len(traj)) if traj[k] == t), len(traj))

    def term(level: int, k: int) -> float:
        if hit is not None and (k > hit or (k == hit and level >= 1)):
            return 0.0
        return r[level].get(traj[k], 0.0)

    scores = []
    for ell in range(L + 1):
        if mode is ScoreMode.EXACT_SUM:
            s = 0.0
            for k in range(ell + 1):
                s += term(ell - k, k)
        else:
            k = int(rng.integers(0, ell + 1))
            s = (ell if ell_multiplier else ell + 1) * term(ell - k, k)
        scores.append(s)
    return scores


def score_walks(ws: ReverseWorkspace, walks: np.ndarray, slot: np.ndarray,
                table: np.ndarray, mode: ScoreMode = ScoreMode.EXACT_SUM,
                level_rng: np.random.Generator | None = None,
                ell_multiplier: bool = False) -> np.ndarray:
    """Vectorized :func:`score_trajectory` over a block of walks.

    Returns an array of shape ``(len(walks), max_len + 1)``.
    """
    size = walks.shape[0]
    L = ws.max_len
    idx = slot[walks]
    alive = None
    at_target = None
    if ws.absorb_target:
        at_target = walks == ws.target
        at_target[:, 0] = False
        # alive[:, k]: no visit to the target at steps 1..k-1
        alive = np.ones_like(at_target)
        alive[:, 2:] = np.cumsum(at_target[:, 1:-1], axis=1) == 0

    scores = np.zeros((size, L + 1))
    if mode is ScoreMode.EXACT_SUM:
        for k in range(L + 1):
            vals = table[: L + 1 - k, idx[:, k]]
            if alive is not None and k >= 1:
                vals = vals * alive[:, k]
                vals[1:, at_target[:, k]] = 0.0
            scores[:, k:] += vals.T
        return scores

    rows = np.arange(size)
    for ell in range(L + 1):
        ks = level_rng.integers(0, ell + 1, size)
        vals = table[ell - ks, idx[rows, ks]]
        if alive is not None:
            vals = vals * alive[rows, ks]
            vals[at_target[rows, ks] & (ks < ell)] = 0.0
        scores[:, ell] = (ell if ell_multiplier else ell + 1) * vals
    return scores
