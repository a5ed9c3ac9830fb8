"""Bidirectional estimation of multi-step transition probabilities.

``bidirectional_mstp`` runs the reverse phase from the target and then
averages residual scores over forward walks from the source. Monte Carlo,
forward power iteration and an exact oracle are provided for comparison.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .chain import MarkovChain, SourceDistribution
from .forward import ScoreMode, block_streams, map_blocks, sample_walks, score_walks
from .reverse import ReverseWorkspace, new_workspace, run_reverse_phase

ORACLE_MAX_STATES = 100_000
PRESETS = ("practical", "theory")
PRACTICAL_C = 7.0


class OracleSizeError(ValueError):
    pass


def theory_c(eps: float, p_fail: float, max_len: int) -> float:
    """Accuracy constant guaranteeing failure probability ``p_fail``."""
    return max(6 * math.e / eps**2, 1 / math.log(2)) * math.log(2 * max(max_len, 1) / p_fail)


def theory_delta_r(delta: float, eps: float, p_fail: float, max_len: int) -> float:
    """Reverse threshold balancing forward and reverse work."""
    L = max(max_len, 1)
    return math.sqrt(eps**2 * delta / (L * math.log(L / p_fail)))


@dataclass(frozen=True)
class EstimatorParams:
    """Parameters of :func:`bidirectional_mstp`.

    Unset ``c``, ``delta_r`` and ``n_f`` are derived by :meth:`resolve` from
    ``preset``: ``"practical"`` uses ``c = 7`` and ``delta_r = sqrt(delta/c)``,
    ``"theory"`` uses the worst-case accuracy constant and the work-balancing
    threshold. ``n_f`` is always ``ceil(c * max_len * delta_r / delta)``.
    """

    delta: float
    max_len: int | None = None
    eps: float = 0.1
    p_fail: float = 0.05
    c: float | None = None
    delta_r: float | None = None
    n_f: int | None = None
    seed: int = 0
    preset: str = "practical"
    mode: ScoreMode = ScoreMode.EXACT_SUM
    ell_multiplier: bool = False
    workers: int = 1

    def resolve(self, max_len: int | None = None) -> "EstimatorParams":
        L = self.max_len if max_len is None else max_len
        if L is None or L < 0:
            raise ValueError("max_len must be set and >= 0")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.p_fail < 1:
            raise ValueError(f"p_fail must lie in (0, 1), got {self.p_fail}")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")

        c = self.c
        delta_r = self.delta_r
        if self.preset == "theory":
            if c is None:
                c = theory_c(self.eps, self.p_fail, L)
            if delta_r is None:
                # the accuracy argument needs delta_r >= delta
                delta_r = max(theory_delta_r(self.delta, self.eps, self.p_fail, L), self.delta)
        else:
            if c is None:
                c = PRACTICAL_C
            if delta_r is None:
                delta_r = math.sqrt(self.delta / c)
        if not c > 0:
            raise ValueError("c must be > 0")
        if not delta_r >= self.delta:
            raise ValueError(f"delta_r ({delta_r}) must be >= delta ({self.delta})")
        n_f = self.n_f
        if n_f is None:
            n_f = max(1, math.ceil(c * max(L, 1) * delta_r / self.delta))
        if n_f < 1:
            raise ValueError("n_f must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        return dataclasses.replace(self, max_len=L, c=c, delta_r=delta_r, n_f=int(n_f))


@dataclass
class EstimateReport:
    """Per-length estimates and the work that produced them.

    ``estimate[l] == q_component[l] + walk_component[l]`` holds exactly.
    """

    method: str
    source: SourceDistribution
    target: int
    estimate: np.ndarray
    q_component: np.ndarray
    walk_component: np.ndarray
    params: EstimatorParams | None = None
    pushes: int = 0
    touches: int = 0
    walks: int = 0
    walk_steps: int = 0
    wall_time: float = 0.0
    seed: int | None = None
    score_std: np.ndarray | None = None
    scores: np.ndarray | None = field(default=None, repr=False)
    workspace: ReverseWorkspace | None = field(default=None, repr=False)

    @property
    def max_len(self) -> int:
        return len(self.estimate) - 1

    @property
    def work(self) -> int:
        return self.touches + self.walk_steps

    def standard_error(self) -> np.ndarray:
        return self.score_std / math.sqrt(self.walks)

    def to_text(self, labels=None, timing: bool = False) -> str:
        """Key-value header followed by a tab-separated per-length table."""
        lab = (lambda s: labels[s]) if labels is not None else (lambda s: s)
        src = ",".join(f"{lab(s)}:{p:.12g}" for s, p in self.source.entries)
        lines = [
            f"method: {self.method}",
            f"source: {src}",
            f"target: {lab(self.target)}",
            f"seed: {self.seed}",
            f"pushes: {self.pushes}",
            f"touches: {self.touches}",
            f"walks: {self.walks}",
            f"walk_steps: {self.walk_steps}",
        ]
        if self.params is not None:
            p = self.params
            lines += [
                f"preset: {p.preset}",
                f"mode: {p.mode.value}",
                f"delta: {p.delta:.12g}",
                f"eps: {p.eps:.12g}",
                f"p_fail: {p.p_fail:.12g}",
                f"c: {p.c:.12g}",
                f"delta_r: {p.delta_r:.12g}",
                f"n_f: {p.n_f}",
            ]
        if timing:
            lines.append(f"wall_time: {self.wall_time:.6f}")
        lines.append("ell\testimate\tq_component\twalk_component")
        for ell in range(self.max_len + 1):
            lines.append(f"{ell}\t{self.estimate[ell]:.12g}\t{self.q_component[ell]:.12g}"
                         f"\t{self.walk_component[ell]:.12g}")
        return "\n".join(lines) + "\n"

    def write_scores(self, path) -> None:
        """Per-walk scores as ``walk_index ell score`` rows."""
        if self.scores is None:
            raise ValueError("report was produced without keep_scores=True")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("walk_index\tell\tscore\n")
            for i, row in enumerate(self.scores):
                for ell, s in enumerate(row):
                    fh.write(f"{i}\t{ell}\t{float(s)!r}\n")


def _check_inputs(chain: MarkovChain, sigma: SourceDistribution, t: int) -> None:
    sigma.validate_for(chain)
    if not 0 <= t < chain.n:
        raise IndexError(f"target {t} out of range [0, {chain.n})")


def _walk_phase(chain, sigma, ws, params, keep_scores):
    L = ws.max_len
    slot, table = ws.residual_table(chain.n)

    def run_block(b, size):
        walk_rng, level_rng = block_streams(params.seed, b)
        walks = sample_walks(chain, sigma, L, size, walk_rng)
        s = score_walks(ws, walks, slot, table, params.mode, level_rng, params.ell_multiplier)
        return s.sum(axis=0), (s * s).sum(axis=0), (s if keep_scores else None)

    parts = map_blocks(params.n_f, run_block, params.workers)
    total = np.zeros(L + 1)
    total_sq = np.zeros(L + 1)
    for s, s2, _ in parts:
        total += s
        total_sq += s2
    n = params.n_f
    mean = total / n
    var = np.maximum(total_sq / n - mean * mean, 0.0) * (n / max(n - 1, 1))
    scores = np.vstack([p[2] for p in parts]) if keep_scores else None
    return mean, np.sqrt(var), scores


def bidirectional_mstp(chain: MarkovChain, sigma: SourceDistribution, t: int,
                       params: EstimatorParams, *, keep_scores: bool = False,
                       absorb_target: bool = False) -> EstimateReport:
    """Estimate ``p_sigma^l[t]`` for every ``l`` in ``0..max_len``.

    With ``absorb_target`` the reverse phase stops paths at their first
    arrival at ``t`` after step 0 and walks are scored only up to their first
    visit, giving first-passage probabilities instead (entry 0 is then the
    raw ``sigma[t]`` term; :func:`mstp.diffusion.truncated_hitting_time`
    zeroes it).
    """
    params = params.resolve()
    _check_inputs(chain, sigma, t)
    start = time.perf_counter()
    ws = new_workspace(chain, t, params.max_len, params.delta_r, absorb_target=absorb_target)
    run_reverse_phase(ws, chain)
    qc = ws.q_component(sigma)
    walk, std, scores = _walk_phase(chain, sigma, ws, params, keep_scores)
    est = qc + walk
    return EstimateReport(
        method="bidirectional",
        source=sigma,
        target=t,
        estimate=est,
        q_component=qc,
        walk_component=walk,
        params=params,
        pushes=ws.push_count,
        touches=ws.touch_count,
        walks=params.n_f,
        walk_steps=params.n_f * params.max_len,
        wall_time=time.perf_counter() - start,
        seed=params.seed,
        score_std=std,
        scores=scores,
        workspace=ws,
    )


def monte_carlo_mstp(chain: MarkovChain, sigma: SourceDistribution, t: int, max_len: int,
                     num_walks: int, seed: int = 0, workers: int = 1) -> EstimateReport:
    """Fraction of walks from ``sigma`` sitting at ``t`` after each step."""
    if num_walks < 1:
        raise ValueError("num_walks must be >= 1")
    _check_inputs(chain, sigma, t)
    start = time.perf_counter()

    def run_block(b, size):
        walk_rng, _ = block_streams(seed, b)
        walks = sample_walks(chain, sigma, max_len, size, walk_rng)
        return (walks == t).sum(axis=0)

    hits = np.zeros(max_len + 1, dtype=np.int64)
    for h in map_blocks(num_walks, run_block, workers):
        hits += h
    est = hits / num_walks
    std = np.sqrt(est * (1 - est) * num_walks / max(num_walks - 1, 1))
    return EstimateReport(
        method="monte-carlo",
        source=sigma,
        target=t,
        estimate=est,
        q_component=np.zeros(max_len + 1),
        walk_component=est.copy(),
        walks=num_walks,
        walk_steps=num_walks * max_len,
        wall_time=time.perf_counter() - start,
        seed=seed,
        score_std=std,
    )


@dataclass
class PowerIterationResult:
    """``values[l, j]`` is ``(sigma P^l)[targets[j]]``."""

    values: np.ndarray
    targets: list[int]
    touches: int
    wall_time: float = 0.0


def forward_push_mstp(chain: MarkovChain, sigma: SourceDistribution, t_set, max_len: int
                      ) -> PowerIterationResult:
    """Exact truncated forward power iteration, propagating only the support.

    ``touches`` counts one unit per out-edge scanned.
    """
    sigma.validate_for(chain)
    targets = [int(x) for x in np.atleast_1d(t_set)]
    start = time.perf_counter()
    n = chain.n
    indptr, indices, weights = chain.out_indptr, chain.out_indices, chain.out_weights
    x = sigma.dense(n)
    values = np.empty((max_len + 1, len(targets)))
    values[0] = x[targets]
    touches = 0
    for ell in range(1, max_len + 1):
        support = np.flatnonzero(x)
        lo, hi = indptr[support], indptr[support + 1]
        counts = hi - lo
        touches += int(counts.sum())
        # edge positions of all out-edges of the support, row by row
        edge = np.repeat(lo - np.cumsum(counts) + counts, counts) + np.arange(counts.sum())
        src_mass = np.repeat(x[support], counts)
        x = np.bincount(indices[edge], weights=src_mass * weights[edge], minlength=n)
        values[ell] = x[targets]
    return PowerIterationResult(values, targets, touches, time.perf_counter() - start)


def exact_mstp_oracle(chain: MarkovChain, sigma: SourceDistribution, t, max_len: int
                      ) -> np.ndarray:
    """``<sigma P^l, e_t>`` for ``l = 0..max_len`` by repeated sparse products.

    ``t`` may be a single state (returns shape ``(max_len + 1,)``) or a
    sequence (returns ``(max_len + 1, len(t))``).
    """
    if chain.n > ORACLE_MAX_STATES:
        raise OracleSizeError(f"oracle limited to {ORACLE_MAX_STATES} states, chain has {chain.n}")
    sigma.validate_for(chain)
    PT = chain.transition_matrix().T.tocsr()
    x = sigma.dense(chain.n)
    out = [x[t]]
    for _ in range(max_len):
        x = PT @ x
        out.append(x[t])
    return np.array(out)


def exact_distributions(chain: MarkovChain, sigma: SourceDistribution, max_len: int
                        ) -> np.ndarray:
    """Full ``sigma P^l`` rows, shape ``(max_len + 1, n)``."""
    return exact_mstp_oracle(chain, sigma, np.arange(chain.n), max_len)
