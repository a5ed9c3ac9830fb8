"""Heat-kernel comparison of bidirectional estimation, Monte Carlo and
forward power iteration over random (source, target) pairs.

Relative errors are averaged only over pairs whose exact value exceeds
``delta``; smaller values are reported as absolute errors. Unless a walk count
is given, Monte Carlo is run with doubling walk counts until its mean
relative error is no worse than the bidirectional one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .chain import MarkovChain, SourceDistribution
from .diffusion import DiffusionWeights, heat_kernel, heat_kernel_max_len
from .estimator import EstimatorParams, exact_mstp_oracle, forward_push_mstp
from .forward import BLOCK_SIZE, block_streams

ESTIMATORS = ("bidirectional", "monte-carlo", "forward-push")
MC_MAX_WALKS = 1 << 24


@dataclass
class PairResult:
    source: int
    target: int
    exact: float
    value: dict[str, float] = field(default_factory=dict)
    work: dict[str, int] = field(default_factory=dict)
    seconds: dict[str, float] = field(default_factory=dict)


@dataclass
class Summary:
    estimator: str
    mean_rel_err: float
    pairs_in_regime: int
    mean_abs_err_below: float
    pairs_below: int
    mean_work: float
    mean_time: float


@dataclass
class Comparison:
    pairs: list[PairResult]
    summaries: list[Summary]
    delta: float
    alpha: float
    max_len: int
    mc_walks: int
    seed: int
    # False when Monte Carlo hit MC_MAX_WALKS before matching the
    # bidirectional error; its work is then a lower bound.
    mc_matched: bool = True

    def summary(self, name: str) -> Summary:
        return next(s for s in self.summaries if s.estimator == name)

    def to_text(self, fmt: str = "table", timing: bool = True) -> str:
        cols = ["estimator", "mean_rel_err", "pairs_in_regime", "mean_abs_err_below",
                "pairs_below", "mean_work"] + (["mean_time_s"] if timing else [])
        rows = []
        for s in self.summaries:
            row = [s.estimator, f"{s.mean_rel_err:.6g}", str(s.pairs_in_regime),
                   f"{s.mean_abs_err_below:.6g}", str(s.pairs_below), f"{s.mean_work:.6g}"]
            if timing:
                row.append(f"{s.mean_time:.6g}")
            rows.append(row)
        head = [
            f"# pairs: {len(self.pairs)}",
            f"# delta: {self.delta:.6g}",
            f"# alpha: {self.alpha:.6g}",
            f"# max_len: {self.max_len}",
            f"# mc_walks: {self.mc_walks}",
            f"# mc_matched: {'yes' if self.mc_matched else 'no (walk cap reached)'}",
            f"# seed: {self.seed}",
        ]
        return "\n".join(head) + "\n" + render_table(cols, rows, fmt)

    def pairs_tsv(self, labels=None) -> str:
        lab = (lambda s: labels[s]) if labels is not None else (lambda s: s)
        out = ["source\ttarget\texact\t" + "\t".join(ESTIMATORS)]
        for p in self.pairs:
            out.append(f"{lab(p.source)}\t{lab(p.target)}\t{p.exact:.12g}\t"
                       + "\t".join(f"{p.value[e]:.12g}" for e in ESTIMATORS))
        return "\n".join(out) + "\n"


def render_table(cols, rows, fmt: str) -> str:
    if fmt == "tsv":
        return "\n".join("\t".join(r) for r in [cols] + rows) + "\n"
    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c)
              for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def _pair_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


class _PoissonWalks:
    """Monte Carlo heat-kernel counts, extendable by whole blocks."""

    def __init__(self, chain: MarkovChain, source: int, target: int, alpha: float, seed: int):
        self.chain, self.source, self.target = chain, source, target
        self.alpha, self.seed = alpha, seed
        self.blocks = 0
        self.hits = 0
        self.steps = 0
        self.seconds = 0.0

    @property
    def walks(self) -> int:
        return self.blocks * BLOCK_SIZE

    def extend_to(self, num_walks: int) -> None:
        start = time.perf_counter()
        while self.walks < num_walks:
            rng, _ = block_streams(self.seed, self.blocks)
            lengths = -np.sort(-rng.poisson(self.alpha, BLOCK_SIZE))
            # walks sorted by decreasing length: the live ones form a prefix
            live = np.searchsorted(-lengths, -np.arange(int(lengths[0]) + 2), side="right")
            cur = np.full(BLOCK_SIZE, self.source, dtype=np.int64)
            hits = int((cur[live[1]:] == self.target).sum())
            for j in range(1, int(lengths[0]) + 1):
                cur = self.chain.step_many(cur[: live[j]], rng)
                hits += int((cur[live[j + 1]:] == self.target).sum())
            self.hits += hits
            self.steps += int(lengths.sum())
            self.blocks += 1
        self.seconds += time.perf_counter() - start

    @property
    def value(self) -> float:
        return self.hits / self.walks


def monte_carlo_heat_kernel(chain: MarkovChain, source: int, target: int, alpha: float,
                            num_walks: int, seed: int = 0) -> tuple[float, int]:
    """Fraction of Poisson(alpha)-length walks ending at ``target``.

    ``num_walks`` is rounded up to whole blocks. Returns ``(value, steps)``.
    """
    mc = _PoissonWalks(chain, source, target, alpha, seed)
    mc.extend_to(num_walks)
    return mc.value, mc.steps


def _errors(pairs, name, delta):
    rel, below = [], []
    for p in pairs:
        err = abs(p.value[name] - p.exact)
        if p.exact > delta:
            rel.append(err / p.exact)
        else:
            below.append(err)
    return rel, below


def _summarize(pairs, name, delta) -> Summary:
    rel, below = _errors(pairs, name, delta)
    return Summary(
        estimator=name,
        mean_rel_err=float(np.mean(rel)) if rel else math.nan,
        pairs_in_regime=len(rel),
        mean_abs_err_below=float(np.mean(below)) if below else math.nan,
        pairs_below=len(below),
        mean_work=float(np.mean([p.work[name] for p in pairs])),
        mean_time=float(np.mean([p.seconds[name] for p in pairs])),
    )


PAIR_MODES = ("walk", "uniform")


def sample_pairs(chain: MarkovChain, count: int, seed: int, mode: str = "walk",
                 alpha: float = 5.0) -> list[tuple[int, int]]:
    """Random (source, target) pairs with uniformly drawn sources.

    ``"uniform"`` draws targets uniformly as well. ``"walk"`` takes the end
    of one Poisson(alpha)-length walk from the source, i.e. a target drawn
    from the source's own heat-kernel distribution.
    """
    rng = np.random.default_rng(seed)
    sources = rng.integers(0, chain.n, size=count)
    if mode == "uniform":
        targets = rng.integers(0, chain.n, size=count)
    elif mode == "walk":
        lengths = rng.poisson(alpha, size=count)
        targets = sources.copy()
        for j in range(1, int(lengths.max(initial=0)) + 1):
            moving = lengths >= j
            targets[moving] = chain.step_many(targets[moving], rng)
    else:
        raise ValueError(f"unknown pair mode {mode!r}; choose from {PAIR_MODES}")
    return [(int(s), int(t)) for s, t in zip(sources, targets)]


def compare(chain: MarkovChain, pairs: list[tuple[int, int]], delta: float, alpha: float = 5.0,
            max_len: int | None = None, seed: int = 0, preset: str = "practical",
            eps: float = 0.1, mc_walks: int | None = None, workers: int = 1) -> Comparison:
    L = heat_kernel_max_len(alpha) if max_len is None else max_len
    weights = DiffusionWeights.heat_kernel(alpha, L)
    results = []
    mcs = []
    for i, (s, t) in enumerate(pairs):
        sigma = SourceDistribution.point(s)
        pseed = _pair_seed(seed, i)
        exact = float(exact_mstp_oracle(chain, sigma, t, L) @ weights.weights)
        res = PairResult(s, t, exact)

        params = EstimatorParams(delta=delta, max_len=L, eps=eps, seed=pseed, preset=preset,
                                 workers=workers)
        hk = heat_kernel(chain, sigma, t, alpha, params)
        res.value["bidirectional"] = hk.value
        res.work["bidirectional"] = hk.report.work
        res.seconds["bidirectional"] = hk.report.wall_time

        fp = forward_push_mstp(chain, sigma, [t], L)
        res.value["forward-push"] = float(weights.weights @ fp.values[:, 0])
        res.work["forward-push"] = fp.touches
        res.seconds["forward-push"] = fp.wall_time

        results.append(res)
        mcs.append(_PoissonWalks(chain, s, t, alpha, pseed))

    def run_mc(n_walks):
        for res, mc in zip(results, mcs):
            mc.extend_to(n_walks)
            res.value["monte-carlo"] = mc.value
            res.work["monte-carlo"] = mc.steps
            res.seconds["monte-carlo"] = mc.seconds

    matched = True
    if mc_walks is not None:
        run_mc(mc_walks)
        used = mcs[0].walks if mcs else 0
    else:
        rel_bi, _ = _errors(results, "bidirectional", delta)
        goal = float(np.mean(rel_bi)) if rel_bi else 0.0
        used = BLOCK_SIZE
        while True:
            run_mc(used)
            rel_mc, _ = _errors(results, "monte-carlo", delta)
            if not rel_mc or float(np.mean(rel_mc)) <= goal:
                break
            if used >= MC_MAX_WALKS:
                matched = False
                break
            used *= 2

    summaries = [_summarize(results, name, delta) for name in ESTIMATORS]
    return Comparison(results, summaries, delta, alpha, L, used, seed, matched)
