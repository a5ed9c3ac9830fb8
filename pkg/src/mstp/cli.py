"""Command-line front end.

Exit codes: 0 success, 1 internal invariant failure, 2 bad configuration,
3 unreadable or invalid graph, 4 oracle size limit exceeded.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import experiment
from .chain import GraphFormatError, MarkovChain, SourceDistribution, read_edge_list, write_edge_list
from .diffusion import (
    doeblin_stationary,
    heat_kernel,
    truncated_hitting_time,
    truncated_return_time,
)
from .estimator import (
    EstimatorParams,
    OracleSizeError,
    bidirectional_mstp,
    exact_mstp_oracle,
)
from .forward import ScoreMode
from .generators import MODELS, synthetic_chain, synthetic_edges

EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_GRAPH = 3
EXIT_ORACLE = 4

COMMANDS = ("estimate", "heat-kernel", "hitting", "stationary", "compare", "oracle", "generate")

EPILOG = """\
TSV output (--format tsv): one row per (target, ell) with columns
  target  ell  estimate  q_component  walk_component
for estimate/hitting, target ell exact for oracle, and
  target value tail_bound [...]  for heat-kernel/stationary.
compare --format tsv columns:
  estimator mean_rel_err pairs_in_regime mean_abs_err_below pairs_below mean_work mean_time_s
"""


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    graph_path: str | None
    source: str | None
    target: str | None
    params: EstimatorParams | None
    fmt: str
    args: argparse.Namespace


def _add_common(p: argparse.ArgumentParser, *, source=True, target=True, graph_required=True):
    p.add_argument("--graph", required=graph_required, help="edge-list file: 'src dst [weight]' per line")
    if source:
        p.add_argument("--source", default=None,
                       help="node label, 'a:0.5,b:0.5' weight list, or 'uniform'")
    if target:
        p.add_argument("--target", default=None, help="node label or 'random:k'")
    p.add_argument("--format", choices=("table", "tsv"), default="table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="include wall-clock times")


def _add_estimator(p: argparse.ArgumentParser, lmax_default=None):
    p.add_argument("--lmax", type=int, default=lmax_default, help="maximum walk length")
    p.add_argument("--delta", type=float, default=1e-3, help="detection threshold")
    p.add_argument("--eps", type=float, default=0.1, help="relative error bound")
    p.add_argument("--pfail", type=float, default=0.05, help="failure probability")
    p.add_argument("--preset", choices=("practical", "theory"), default="practical")
    p.add_argument("--c", type=float, default=None, help="override accuracy constant")
    p.add_argument("--delta-r", type=float, default=None, help="override reverse threshold")
    p.add_argument("--walks", type=int, default=None, help="override number of walks")
    p.add_argument("--mode", choices=[m.value for m in ScoreMode], default="exact")
    p.add_argument("--ell-multiplier", action="store_true",
                   help="scale sampled-level scores by l instead of l+1 (biased)")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mstp", description="Bidirectional multi-step transition probability estimation.",
        formatter_class=argparse.RawDescriptionHelpFormatter, epilog=EPILOG)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="per-length bidirectional estimates",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=EPILOG)
    _add_common(p)
    _add_estimator(p)
    p.add_argument("--scores-out", help="write per-walk scores TSV (walk_index ell score)")
    p.add_argument("--snapshot-out", help="write reverse workspace rows (level state value)")

    p = sub.add_parser("oracle", help="exact per-length probabilities")
    _add_common(p)
    p.add_argument("--lmax", type=int, required=True)

    p = sub.add_parser("heat-kernel", help="heat-kernel score")
    _add_common(p)
    _add_estimator(p)
    p.add_argument("--alpha", type=float, default=5.0, help="mean walk length")

    p = sub.add_parser("hitting", help="first-passage probabilities per length")
    _add_common(p)
    _add_estimator(p)

    p = sub.add_parser("stationary", help="stationary estimate at the target")
    _add_common(p)
    _add_estimator(p)
    p.add_argument("--method", choices=("return-time", "doeblin"), default="return-time")
    p.add_argument("--alpha", type=float, default=0.85,
                   help="continuation probability for --method doeblin")

    p = sub.add_parser("compare", help="heat-kernel comparison against the exact value",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=EPILOG)
    _add_common(p, source=False, target=False, graph_required=False)
    p.add_argument("--synthetic", choices=MODELS, default="powerlaw",
                   help="generator used when --graph is absent")
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--degree", type=float, default=3)
    p.add_argument("--graph-seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--pair-mode", choices=experiment.PAIR_MODES, default="walk",
                   help="target of each pair: end of a Poisson walk from the source, or uniform")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--preset", choices=("practical", "theory"), default="practical")
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--lmax", type=int, default=None)
    p.add_argument("--mc-walks", type=int, default=None,
                   help="fixed Monte Carlo walk count (default: match bidirectional error)")
    p.add_argument("--pairs-out", help="write per-pair values as TSV")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("generate", help="write a synthetic edge list")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--degree", type=float, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _parse_label(chain: MarkovChain, tok: str) -> int:
    for cand in (tok, _maybe_int(tok)):
        if cand in chain._label_index:
            return chain._label_index[cand]
    raise ConfigError(f"unknown node {tok!r}")


def _maybe_int(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def parse_source(chain: MarkovChain, spec: str | None) -> SourceDistribution:
    if spec is None:
        raise ConfigError("--source is required")
    if spec == "uniform":
        return SourceDistribution.uniform(chain.n)
    if ":" not in spec:
        return SourceDistribution.point(_parse_label(chain, spec))
    entries = []
    for part in spec.split(","):
        lab, _, w = part.rpartition(":")
        try:
            entries.append((_parse_label(chain, lab), float(w)))
        except ValueError as exc:
            raise ConfigError(f"bad source entry {part!r}: {exc}") from None
    total = math.fsum(w for _, w in entries)
    if total <= 0 or any(w <= 0 for _, w in entries):
        raise ConfigError("source weights must be positive")
    try:
        return SourceDistribution([(s, w / total) for s, w in entries])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_targets(chain: MarkovChain, spec: str | None, seed: int) -> list[int]:
    if spec is None:
        raise ConfigError("--target is required")
    if spec.startswith("random:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad target spec {spec!r}") from None
        if k < 1:
            raise ConfigError("random:k needs k >= 1")
        rng = np.random.default_rng([seed, 0x7A5])
        return rng.integers(0, chain.n, size=k).tolist()
    return [_parse_label(chain, spec)]


def _params(args) -> EstimatorParams:
    p = EstimatorParams(
        delta=args.delta, max_len=args.lmax, eps=args.eps, p_fail=args.pfail, c=args.c,
        delta_r=args.delta_r, n_f=args.walks, seed=args.seed, preset=args.preset,
        mode=ScoreMode(args.mode), ell_multiplier=args.ell_multiplier, workers=args.workers)
    if p.max_len is not None:
        try:
            p.resolve()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return p


def _validate(args) -> RunConfig:
    params = None
    if args.command in ("estimate", "heat-kernel", "hitting", "stationary"):
        if args.command in ("estimate", "hitting") and args.lmax is None:
            raise ConfigError("--lmax is required")
        params = _params(args)
    if getattr(args, "lmax", None) is not None and args.lmax < 0:
        raise ConfigError("--lmax must be >= 0")
    if args.command == "compare":
        if args.pairs < 1 or not 0 < args.delta < 1:
            raise ConfigError("compare needs --pairs >= 1 and 0 < --delta < 1")
        if args.graph is None and args.nodes < 2:
            raise ConfigError("--nodes must be >= 2")
    if getattr(args, "alpha", None) is not None and not args.alpha > 0:
        raise ConfigError("--alpha must be > 0")
    return RunConfig(args.command, getattr(args, "graph", None), getattr(args, "source", None),
                     getattr(args, "target", None), params, getattr(args, "format", "table"), args)


def _load(path: str) -> MarkovChain:
    try:
        return read_edge_list(path)
    except OSError as exc:
        raise GraphFormatError(f"cannot read {path}: {exc.strerror}") from None


def _check_report(report) -> None:
    if not np.array_equal(report.estimate, report.q_component + report.walk_component):
        raise InvariantError("estimate decomposition mismatch")
    if (report.estimate < 0).any():
        raise InvariantError("negative estimate")
    ws = report.workspace
    if ws is not None and ws.max_residual() > ws.threshold:
        raise InvariantError("residual above threshold after reverse phase")


def _per_length_tsv(rows, labels, first) -> str:
    out = [first]
    for t, rep in rows:
        for ell in range(rep.max_len + 1):
            out.append(f"{labels[t]}\t{ell}\t{rep.estimate[ell]:.12g}\t"
                       f"{rep.q_component[ell]:.12g}\t{rep.walk_component[ell]:.12g}")
    return "\n".join(out) + "\n"


def run(config: RunConfig, out=None) -> int:
    """Execute one command; returns the process exit code."""
    out = out or sys.stdout
    args = config.args
    cmd = config.command

    if cmd == "generate":
        edges = synthetic_edges(args.model, args.nodes, args.degree, args.seed)
        write_edge_list(args.out, edges)
        out.write(f"# wrote {len(edges)} edges to {args.out}\n")
        return 0

    if cmd == "compare":
        if config.graph_path:
            chain = _load(config.graph_path)
        else:
            chain = synthetic_chain(args.synthetic, args.nodes, args.degree, args.graph_seed)
        pairs = experiment.sample_pairs(chain, args.pairs, args.seed, args.pair_mode, args.alpha)
        result = experiment.compare(chain, pairs, args.delta, args.alpha, args.lmax, args.seed,
                                    args.preset, args.eps, args.mc_walks, args.workers)
        out.write(result.to_text(config.fmt, timing=args.timing))
        if args.pairs_out:
            with open(args.pairs_out, "w", encoding="utf-8") as fh:
                fh.write(result.pairs_tsv(chain.labels))
        return 0

    chain = _load(config.graph_path)
    labels = chain.labels
    if cmd == "stationary":
        targets = parse_targets(chain, config.target, args.seed)
        sigma = None if args.method == "return-time" else parse_source(chain, config.source)
    else:
        sigma = parse_source(chain, config.source)
        targets = parse_targets(chain, config.target, args.seed)

    if cmd == "oracle":
        vals = exact_mstp_oracle(chain, sigma, targets, args.lmax)
        lines = [] if config.fmt == "tsv" else ["method: oracle"]
        lines.append("target\tell\texact")
        lines += [f"{labels[t]}\t{ell}\t{vals[ell, j]:.12g}"
                  for j, t in enumerate(targets) for ell in range(args.lmax + 1)]
        out.write("\n".join(lines) + "\n")
        return 0

    params = config.params
    if cmd in ("estimate", "hitting"):
        rows = []
        for t in targets:
            if cmd == "estimate":
                rep = bidirectional_mstp(chain, sigma, t, params, keep_scores=bool(args.scores_out))
            else:
                rep = truncated_hitting_time(chain, sigma, t, params)
            _check_report(rep)
            rows.append((t, rep))
        if config.fmt == "tsv":
            out.write(_per_length_tsv(rows, labels,
                                      "target\tell\testimate\tq_component\twalk_component"))
        else:
            out.write("\n".join(rep.to_text(labels, args.timing) for _, rep in rows))
        if cmd == "estimate" and args.scores_out:
            rows[0][1].write_scores(args.scores_out)
        if cmd == "estimate" and args.snapshot_out:
            rows[0][1].workspace.write_snapshot(args.snapshot_out, labels)
        return 0

    results = []
    for t in targets:
        if cmd == "heat-kernel":
            res = heat_kernel(chain, sigma, t, args.alpha, params)
        elif args.method == "doeblin":
            res = doeblin_stationary(chain, sigma, t, args.alpha, params)
        else:
            lmax = params.max_len if params.max_len is not None else 100
            res = truncated_return_time(chain, t, replace(params, max_len=lmax))
        _check_report(res.report)
        results.append((t, res))
    if config.fmt == "tsv":
        if cmd == "stationary" and args.method == "return-time":
            lines = ["target\tstationary_bound\ttruncated_return_time\treturn_mass"]
            lines += [f"{labels[t]}\t{r.stationary_bound:.12g}\t{r.expected_return:.12g}"
                      f"\t{r.return_mass:.12g}" for t, r in results]
        else:
            lines = ["target\tvalue\ttail_bound"]
            lines += [f"{labels[t]}\t{r.value:.12g}\t{r.tail_bound:.12g}" for t, r in results]
        out.write("\n".join(lines) + "\n")
    else:
        out.write("\n".join(r.to_text(labels, args.timing) for _, r in results))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _validate(args)
        return run(config)
    except ConfigError as exc:
        print(f"mstp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphFormatError as exc:
        print(f"mstp: invalid graph: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except OracleSizeError as exc:
        print(f"mstp: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except InvariantError as exc:
        print(f"mstp: internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, IndexError, KeyError) as exc:
        print(f"mstp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
