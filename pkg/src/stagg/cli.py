"""Command-line entry point: ``stagg lift|suite|grammar|prompt``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .benchmark import load_benchmark
from .errors import StaggError
from .llm import ENV_ENDPOINT, ENV_MODEL, LlmConfig, build_prompt, fetch_candidates
from .pipeline import LiftConfig, build_grammar, lift, run_suite, summarize, to_csv
from .search import BU_CRITERIA, PENALTY_GROUPS, TD_CRITERIA


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=["td", "bu", "both"], default="td")
    p.add_argument(
        "--drop-penalty",
        action="append",
        default=[],
        choices=[*TD_CRITERIA, *BU_CRITERIA, *PENALTY_GROUPS],
        help="disable a penalty criterion (repeatable)",
    )
    p.add_argument("--equal-probabilities", action="store_true",
                   help="same as --probabilities uniform")
    p.add_argument("--grammar", choices=["refined", "full"], default="refined")
    p.add_argument("--probabilities", choices=["learned", "uniform"], default="learned")
    p.add_argument("--examples", type=int, default=8, help="input/output examples per benchmark")
    p.add_argument("--trials", type=int, default=64, help="differential-testing trials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout-secs", type=float, default=3600.0)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--llm", choices=["fixture", "live"], default="fixture")
    p.add_argument("--fixture", type=Path, help="override the benchmark's recorded LLM reply")
    p.add_argument("--model", help=f"live model name (default ${ENV_MODEL} or gpt-4)")


def _config(args: argparse.Namespace, method: str) -> LiftConfig:
    if args.llm == "live":
        overrides = {"model": args.model} if args.model else {}
        llm = LlmConfig.from_env(**overrides)
    else:
        llm = LlmConfig(backend="fixture", fixture_path=args.fixture)
    probabilities = "uniform" if args.equal_probabilities else args.probabilities
    return LiftConfig(
        method=method,
        dropped=tuple(args.drop_penalty),
        grammar=args.grammar,
        probabilities=probabilities,
        examples=args.examples,
        trials=args.trials,
        seed=args.seed,
        timeout=args.timeout_secs,
        max_depth=args.max_depth,
        llm=llm,
    )


def _methods(args) -> list[str]:
    return ["td", "bu"] if args.method == "both" else [args.method]


def cmd_lift(args) -> int:
    bench = load_benchmark(args.benchmark)
    reports = [lift(bench, _config(args, m)) for m in _methods(args)]
    for r in reports:
        line = f"{r.name} [{r.method}] {r.status}"
        if r.expr:
            line += f": {r.expr}"
        line += (
            f"  ({r.seconds:.3f}s, {r.templates_enumerated} enumerated, "
            f"{r.templates_validated} validated, {r.substitutions_tried} substitutions)"
        )
        if r.message:
            line += f"  {r.message}"
        print(line)
    if args.out:
        Path(args.out).write_text(to_csv(reports))
    return 1 if any(r.status == "error" for r in reports) else 0


def cmd_suite(args) -> int:
    methods = _methods(args)
    reports = run_suite(args.directory, _config(args, methods[0]), methods, args.out, args.workers)
    if args.out is None:
        sys.stdout.write(to_csv(reports))
    print(summarize(reports))
    return 1 if any(r.status == "error" for r in reports) else 0


def cmd_grammar(args) -> int:
    bench = load_benchmark(args.benchmark)
    for method in _methods(args):
        config = _config(args, method)
        cfg = config.llm
        if cfg.backend == "fixture" and cfg.fixture_path is None:
            cfg = LlmConfig(backend="fixture", fixture_path=bench.llm_fixture)
        raw = fetch_candidates(build_prompt(bench.c_source), cfg)
        g = build_grammar(bench, config, raw)
        print(f"# {bench.name} [{method}] dims={list(g.dims)}")
        print(g.dump())
    return 0


def cmd_prompt(args) -> int:
    bench = load_benchmark(args.benchmark)
    sys.stdout.write(build_prompt(bench.c_source))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagg",
        description="Lift C loop nests to TACO index notation with grammar-guided search.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lift", help="lift a single benchmark directory")
    p.add_argument("benchmark", type=Path)
    p.add_argument("--out", type=Path, help="also write the result as CSV")
    _add_config_options(p)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("suite", help="lift every benchmark under a directory")
    p.add_argument("directory", type=Path)
    p.add_argument("--out", type=Path, help="CSV output path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)
    _add_config_options(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("grammar", help="print the learned grammar for a benchmark")
    p.add_argument("benchmark", type=Path)
    _add_config_options(p)
    p.set_defaults(func=cmd_grammar)

    p = sub.add_parser("prompt", help="print the LLM prompt for a benchmark")
    p.add_argument("benchmark", type=Path)
    p.set_defaults(func=cmd_prompt)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "llm", None) == "live" and not os.environ.get(ENV_ENDPOINT):
        print(f"stagg: --llm live needs ${ENV_ENDPOINT}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (StaggError, OSError, ValueError) as exc:
        print(f"stagg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
