"""End-to-end lifting of one benchmark and of whole benchmark suites."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .benchmark import Benchmark, discover, load_benchmark, lhs_rank
from .candidates import build_template_set, normalize_response, predict_dimensions
from .errors import EmptyCandidateSet, SearchTimeout, StaggError
from .grammar import BU, TD, TemplateGrammar, generate_grammar, learn_weights, normalize, uniform
from .llm import LlmConfig, build_prompt, fetch_candidates
from .search import DEFAULT_MAX_DEPTH, SearchContext, enumerate_bu, enumerate_td, expand_dropped
from .taco import render
from .validation import (
    DEFAULT_EXAMPLES,
    DEFAULT_TRIALS,
    ValidationStats,
    differential_verify,
    generate_examples,
    instantiate,
    iter_valid_substitutions,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "name",
    "method",
    "status",
    "expr",
    "seconds",
    "templates_enumerated",
    "templates_validated",
    "substitutions_tried",
)


@dataclass(frozen=True)
class LiftConfig:
    method: str = TD
    dropped: tuple[str, ...] = ()
    grammar: str = "refined"
    probabilities: str = "learned"
    examples: int = DEFAULT_EXAMPLES
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    timeout: float = 3600.0
    max_depth: int = DEFAULT_MAX_DEPTH
    default_weight: float = 1.0
    llm: LlmConfig | None = None

    def __post_init__(self) -> None:
        if self.method not in (TD, BU):
            raise ValueError(f"method must be td or bu, not {self.method!r}")
        if self.grammar not in ("refined", "full"):
            raise ValueError(f"grammar must be refined or full, not {self.grammar!r}")
        if self.probabilities not in ("learned", "uniform"):
            raise ValueError(f"probabilities must be learned or uniform, not {self.probabilities!r}")
        expand_dropped(self.dropped)

    def fingerprint(self) -> str:
        fields = asdict(self)
        fields.pop("timeout")
        fields.pop("llm")
        return hashlib.sha1(repr(sorted(fields.items())).encode()).hexdigest()[:10]


@dataclass
class LiftReport:
    name: str
    method: str
    status: str
    expr: str = ""
    seconds: float = 0.0
    templates_enumerated: int = 0
    templates_validated: int = 0
    substitutions_tried: int = 0
    config: str = ""
    message: str = ""
    dims: list[int] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def row(self) -> list[str]:
        return [
            self.name,
            self.method,
            self.status,
            self.expr,
            f"{self.seconds:.3f}",
            str(self.templates_enumerated),
            str(self.templates_validated),
            str(self.substitutions_tried),
        ]


def build_grammar(bench: Benchmark, config: LiftConfig, raw: str) -> TemplateGrammar:
    """Candidate text to the normalized grammar the search runs on."""
    ts, dropped = build_template_set(normalize_response(raw))
    if dropped:
        log.info("%s: %d candidates could not be templatized", bench.name, dropped)
    if not len(ts):
        raise EmptyCandidateSet(f"{bench.name}: no usable candidates")
    dims = predict_dimensions(ts, lhs_rank(bench))
    g = generate_grammar(config.method, dims, ts, full=config.grammar == "full")
    if config.probabilities == "uniform":
        return uniform(g)
    return normalize(learn_weights(g, ts, default_weight=config.default_weight))


def _llm_config(bench: Benchmark, config: LiftConfig) -> LlmConfig:
    if config.llm is None:
        return LlmConfig(backend="fixture", fixture_path=bench.llm_fixture)
    if config.llm.backend == "fixture" and config.llm.fixture_path is None:
        return replace(config.llm, fixture_path=bench.llm_fixture)
    return config.llm


def lift(bench: Benchmark, config: LiftConfig | None = None) -> LiftReport:
    config = config or LiftConfig()
    start = time.monotonic()
    deadline = start + config.timeout
    report = LiftReport(bench.name, config.method, "error", config=config.fingerprint())
    stats = ValidationStats()
    try:
        raw = fetch_candidates(build_prompt(bench.c_source), _llm_config(bench, config))
        g = build_grammar(bench, config, raw)
        report.dims = list(g.dims)
        ctx = SearchContext.for_grammar(g, dropped=config.dropped, max_depth=config.max_depth)
        examples = generate_examples(bench, config.examples, config.seed)
        signature = bench.signature

        def check(template):
            return iter_valid_substitutions(
                template, examples, signature, bench.constants, stats, deadline
            )

        def verify(template, sub) -> bool:
            if time.monotonic() > deadline:
                raise SearchTimeout("time budget exhausted during verification")
            return differential_verify(template, sub, bench, config.trials, config.seed + 1)

        search = enumerate_td if config.method == TD else enumerate_bu
        remaining = max(0.0, deadline - time.monotonic())
        result = search(g, ctx, check, verify, timeout=remaining)
        report.status = result.status
        report.templates_enumerated = result.popped
        report.templates_validated = result.validated
        if result.solved:
            report.expr = render(instantiate(result.template, result.substitution, bench.output_arg))
    except SearchTimeout:
        report.status = "timeout"
    except (StaggError, OSError, ValueError) as exc:
        report.status = "error"
        report.message = f"{type(exc).__name__}: {exc}"
        log.error("%s: %s", bench.name, report.message)
    report.substitutions_tried = stats.substitutions_tried
    report.seconds = time.monotonic() - start
    return report


def _lift_path(path: Path, config: LiftConfig) -> LiftReport:
    try:
        bench = load_benchmark(path)
    except StaggError as exc:
        return LiftReport(path.name, config.method, "error", config=config.fingerprint(),
                          message=f"{type(exc).__name__}: {exc}")
    return lift(bench, config)


def run_suite(
    directory: str | Path,
    config: LiftConfig | None = None,
    methods: Sequence[str] | None = None,
    out: str | Path | None = None,
    workers: int = 1,
) -> list[LiftReport]:
    """Lift every benchmark under ``directory`` with each method; optionally
    write the CSV.  Rows are ordered by benchmark name, then method."""
    config = config or LiftConfig()
    methods = list(methods or [config.method])
    paths = discover(directory)
    if not paths:
        log.warning("no benchmarks found under %s", directory)
    jobs = [(p, replace(config, method=m)) for p in paths for m in methods]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_lift_path, *zip(*jobs)))
    else:
        reports = [_lift_path(p, c) for p, c in jobs]
    reports.sort(key=lambda r: (r.name, methods.index(r.method)))
    if out is not None:
        Path(out).write_text(to_csv(reports))
    return reports


def to_csv(reports: Sequence[LiftReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def summarize(reports: Sequence[LiftReport]) -> str:
    """Solved count, percentage, mean time and attempts per method."""
    lines = []
    methods = list(dict.fromkeys(r.method for r in reports))
    for method in methods:
        rows = [r for r in reports if r.method == method]
        solved = [r for r in rows if r.solved]
        pct = 100.0 * len(solved) / len(rows) if rows else 0.0
        mean_time = statistics.fmean(r.seconds for r in solved) if solved else 0.0
        mean_attempts = statistics.fmean(r.templates_validated for r in solved) if solved else 0.0
        cactus = sorted(r.seconds for r in solved)
        lines.append(
            f"{method}: solved {len(solved)}/{len(rows)} ({pct:.2f}%), "
            f"mean time {mean_time:.3f}s, mean attempts {mean_attempts:.2f}"
        )
        lines.append(f"{method} cactus: " + " ".join(f"{t:.3f}" for t in cactus))
    if not methods:
        lines.append("no benchmarks")
    return "\n".join(lines)
