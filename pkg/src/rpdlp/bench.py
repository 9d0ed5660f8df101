"""Benchmark runner: solve every instance in a directory and aggregate times.

Times are aggregated with the shifted geometric mean (shift 10 seconds by
default) per nonzero-count size class. Instances that do not finish count at
the full time limit; files that fail to parse are reported but left out of
the means.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .mps import read_mps
from .solver import SolverParams, SolveStatus, solve

log = logging.getLogger(__name__)

DEFAULT_SHIFT = 10.0
PARSE_ERROR = "parse_error"
SOLVED_STATUSES = frozenset(
    s.value for s in (SolveStatus.OPTIMAL, SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.DUAL_INFEASIBLE)
)
# Lower nonzero-count bound of each class; classes are half-open [lower, next lower).
SIZE_CLASSES = (("tiny", 0), ("small", 100_000), ("medium", 1_000_000), ("large", 10_000_000))
INSTANCE_SUFFIXES = (".mps", ".mps.gz", ".free-mps", ".free-mps.gz")


def sgm(times, shift: float = DEFAULT_SHIFT) -> float:
    """Shifted geometric mean ``prod(t + shift) ** (1/n) - shift``, evaluated in log space."""
    times = list(times)
    if not times:
        raise ValueError("sgm of an empty list")
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    if any(t < 0 or math.isnan(t) for t in times):
        raise ValueError("times must be nonnegative")
    if shift == 0:
        if any(t == 0 for t in times):
            return 0.0
        return math.exp(math.fsum(math.log(t) for t in times) / len(times))
    # shift * (exp(mean(log(1 + t/shift))) - 1) keeps all-zero input exactly zero.
    mean_log = math.fsum(math.log1p(t / shift) for t in times) / len(times)
    return shift * math.expm1(mean_log)


def size_class(nnz: int) -> str:
    label = SIZE_CLASSES[0][0]
    for name, lower in SIZE_CLASSES:
        if nnz >= lower:
            label = name
    return label


@dataclass
class BenchmarkRecord:
    name: str
    nnz: int
    status: str
    solve_seconds: float
    total_seconds: float
    iterations: int
    primal_objective: float = math.nan
    dual_objective: float = math.nan
    relative_gap: float = math.nan
    relative_primal_residual: float = math.nan
    relative_dual_residual: float = math.nan
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.status in SOLVED_STATUSES

    @property
    def parsed(self) -> bool:
        return self.status != PARSE_ERROR


@dataclass
class ClassAggregate:
    size_class: str
    count: int
    solved: int
    sgm: float


@dataclass
class BenchmarkReport:
    records: list[BenchmarkRecord]
    aggregates: list[ClassAggregate]
    time_limit: float
    config_hash: str
    shift: float = DEFAULT_SHIFT


def config_hash(params: SolverParams) -> str:
    blob = json.dumps(params.as_dict(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def aggregate(records: list[BenchmarkRecord], time_limit: float, shift: float = DEFAULT_SHIFT) -> list[ClassAggregate]:
    """Per size class (plus "all") solve counts and SGM of solve times.

    Unsolved instances enter the mean at exactly ``time_limit``; parse
    failures are skipped. Classes without parsed instances are omitted.
    """
    groups: dict[str, list[BenchmarkRecord]] = {name: [] for name, _ in SIZE_CLASSES}
    for rec in records:
        if rec.parsed:
            groups[size_class(rec.nnz)].append(rec)
    out = []
    everything = [r for r in records if r.parsed]
    for name, group in list(groups.items()) + [("all", everything)]:
        if not group:
            continue
        times = [r.solve_seconds if r.solved else time_limit for r in group]
        out.append(ClassAggregate(name, len(group), sum(r.solved for r in group), sgm(times, shift)))
    return out


def find_instances(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    found = [p for p in directory.iterdir() if p.is_file() and p.name.lower().endswith(INSTANCE_SUFFIXES)]
    return sorted(found, key=lambda p: p.name)


def _instance_name(path: Path) -> str:
    name = path.name
    for suffix in sorted(INSTANCE_SUFFIXES, key=len, reverse=True):
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return name


def benchmark_one(path: str | Path, params: SolverParams) -> BenchmarkRecord:
    """Parse and solve one file; never raises for bad input."""
    path = Path(path)
    name = _instance_name(path)
    t0 = time.perf_counter()
    try:
        lp = read_mps(path)
    except (OSError, ValueError) as exc:
        return BenchmarkRecord(name, 0, PARSE_ERROR, 0.0, time.perf_counter() - t0, 0, message=str(exc))
    result = solve(lp, params)
    total = time.perf_counter() - t0
    status = result.status.value
    seconds = min(result.solve_seconds, params.time_limit)
    if status not in SOLVED_STATUSES:
        seconds = params.time_limit
    info = result.info
    return BenchmarkRecord(
        name=name,
        nnz=lp.nnz,
        status=status,
        solve_seconds=seconds,
        total_seconds=total,
        iterations=result.iterations,
        primal_objective=info.primal_objective,
        dual_objective=info.dual_objective,
        relative_gap=info.relative_gap,
        relative_primal_residual=info.relative_primal_residual,
        relative_dual_residual=info.relative_dual_residual,
        message=result.message,
    )


def run_benchmark(
    directory: str | Path,
    params: SolverParams | None = None,
    time_limit: float | None = None,
    report_path: str | Path | None = None,
    jobs: int = 1,
) -> BenchmarkReport:
    """Solve every instance file in ``directory`` and build the report.

    ``time_limit`` overrides ``params.time_limit``. With ``jobs > 1``
    instances run in separate worker processes; each solve stays
    single-threaded and rows are sorted by instance name either way.
    """
    params = params or SolverParams()
    if time_limit is not None:
        params = SolverParams(**{**params.as_dict(), "time_limit": time_limit})
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    paths = find_instances(directory)
    if jobs == 1:
        records = [benchmark_one(p, params) for p in paths]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(benchmark_one, paths, [params] * len(paths)))
    records.sort(key=lambda r: r.name)
    for rec in records:
        if not rec.parsed:
            log.warning("%s: parse failure excluded from aggregates: %s", rec.name, rec.message)
    report = BenchmarkReport(
        records, aggregate(records, params.time_limit), params.time_limit, config_hash(params)
    )
    if report_path is not None:
        write_report(report, report_path)
    return report


# Report file: one header line, one column line, then tab-separated rows.

_COLUMNS = [f.name for f in fields(BenchmarkRecord)]
_INT_COLUMNS = {"nnz", "iterations"}
_STR_COLUMNS = {"name", "status", "message"}


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value).replace("\t", " ").replace("\n", " ")


def format_report(report: BenchmarkReport) -> str:
    lines = [
        f"# rpdlp-bench config={report.config_hash} time_limit={report.time_limit!r} shift={report.shift!r}",
        "\t".join(_COLUMNS),
    ]
    for rec in report.records:
        lines.append("\t".join(_cell(getattr(rec, c)) for c in _COLUMNS))
    for agg in report.aggregates:
        lines.append(f"# class={agg.size_class} count={agg.count} solved={agg.solved} sgm={agg.sgm!r}")
    return "\n".join(lines) + "\n"


def write_report(report: BenchmarkReport, path: str | Path) -> None:
    Path(path).write_text(format_report(report))


def read_report(path: str | Path) -> BenchmarkReport:
    """Load a report written by :func:`write_report` and re-aggregate its rows."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# rpdlp-bench "):
        raise ValueError(f"{path}: not a benchmark report")
    header = dict(item.split("=", 1) for item in lines[0].split()[2:])
    if lines[1].split("\t") != _COLUMNS:
        raise ValueError(f"{path}: unexpected column layout")
    records = []
    for line in lines[2:]:
        if line.startswith("#") or not line:
            continue
        cells = line.split("\t")
        values = {}
        for col, cell in zip(_COLUMNS, cells):
            if col in _STR_COLUMNS:
                values[col] = cell
            elif col in _INT_COLUMNS:
                values[col] = int(cell)
            else:
                values[col] = float(cell)
        records.append(BenchmarkRecord(**values))
    time_limit = float(header["time_limit"])
    shift = float(header["shift"])
    return BenchmarkReport(records, aggregate(records, time_limit, shift), time_limit, header["config"], shift)
