"""Speedup evaluation over sequential/parallel run logs.

Implements the measures used to judge portfolio scaling: per-instance and
aggregate speedups (average, total, median), the big-instance restriction
(sequential runtime of at least 10x the core-solver count), and the
count-based speedup CBS, which compares the smallest time limits under
which both solvers finish the same number of instances.

A sequential timeout is charged generously: the solver is assumed to
finish just past its limit T1, so T1 itself enters the speedup ratio.
Instances the parallel solver did not finish carry no speedup at all.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from statistics import mean
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

DEFAULT_SEQ_LIMIT = 50_000.0
DEFAULT_PAR_LIMIT = 1_000.0


class MetricsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RunRecord:
    instance_id: str
    seq_time: float  # equals the limit when seq_timed_out
    seq_timed_out: bool
    par_time: float  # equals the limit when par_timed_out
    par_timed_out: bool

    def __post_init__(self):
        if self.seq_time <= 0 or self.par_time <= 0:
            raise MetricsFormatError("runtimes must be positive")


def per_instance_speedup(record: RunRecord) -> float:
    """Sequential over parallel runtime; requires the parallel side solved."""
    if record.par_timed_out:
        raise ValueError("speedup undefined when the parallel solver timed out")
    return record.seq_time / record.par_time


def big_instance_filter(records: Iterable[RunRecord], core_solvers: int) -> List[RunRecord]:
    """Keep instances whose (effective) sequential runtime is >= 10 * core_solvers."""
    threshold = 10.0 * core_solvers
    return [r for r in records if r.seq_time >= threshold]


def aggregate(records: Iterable[RunRecord]) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    """(average, total, median) speedup over the parallel-solved records.

    Total is the ratio of summed runtimes; the median of an even count is
    the mean of the two central values. An empty set yields (None, None,
    None) rather than zeros.
    """
    solved = [r for r in records if not r.par_timed_out]
    if not solved:
        return None, None, None
    ratios = sorted(per_instance_speedup(r) for r in solved)
    total = sum(r.seq_time for r in solved) / sum(r.par_time for r in solved)
    half, odd = divmod(len(ratios), 2)
    median = ratios[half] if odd else (ratios[half - 1] + ratios[half]) / 2.0
    return mean(ratios), total, median


def count_based_speedup(
    records: Sequence[RunRecord],
    seq_limit: float = DEFAULT_SEQ_LIMIT,
    par_limit: float = DEFAULT_PAR_LIMIT,
) -> Optional[float]:
    """Speedup from matching solved-instance counts under adjusted limits.

    With n1 (np) instances solved within the sequential (parallel) limit:
    if n1 < np, the parallel limit is tightened to the smallest value
    still solving n1 instances and CBS = seq_limit / that value;
    otherwise the sequential limit is tightened to the smallest value
    solving np instances and CBS = that value / par_limit. Degenerate
    count combinations (either side solving nothing) yield None.
    """
    seq_times = sorted(r.seq_time for r in records
                       if not r.seq_timed_out and r.seq_time <= seq_limit)
    par_times = sorted(r.par_time for r in records
                       if not r.par_timed_out and r.par_time <= par_limit)
    n1, np = len(seq_times), len(par_times)
    if np == 0 or (n1 == 0 and np > 0):
        return None
    if n1 < np:
        tightened_par = par_times[n1 - 1]
        return seq_limit / tightened_par
    tightened_seq = seq_times[np - 1]
    return tightened_seq / par_limit


@dataclass
class SpeedupReport:
    core_solvers: int
    parallel_solved: int
    both_solved: int
    all_avg: Optional[float]
    all_total: Optional[float]
    all_median: Optional[float]
    big_count: int
    big_avg: Optional[float]
    big_total: Optional[float]
    big_median: Optional[float]
    cbs: Optional[float]


def compute_report(
    records: Sequence[RunRecord],
    core_solvers: int,
    seq_limit: float = DEFAULT_SEQ_LIMIT,
    par_limit: float = DEFAULT_PAR_LIMIT,
) -> SpeedupReport:
    solved = [r for r in records if not r.par_timed_out]
    both = [r for r in solved if not r.seq_timed_out and r.seq_time <= seq_limit]
    big = big_instance_filter(solved, core_solvers)
    all_avg, all_total, all_median = aggregate(solved)
    big_avg, big_total, big_median = aggregate(big)
    return SpeedupReport(
        core_solvers=core_solvers,
        parallel_solved=len(solved),
        both_solved=len(both),
        all_avg=all_avg,
        all_total=all_total,
        all_median=all_median,
        big_count=len(big),
        big_avg=big_avg,
        big_total=big_total,
        big_median=big_median,
        cbs=count_based_speedup(records, seq_limit, par_limit),
    )


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else "%.2f" % value


def format_report(report: SpeedupReport) -> str:
    lines = [
        "core solvers:      %d" % report.core_solvers,
        "parallel solved:   %d" % report.parallel_solved,
        "both solved:       %d" % report.both_solved,
        "speedup all  (avg/total/median): %s / %s / %s"
        % (_fmt(report.all_avg), _fmt(report.all_total), _fmt(report.all_median)),
        "speedup big  (avg/total/median): %s / %s / %s   [%d instances]"
        % (_fmt(report.big_avg), _fmt(report.big_total), _fmt(report.big_median),
           report.big_count),
        "count-based speedup: %s" % _fmt(report.cbs),
    ]
    return "\n".join(lines)


# ----------------------------------------------------------------------
# run-log ingestion

_SOLVER_NAMES = {"seq": "seq", "sequential": "seq", "par": "par", "parallel": "par"}
_SOLVED_STATUSES = {"SAT", "UNSAT"}
_UNSOLVED_STATUSES = {"UNKNOWN", "TIMEOUT"}


def ingest_run_log(
    source: Union[str, TextIO],
    seq_limit: float = DEFAULT_SEQ_LIMIT,
    par_limit: float = DEFAULT_PAR_LIMIT,
) -> List[RunRecord]:
    """Read `instance,solver,status,seconds` CSV rows into paired records.

    solver is seq/sequential or par/parallel; a status other than
    SAT/UNSAT, or a missing row entirely, counts as a timeout at that
    solver's limit.
    """
    if isinstance(source, str):
        with open(source, newline="") as handle:
            return ingest_run_log(handle, seq_limit, par_limit)
    timings: dict = {}
    order: List[str] = []
    for lineno, row in enumerate(csv.reader(source), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        if len(row) != 4:
            raise MetricsFormatError("line %d: expected 4 fields, got %d" % (lineno, len(row)))
        instance, solver_raw, status_raw, seconds_raw = (f.strip() for f in row)
        solver = _SOLVER_NAMES.get(solver_raw.lower())
        if solver is None:
            raise MetricsFormatError("line %d: unknown solver %r" % (lineno, solver_raw))
        status = status_raw.upper()
        if status not in _SOLVED_STATUSES | _UNSOLVED_STATUSES:
            raise MetricsFormatError("line %d: unknown status %r" % (lineno, status_raw))
        solved = status in _SOLVED_STATUSES
        if solved:
            try:
                seconds = float(seconds_raw)
            except ValueError:
                raise MetricsFormatError(
                    "line %d: bad runtime %r" % (lineno, seconds_raw)
                ) from None
            if seconds <= 0:
                raise MetricsFormatError("line %d: runtimes must be positive" % lineno)
        else:
            seconds = seq_limit if solver == "seq" else par_limit
        if instance not in timings:
            timings[instance] = {}
            order.append(instance)
        if solver in timings[instance]:
            raise MetricsFormatError(
                "line %d: duplicate %s row for instance %r" % (lineno, solver, instance)
            )
        timings[instance][solver] = (seconds, not solved)
    records = []
    for instance in order:
        seq = timings[instance].get("seq", (seq_limit, True))
        par = timings[instance].get("par", (par_limit, True))
        records.append(RunRecord(instance, seq[0], seq[1], par[0], par[1]))
    return records


def cactus_points(records: Iterable[RunRecord], side: str) -> List[Tuple[int, float]]:
    """(instances solved, time limit) curve for one solver side."""
    if side == "seq":
        times = sorted(r.seq_time for r in records if not r.seq_timed_out)
    elif side == "par":
        times = sorted(r.par_time for r in records if not r.par_timed_out)
    else:
        raise ValueError("side must be 'seq' or 'par'")
    return [(k, t) for k, t in enumerate(times, start=1)]


def console_main() -> None:
    parser = argparse.ArgumentParser(
        prog="satpool-bench",
        description="Speedup report over a sequential/parallel run log.",
    )
    parser.add_argument("runlog", help="CSV file: instance,solver,status,seconds")
    parser.add_argument("-p", "--core-solvers", type=int, default=1,
                        help="total core solvers of the parallel configuration")
    parser.add_argument("--t1", type=float, default=DEFAULT_SEQ_LIMIT,
                        help="sequential time limit")
    parser.add_argument("--tp", type=float, default=DEFAULT_PAR_LIMIT,
                        help="parallel time limit")
    parser.add_argument("--cactus", metavar="PREFIX",
                        help="write PREFIX_seq.csv / PREFIX_par.csv cactus data")
    args = parser.parse_args()
    try:
        records = ingest_run_log(args.runlog, args.t1, args.tp)
    except (OSError, MetricsFormatError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        sys.exit(1)
    report = compute_report(records, args.core_solvers, args.t1, args.tp)
    print(format_report(report))
    if args.cactus:
        for side in ("seq", "par"):
            path = "%s_%s.csv" % (args.cactus, side)
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["solved", "time_limit"])
                writer.writerows(cactus_points(records, side))
    sys.exit(0)


if __name__ == "__main__":
    console_main()
