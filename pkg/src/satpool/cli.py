"""Command-line frontend.

Reads a DIMACS CNF file, runs the portfolio, and prints the result in
SAT-competition format ("s ..." status line, zero-terminated "v" model
lines). Exit codes follow the competition convention: 10 satisfiable,
20 unsatisfiable, 0 unknown.

Parallelism is configured on two axes: -c solvers per process, and either
-p virtual processes inside this one (in-process transport) or a real
distributed run where every participant is started separately with
--listen (rank 0) or --connect (other ranks).
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from typing import List, Optional

from .cdcl import CdclSolver
from .diversification import DiversificationMode
from .dimacs import DimacsError, parse_dimacs, verify_model
from .formula import Formula, SatResult, SatStatus
from .orchestrator import NodeStats, ProcessConfig, run_virtual_portfolio, start_node
from .transport import TcpTransport, TransportError, create_inprocess_group
from .workers import ProcessCdclSolver

EXIT_SAT = 10
EXIT_UNSAT = 20
EXIT_UNKNOWN = 0
EXIT_ERROR = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satpool",
        description="Portfolio SAT solver with periodic clause sharing.",
    )
    parser.add_argument("cnf", help="DIMACS CNF file, or - for stdin")
    parser.add_argument("-c", "--solvers", type=int, default=None,
                        help="core solvers per process (default: CPU count)")
    parser.add_argument("-p", "--processes", type=int, default=1,
                        help="virtual processes run inside this one")
    parser.add_argument("-t", "--time-limit", type=float, default=None,
                        help="time limit in seconds")
    parser.add_argument("-i", "--interval-ms", type=float, default=1000.0,
                        help="sleep between sharing rounds (milliseconds)")
    parser.add_argument("-b", "--buffer-ints", type=int, default=1500,
                        help="clause buffer size in integers per round")
    parser.add_argument("-d", "--diversification", default="sparserandom",
                        choices=[m.value for m in DiversificationMode],
                        help="phase diversification mode")
    parser.add_argument("--no-native-div", action="store_true",
                        help="skip the solver-native diversify() hook")
    parser.add_argument("-s", "--seed", type=int, default=2015,
                        help="portfolio-wide diversification seed")
    parser.add_argument("-r", "--reset-period", type=int, default=20,
                        help="rounds between duplicate-filter resets")
    parser.add_argument("--no-sharing", action="store_true",
                        help="disable clause exchange (pure portfolio)")
    parser.add_argument("--backend", choices=["auto", "thread", "process"],
                        default="auto",
                        help="run core solvers in threads or worker processes")
    parser.add_argument("--listen", metavar="HOST:PORT",
                        help="act as rank 0 of a distributed run")
    parser.add_argument("--connect", metavar="HOST:PORT",
                        help="join a distributed run at the given rank 0")
    parser.add_argument("--rank", type=int, default=None,
                        help="this process's rank for --connect")
    parser.add_argument("--tcp-procs", type=int, default=None,
                        help="total process count of the distributed run")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="suppress informational 'c' lines")
    return parser


def _pick_solver_factory(backend: str, solvers: int, processes: int):
    if backend == "thread":
        return CdclSolver
    if backend == "process":
        return ProcessCdclSolver
    # auto: worker processes only pay off with real cores to spare
    cores = os.cpu_count() or 1
    if cores > 1 and solvers * processes > 1:
        return ProcessCdclSolver
    return CdclSolver


def _print_result(result: SatResult, formula: Formula, quiet: bool) -> int:
    if result.status is SatStatus.SAT and result.model is not None:
        if not verify_model(formula, result.model):
            print("c ERROR: model failed verification; refusing to report SAT",
                  file=sys.stderr)
            return EXIT_ERROR
        print("s SATISFIABLE")
        lits = [v if result.model[v] else -v for v in sorted(result.model)]
        lits.append(0)
        for start in range(0, len(lits), 20):
            print("v " + " ".join(str(l) for l in lits[start:start + 20]))
        return EXIT_SAT
    if result.status is SatStatus.SAT:
        # a remote process holds the model; report the status only
        print("s SATISFIABLE")
        return EXIT_SAT
    if result.status is SatStatus.UNSAT:
        print("s UNSATISFIABLE")
        return EXIT_UNSAT
    print("s UNKNOWN")
    return EXIT_UNKNOWN


def _parse_endpoint(value: str):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError("expected HOST:PORT, got %r" % value)
    return host, int(port)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cnf == "-":
            document = parse_dimacs(sys.stdin)
        else:
            with open(args.cnf) as handle:
                document = parse_dimacs(handle)
    except (OSError, DimacsError) as exc:
        print("c ERROR: %s" % exc, file=sys.stderr)
        return EXIT_ERROR
    formula = document.formula
    if not args.quiet:
        for warning in document.warnings:
            print("c WARNING: %s" % warning)
        if document.tautologies_dropped:
            print("c dropped %d tautological clauses" % document.tautologies_dropped)
        print("c %d variables, %d clauses" % (formula.num_vars, len(formula.clauses)))

    solvers = args.solvers if args.solvers else (os.cpu_count() or 1)
    base = dict(
        solvers_per_process=solvers,
        round_interval_ms=args.interval_ms,
        buffer_ints=args.buffer_ints,
        mode=DiversificationMode(args.diversification),
        native_diversification=not args.no_native_div,
        seed=args.seed,
        reset_period=args.reset_period,
        time_limit_s=args.time_limit,
        sharing=not args.no_sharing,
    )

    started = time.monotonic()
    try:
        if args.listen or args.connect:
            result, stats = _run_distributed(args, formula, base, solvers)
        elif args.processes > 1:
            factory = _pick_solver_factory(args.backend, solvers, args.processes)
            stats_list = [NodeStats() for _ in range(args.processes)]
            results = run_virtual_portfolio(
                formula, args.processes, stats_list=stats_list,
                solver_factory=factory, **base,
            )
            result = next((r for r in results if r.model is not None), results[0])
            stats = stats_list[0]
        else:
            factory = _pick_solver_factory(args.backend, solvers, 1)
            config = ProcessConfig(rank=0, process_count=1, **base)
            stats = NodeStats()
            (transport,) = create_inprocess_group(1)
            result = start_node(formula, config, transport, factory, stats)
    except (TransportError, ValueError) as exc:
        print("c ERROR: %s" % exc, file=sys.stderr)
        return EXIT_ERROR

    if not args.quiet:
        print("c solved in %.3f s, %d rounds, finder rank %s"
              % (time.monotonic() - started, stats.rounds, stats.finder_rank))
        if stats.exchange:
            print("c exchange: %s"
                  % " ".join("%s=%d" % kv for kv in sorted(stats.exchange.items())))
    return _print_result(result, formula, args.quiet)


def _run_distributed(args, formula: Formula, base: dict, solvers: int):
    if args.tcp_procs is None or args.tcp_procs < 2:
        raise ValueError("--tcp-procs >= 2 is required for distributed runs")
    if args.listen:
        rank = 0
        host, port = _parse_endpoint(args.listen)
    else:
        if args.rank is None or args.rank < 1:
            raise ValueError("--connect requires --rank >= 1")
        rank = args.rank
        host, port = _parse_endpoint(args.connect)
    config = ProcessConfig(rank=rank, process_count=args.tcp_procs, **base)
    if rank == 0:
        transport = TcpTransport.listen(
            host, port, args.tcp_procs, config.checksum(), config.buffer_ints
        )
    else:
        transport = TcpTransport.connect(
            host, port, rank, args.tcp_procs, config.checksum(), config.buffer_ints
        )
    factory = _pick_solver_factory(args.backend, solvers, 1)
    stats = NodeStats()
    try:
        result = start_node(formula, config, transport, factory, stats)
    finally:
        transport.close()
    return result, stats


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
