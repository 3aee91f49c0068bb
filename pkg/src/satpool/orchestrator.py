"""Per-process portfolio engine.

Each process loads the formula into its local solvers, diversifies them
within the global portfolio, runs one search thread per solver, and joins
the periodic sharing rounds: build a round message (status header plus
clause payload), all-gather it, act on any reported result, otherwise
distribute the incoming clauses. The first solver anywhere to finish wins;
its process interrupts local solvers immediately and the result reaches
everyone else with the next round.

Search threads never block on communication: they hand clauses to the
exchange pool non-blockingly and receive imports through per-solver
queues, while the collective runs on the control thread alone.
"""
from __future__ import annotations

import math
import threading
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from .cdcl import CdclSolver
from .diversification import DEFAULT_SEED, DiversificationMode, apply_diversification
from .exchange import DEFAULT_BUFFER_INTS, DEFAULT_RESET_PERIOD, ClauseExchange
from .formula import Formula, SatResult, SatStatus
from .interface import CoreSolver
from .transport import Transport

STATUS_RUNNING = 0
STATUS_SAT = 1
STATUS_UNSAT = 2

_STATUS_CODE = {SatStatus.SAT: STATUS_SAT, SatStatus.UNSAT: STATUS_UNSAT}
_CODE_STATUS = {STATUS_SAT: SatStatus.SAT, STATUS_UNSAT: SatStatus.UNSAT}

HEADER_INTS = 2  # status flag, finder rank (-1 while running)


class PortfolioConsistencyError(RuntimeError):
    """Processes reported contradictory results in one round."""


@dataclass
class ProcessConfig:
    rank: int = 0
    process_count: int = 1
    solvers_per_process: int = 1
    round_interval_ms: float = 1000.0
    buffer_ints: int = DEFAULT_BUFFER_INTS
    mode: DiversificationMode = DiversificationMode.SPARSE_RANDOM
    native_diversification: bool = True
    seed: int = DEFAULT_SEED
    reset_period: int = DEFAULT_RESET_PERIOD
    time_limit_s: Optional[float] = None
    sharing: bool = True

    def __post_init__(self):
        if not 0 <= self.rank < self.process_count:
            raise ValueError("rank must satisfy 0 <= rank < process_count")
        if self.buffer_ints < 16:
            raise ValueError("buffer_ints must be >= 16")
        if self.round_interval_ms < 1:
            raise ValueError("round_interval_ms must be >= 1")
        if self.solvers_per_process < 1:
            raise ValueError("solvers_per_process must be >= 1")

    @property
    def total_solvers(self) -> int:
        return self.process_count * self.solvers_per_process

    def max_rounds(self) -> Optional[int]:
        """Deterministic round cutoff implementing the time limit.

        Derived from configuration alone so every process stops at the
        same round and no rank is left blocking in the collective. Rounds
        can fire late when search threads hog the interpreter, so a
        single-process run additionally enforces the limit against the
        wall clock (with several processes that would risk divergent
        exits and a deadlocked collective).
        """
        if self.time_limit_s is None:
            return None
        return max(1, math.ceil(self.time_limit_s * 1000.0 / self.round_interval_ms))

    def checksum(self) -> int:
        """Fingerprint of everything that must agree across processes."""
        shared = (
            self.process_count,
            self.solvers_per_process,
            self.buffer_ints,
            self.mode.value,
            self.native_diversification,
            self.seed,
            self.round_interval_ms,
            self.time_limit_s,
            self.reset_period,
            self.sharing,
        )
        return zlib.crc32(repr(shared).encode()) & 0x7FFFFFFF


@dataclass
class NodeStats:
    """Optional per-node instrumentation sink."""

    capture_imports: bool = False
    rounds: int = 0
    status: Optional[SatStatus] = None
    finder_rank: Optional[int] = None
    local_find_time: Optional[float] = None
    exit_time: Optional[float] = None
    local_finder_solver: Optional[int] = None
    imported_clauses: list = field(default_factory=list)
    exchange: dict = field(default_factory=dict)
    solver_stats: list = field(default_factory=list)


class PortfolioNode:
    def __init__(
        self,
        formula: Formula,
        config: ProcessConfig,
        transport: Transport,
        solver_factory: Callable[[], CoreSolver] = CdclSolver,
        stats: Optional[NodeStats] = None,
    ):
        if transport.rank != config.rank or transport.size != config.process_count:
            raise ValueError("transport rank/size does not match configuration")
        self.formula = formula
        self.config = config
        self.transport = transport
        self.stats = stats if stats is not None else NodeStats()
        self.solvers: List[CoreSolver] = [solver_factory() for _ in range(config.solvers_per_process)]
        self.exchange = ClauseExchange(
            solver_count=config.solvers_per_process,
            buffer_ints=config.buffer_ints,
            reset_period=config.reset_period,
        )
        self._threads: List[threading.Thread] = []
        self._result_lock = threading.Lock()
        self._result_event = threading.Event()
        self._local_result: Optional[SatResult] = None
        self._solver_error: Optional[BaseException] = None

    # -- setup ---------------------------------------------------------

    def _prepare_solvers(self) -> None:
        config = self.config
        for index, solver in enumerate(self.solvers):
            if config.sharing:
                solver.set_learned_clause_callback(self._make_sink(index))
            if isinstance(solver, CdclSolver):
                solver.load_formula(self.formula)
            else:
                for clause in self.formula.clauses:
                    solver.add_clause(clause)
        apply_diversification(
            self.solvers,
            config.mode,
            config.native_diversification,
            process_rank=config.rank,
            total_solvers=config.total_solvers,
            num_vars=self.formula.num_vars,
            seed=config.seed,
        )

    def _make_sink(self, solver_index: int):
        exchange = self.exchange
        return lambda clause: exchange.export_from_solver(solver_index, clause)

    def _start_threads(self) -> None:
        for index in range(len(self.solvers)):
            t = threading.Thread(
                target=self._run_solver,
                args=(index,),
                name="solver-%d.%d" % (self.config.rank, index),
                daemon=True,
            )
            self._threads.append(t)
            t.start()

    def _run_solver(self, index: int) -> None:
        try:
            result = self.solvers[index].solve()
        except BaseException as exc:  # surface solver bugs instead of hanging
            self._solver_error = exc
            self._result_event.set()
            return
        if result.status in (SatStatus.SAT, SatStatus.UNSAT):
            self._record_local(result, index)
        # UNKNOWN results come from interrupted solvers and are ignored

    def _record_local(self, result: SatResult, solver_index: int) -> None:
        with self._result_lock:
            if self._local_result is not None:
                return
            self._local_result = result
        self.stats.local_find_time = time.monotonic()
        self.stats.local_finder_solver = solver_index
        # free latency win: stop local peers before the broadcast round
        for solver in self.solvers:
            solver.set_solver_interrupt()
        self._result_event.set()

    # -- round loop ----------------------------------------------------

    def run(self) -> SatResult:
        self._prepare_solvers()
        self._start_threads()
        try:
            result = self._round_loop()
        finally:
            self._shutdown()
        self.stats.status = result.status
        self.stats.exit_time = time.monotonic()
        self.stats.exchange = dict(self.exchange.stats)
        return result

    def _round_loop(self) -> SatResult:
        config = self.config
        interval_s = config.round_interval_ms / 1000.0
        width = HEADER_INTS + config.buffer_ints
        zero_payload = [0] * config.buffer_ints
        max_rounds = config.max_rounds()
        wall_deadline = None
        if config.time_limit_s is not None and config.process_count == 1:
            wall_deadline = time.monotonic() + config.time_limit_s
        round_no = 0
        while True:
            self._result_event.wait(timeout=interval_s)
            if self._solver_error is not None:
                raise self._solver_error
            round_no += 1
            self.stats.rounds = round_no

            local = self._local_result
            if local is not None:
                header = [_STATUS_CODE[local.status], config.rank]
            else:
                header = [STATUS_RUNNING, -1]
            if config.sharing:
                payload, used = self.exchange.fill_round_buffer()
            else:
                payload, used = zero_payload, 0
            flat = self.transport.allgather(header + payload)

            finished = []
            for j in range(config.process_count):
                flag = flat[j * width]
                finder = flat[j * width + 1]
                if flag != STATUS_RUNNING:
                    finished.append((finder, flag))
            if finished:
                return self._terminal_result(finished)

            if config.sharing:
                payloads = [
                    flat[j * width + HEADER_INTS:(j + 1) * width]
                    for j in range(config.process_count)
                ]
                delivered = self.exchange.import_round(payloads, own_index=config.rank)
                for solver, clauses in zip(self.solvers, delivered):
                    for clause in clauses:
                        solver.add_learned_clause(clause)
                if self.stats.capture_imports:
                    for clauses in delivered:
                        self.stats.imported_clauses.extend(clauses)
                self.exchange.underfill_check(used, self.solvers)
                self.exchange.maybe_reset(round_no)

            if max_rounds is not None and round_no >= max_rounds:
                return SatResult(SatStatus.UNKNOWN)
            if wall_deadline is not None and time.monotonic() >= wall_deadline:
                return SatResult(SatStatus.UNKNOWN)

    def _terminal_result(self, finished: Sequence) -> SatResult:
        finder_rank, flag = min(finished)
        if any(f != flag for _, f in finished):
            raise PortfolioConsistencyError(
                "processes disagree on satisfiability: %r" % (finished,)
            )
        self.stats.finder_rank = finder_rank
        status = _CODE_STATUS[flag]
        local = self._local_result
        if finder_rank == self.config.rank and local is not None:
            return local  # the finding process keeps the model
        return SatResult(status)

    def _shutdown(self) -> None:
        for solver in self.solvers:
            solver.set_solver_interrupt()
        for t in self._threads:
            t.join(timeout=60.0)
        self.stats.solver_stats = [
            s.stats() for s in self.solvers if hasattr(s, "stats")
        ]


def start_node(
    formula: Formula,
    config: ProcessConfig,
    transport: Transport,
    solver_factory: Callable[[], CoreSolver] = CdclSolver,
    stats: Optional[NodeStats] = None,
) -> SatResult:
    """Run one portfolio process to completion and return its result."""
    return PortfolioNode(formula, config, transport, solver_factory, stats).run()


def run_virtual_portfolio(
    formula: Formula,
    process_count: int,
    stats_list: Optional[List[NodeStats]] = None,
    solver_factory: Callable[[], CoreSolver] = CdclSolver,
    **config_kwargs,
) -> List[SatResult]:
    """Run a whole portfolio as virtual ranks inside this process.

    Builds an in-process transport group, runs one node per rank on its
    own thread, and returns the per-rank results (rank order). Used by
    tests and by the CLI's -p flag.
    """
    from .transport import create_inprocess_group

    transports = create_inprocess_group(process_count)
    results: List[Optional[SatResult]] = [None] * process_count
    errors: List[Optional[BaseException]] = [None] * process_count

    def run_rank(rank: int) -> None:
        config = ProcessConfig(rank=rank, process_count=process_count, **config_kwargs)
        stats = stats_list[rank] if stats_list else None
        try:
            results[rank] = start_node(formula, config, transports[rank], solver_factory, stats)
        except BaseException as exc:
            errors[rank] = exc
            transports[rank].close()  # unblock peers stuck in the collective

    threads = [
        threading.Thread(target=run_rank, args=(rank,), name="node-%d" % rank)
        for rank in range(process_count)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in errors:
        if exc is not None:
            raise exc
    return [r for r in results if r is not None]
