"""Process-backed core solver.

CPython threads contend for one interpreter lock, so a portfolio of
in-thread solvers time-slices a single core. ProcessCdclSolver implements
the same black-box contract but hosts the search in a worker OS process:
solve() blocks its calling thread on a pipe (releasing the interpreter
lock) while the worker burns its own core. Exports stream back over the
pipe to the registered callback; imports and production requests stream
forward and are picked up by the worker between restarts; the interrupt
travels through shared memory so it lands within a few milliseconds.

The spawn start method is used deliberately: forking a multi-threaded
parent (the orchestrator always is one) risks deadlocking on locks held
by other threads.
"""
from __future__ import annotations

import multiprocessing
import threading
from typing import Optional, Sequence

from .cdcl import CdclSolver
from .formula import SatResult, SatStatus, normalize_clause
from .interface import ClauseSink, CoreSolver

_ctx = multiprocessing.get_context("spawn")

_POLL_INTERVAL_S = 0.002


def _worker_main(conn, interrupt_flag, clauses, phases, diversify_args, production_steps, backlog):
    solver = CdclSolver()
    for clause in clauses:
        solver.add_clause(clause)
    if diversify_args is not None:
        solver.diversify(*diversify_args)
    for var, phase in phases:
        solver.set_phase(var, phase)
    for _ in range(production_steps):
        solver.increase_clause_production()
    for clause in backlog:
        solver.add_learned_clause(clause)
    solver.set_learned_clause_callback(lambda c: conn.send(("clause", c)))

    done = threading.Event()

    def watch_interrupt():
        while not done.wait(_POLL_INTERVAL_S):
            if interrupt_flag.value:
                solver.set_solver_interrupt()
                return

    def drain_commands():
        try:
            while True:
                msg = conn.recv()
                if msg[0] == "import":
                    for clause in msg[1]:
                        solver.add_learned_clause(clause)
                elif msg[0] == "increase":
                    solver.increase_clause_production()
        except (EOFError, OSError):
            pass

    threading.Thread(target=watch_interrupt, daemon=True).start()
    threading.Thread(target=drain_commands, daemon=True).start()
    try:
        result = solver.solve()
        conn.send(("result", result.status.value, result.model))
    finally:
        done.set()
        conn.close()


class ProcessCdclSolver(CoreSolver):
    """CdclSolver behind the same interface, searching in a worker process."""

    def __init__(self):
        self._clauses: list = []
        self._phases: dict = {}
        self._diversify_args: Optional[tuple] = None
        self._production_steps = 0
        self._backlog: list = []
        self._interrupt = _ctx.Value("b", 0, lock=False)
        self._conn = None
        self._conn_lock = threading.Lock()
        self._callback: Optional[ClauseSink] = None
        self._solving = False

    def add_clause(self, clause: Sequence[int]) -> None:
        if self._solving:
            raise RuntimeError("add_clause is only valid outside solve()")
        lits = normalize_clause(clause)
        if lits is not None:
            self._clauses.append(lits)

    def set_solver_interrupt(self) -> None:
        self._interrupt.value = 1

    def unset_solver_interrupt(self) -> None:
        self._interrupt.value = 0

    def set_phase(self, var: int, phase: bool) -> None:
        self._phases[var] = bool(phase)

    def diversify(self, rank: int, size: int) -> None:
        if rank < 0 or size < 1 or rank >= size:
            raise ValueError("diversify requires 0 <= rank < size")
        self._diversify_args = (rank, size)

    def add_learned_clause(self, clause: Sequence[int]) -> None:
        clause = tuple(clause)
        with self._conn_lock:
            conn = self._conn
            if conn is not None:
                try:
                    conn.send(("import", [clause]))
                    return
                except (OSError, ValueError):
                    pass  # worker is going away; queue for the next solve
            self._backlog.append(clause)

    def set_learned_clause_callback(self, sink: Optional[ClauseSink]) -> None:
        self._callback = sink

    def increase_clause_production(self) -> None:
        self._production_steps += 1
        with self._conn_lock:
            conn = self._conn
            if conn is not None:
                try:
                    conn.send(("increase",))
                except (OSError, ValueError):
                    pass

    def solve(self) -> SatResult:
        if self._interrupt.value:
            return SatResult(SatStatus.UNKNOWN)
        self._solving = True
        parent_conn, child_conn = _ctx.Pipe()
        backlog, self._backlog = self._backlog, []
        worker = _ctx.Process(
            target=_worker_main,
            args=(
                child_conn,
                self._interrupt,
                self._clauses,
                sorted(self._phases.items()),
                self._diversify_args,
                self._production_steps,
                backlog,
            ),
            daemon=True,
        )
        try:
            worker.start()
            child_conn.close()
            with self._conn_lock:
                self._conn = parent_conn
            callback = self._callback
            while True:
                try:
                    msg = parent_conn.recv()
                except EOFError:
                    raise RuntimeError("core solver worker died unexpectedly")
                if msg[0] == "clause":
                    if callback is not None:
                        callback(msg[1])
                elif msg[0] == "result":
                    status = SatStatus(msg[1])
                    model = msg[2]
                    return SatResult(status, model)
        finally:
            with self._conn_lock:
                self._conn = None
            parent_conn.close()
            worker.join(timeout=30.0)
            if worker.is_alive():
                worker.terminate()
                worker.join()
            self._solving = False
