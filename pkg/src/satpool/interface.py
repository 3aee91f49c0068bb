"""Black-box contract between the portfolio and its core solvers.

The portfolio engine never looks inside a solver; it drives the search
exclusively through this interface. Any solver implementing it can join
the portfolio. All methods must be thread safe: control methods and the
clause-import path are called from the orchestrator thread while solve()
runs on a dedicated search thread.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable, Sequence

from .formula import SatResult

# Receives every clause the solver offers for sharing. Invoked from the
# solver's search thread, so implementations must not block.
ClauseSink = Callable[[Sequence[int]], None]


class CoreSolver(ABC):
    @abstractmethod
    def add_clause(self, clause: Sequence[int]) -> None:
        """Load one clause of the input formula.

        Only valid outside solve(); every added clause is considered by
        the next solve() call. Malformed clauses (a 0 literal) are
        rejected with MalformedClauseError.
        """

    @abstractmethod
    def solve(self) -> SatResult:
        """Search until SAT, UNSAT, or an interrupt (UNKNOWN).

        SAT results carry a verifying model. While the interrupt flag is
        set, solve() returns UNKNOWN immediately.
        """

    @abstractmethod
    def set_solver_interrupt(self) -> None:
        """Ask a running solve() to return UNKNOWN as soon as possible.

        The flag is sticky: later solve() calls keep returning UNKNOWN
        until unset_solver_interrupt().
        """

    @abstractmethod
    def unset_solver_interrupt(self) -> None:
        """Clear the interrupt flag."""

    @abstractmethod
    def set_phase(self, var: int, phase: bool) -> None:
        """Suggest the polarity to try first for a variable.

        Suggestions may be ignored; out-of-range variables are ignored
        (the orchestrator may issue suggestions before the formula is
        fully loaded).
        """

    @abstractmethod
    def diversify(self, rank: int, size: int) -> None:
        """Perturb solver settings as a deterministic function of (rank, size).

        rank identifies this solver among size portfolio members;
        rank 0 keeps the baseline configuration. rank >= size is a
        contract violation and raises ValueError.
        """

    @abstractmethod
    def add_learned_clause(self, clause: Sequence[int]) -> None:
        """Hand over a clause learned elsewhere in the portfolio.

        The clause must be a logical consequence of the loaded formula
        (the exchange pipeline guarantees this). The solver decides when,
        and whether, to actually use it.
        """

    @abstractmethod
    def set_learned_clause_callback(self, sink: ClauseSink) -> None:
        """Register the consumer for clauses this solver wants to share.

        Must be called before solve(). Without a callback, exports are
        silently dropped. Every exported clause is a logical consequence
        of the clauses passed to add_clause/add_learned_clause.
        """

    @abstractmethod
    def increase_clause_production(self) -> None:
        """Relax the export filter one step so more clauses are shared."""
