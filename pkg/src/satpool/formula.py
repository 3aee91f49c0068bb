"""Shared vocabulary: literals, clauses, formulas, assignments, solve results.

Literals follow the DIMACS convention: a nonzero signed integer, where j
stands for variable j being true and -j for it being false. A clause is a
tuple of literals, a formula a tuple of clauses over variables 1..num_vars.
Everything here is immutable after construction and safe to share between
threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

Clause = tuple


class MalformedClauseError(ValueError):
    """A clause contained the reserved literal 0."""


class ClauseState(Enum):
    SATISFIED = "satisfied"
    FALSIFIED = "falsified"
    UNDETERMINED = "undetermined"


class SatStatus(Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class SatResult:
    """Outcome of a solve: status plus a model when one is available.

    Core solvers always attach a model to a SAT answer. A portfolio node
    that learns of a remote SAT answer reports the status without the
    model (only the finding process keeps it).
    """

    status: SatStatus
    model: Optional[Mapping[int, bool]] = None

    def __post_init__(self):
        if self.model is not None and self.status is not SatStatus.SAT:
            raise ValueError("only SAT results may carry a model")


@dataclass(frozen=True)
class Formula:
    """CNF formula: clause tuples over variables 1..num_vars."""

    num_vars: int
    clauses: tuple

    def __post_init__(self):
        for clause in self.clauses:
            for lit in clause:
                if lit == 0:
                    raise MalformedClauseError("literal 0 in clause")
                if abs(lit) > self.num_vars:
                    raise ValueError(
                        "literal %d exceeds declared variable count %d"
                        % (lit, self.num_vars)
                    )

    @classmethod
    def from_clauses(cls, clauses: Iterable[Sequence[int]], num_vars: int | None = None) -> "Formula":
        """Build a formula, inferring num_vars from the clauses if not given."""
        frozen = tuple(tuple(c) for c in clauses)
        if num_vars is None:
            num_vars = max((abs(l) for c in frozen for l in c), default=0)
        return cls(num_vars, frozen)


def normalize_clause(raw: Sequence[int]) -> Optional[Clause]:
    """Drop duplicate literals, keeping first-seen order.

    Returns None for tautologies (both j and -j present); the caller is
    expected to discard the clause. Raises MalformedClauseError on a 0
    literal. Idempotent on already-normalized clauses.
    """
    seen = set()
    out = []
    for lit in raw:
        if lit == 0:
            raise MalformedClauseError("literal 0 in clause")
        if lit in seen:
            continue
        if -lit in seen:
            return None
        seen.add(lit)
        out.append(lit)
    return tuple(out)


def evaluate_clause(clause: Sequence[int], assignment: Mapping[int, Optional[bool]]) -> ClauseState:
    """Classify a clause under a (possibly partial) assignment.

    The assignment maps every variable in the clause to True, False, or
    None (unassigned); a missing variable raises KeyError (domain error).
    """
    values = [assignment[abs(lit)] for lit in clause]
    undetermined = False
    for lit, value in zip(clause, values):
        if value is None:
            undetermined = True
        elif value == (lit > 0):
            return ClauseState.SATISFIED
    return ClauseState.UNDETERMINED if undetermined else ClauseState.FALSIFIED
