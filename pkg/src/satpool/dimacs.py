"""DIMACS CNF reading, writing, and model verification.

Parsing is strict about structure (one header, integer tokens, terminated
clauses) but tolerant about the declared sizes: mismatched clause counts
and out-of-range literals are repaired with a warning, since competition
files occasionally disagree with their own headers.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import List, Mapping, TextIO, Union

from .formula import Formula, normalize_clause


class DimacsError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


@dataclass
class DimacsDocument:
    formula: Formula
    declared_vars: int
    declared_clauses: int
    comments: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    tautologies_dropped: int = 0


def parse_dimacs(source: Union[str, TextIO]) -> DimacsDocument:
    if isinstance(source, str):
        source = io.StringIO(source)
    header = None
    comments: List[str] = []
    warnings: List[str] = []
    clauses: List[tuple] = []
    current: List[int] = []
    parsed_count = 0
    tautologies = 0
    max_var = 0
    last_line = 0

    for lineno, raw in enumerate(source, start=1):
        last_line = lineno
        line = raw.strip()
        if not line:
            continue
        if line[0] == "c":
            comments.append(line[1:].lstrip())
            continue
        if line[0] == "p":
            if header is not None:
                raise DimacsError("duplicate header", lineno)
            tokens = line.split()
            if len(tokens) != 4 or tokens[0] != "p" or tokens[1] != "cnf":
                raise DimacsError("malformed header %r" % line, lineno)
            try:
                header = (int(tokens[2]), int(tokens[3]))
            except ValueError:
                raise DimacsError("non-integer header fields", lineno) from None
            if header[0] < 0 or header[1] < 0:
                raise DimacsError("negative header fields", lineno)
            continue
        if header is None:
            raise DimacsError("clause data before 'p cnf' header", lineno)
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise DimacsError("non-integer token %r" % token, lineno) from None
            if lit == 0:
                parsed_count += 1
                normalized = normalize_clause(current)
                current = []
                if normalized is None:
                    tautologies += 1
                else:
                    clauses.append(normalized)
                    for l in normalized:
                        if abs(l) > max_var:
                            max_var = abs(l)
            else:
                current.append(lit)

    if header is None:
        raise DimacsError("missing 'p cnf' header", max(last_line, 1))
    if current:
        raise DimacsError("unterminated final clause", last_line)

    declared_vars, declared_clauses = header
    num_vars = declared_vars
    if max_var > declared_vars:
        warnings.append(
            "literal range exceeds declared variable count (%d > %d); raised"
            % (max_var, declared_vars)
        )
        num_vars = max_var
    if parsed_count != declared_clauses:
        warnings.append(
            "declared %d clauses but parsed %d" % (declared_clauses, parsed_count)
        )
    return DimacsDocument(
        formula=Formula(num_vars, tuple(clauses)),
        declared_vars=declared_vars,
        declared_clauses=declared_clauses,
        comments=comments,
        warnings=warnings,
        tautologies_dropped=tautologies,
    )


def emit_dimacs(formula: Formula) -> str:
    lines = ["p cnf %d %d" % (formula.num_vars, len(formula.clauses))]
    for clause in formula.clauses:
        lines.append(" ".join(str(l) for l in clause) + " 0")
    return "\n".join(lines) + "\n"


def verify_model(formula: Formula, model: Mapping[int, bool]) -> bool:
    """True iff the model satisfies every clause of the formula."""
    for clause in formula.clauses:
        for lit in clause:
            if model.get(abs(lit)) == (lit > 0):
                break
        else:
            return False
    return True
