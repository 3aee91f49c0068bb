"""Phase-recommendation plans and portfolio-wide solver diversification.

Plans are derived deterministically from a shared seed, so every process
computes the same global plan without any coordination messages and then
applies just its own slice.
"""
from __future__ import annotations

import random
from enum import Enum
from typing import Dict, List, Sequence

# One phase map per global solver index.
PhasePlan = List[Dict[int, bool]]

DEFAULT_SEED = 2015


class DiversificationMode(Enum):
    NONE = "none"
    RANDOM = "random"
    SPARSE = "sparse"
    SPARSE_RANDOM = "sparserandom"


def random_plan(num_vars: int, solver_count: int, seed: int) -> PhasePlan:
    """Every (solver, variable) pair gets a random phase recommendation."""
    rng = random.Random(seed * 4 + 1)
    plan: PhasePlan = [{} for _ in range(solver_count)]
    for var in range(1, num_vars + 1):
        for entry in plan:
            entry[var] = rng.random() < 0.5
    return plan


def sparse_plan(num_vars: int, solver_count: int, seed: int) -> PhasePlan:
    """Each variable is recommended on exactly one solver of the portfolio."""
    rng = random.Random(seed * 4 + 2)
    plan: PhasePlan = [{} for _ in range(solver_count)]
    for var in range(1, num_vars + 1):
        owner = rng.randrange(solver_count)
        plan[owner][var] = rng.random() < 0.5
    return plan


def sparse_random_plan(num_vars: int, solver_count: int, seed: int) -> PhasePlan:
    """Each (solver, variable) pair is recommended independently with probability 1/solver_count."""
    rng = random.Random(seed * 4 + 3)
    threshold = 1.0 / solver_count
    plan: PhasePlan = [{} for _ in range(solver_count)]
    for var in range(1, num_vars + 1):
        for entry in plan:
            if rng.random() < threshold:
                entry[var] = rng.random() < 0.5
    return plan


def build_plan(mode: DiversificationMode, num_vars: int, solver_count: int, seed: int) -> PhasePlan:
    if mode is DiversificationMode.RANDOM:
        return random_plan(num_vars, solver_count, seed)
    if mode is DiversificationMode.SPARSE:
        return sparse_plan(num_vars, solver_count, seed)
    if mode is DiversificationMode.SPARSE_RANDOM:
        return sparse_random_plan(num_vars, solver_count, seed)
    return [{} for _ in range(solver_count)]


def apply_diversification(
    solvers: Sequence,
    mode: DiversificationMode,
    native: bool,
    process_rank: int,
    total_solvers: int,
    num_vars: int,
    seed: int = DEFAULT_SEED,
) -> None:
    """Configure this process's solvers within the global portfolio.

    Solver i of process r has global index r * len(solvers) + i; the
    phase plan is computed for the whole portfolio so all processes stay
    consistent, and the native diversify(rank, size) hook is driven with
    global indices.
    """
    plan = build_plan(mode, num_vars, total_solvers, seed)
    local_count = len(solvers)
    for local_index, solver in enumerate(solvers):
        global_index = process_rank * local_count + local_index
        if native:
            solver.diversify(global_index, total_solvers)
        for var, phase in plan[global_index].items():
            solver.set_phase(var, phase)
