"""Conflict-driven clause-learning core solver.

Implements the portfolio's CoreSolver contract with the usual machinery:
two-watched-literal propagation, first-UIP learning, VSIDS-style variable
activity with multiplicative decay, phase saving, Luby restarts, and
periodic deletion of high-glue learned clauses.

Cross-thread inputs (interrupt flag, phase suggestions, import queue,
export sink, production level) are plain attribute/deque operations that
are atomic under the interpreter lock; the search loop never blocks on
them. Literal values are looked up through a sign-folded index
(2*v for literal +v, 2*v+1 for -v) so arrays can grow without remapping.
"""
from __future__ import annotations

import random
from collections import deque
from heapq import heappop, heappush
from typing import Optional, Sequence

from .formula import Formula, MalformedClauseError, SatResult, SatStatus, normalize_clause
from .interface import ClauseSink, CoreSolver

EXPORT_LIMIT_INITIAL = 3
EXPORT_LIMIT_CAP = 30
GLUE_KEEP = 3  # learned clauses at or below this glue are never deleted

# Parameter rows applied by diversify(rank, size), indexed rank mod 8:
# (restart base in conflicts, activity decay, random-decision frequency).
# Row 0 is the baseline configuration.
DIVERSIFICATION_ROWS = (
    (64, 0.95, 0.00),
    (256, 0.95, 0.00),
    (64, 0.85, 0.00),
    (1024, 0.95, 0.02),
    (64, 0.95, 0.02),
    (256, 0.85, 0.02),
    (1024, 0.85, 0.00),
    (256, 0.95, 0.02),
)

_RESCALE_LIMIT = 1e100
_RESCALE_FACTOR = 1e-100


def luby(i: int) -> int:
    """i-th element (0-based) of the Luby restart sequence 1,1,2,1,1,2,4,..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) // 2
        seq -= 1
        i %= size
    return 1 << seq


class _Clause:
    __slots__ = ("lits", "learned", "foreign", "glue")

    def __init__(self, lits, learned=False, foreign=False, glue=0):
        self.lits = lits
        self.learned = learned
        self.foreign = foreign
        self.glue = glue


class CdclSolver(CoreSolver):
    def __init__(self, num_vars: int = 0, seed: int = 0):
        self._nv = 0
        self._litval: list = [None, None]  # index 0/1 unused (variable 0)
        self._watches: list = [[], []]
        self._level = [0]
        self._reason: list = [None]
        self._act = [0.0]
        self._phase: list = [None]
        self._seen = bytearray(1)
        self._heap: list = []
        self._trail: list = []
        self._trail_lim: list = []
        self._qhead = 0
        self._dl = 0

        self._clauses: list = []  # problem clauses of length >= 2
        self._learned: list = []  # learned clauses, local and foreign
        self._pending_units: list = []
        self._db_keys: set = set()
        self._root_unsat = False

        self._rng = random.Random(seed)
        self._restart_base, decay, self._rand_freq = DIVERSIFICATION_ROWS[0]
        self._act_inc = 1.0
        self._act_growth = 1.0 / decay

        self._interrupt = False
        self._searching = False
        self._import_queue: deque = deque()
        self._callback: Optional[ClauseSink] = None
        self._export_limit = EXPORT_LIMIT_INITIAL

        self.decisions = 0
        self.conflicts = 0
        self.propagations = 0
        self.restarts = 0
        self.loop_iterations = 0
        self.exported = 0
        self.imported = 0
        self._reductions = 0
        self._next_reduce = 2000

        if num_vars:
            self._ensure_var(num_vars)

    # ------------------------------------------------------------------
    # loading

    def _ensure_var(self, v: int) -> None:
        while self._nv < v:
            self._nv += 1
            self._litval.extend((None, None))
            self._watches.extend(([], []))
            self._level.append(0)
            self._reason.append(None)
            self._act.append(0.0)
            self._phase.append(None)
            self._seen.append(0)
            heappush(self._heap, (0.0, self._nv))

    def add_clause(self, clause: Sequence[int]) -> None:
        if self._searching:
            raise RuntimeError("add_clause is only valid outside solve()")
        lits = normalize_clause(clause)
        if lits is None:  # tautology
            return
        key = tuple(sorted(lits))
        if key in self._db_keys:
            return
        self._db_keys.add(key)
        for lit in lits:
            self._ensure_var(lit if lit > 0 else -lit)
        if not lits:
            self._root_unsat = True
        elif len(lits) == 1:
            self._pending_units.append(lits[0])
        else:
            c = _Clause(list(lits))
            self._clauses.append(c)
            self._attach(c)

    def load_formula(self, formula: Formula) -> None:
        self._ensure_var(formula.num_vars)
        for clause in formula.clauses:
            self.add_clause(clause)

    def _attach(self, c: _Clause) -> None:
        for lit in c.lits[:2]:
            self._watches[lit + lit if lit > 0 else 1 - lit - lit].append(c)

    # ------------------------------------------------------------------
    # interface control surface

    def set_solver_interrupt(self) -> None:
        self._interrupt = True

    def unset_solver_interrupt(self) -> None:
        self._interrupt = False

    def set_phase(self, var: int, phase: bool) -> None:
        # Out-of-range suggestions are ignored by design.
        if 1 <= var <= self._nv:
            self._phase[var] = bool(phase)

    def diversify(self, rank: int, size: int) -> None:
        if rank < 0 or size < 1 or rank >= size:
            raise ValueError("diversify requires 0 <= rank < size")
        self._rng = random.Random(rank)
        base, decay, freq = DIVERSIFICATION_ROWS[rank % len(DIVERSIFICATION_ROWS)]
        self._restart_base = base
        self._act_growth = 1.0 / decay
        self._rand_freq = freq

    def add_learned_clause(self, clause: Sequence[int]) -> None:
        self._import_queue.append(tuple(clause))

    def set_learned_clause_callback(self, sink: Optional[ClauseSink]) -> None:
        self._callback = sink

    def increase_clause_production(self) -> None:
        if self._export_limit < EXPORT_LIMIT_CAP:
            self._export_limit += 1

    @property
    def export_limit(self) -> int:
        return self._export_limit

    # ------------------------------------------------------------------
    # search

    def solve(self) -> SatResult:
        if self._interrupt:
            return SatResult(SatStatus.UNKNOWN)
        self._searching = True
        try:
            return self._search()
        finally:
            self._searching = False

    def _search(self) -> SatResult:
        self._backjump(0)
        self._qhead = 0  # re-scan the root trail against any new clauses
        if not self._enqueue_pending_units():
            self._root_unsat = True
        self._import_queued()
        if self._root_unsat:
            return SatResult(SatStatus.UNSAT)

        litval = self._litval
        conflicts_here = 0
        restart_limit = self._restart_base * luby(self.restarts)

        while True:
            self.loop_iterations += 1
            if self._interrupt:
                return SatResult(SatStatus.UNKNOWN)
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                conflicts_here += 1
                if self._dl == 0:
                    self._root_unsat = True
                    return SatResult(SatStatus.UNSAT)
                learned, bt_level, glue = self._analyze(confl)
                self._backjump(bt_level)
                self._record_learned(learned, glue)
                self._act_inc *= self._act_growth
                if self._act_inc > _RESCALE_LIMIT:
                    self._rescale_activity()
            else:
                if len(self._trail) == self._nv:
                    nv = self._nv
                    model = {v: litval[v + v] for v in range(1, nv + 1)}
                    return SatResult(SatStatus.SAT, model)
                if conflicts_here >= restart_limit:
                    self.restarts += 1
                    conflicts_here = 0
                    restart_limit = self._restart_base * luby(self.restarts)
                    self._backjump(0)
                    self._import_queued()
                    if self._root_unsat:
                        return SatResult(SatStatus.UNSAT)
                    if self.conflicts >= self._next_reduce:
                        self._reduce_db()
                else:
                    self._decide()

    def _enqueue_pending_units(self) -> bool:
        litval = self._litval
        for lit in self._pending_units:
            li = lit + lit if lit > 0 else 1 - lit - lit
            val = litval[li]
            if val is False:
                return False
            if val is None:
                self._assign(lit, None)
        return True

    def _assign(self, lit: int, reason) -> None:
        li = lit + lit if lit > 0 else 1 - lit - lit
        self._litval[li] = True
        self._litval[li ^ 1] = False
        v = lit if lit > 0 else -lit
        self._level[v] = self._dl
        self._reason[v] = reason
        self._trail.append(lit)

    def _propagate(self):
        litval = self._litval
        watches = self._watches
        trail = self._trail
        level = self._level
        reason = self._reason
        dl = self._dl
        qhead = self._qhead
        props = 0
        confl = None
        while qhead < len(trail):
            lit = trail[qhead]
            qhead += 1
            props += 1
            fl = -lit
            wl = watches[fl + fl if fl > 0 else 1 - fl - fl]
            i = 0
            end = len(wl)
            while i < end:
                c = wl[i]
                lits = c.lits
                if lits[0] == fl:
                    lits[0] = lits[1]
                    lits[1] = fl
                other = lits[0]
                oi = other + other if other > 0 else 1 - other - other
                if litval[oi] is True:
                    i += 1
                    continue
                sz = len(lits)
                k = 2
                while k < sz:
                    lk = lits[k]
                    if litval[lk + lk if lk > 0 else 1 - lk - lk] is not False:
                        break
                    k += 1
                if k < sz:
                    lk = lits[k]
                    lits[1] = lk
                    lits[k] = fl
                    watches[lk + lk if lk > 0 else 1 - lk - lk].append(c)
                    end -= 1
                    wl[i] = wl[end]
                    wl.pop()
                    continue
                if litval[oi] is False:
                    confl = c
                    qhead = len(trail)
                    break
                # unit under the current assignment
                litval[oi] = True
                litval[oi ^ 1] = False
                ov = other if other > 0 else -other
                level[ov] = dl
                reason[ov] = c
                trail.append(other)
                i += 1
            if confl is not None:
                break
        self._qhead = qhead
        self.propagations += props
        return confl

    def _decide(self) -> None:
        litval = self._litval
        v = 0
        if self._rand_freq and self._rng.random() < self._rand_freq:
            for _ in range(10):
                cand = self._rng.randint(1, self._nv)
                if litval[cand + cand] is None:
                    v = cand
                    break
        if not v:
            heap = self._heap
            act = self._act
            while heap:
                a, cand = heappop(heap)
                if litval[cand + cand] is None and a == -act[cand]:
                    v = cand
                    break
            if not v:
                # stale entries exhausted the heap; rebuild it
                for cand in range(1, self._nv + 1):
                    if litval[cand + cand] is None:
                        heappush(heap, (-act[cand], cand))
                a, v = heappop(heap)
        self.decisions += 1
        self._trail_lim.append(len(self._trail))
        self._dl += 1
        phase = self._phase[v]
        self._assign(v if phase else -v, None)

    def _backjump(self, target_level: int) -> None:
        if self._dl <= target_level:
            return
        trail = self._trail
        litval = self._litval
        phase = self._phase
        reason = self._reason
        act = self._act
        heap = self._heap
        bound = self._trail_lim[target_level]
        for idx in range(len(trail) - 1, bound - 1, -1):
            lit = trail[idx]
            v = lit if lit > 0 else -lit
            phase[v] = lit > 0
            vi = v + v
            litval[vi] = None
            litval[vi + 1] = None
            reason[v] = None
            heappush(heap, (-act[v], v))
        del trail[bound:]
        del self._trail_lim[target_level:]
        self._dl = target_level
        self._qhead = bound

    def _analyze(self, confl: _Clause):
        seen = self._seen
        level = self._level
        reason = self._reason
        trail = self._trail
        act = self._act
        inc = self._act_inc
        heap = self._heap
        dl = self._dl
        learned = [0]
        touched = []
        counter = 0
        idx = len(trail) - 1
        p = 0
        c = confl
        while True:
            for q in c.lits:
                if q == p:
                    continue
                v = q if q > 0 else -q
                if not seen[v]:
                    lv = level[v]
                    if lv > 0:
                        seen[v] = 1
                        touched.append(v)
                        na = act[v] + inc
                        act[v] = na
                        heappush(heap, (-na, v))
                        if lv >= dl:
                            counter += 1
                        else:
                            learned.append(q)
            while True:
                t = trail[idx]
                tv = t if t > 0 else -t
                if seen[tv]:
                    break
                idx -= 1
            p = t
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            c = reason[tv]
        learned[0] = -p
        for v in touched:
            seen[v] = 0
        if len(learned) == 1:
            bt_level = 0
        else:
            bt_level = max(level[q if q > 0 else -q] for q in learned[1:])
        glue = len({level[q if q > 0 else -q] for q in learned})
        if max(act[v] for v in touched) > _RESCALE_LIMIT:
            self._rescale_activity()
        return learned, bt_level, glue

    def _rescale_activity(self) -> None:
        act = self._act
        for v in range(1, self._nv + 1):
            act[v] *= _RESCALE_FACTOR
        self._act_inc *= _RESCALE_FACTOR
        heap = self._heap
        litval = self._litval
        for v in range(1, self._nv + 1):
            if litval[v + v] is None:
                heappush(heap, (-act[v], v))

    def _record_learned(self, lits: list, glue: int) -> None:
        asserting = lits[0]
        if len(lits) == 1:
            self._assign(asserting, None)
        else:
            # second watch must sit at the backjump level
            bt = self._dl
            level = self._level
            for i in range(1, len(lits)):
                q = lits[i]
                if level[q if q > 0 else -q] == bt:
                    lits[1], lits[i] = lits[i], lits[1]
                    break
            c = _Clause(lits, learned=True, glue=glue)
            self._learned.append(c)
            self._attach(c)
            self._assign(asserting, c)
        self._db_keys.add(tuple(sorted(lits)))
        cb = self._callback
        if cb is not None and len(lits) <= self._export_limit:
            self.exported += 1
            cb(tuple(lits))

    # ------------------------------------------------------------------
    # foreign clause integration (root level only)

    def _import_queued(self) -> None:
        queue = self._import_queue
        while queue:
            try:
                raw = queue.popleft()
            except IndexError:
                break
            self._integrate_foreign(raw)
            if self._root_unsat:
                return

    def _integrate_foreign(self, raw) -> None:
        try:
            lits = normalize_clause(raw)
        except MalformedClauseError:
            return  # wire data is untrusted; drop instead of crashing
        if lits is None:
            return
        key = tuple(sorted(lits))
        if key in self._db_keys:
            return
        if not lits:
            self._root_unsat = True
            return
        for lit in lits:
            self._ensure_var(lit if lit > 0 else -lit)
        self._db_keys.add(key)
        self.imported += 1
        litval = self._litval
        if len(lits) == 1:
            lit = lits[0]
            val = litval[lit + lit if lit > 0 else 1 - lit - lit]
            if val is False:
                self._root_unsat = True
            elif val is None:
                self._assign(lit, None)
            return
        # order literals so the two watches are non-falsified when possible
        ordered = sorted(
            lits,
            key=lambda q: 0 if litval[q + q if q > 0 else 1 - q - q] is not False else 1,
        )
        open_count = sum(
            1 for q in ordered if litval[q + q if q > 0 else 1 - q - q] is not False
        )
        c = _Clause(list(ordered), learned=True, foreign=True, glue=len(ordered))
        if open_count == 0:
            self._root_unsat = True
            return
        self._learned.append(c)
        self._attach(c)
        first = ordered[0]
        fval = litval[first + first if first > 0 else 1 - first - first]
        if open_count == 1 and fval is None:
            self._assign(first, c)

    # ------------------------------------------------------------------
    # learned-clause housekeeping

    def _reduce_db(self) -> None:
        self._reductions += 1
        self._next_reduce = self.conflicts + 2000 + 300 * self._reductions
        reason = self._reason
        keep, removable = [], []
        for c in self._learned:
            lit0 = c.lits[0]
            locked = reason[lit0 if lit0 > 0 else -lit0] is c
            if locked or c.glue <= GLUE_KEEP or len(c.lits) <= 2:
                keep.append(c)
            else:
                removable.append(c)
        removable.sort(key=lambda c: (c.glue, len(c.lits)))
        cut = len(removable) // 2
        for c in removable[cut:]:
            self._db_keys.discard(tuple(sorted(c.lits)))
        self._learned = keep + removable[:cut]
        self._rebuild_watches()

    def _rebuild_watches(self) -> None:
        # only valid at root level with propagation at fixpoint
        litval = self._litval
        for wl in self._watches:
            del wl[:]
        for c in self._clauses:
            c.lits.sort(key=lambda q: litval[q + q if q > 0 else 1 - q - q] is False)
            self._attach(c)
        for c in self._learned:
            c.lits.sort(key=lambda q: litval[q + q if q > 0 else 1 - q - q] is False)
            self._attach(c)

    # ------------------------------------------------------------------
    # introspection

    def stats(self) -> dict:
        return {
            "decisions": self.decisions,
            "conflicts": self.conflicts,
            "propagations": self.propagations,
            "restarts": self.restarts,
            "loop_iterations": self.loop_iterations,
            "exported": self.exported,
            "imported": self.imported,
            "clauses": len(self._clauses),
            "learned": len(self._learned),
        }

    def check_invariants(self) -> None:
        """Structural audit of trail/watch state; raises AssertionError."""
        litval = self._litval
        for v in range(1, self._nv + 1):
            pos, neg = litval[v + v], litval[v + v + 1]
            assert (pos is None) == (neg is None)
            if pos is not None:
                assert pos != neg
        last_level = 0
        for lit in self._trail:
            v = lit if lit > 0 else -lit
            assert litval[lit + lit if lit > 0 else 1 - lit - lit] is True
            lv = self._level[v]
            assert lv >= last_level, "trail levels must be non-decreasing"
            last_level = lv
            r = self._reason[v]
            if r is not None:
                assert r.lits[0] == lit
                for q in r.lits[1:]:
                    assert litval[q + q if q > 0 else 1 - q - q] is False
        watch_count: dict = {}
        for wl in self._watches:
            for c in wl:
                watch_count[id(c)] = watch_count.get(id(c), 0) + 1
        for c in self._clauses + self._learned:
            assert len(c.lits) >= 2
            assert watch_count.get(id(c), 0) == 2, "clause must have two watches"
            w0, w1 = c.lits[0], c.lits[1]
            assert w0 != w1
            for w in (w0, w1):
                wi = w + w if w > 0 else 1 - w - w
                assert c in self._watches[wi]
