"""Clause sharing machinery: dedup filters, export pool, round buffers.

Learned clauses offered by the local solvers pass through per-solver and
process-global Bloom filters, then race into a bounded export pool. Once
per round the pool is drained into a fixed-size integer buffer (shorter
clauses first), exchanged with every other process, decoded, and the
incoming clauses are distributed to the local solvers through the same
filters. A clause can be lost three ways: judged duplicate by a filter,
squeezed out at the pool by a concurrent producer, or left over when the
round buffer is full. All losses are harmless for correctness.
"""
from __future__ import annotations

import threading
from typing import List, Sequence

# Large primes (all >= 2^31) backing the permutation-invariant hash family.
PRIMES = (
    2994692927, 3497389853, 3523672891, 3953571563,
    2253273221, 2388058889, 2252879537, 2259637937,
    4263840821, 2276763833, 2168126771, 2441941991,
    3871861069, 3354364357, 3777559631, 2541672713,
)

_MASK64 = (1 << 64) - 1

BLOOM_BITS = 1 << 20
BLOOM_HASHES = 4
DEFAULT_BUFFER_INTS = 1500
DEFAULT_RESET_PERIOD = 20
UNDERFILL_THRESHOLD = 0.8


class PayloadFormatError(ValueError):
    """A round buffer did not decode as zero-terminated clauses plus padding."""


def hash_clause(clause: Sequence[int], family: int) -> int:
    """Member `family` (>= 1) of the clause hash family.

    XOR over the clause of rot(literal * prime), in wrapping 64-bit
    arithmetic, with the prime picked by abs(literal * family) mod
    len(PRIMES) and the rotation amount taken from the literal. XOR makes
    the value independent of literal order; the empty clause hashes to 0.

    The sign-sensitive rotation matters: with the bare signed product, a
    clause and its literal-wise negation would collide on every family
    member whenever the products share their trailing-zero count (two's
    complement negation commutes with XOR there), which pushes the
    filter's false-positive rate orders of magnitude above the Bloom
    estimate on short clauses.
    """
    h = 0
    for lit in clause:
        term = (lit * PRIMES[abs(lit * family) % 16]) & _MASK64
        r = lit & 63
        if r:
            term = ((term << r) | (term >> (64 - r))) & _MASK64
        h ^= term
    return h


class ClauseBloomFilter:
    """Fixed-geometry Bloom filter over clauses.

    False positives are possible and accepted; an inserted clause is
    always reported present until the next clear().
    """

    def __init__(self, bits: int = BLOOM_BITS, hashes: int = BLOOM_HASHES):
        if bits & (bits - 1):
            raise ValueError("bits must be a power of two")
        self._bits = bits
        self._hashes = hashes
        self._bytes = bytearray(bits >> 3)
        self.insert_count = 0

    # One odd multiplier per hash index. Family members can coincide on
    # degenerate clauses (a literal divisible by len(PRIMES) selects the
    # same prime for every index), so each 64-bit hash is passed through
    # its own multiplicative mix before the reduction to a bit position;
    # equal hashes still land on decorrelated positions.
    _POSITION_MIX = (
        0x9E3779B97F4A7C15,
        0xBF58476D1CE4E5B9,
        0x94D049BB133111EB,
        0xD6E8FEB86659FD93,
    )

    def _positions(self, clause) -> list:
        shift = 64 - self._bits.bit_length() + 1
        return [
            (hash_clause(clause, i + 1) * self._POSITION_MIX[i % 4] & _MASK64) >> shift
            for i in range(self._hashes)
        ]

    def __contains__(self, clause) -> bool:
        data = self._bytes
        for pos in self._positions(clause):
            if not data[pos >> 3] & (1 << (pos & 7)):
                return False
        return True

    def insert_query(self, clause) -> bool:
        """Insert the clause; return whether it was already present."""
        data = self._bytes
        present = True
        for pos in self._positions(clause):
            byte, bit = pos >> 3, 1 << (pos & 7)
            if not data[byte] & bit:
                present = False
                data[byte] |= bit
        self.insert_count += 1
        return present

    def clear(self) -> None:
        self._bytes = bytearray(self._bits >> 3)
        self.insert_count = 0


class ExportPool:
    """Bounded clause staging area with a non-blocking producer side.

    Producers (solver search threads) try-lock the pool: whoever loses
    the race, or finds the pool full, drops its clause and moves on.
    Capacity is counted in serialized ints (clause length + terminator),
    i.e. one round buffer's worth by default.
    """

    def __init__(self, capacity_ints: int = DEFAULT_BUFFER_INTS):
        self._capacity = capacity_ints
        self._lock = threading.Lock()
        self._clauses: List[tuple] = []
        self._used = 0

    def try_add(self, clause: Sequence[int]) -> bool:
        lock = self._lock
        if not lock.acquire(blocking=False):
            return False  # contention: lose the clause, never wait
        try:
            cost = len(clause) + 1
            if self._used + cost > self._capacity:
                return False
            self._clauses.append(tuple(clause))
            self._used += cost
            return True
        finally:
            lock.release()

    def drain(self) -> List[tuple]:
        with self._lock:
            clauses = self._clauses
            self._clauses = []
            self._used = 0
        return clauses

    def __len__(self) -> int:
        return len(self._clauses)


def fill_buffer(clauses: Sequence[Sequence[int]], size: int) -> tuple:
    """Pack clauses shortest-first into a zero-padded buffer of exactly `size` ints.

    Each clause costs len+1 ints (zero terminator). Clauses that do not
    fit are discarded; because packing is shortest-first, no discarded
    clause is shorter than an included one. Returns (payload, used_ints,
    discarded_count).
    """
    payload = []
    used = 0
    discarded = 0
    for clause in sorted(clauses, key=len):
        cost = len(clause) + 1
        if used + cost > size:
            discarded += 1
            continue
        payload.extend(clause)
        payload.append(0)
        used += cost
    payload.extend([0] * (size - len(payload)))
    return payload, used, discarded


def decode_payload(payload: Sequence[int]) -> List[tuple]:
    """Inverse of fill_buffer: zero-terminated clauses, then zero padding."""
    clauses = []
    current: List[int] = []
    padding = False
    for value in payload:
        if padding and value != 0:
            raise PayloadFormatError("data after final terminator")
        if value == 0:
            if current:
                clauses.append(tuple(current))
                current = []
            else:
                padding = True
        else:
            current.append(value)
    if current:
        raise PayloadFormatError("unterminated clause at end of payload")
    return clauses


class ClauseExchange:
    """Per-process dedup and routing state for one portfolio node."""

    def __init__(
        self,
        solver_count: int,
        buffer_ints: int = DEFAULT_BUFFER_INTS,
        reset_period: int = DEFAULT_RESET_PERIOD,
    ):
        self.buffer_ints = buffer_ints
        self.reset_period = reset_period
        self.global_filter = ClauseBloomFilter()
        self.solver_filters = [ClauseBloomFilter() for _ in range(solver_count)]
        self.pool = ExportPool(buffer_ints)
        self._increase_next = 0
        self.stats = {
            "admitted": 0,
            "dropped_duplicate": 0,
            "dropped_pool": 0,
            "dropped_overflow": 0,
            "delivered": 0,
            "decode_errors": 0,
            "resets": 0,
        }

    def export_from_solver(self, solver_id: int, clause: Sequence[int]) -> bool:
        """Offer a clause learned by a local solver for global sharing."""
        clause = tuple(clause)
        if self.solver_filters[solver_id].insert_query(clause):
            self.stats["dropped_duplicate"] += 1
            return False
        if self.global_filter.insert_query(clause):
            self.stats["dropped_duplicate"] += 1
            return False
        if not self.pool.try_add(clause):
            self.stats["dropped_pool"] += 1
            return False
        self.stats["admitted"] += 1
        return True

    def fill_round_buffer(self) -> tuple:
        """Drain the pool into one round payload; returns (payload, used_ints)."""
        payload, used, discarded = fill_buffer(self.pool.drain(), self.buffer_ints)
        self.stats["dropped_overflow"] += discarded
        return payload, used

    def import_round(self, payloads: Sequence[Sequence[int]], own_index: int) -> List[List[tuple]]:
        """Filter and route one round's incoming payloads.

        Returns one clause list per local solver. Foreign clauses pass
        the process-global filter first; the process's own contribution
        skips that check (export already put those clauses in the global
        filter) and is routed by the per-solver filters alone, which is
        what lets the other local solvers profit from a clause while its
        exporter never sees it again. A malformed payload voids the whole
        round's foreign data and is counted as a decode error.
        """
        per_solver: List[List[tuple]] = [[] for _ in self.solver_filters]
        incoming = []
        try:
            for index, payload in enumerate(payloads):
                incoming.extend(
                    (clause, index == own_index) for clause in decode_payload(payload)
                )
        except PayloadFormatError:
            self.stats["decode_errors"] += 1
            return [[] for _ in self.solver_filters]
        for clause, own in incoming:
            if not own and self.global_filter.insert_query(clause):
                continue
            for solver_id, lst in enumerate(per_solver):
                if not self.solver_filters[solver_id].insert_query(clause):
                    lst.append(clause)
                    self.stats["delivered"] += 1
        return per_solver

    def underfill_check(self, used_ints: int, solvers, threshold: float = UNDERFILL_THRESHOLD) -> bool:
        """Ask one solver (round robin) for more clauses when a buffer ran light."""
        if not solvers or used_ints >= threshold * self.buffer_ints:
            return False
        solvers[self._increase_next % len(solvers)].increase_clause_production()
        self._increase_next += 1
        return True

    def maybe_reset(self, round_number: int) -> bool:
        """Clear every filter on the period boundary so clauses can flow again."""
        if self.reset_period <= 0 or round_number % self.reset_period != 0:
            return False
        self.global_filter.clear()
        for f in self.solver_filters:
            f.clear()
        self.stats["resets"] += 1
        return True
