"""
Prime support (lambda*X, X], log-weights, split-precision power tables,
and the von Mangoldt / Moebius tables.
"""
import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import mpmath
import numpy as np

from errors import InvalidParamsError, LimitExceededError, RangeTooLargeError

logger = logging.getLogger(__name__)

MAX_SIEVE_X = 10 ** 9
MAX_TABLE_N = 10 ** 7
SEGMENT_SIZE = 1 << 18

# Working precision (bits) for the hi/lo power split; the hi/lo pair
# itself carries about 106 bits.
POWER_PRECISION = 128


@dataclass(frozen=True)
class PrimeTable:
    X: float
    lambda_cut: float
    c: float
    d: float
    primes: np.ndarray
    logp: np.ndarray
    pc_hi: np.ndarray
    pc_lo: np.ndarray
    pd_hi: np.ndarray
    pd_lo: np.ndarray

    def __len__(self) -> int:
        return int(self.primes.size)

    @property
    def lower(self) -> int:
        """Largest integer excluded below the support, floor(lambda*X)."""
        return int(math.floor(self.lambda_cut * self.X))

    @property
    def upper(self) -> int:
        return int(math.floor(self.X))


@dataclass(frozen=True)
class ArithmeticTables:
    n_max: int
    mangoldt: np.ndarray
    moebius: np.ndarray


def simple_sieve(limit: int) -> np.ndarray:
    """All primes <= limit."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    mask = np.ones(limit + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return np.flatnonzero(mask).astype(np.int64)


def _sieve_segment(low: int, high: int, base: np.ndarray) -> np.ndarray:
    """Primes in [low, high) using base primes up to sqrt(high)."""
    mask = np.ones(high - low, dtype=bool)
    for p in base.tolist():
        if p * p >= high:
            break
        start = max(p * p, ((low + p - 1) // p) * p)
        mask[start - low :: p] = False
    if low < 2:
        mask[: 2 - low] = False
    return np.flatnonzero(mask).astype(np.int64) + low


def primes_between(low: int, high: int, threads: int = 1) -> np.ndarray:
    """Primes p with low <= p <= high, segment by segment."""
    if high < low:
        return np.zeros(0, dtype=np.int64)
    base = simple_sieve(math.isqrt(high) + 1)
    bounds = [(s, min(s + SEGMENT_SIZE, high + 1)) for s in range(low, high + 1, SEGMENT_SIZE)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda b: _sieve_segment(b[0], b[1], base), bounds))
    else:
        chunks = [_sieve_segment(lo, hi, base) for lo, hi in bounds]
    logger.debug(f"sieved [{low}, {high}] in {len(bounds)} segments")
    if not chunks:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(chunks)


def split_powers(values: Iterable[int], exponent: float) -> Tuple[np.ndarray, np.ndarray]:
    """v**exponent for each v as a (hi, lo) pair of doubles.

    The exponent is taken as the exact value of its double.
    """
    values = list(values)
    hi = np.empty(len(values), dtype=np.float64)
    lo = np.empty(len(values), dtype=np.float64)
    with mpmath.workprec(POWER_PRECISION):
        e = mpmath.mpf(exponent)
        for i, v in enumerate(values):
            exact = mpmath.mpf(int(v)) ** e
            h = float(exact)
            hi[i] = h
            lo[i] = float(exact - h)
    return hi, lo


@functools.lru_cache(maxsize=16)
def integer_power_table(low: int, high: int, exponent: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n, hi, lo) for consecutive integers low <= n <= high.

    Cached; callers must not modify the returned arrays.
    """
    n = np.arange(low, high + 1, dtype=np.int64)
    hi, lo = split_powers(n.tolist(), exponent)
    for array in (n, hi, lo):
        array.setflags(write=False)
    return n, hi, lo


def sieve(
    X: float,
    lambda_cut: float,
    c: float = 1.03,
    d: float = 1.01,
    threads: int = 1,
) -> PrimeTable:
    """Primes in (lambda_cut*X, X] with log-weights and power tables for c, d."""
    if X > MAX_SIEVE_X:
        raise RangeTooLargeError(f"X={X!r} above the sieve limit {MAX_SIEVE_X}")
    lower = lambda_cut * X
    if not (0.0 < lambda_cut < 1.0 and 2.0 <= lower < X):
        raise InvalidParamsError([f"need 2 <= lambda*X < X, got X={X!r}, lambda={lambda_cut!r}"])

    low = int(math.floor(lower)) + 1
    high = int(math.floor(X))
    found = primes_between(low, high, threads=threads)
    logger.info(f"sieve: {found.size} primes in ({lower:g}, {X:g}]")

    pc_hi, pc_lo = split_powers(found.tolist(), c)
    pd_hi, pd_lo = split_powers(found.tolist(), d)
    table = PrimeTable(
        X=float(X),
        lambda_cut=float(lambda_cut),
        c=float(c),
        d=float(d),
        primes=found,
        logp=np.log(found.astype(np.float64)),
        pc_hi=pc_hi,
        pc_lo=pc_lo,
        pd_hi=pd_hi,
        pd_lo=pd_lo,
    )
    for array in (table.primes, table.logp, table.pc_hi, table.pc_lo, table.pd_hi, table.pd_lo):
        array.setflags(write=False)
    return table


def chebyshev_weight(table: PrimeTable) -> float:
    """Sum of log p over the table, i.e. theta(X) - theta(lambda*X)."""
    return math.fsum(table.logp.tolist())


def arithmetic_tables(n_max: int) -> ArithmeticTables:
    if n_max > MAX_TABLE_N:
        raise LimitExceededError(f"n_max={n_max} above {MAX_TABLE_N}")
    if n_max < 1:
        raise InvalidParamsError([f"n_max must be positive, got {n_max!r}"])

    moebius = np.ones(n_max + 1, dtype=np.int8)
    moebius[0] = 0
    mangoldt = np.zeros(n_max + 1, dtype=np.float64)
    for p in simple_sieve(n_max).tolist():
        moebius[p::p] *= -1
        if p * p <= n_max:
            moebius[p * p :: p * p] = 0
        log_p = math.log(p)
        power = p
        while power <= n_max:
            mangoldt[power] = log_p
            power *= p
    moebius.setflags(write=False)
    mangoldt.setflags(write=False)
    return ArithmeticTables(n_max=n_max, mangoldt=mangoldt, moebius=moebius)


def psi(tables: ArithmeticTables, N: int) -> float:
    return math.fsum(tables.mangoldt[1 : N + 1].tolist())


def theta(N: int) -> float:
    return math.fsum(np.log(simple_sieve(N).astype(np.float64)).tolist())


def mertens(tables: ArithmeticTables, N: int) -> int:
    return int(tables.moebius[1 : N + 1].astype(np.int64).sum())
