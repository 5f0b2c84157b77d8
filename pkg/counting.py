"""
Counting prime 5-tuples with |sum p^c - N1| < eps1 and |sum p^d - N2| < eps2.

Tuples are ordered with repetition. Both enumerators hand their
candidates, as sorted index rows, to one residual evaluator and sum the
weights exactly, so their raw and weighted counts agree bit for bit.
"""
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from errors import DomainViolationError, InstanceTooLargeError, MemoryLimitError
from expsum import phi, two_product, two_sum
from params import DerivedScales, SystemParams, main_term, mid_band_ratio
from primes import PrimeTable, sieve

logger = logging.getLogger(__name__)

INDICATOR = "indicator"
LOGWINDOW = "indicator_logwindow"
SMOOTHED = "smoothed"

MAX_EXHAUSTIVE_TUPLES = 10 ** 10
MAX_MITM_PRIMES = 5000
# Gaussian weights are dropped beyond this many window widths.
SMOOTH_WIDTHS = 8.0
# Inside the attainable band (about 1.0254 to 1.0317) for c=1.03, d=1.01, lambda_cut=0.1.
SWEEP_RATIO = 1.028
_FACTORIAL_5 = 120


@dataclass(frozen=True)
class SolutionRecord:
    p: Tuple[int, ...]
    r1: float
    r2: float
    weight: float
    multiplicity: int = 1


@dataclass(frozen=True)
class CountResult:
    mode: str
    raw_count: Optional[int]
    weighted_count: float
    main_term_scale: float
    elapsed: float
    solutions: Tuple[SolutionRecord, ...] = ()
    truncation_bound: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "raw_count": self.raw_count,
            "weighted_count": self.weighted_count,
            "main_term_scale": self.main_term_scale,
            "ratio_to_main_term": (self.weighted_count / self.main_term_scale) if self.main_term_scale else None,
            "elapsed": self.elapsed,
            "solutions": len(self.solutions),
            "truncation_bound": self.truncation_bound,
        }


@dataclass(frozen=True)
class _Windows:
    w1: float
    w2: float
    closed: bool

    def inside(self, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
        if self.closed:
            return (np.abs(r1) <= self.w1) & (np.abs(r2) <= self.w2)
        return (np.abs(r1) < self.w1) & (np.abs(r2) < self.w2)


def _windows(params: SystemParams, eps1: float, eps2: float, mode: str) -> _Windows:
    if eps1 < 0 or eps2 < 0:
        raise DomainViolationError(f"windows must be non-negative, got eps1={eps1!r}, eps2={eps2!r}")
    if mode == INDICATOR:
        return _Windows(eps1, eps2, closed=False)
    if mode == LOGWINDOW:
        log_X = math.log(params.support_X)
        return _Windows(eps1 * log_X, eps2 * log_X, closed=True)
    if mode == SMOOTHED:
        return _Windows(SMOOTH_WIDTHS * eps1, SMOOTH_WIDTHS * eps2, closed=True)
    raise DomainViolationError(f"unknown count mode {mode!r}")


def main_term_scale(params: SystemParams, scales: DerivedScales) -> float:
    """eps1 * eps2 * X^(5-c-d)."""
    return main_term(scales.X, scales.eps1, scales.eps2, params.c, params.d)


def _main_term_for(params: SystemParams, eps1: float, eps2: float) -> float:
    return main_term(params.support_X, eps1, eps2, params.c, params.d)


# --- shared canonical evaluation ---------------------------------------------

def _residuals(hi: np.ndarray, lo: np.ndarray, rows: np.ndarray, target: float) -> np.ndarray:
    """sum_k (hi + lo)[rows[:, k]] - target, compensated, in a fixed order."""
    s = np.full(rows.shape[0], -float(target))
    comp = np.zeros(rows.shape[0])
    for k in range(rows.shape[1]):
        s, e = two_sum(s, hi[rows[:, k]])
        comp += e
    for k in range(rows.shape[1]):
        comp += lo[rows[:, k]]
    return s + comp


def _weights(logp: np.ndarray, rows: np.ndarray) -> np.ndarray:
    w = logp[rows[:, 0]].copy()
    for k in range(1, rows.shape[1]):
        w = w * logp[rows[:, k]]
    return w


def _multiplicity(rows: np.ndarray) -> np.ndarray:
    """Number of distinct orderings of each sorted row: 5! / prod(m_v!)."""
    run = np.ones(rows.shape, dtype=np.int64)
    for k in range(1, rows.shape[1]):
        run[:, k] = np.where(rows[:, k] == rows[:, k - 1], run[:, k - 1] + 1, 1)
    return _FACTORIAL_5 // np.prod(run, axis=1)


def _exact_total(counts: np.ndarray, values: np.ndarray) -> float:
    """Correctly rounded sum of counts[i] * values[i]."""
    if values.size == 0:
        return 0.0
    p, e = two_product(counts.astype(np.float64), values)
    return math.fsum(np.concatenate([p, e]).tolist())


@dataclass
class _Tally:
    rows: np.ndarray
    counts: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    weights: np.ndarray


def _certify(table: PrimeTable, params: SystemParams, windows: _Windows, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Keep the sorted rows whose canonical residuals fall inside the windows."""
    r1 = _residuals(table.pc_hi, table.pc_lo, rows, params.N1)
    r2 = _residuals(table.pd_hi, table.pd_lo, rows, params.N2)
    keep = windows.inside(r1, r2)
    return rows[keep], r1[keep], r2[keep]


def _records(table: PrimeTable, tally: _Tally, max_records: Optional[int]) -> Tuple[SolutionRecord, ...]:
    n = tally.rows.shape[0] if max_records is None else min(max_records, tally.rows.shape[0])
    primes = table.primes
    return tuple(
        SolutionRecord(
            p=tuple(int(v) for v in primes[tally.rows[i]]),
            r1=float(tally.r1[i]),
            r2=float(tally.r2[i]),
            weight=float(tally.weights[i]),
            multiplicity=int(tally.counts[i]),
        )
        for i in range(n)
    )


def _slack(target: float) -> float:
    return 1e-9 * max(1.0, abs(target))


# --- exhaustive --------------------------------------------------------------

def _sorted_triples(P: int) -> np.ndarray:
    """All index triples i <= j <= k in lexicographic order."""
    if P == 0:
        return np.zeros((0, 3), dtype=np.int64)
    return np.array(list(itertools.combinations_with_replacement(range(P), 3)), dtype=np.int64)


def exhaustive_count(
    table: PrimeTable,
    params: SystemParams,
    eps1: float,
    eps2: float,
    mode: str = INDICATOR,
    max_records: Optional[int] = None,
) -> CountResult:
    """Count by enumerating every multiset p1 <= ... <= p5 with its number of orderings."""
    if mode not in (INDICATOR, LOGWINDOW):
        raise DomainViolationError(f"exhaustive_count supports {INDICATOR!r} and {LOGWINDOW!r}, got {mode!r}")
    P = len(table)
    if P ** 5 > MAX_EXHAUSTIVE_TUPLES:
        raise InstanceTooLargeError(f"{P}^5 ordered tuples above {MAX_EXHAUSTIVE_TUPLES}")
    started = time.perf_counter()
    windows = _windows(params, eps1, eps2, mode)

    pc = table.pc_hi + table.pc_lo
    pd = table.pd_hi + table.pd_lo
    triples = _sorted_triples(P)
    tc = pc[triples[:, 0]] + pc[triples[:, 1]] + pc[triples[:, 2]]
    td = pd[triples[:, 0]] + pd[triples[:, 1]] + pd[triples[:, 2]]
    first_with = np.searchsorted(triples[:, 0], np.arange(P), side="left") if P else np.zeros(0, dtype=np.int64)
    reach1 = windows.w1 + _slack(params.N1)
    reach2 = windows.w2 + _slack(params.N2)

    found = []
    for i1 in range(P):
        for i2 in range(i1, P):
            s = first_with[i2]
            r1 = pc[i1] + pc[i2] + tc[s:] - params.N1
            r2 = pd[i1] + pd[i2] + td[s:] - params.N2
            hit = np.flatnonzero((np.abs(r1) <= reach1) & (np.abs(r2) <= reach2))
            if hit.size:
                rows = np.empty((hit.size, 5), dtype=np.int64)
                rows[:, 0] = i1
                rows[:, 1] = i2
                rows[:, 2:] = triples[s + hit]
                found.append(rows)
    rows = np.concatenate(found) if found else np.zeros((0, 5), dtype=np.int64)
    rows, r1, r2 = _certify(table, params, windows, rows)
    if rows.shape[0]:
        order = np.lexsort(rows.T[::-1])
        rows, r1, r2 = rows[order], r1[order], r2[order]
    tally = _Tally(rows, _multiplicity(rows), r1, r2, _weights(table.logp, rows))
    return _result(mode, table, params, eps1, eps2, tally, started, max_records)


def _result(
    mode: str,
    table: PrimeTable,
    params: SystemParams,
    eps1: float,
    eps2: float,
    tally: _Tally,
    started: float,
    max_records: Optional[int],
    values: Optional[np.ndarray] = None,
    truncation_bound: Optional[float] = None,
) -> CountResult:
    weighted = _exact_total(tally.counts, tally.weights if values is None else values)
    raw = None if mode == SMOOTHED else int(tally.counts.sum())
    result = CountResult(
        mode=mode,
        raw_count=raw,
        weighted_count=weighted,
        main_term_scale=_main_term_for(params, eps1, eps2),
        elapsed=time.perf_counter() - started,
        solutions=_records(table, tally, max_records),
        truncation_bound=truncation_bound,
    )
    logger.info(f"{mode} count over {len(table)} primes: raw={raw} weighted={weighted:.6g} in {result.elapsed:.2f}s")
    return result


# --- meet in the middle --------------------------------------------------------

def _mitm_rows(table: PrimeTable, params: SystemParams, windows: _Windows, threads: int) -> np.ndarray:
    """Canonical (sorted) index rows of every ordered tuple passing the prefilter."""
    P = len(table)
    if P == 0:
        return np.zeros((0, 5), dtype=np.int64)
    pc = table.pc_hi + table.pc_lo
    pd = table.pd_hi + table.pd_lo
    ii, jj = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    pair_c = pc[ii] + pc[jj]
    order = np.argsort(pair_c, kind="stable")
    ii, jj, pair_c = ii[order], jj[order], pair_c[order]
    pair_d = pd[ii] + pd[jj]
    reach1 = windows.w1 + _slack(params.N1)
    reach2 = windows.w2 + _slack(params.N2)
    ll, mm = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
    ll, mm = ll.ravel(), mm.ravel()

    def outer(k: int) -> np.ndarray:
        tc = pc[k] + pc[ll] + pc[mm]
        td = pd[k] + pd[ll] + pd[mm]
        left = np.searchsorted(pair_c, params.N1 - tc - reach1, side="left")
        right = np.searchsorted(pair_c, params.N1 - tc + reach1, side="right")
        counts = right - left
        total = int(counts.sum())
        if total == 0:
            return np.zeros((0, 5), dtype=np.int64)
        triple = np.repeat(np.arange(tc.size), counts)
        offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        pair = np.repeat(left, counts) + offsets
        r2 = pair_d[pair] + td[triple] - params.N2
        keep = np.abs(r2) <= reach2
        triple, pair = triple[keep], pair[keep]
        rows = np.column_stack([ii[pair], jj[pair], np.full(triple.size, k), ll[triple], mm[triple]])
        rows.sort(axis=1)
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(outer, range(P)))
    else:
        parts = [outer(k) for k in range(P)]
    return np.concatenate(parts)


def _collapse(table: PrimeTable, params: SystemParams, windows: _Windows, rows: np.ndarray) -> _Tally:
    """Certify canonical ordered rows and collapse them to multisets with counts."""
    rows, r1, r2 = _certify(table, params, windows, rows)
    if rows.shape[0] == 0:
        empty = np.zeros(0)
        return _Tally(np.zeros((0, 5), dtype=np.int64), np.zeros(0, dtype=np.int64), empty, empty, empty)
    unique, first, counts = np.unique(rows, axis=0, return_index=True, return_counts=True)
    return _Tally(unique, counts.astype(np.int64), r1[first], r2[first], _weights(table.logp, unique))


def mitm_count(
    table: PrimeTable,
    params: SystemParams,
    eps1: float,
    eps2: float,
    mode: str = INDICATOR,
    threads: int = 1,
    max_records: Optional[int] = None,
) -> CountResult:
    """Count through the 2+3 split: sorted pair sums searched per triple."""
    if mode not in (INDICATOR, LOGWINDOW):
        raise DomainViolationError(f"mitm_count supports {INDICATOR!r} and {LOGWINDOW!r}, got {mode!r}")
    if len(table) > MAX_MITM_PRIMES:
        raise MemoryLimitError(f"{len(table)} primes above {MAX_MITM_PRIMES}")
    started = time.perf_counter()
    windows = _windows(params, eps1, eps2, mode)
    tally = _collapse(table, params, windows, _mitm_rows(table, params, windows, threads))
    return _result(mode, table, params, eps1, eps2, tally, started, max_records)


def smoothed_count(
    table: PrimeTable,
    params: SystemParams,
    eps1: float,
    eps2: float,
    threads: int = 1,
    max_records: Optional[int] = None,
) -> CountResult:
    """Sum of (prod log p) phi(r1/eps1) phi(r2/eps2) over ordered tuples.

    Tuples with |r1| > 8 eps1 or |r2| > 8 eps2 are skipped; each of those
    weighs less than e^{-64 pi} times its log product.
    """
    if not (eps1 > 0 and eps2 > 0):
        raise DomainViolationError(f"windows must be positive, got eps1={eps1!r}, eps2={eps2!r}")
    if len(table) > MAX_MITM_PRIMES:
        raise MemoryLimitError(f"{len(table)} primes above {MAX_MITM_PRIMES}")
    started = time.perf_counter()
    windows = _windows(params, eps1, eps2, SMOOTHED)
    tally = _collapse(table, params, windows, _mitm_rows(table, params, windows, threads))
    values = tally.weights * phi(tally.r1 / eps1) * phi(tally.r2 / eps2)
    tally = _Tally(tally.rows, tally.counts, tally.r1, tally.r2, values)
    bound = float(np.sum(table.logp)) ** 5 * math.exp(-math.pi * SMOOTH_WIDTHS ** 2)
    return _result(SMOOTHED, table, params, eps1, eps2, tally, started, max_records, truncation_bound=bound)


def ordered_count_oracle(
    table: PrimeTable, params: SystemParams, eps1: float, eps2: float, smoothed: bool = False
) -> Tuple[int, float]:
    """Direct loop over all ordered 5-tuples; for tables of a handful of primes."""
    pc = [h + l for h, l in zip(table.pc_hi.tolist(), table.pc_lo.tolist())]
    pd = [h + l for h, l in zip(table.pd_hi.tolist(), table.pd_lo.tolist())]
    logs = table.logp.tolist()
    raw, terms = 0, []
    for idx in itertools.product(range(len(table)), repeat=5):
        r1 = math.fsum([pc[i] for i in idx] + [-params.N1])
        r2 = math.fsum([pd[i] for i in idx] + [-params.N2])
        weight = math.prod(logs[i] for i in idx)
        if smoothed:
            terms.append(weight * phi(r1 / eps1) * phi(r2 / eps2))
        elif abs(r1) < eps1 and abs(r2) < eps2:
            raw += 1
            terms.append(weight)
    return raw, math.fsum(terms)


# --- certification and scaling -------------------------------------------------

@dataclass(frozen=True)
class CertificationReport:
    checked: int
    max_deviation: float
    all_inside: bool


def certify_records(
    records: Sequence[SolutionRecord],
    params: SystemParams,
    eps1: float,
    eps2: float,
    mode: str = INDICATOR,
    precision: int = 100,
) -> CertificationReport:
    """Recompute each residual at `precision` bits and re-check its window."""
    windows = _windows(params, eps1, eps2, mode)
    worst, inside = 0.0, True
    with mpmath.workprec(precision):
        c, d = mpmath.mpf(params.c), mpmath.mpf(params.d)
        for record in records:
            r1 = mpmath.fsum(mpmath.mpf(p) ** c for p in record.p) - mpmath.mpf(params.N1)
            r2 = mpmath.fsum(mpmath.mpf(p) ** d for p in record.p) - mpmath.mpf(params.N2)
            worst = max(worst, float(abs(r1 - record.r1)), float(abs(r2 - record.r2)))
            ok = windows.inside(np.array([float(r1)]), np.array([float(r2)]))[0]
            inside = inside and bool(ok)
    return CertificationReport(checked=len(records), max_deviation=worst, all_inside=inside)


@dataclass(frozen=True)
class ScalingReport:
    rows: Tuple[Dict[str, float], ...]
    slope: float
    expected_slope: float


def scaling_sweep(
    Xs: Sequence[float],
    c: float = 1.03,
    d: float = 1.01,
    eps: float = 0.5,
    ratio: Optional[float] = SWEEP_RATIO,
    lambda_cut: float = 0.1,
    threads: int = 1,
) -> ScalingReport:
    """Weighted counts at each X and their least-squares log2 slope.

    ratio=None takes the middle of the attainable ratio band at each X.
    """
    rows: List[Dict[str, float]] = []
    for X in Xs:
        target = mid_band_ratio(c, d, X, lambda_cut) if ratio is None else ratio
        params = SystemParams.for_experiment(c, d, X, target, lambda_cut=lambda_cut, log_power=0)
        table = sieve(X, lambda_cut, c, d, threads=threads)
        result = mitm_count(table, params, eps, eps, threads=threads, max_records=0)
        rows.append(
            {
                "X": float(X),
                "ratio": target,
                "primes": len(table),
                "raw_count": result.raw_count,
                "weighted_count": result.weighted_count,
                "main_term_scale": result.main_term_scale,
            }
        )
    positive = [r for r in rows if r["weighted_count"] > 0]
    if len(positive) < 2:
        slope = math.nan
    else:
        slope = float(
            np.polyfit(
                np.log2([r["X"] for r in positive]), np.log2([r["weighted_count"] for r in positive]), 1
            )[0]
        )
    return ScalingReport(rows=tuple(rows), slope=slope, expected_slope=5.0 - c - d)
