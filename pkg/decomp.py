"""
Heath-Brown identity for the von Mangoldt function, the Type I / Type II
thresholds, the three-case block classifier and direct evaluation of
the resulting bilinear sums.

Dyadic blocks are given by their left endpoints: a block of size N
means the variable runs over (N, 2N].
"""
import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    DomainViolationError,
    InfeasibleProfileError,
    LimitExceededError,
    OutOfRangeError,
)
from expsum import ComplexValue, _joint_phase, _terms, pairwise_sum, reduce_phase
from primes import ArithmeticTables, arithmetic_tables

logger = logging.getLogger(__name__)

MAX_VERIFY_N = 10 ** 4
MAX_BILINEAR_TERMS = 10 ** 7
BLOCK_COUNT = 20
SMOOTH_BLOCKS = 10


@dataclass(frozen=True)
class HBTerm:
    j: int
    sign: int
    binom: int


@dataclass(frozen=True)
class HBDecomposition:
    k: int
    z: float
    terms: Tuple[HBTerm, ...]


def hb_decompose(k: int, z: float) -> HBDecomposition:
    if k < 1 or z < 1:
        raise DomainViolationError(f"need k >= 1 and z >= 1, got k={k!r}, z={z!r}")
    terms = tuple(HBTerm(j=j, sign=(-1) ** (j - 1), binom=math.comb(k, j)) for j in range(1, k + 1))
    return HBDecomposition(k=k, z=float(z), terms=terms)


@functools.lru_cache(maxsize=None)
def _divisors(n: int) -> Tuple[int, ...]:
    small, large = [], []
    for a in range(1, math.isqrt(n) + 1):
        if n % a == 0:
            small.append(a)
            if a != n // a:
                large.append(n // a)
    return tuple(small + large[::-1])


class _Descent:
    """Ordered-factorization sums for one (z, tables), memoized per instance."""

    def __init__(self, z: float, tables: ArithmeticTables):
        self.z = z
        self.moebius = tables.moebius
        self._log_memo: Dict[Tuple[int, int], float] = {}
        self._moebius_memo: Dict[Tuple[int, int], int] = {}

    def log_part(self, j: int, m: int) -> float:
        """sum over m = n_1 ... n_j of log n_1."""
        key = (j, m)
        if key not in self._log_memo:
            if j == 1:
                self._log_memo[key] = math.log(m)
            else:
                self._log_memo[key] = math.fsum(self.log_part(j - 1, e) for e in _divisors(m))
        return self._log_memo[key]

    def moebius_part(self, j: int, m: int) -> int:
        """sum over m = n_1 ... n_j with every n_i <= z of mu(n_1)...mu(n_j)."""
        key = (j, m)
        if key in self._moebius_memo:
            return self._moebius_memo[key]
        if j == 1:
            total = int(self.moebius[m]) if m <= self.z else 0
        else:
            total = 0
            for e in _divisors(m):
                if e > self.z:
                    break
                mu = int(self.moebius[e])
                if mu:
                    total += mu * self.moebius_part(j - 1, m // e)
        self._moebius_memo[key] = total
        return total

    def term(self, j: int, n: int) -> float:
        return math.fsum(self.log_part(j, a) * self.moebius_part(j, n // a) for a in _divisors(n))


def hb_evaluate(k: int, z: float, n: int, tables: Optional[ArithmeticTables] = None) -> float:
    """Right-hand side of the Heath-Brown identity at n (equals Lambda(n))."""
    decomposition = hb_decompose(k, z)
    if not 1 <= n <= 2 * z ** k:
        raise OutOfRangeError(f"need 1 <= n <= 2 z^k = {2 * z ** k:g}, got n={n}")
    if tables is None or tables.n_max < n:
        tables = arithmetic_tables(n)
    descent = _Descent(z, tables)
    return math.fsum(t.sign * t.binom * descent.term(t.j, n) for t in decomposition.terms)


def _integer_root_ceil(value: float, k: int) -> int:
    """Smallest integer z with z^k >= value."""
    z = max(1, int(math.ceil(value ** (1.0 / k))))
    while z > 1 and (z - 1) ** k >= value:
        z -= 1
    while z ** k < value:
        z += 1
    return z


def _dirichlet(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """(f * g)(n) = sum_{ab=n} f(a) g(b) for 1 <= n <= len-1; index 0 unused."""
    n_max = f.size - 1
    h = np.zeros(n_max + 1, dtype=np.float64)
    for a in np.flatnonzero(f[1:]).tolist():
        a += 1
        q = n_max // a
        h[a : a * q + 1 : a] += f[a] * g[1 : q + 1]
    return h


def hb_identity_values(k: int, z: float, n_max: int, tables: ArithmeticTables) -> np.ndarray:
    """Identity right-hand side for every n <= n_max via sieve-style convolutions."""
    n = np.arange(n_max + 1, dtype=np.float64)
    log_n = np.zeros(n_max + 1)
    log_n[1:] = np.log(n[1:])
    ones = np.zeros(n_max + 1)
    ones[1:] = 1.0
    mu_z = tables.moebius[: n_max + 1].astype(np.float64) * (n <= z)
    mu_z[0] = 0.0

    total = np.zeros(n_max + 1)
    log_part, mu_part = log_n, mu_z
    for t in hb_decompose(k, z).terms:
        if t.j > 1:
            log_part = _dirichlet(log_part, ones)
            mu_part = _dirichlet(mu_part, mu_z)
        total += t.sign * t.binom * _dirichlet(log_part, mu_part)
    return total


def hb_verify_range(k: int, n_max: int) -> float:
    """max_{n <= n_max} |identity(n) - Lambda(n)| with z = ceil((n_max/2)^(1/k))."""
    if k not in (1, 2, 3) or n_max > MAX_VERIFY_N or n_max < 1:
        raise LimitExceededError(f"need k in {{1,2,3}} and 1 <= n_max <= {MAX_VERIFY_N}, got k={k}, n_max={n_max}")
    z = _integer_root_ceil(n_max / 2.0, k)
    tables = arithmetic_tables(n_max)
    values = hb_identity_values(k, z, n_max, tables)
    error = float(np.max(np.abs(values[1:] - tables.mangoldt[1 : n_max + 1])))
    logger.info(f"hb_verify_range k={k} n_max={n_max} z={z}: max error {error:.3g}")
    return error


# --- thresholds and classification -------------------------------------------

@dataclass(frozen=True)
class DecompThresholds:
    X: float
    R: float
    frakA: float
    frakB: float
    frakC: float

    def _logs(self) -> Tuple[Fraction, Fraction]:
        return Fraction(math.log(self.X)), Fraction(math.log(self.R))

    def in_band(self, eta: float = 0.0) -> bool:
        """X^{3/4 - eta} <= R <= X^{39/37}, decided on exact rational logs."""
        L, r = self._logs()
        return (Fraction(3, 4) - Fraction(eta)) * L <= r <= Fraction(39, 37) * L

    def check_invariants(self) -> Dict[str, bool]:
        """B^2 <= C and X/A <= C, evaluated exactly on the logarithms."""
        L, r = self._logs()
        log_a = min(Fraction(59, 37) * L - r, Fraction(25, 37) * L)
        log_b = Fraction(6, 37) * L
        log_c = min(Fraction(56, 37) * L - r, r - Fraction(12, 37) * L)
        return {"B_squared_le_C": 2 * log_b <= log_c, "X_over_A_le_C": L - log_a <= log_c}


def thresholds(X: float, R: float) -> DecompThresholds:
    if not (X > 1 and R > 0):
        raise DomainViolationError(f"need X > 1 and R > 0, got X={X!r}, R={R!r}")
    frakA = min(X ** (59.0 / 37.0) / R, X ** (25.0 / 37.0))
    frakB = X ** (6.0 / 37.0)
    frakC = min(X ** (56.0 / 37.0) / R, R * X ** (-12.0 / 37.0))
    return DecompThresholds(X=X, R=R, frakA=frakA, frakB=frakB, frakC=frakC)


def frequency_scale(x: float, y: float, X: float, c: float, d: float) -> float:
    """R = |x| X^c + |y| X^d."""
    return abs(x) * X ** c + abs(y) * X ** d


@dataclass(frozen=True)
class CaseLabel:
    kind: str
    case: int
    m_blocks: Tuple[int, ...]
    n_blocks: Tuple[int, ...]
    M: float
    N: float


def classify_blocks(blocks: Sequence[float], th: DecompThresholds) -> CaseLabel:
    """Type I / Type II label for a profile of 20 dyadic block sizes.

    Blocks 1-10 carry smooth coefficients (log or 1), blocks 11-20 carry
    Moebius factors. Block indices in the label are 0-based.
    """
    sizes = [float(b) for b in blocks]
    if len(sizes) != BLOCK_COUNT:
        raise InfeasibleProfileError(f"need {BLOCK_COUNT} blocks, got {len(sizes)}")
    if any(s < 1 for s in sizes):
        raise InfeasibleProfileError("block sizes must be >= 1")
    X = th.X
    log_product = math.fsum(math.log(s) for s in sizes)
    slack = BLOCK_COUNT * math.log(2.0)
    if abs(log_product - math.log(X)) > slack:
        raise InfeasibleProfileError("block product not within 2^20 of X")
    cap = (2.0 * X) ** (1.0 / SMOOTH_BLOCKS)
    if any(s > cap for s in sizes[SMOOTH_BLOCKS:]):
        raise InfeasibleProfileError("a Moebius block exceeds (2X)^(1/10)")

    def label(kind: str, case: int, n_idx: Sequence[int]) -> CaseLabel:
        n_set = tuple(sorted(n_idx))
        m_set = tuple(i for i in range(BLOCK_COUNT) if i not in n_set)
        N = math.prod(sizes[i] for i in n_set)
        return CaseLabel(kind, case, m_set, n_set, math.prod(sizes[i] for i in m_set), N)

    type_one_floor = X / th.frakA
    for j in range(SMOOTH_BLOCKS):
        if sizes[j] >= type_one_floor:
            return label("TypeI", 1, [j])
    for j in range(BLOCK_COUNT):
        if th.frakB <= sizes[j] < type_one_floor:
            return label("TypeII", 2, [j])
    if all(s < th.frakB for s in sizes):
        order = sorted(range(BLOCK_COUNT), key=lambda i: (-sizes[i], i))
        product = 1.0
        for length, i in enumerate(order, start=1):
            product *= sizes[i]
            if product >= th.frakB:
                return label("TypeII", 3, order[:length])
    raise InfeasibleProfileError("no case applies to this block profile")


def random_profiles(X: float, count: int, rng: np.random.Generator) -> List[List[float]]:
    """Random admissible profiles: Moebius blocks below (2X)^(1/10), product X."""
    cap = (2.0 * X) ** (1.0 / SMOOTH_BLOCKS)
    profiles = []
    for _ in range(count):
        mobius = np.exp(rng.uniform(0.0, math.log(cap), size=BLOCK_COUNT - SMOOTH_BLOCKS))
        remaining = math.log(X) - float(np.sum(np.log(mobius)))
        if remaining < 0:
            mobius *= math.exp(remaining / mobius.size)
            remaining = 0.0
        shares = rng.dirichlet(np.full(SMOOTH_BLOCKS, float(rng.choice([0.2, 1.0, 5.0]))))
        smooth = np.exp(shares * remaining)
        profiles.append([float(v) for v in np.concatenate([smooth, np.maximum(mobius, 1.0)])])
    return profiles


# --- bilinear sums -----------------------------------------------------------

def dyadic_range(size: float) -> np.ndarray:
    """Integers in (size, 2 size]."""
    return np.arange(int(math.floor(size)) + 1, int(math.floor(2 * size)) + 1, dtype=np.int64)


def type_sum(
    kind: str,
    coeffs_a: Sequence[float],
    coeffs_b: Optional[Sequence[float]],
    M: float,
    N: float,
    c: float,
    d: float,
    x: float,
    y: float,
) -> ComplexValue:
    """sum_{m ~ M} a(m) sum_{n ~ N} b(n) e(x (mn)^c + y (mn)^d); b = 1 for Type I."""
    m = dyadic_range(M)
    n = dyadic_range(N)
    if m.size * n.size > MAX_BILINEAR_TERMS:
        raise LimitExceededError(f"{m.size * n.size} terms above {MAX_BILINEAR_TERMS}")
    a = np.asarray(coeffs_a, dtype=float)
    if a.size != m.size:
        raise DomainViolationError(f"need {m.size} coefficients a(m) for m in ({M:g}, {2 * M:g}], got {a.size}")
    if kind == "TypeI":
        if coeffs_b is not None and not np.all(np.asarray(coeffs_b, dtype=float) == 1.0):
            raise DomainViolationError("Type I sums carry no n-coefficients")
        b = np.ones(n.size)
    elif kind == "TypeII":
        if coeffs_b is None:
            raise DomainViolationError("Type II sums need coefficients b(n)")
        b = np.asarray(coeffs_b, dtype=float)
        if b.size != n.size:
            raise DomainViolationError(f"need {n.size} coefficients b(n), got {b.size}")
    else:
        raise DomainViolationError(f"kind must be 'TypeI' or 'TypeII', got {kind!r}")

    k = (m[:, None] * n[None, :]).astype(np.float64)
    weights = a[:, None] * b[None, :]
    return ComplexValue.of(complex(pairwise_sum(_product_terms(k.ravel(), weights.ravel(), c, d, x, y))))


def _product_terms(k: np.ndarray, weights: np.ndarray, c: float, d: float, x: float, y: float) -> np.ndarray:
    """w_i e(x k_i^c + y k_i^d) with plain double powers."""
    pc = np.power(k, c)
    pd = np.power(k, d)
    phase = _joint_phase(reduce_phase(x, pc, 0.0), reduce_phase(y, pd, 0.0))
    return _terms(phase, weights)


def flattened_sum(
    coeffs_a: Sequence[float], coeffs_b: Sequence[float], M: float, N: float, c: float, d: float, x: float, y: float
) -> ComplexValue:
    """sum_k w(k) e(x k^c + y k^d) with w(k) = sum_{mn=k} a(m) b(n)."""
    m = dyadic_range(M)
    n = dyadic_range(N)
    weight: Dict[int, float] = {}
    for mi, ai in zip(m.tolist(), coeffs_a):
        for ni, bi in zip(n.tolist(), coeffs_b):
            weight[mi * ni] = weight.get(mi * ni, 0.0) + ai * bi
    k = np.array(sorted(weight), dtype=np.float64)
    w = np.array([weight[int(v)] for v in k.tolist()])
    return ComplexValue.of(complex(pairwise_sum(_product_terms(k, w, c, d, x, y))))


def block_coefficients(M: float, z: float, j: int, tables: Optional[ArithmeticTables] = None) -> np.ndarray:
    """a(m) = sum over m = n_1...n_j, n_i <= z, of mu(n_1)...mu(n_j), for m ~ M.

    These are the coefficients a Moebius block product carries after the
    Heath-Brown decomposition.
    """
    m = dyadic_range(M)
    if m.size == 0:
        return np.zeros(0)
    if tables is None or tables.n_max < int(m[-1]):
        tables = arithmetic_tables(int(m[-1]))
    descent = _Descent(z, tables)
    return np.array([float(descent.moebius_part(j, int(v))) for v in m.tolist()])


def coefficient_norm_ratio(coeffs: Sequence[float], M: float, A: float) -> float:
    """sum |a(m)|^2 / (M (log M)^{2A})."""
    a = np.asarray(coeffs, dtype=float)
    return float(np.sum(a * a)) / (M * math.log(M) ** (2.0 * A))
