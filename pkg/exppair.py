"""
Exponent-pair calculus in exact rationals, the bound formulas built on
it, and seeded empirical checks of those bounds.
"""
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DomainViolationError, MalformedWordError
from expsum import eval_T, pairwise_sum

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)
Rational = Union[Fraction, int, str]


@dataclass(frozen=True)
class ExponentPair:
    kappa: Fraction
    lam: Fraction

    def __post_init__(self):
        kappa = Fraction(self.kappa)
        lam = Fraction(self.lam)
        if not (0 <= kappa <= HALF <= lam <= 1):
            raise DomainViolationError(f"not an exponent pair: ({kappa}, {lam})")
        # Fraction normalizes to lowest terms on construction.
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "lam", lam)

    def as_floats(self) -> Tuple[float, float]:
        return float(self.kappa), float(self.lam)

    def __str__(self) -> str:
        return f"({self.kappa}, {self.lam})"


TRIVIAL_PAIR = ExponentPair(Fraction(0), Fraction(1))


def a_process(p: ExponentPair) -> ExponentPair:
    denominator = 2 * p.kappa + 2
    return ExponentPair(p.kappa / denominator, (p.kappa + p.lam + 1) / denominator)


def b_process(p: ExponentPair) -> ExponentPair:
    return ExponentPair(p.lam - HALF, p.kappa + HALF)


_PROCESSES = {"A": a_process, "B": b_process}
_POWER = re.compile(r"([AB])\^(\d+)")


def expand_word(word: str) -> str:
    """'BA^2B' -> 'BAAB'."""
    expanded = _POWER.sub(lambda m: m.group(1) * int(m.group(2)), word.replace(" ", ""))
    if not expanded or set(expanded) - set(_PROCESSES):
        raise MalformedWordError(f"word must be a non-empty string over {{A, B}}, got {word!r}")
    return expanded


def apply_word(word: str, start: ExponentPair = TRIVIAL_PAIR) -> ExponentPair:
    """Apply the processes of word right-to-left to start, so 'BAAB' is B(A(A(B(0,1))))."""
    pair = start
    for letter in reversed(expand_word(word)):
        pair = _PROCESSES[letter](pair)
    return pair


def pair_record(word: str, pair: ExponentPair) -> Dict[str, Any]:
    return {
        "word": word,
        "kappa_num": pair.kappa.numerator,
        "kappa_den": pair.kappa.denominator,
        "lam_num": pair.lam.numerator,
        "lam_den": pair.lam.denominator,
    }


# --- bound formulas ----------------------------------------------------------

def gk_bound(lambda1: float, a: float, p: ExponentPair) -> float:
    """lambda1^kappa a^lambda + 1/lambda1."""
    if not (lambda1 > 0 and a >= 1):
        raise DomainViolationError(f"need lambda1 > 0 and a >= 1, got lambda1={lambda1!r}, a={a!r}")
    kappa, lam = p.as_floats()
    return lambda1 ** kappa * a ** lam + 1.0 / lambda1


def td_bound(h: float, X: float, d: float, p: ExponentPair) -> float:
    """h^kappa X^(kappa d - kappa + l) + 1/(h X^(d-1)), l the pair's second coordinate."""
    if not (h > 0 and X > 1 and d > 1):
        raise DomainViolationError(f"need h > 0, X > 1, d > 1, got h={h!r}, X={X!r}, d={d!r}")
    kappa, lam = p.as_floats()
    return h ** kappa * X ** (kappa * d - kappa + lam) + 1.0 / (h * X ** (d - 1.0))


def vdc_bounds(A: float, lambda1: float, lambda2: float) -> Tuple[float, float]:
    """First- and second-derivative test bounds for sums over A < n <= 2A."""
    if not (A >= 5 and 0 < lambda1 <= 0.5 and lambda2 > 0):
        raise DomainViolationError(
            f"need A >= 5, 0 < lambda1 <= 1/2, lambda2 > 0, got A={A!r}, "
            f"lambda1={lambda1!r}, lambda2={lambda2!r}"
        )
    return 1.0 / lambda1, A * math.sqrt(lambda2) + 1.0 / math.sqrt(lambda2)


def zhai_bounds(M: float, a: float, b: float, g1: float, g2: float) -> Tuple[float, Optional[float], Optional[float]]:
    """(R, bound1, bound2) for sum_{M < m <= 2M} e(a m^g1 + b m^g2).

    bound1 = M R^{-1/2} when R/M <= 1/8; bound2 = R^{1/2} + M R^{-1/3} when M <= R <= M^2.
    """
    if not (M >= 5 and a * b != 0 and 1 < g1 < 2 and 1 < g2 < 2 and g1 != g2):
        raise DomainViolationError(
            f"need M >= 5, ab != 0, 1 < g1, g2 < 2, g1 != g2; got M={M!r}, a={a!r}, "
            f"b={b!r}, g1={g1!r}, g2={g2!r}"
        )
    R = abs(a) * M ** g1 + abs(b) * M ** g2
    bound1 = M / math.sqrt(R) if R / M <= 0.125 else None
    bound2 = math.sqrt(R) + M * R ** (-1.0 / 3.0) if M <= R <= M * M else None
    return R, bound1, bound2


def weyl_vdc_check(z: Sequence[complex], Q: float) -> Tuple[float, float]:
    """Both sides of the Weyl-van der Corput inequality for z_1..z_L.

    rhs = (1 + L/Q) sum_{|q| <= Q} (1 - |q|/Q) sum_k z_{k+q} conj(z_k).
    """
    if not Q > 0:
        raise DomainViolationError(f"Q must be positive, got {Q!r}")
    z = np.asarray([complex(v) for v in z], dtype=np.complex128)
    if z.size == 0:
        raise DomainViolationError("sequence must be non-empty")
    L = z.size
    total = complex(pairwise_sum(z))
    lhs = total.real ** 2 + total.imag ** 2
    # correlation[L-1+q] = sum_k z_{k+q} conj(z_k)
    correlation = np.correlate(z, z, mode="full")
    q = np.arange(-(L - 1), L)
    weights = np.clip(1.0 - np.abs(q) / Q, 0.0, None)
    rhs = (1.0 + L / Q) * float(pairwise_sum(weights * correlation.real))
    return lhs, rhs


def kratzel_bound(P: float, D: float, Delta: float) -> float:
    """(P + 1)(D + 1/Delta) log(2 + 1/Delta)."""
    if not (P >= 0 and D > 0 and Delta > 0):
        raise DomainViolationError(f"need P >= 0, D > 0, Delta > 0, got P={P!r}, D={D!r}, Delta={Delta!r}")
    return (P + 1.0) * (D + 1.0 / Delta) * math.log(2.0 + 1.0 / Delta)


# --- empirical checks --------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    samples: int
    max_ratio: float
    arg_max: Dict[str, float]

    def to_dict(self) -> Dict[str, Any]:
        return {"samples": self.samples, "max_ratio": self.max_ratio, "arg_max": dict(self.arg_max)}


Trial = Tuple[float, Dict[str, float]]


def _run_trials(trial: Callable[[np.random.Generator], Trial], count: int, seed: int, threads: int) -> BoundReport:
    """Run count seeded trials; each trial gets its own child generator."""
    children = np.random.SeedSequence(seed).spawn(count)
    generators = [np.random.default_rng(s) for s in children]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(trial, generators))
    else:
        outcomes = [trial(g) for g in generators]
    best = max(range(count), key=lambda i: outcomes[i][0])
    return BoundReport(samples=count, max_ratio=float(outcomes[best][0]), arg_max=outcomes[best][1])


def _phase_sum(phases: np.ndarray) -> float:
    reduced = phases - np.rint(phases)
    angle = 2.0 * math.pi * reduced
    return abs(complex(pairwise_sum(np.cos(angle)), pairwise_sum(np.sin(angle))))


def fit_td_bound(
    X: float = 1e4,
    d: float = 1.01,
    pair: ExponentPair = ExponentPair(Fraction(2, 7), Fraction(4, 7)),
    points: int = 20,
    h_range: Tuple[float, float] = (1e-4, 1.0),
    lambda_cut: float = 0.1,
) -> BoundReport:
    """max over log-spaced h of |T_d(h)| / td_bound(h)."""
    best: Trial = (-1.0, {})
    for h in np.geomspace(h_range[0], h_range[1], points).tolist():
        ratio = abs(eval_T(X, lambda_cut, d, h)) / td_bound(h, X, d, pair)
        if ratio > best[0]:
            best = (ratio, {"h": h})
    return BoundReport(samples=points, max_ratio=best[0], arg_max=best[1])


def fit_vdc_first(count: int = 100, seed: int = 0, threads: int = 1) -> BoundReport:
    """sum_{A<n<=2A} e(theta n) against 1/lambda1, theta in [lambda1/2, lambda1]."""

    def trial(rng: np.random.Generator) -> Trial:
        A = int(rng.integers(5, 5000))
        lambda1 = float(rng.uniform(1e-3, 0.5))
        theta = float(rng.uniform(0.5 * lambda1, lambda1))
        n = np.arange(A + 1, 2 * A + 1, dtype=float)
        first, _ = vdc_bounds(A, lambda1, 1.0)
        return _phase_sum(theta * n) / first, {"A": A, "lambda1": lambda1, "theta": theta}

    return _run_trials(trial, count, seed, threads)


def fit_vdc_second(count: int = 100, seed: int = 0, threads: int = 1, exponent: float = 1.03) -> BoundReport:
    """sum_{A<n<=2A} e(x n^exponent) against the second-derivative bound.

    x is chosen so max |f''| on (A, 2A] equals lambda2.
    """

    def trial(rng: np.random.Generator) -> Trial:
        A = int(rng.integers(200, 2000))
        lambda2 = float(10 ** rng.uniform(-1.5 * math.log10(A), -0.5 * math.log10(A)))
        x = lambda2 / (exponent * (exponent - 1.0) * A ** (exponent - 2.0))
        n = np.arange(A + 1, 2 * A + 1, dtype=float)
        _, second = vdc_bounds(A, 0.5, lambda2)
        return _phase_sum(x * n ** exponent) / second, {"A": A, "lambda2": lambda2, "x": x}

    return _run_trials(trial, count, seed, threads)


def fit_zhai_first(count: int = 50, seed: int = 0, threads: int = 1) -> BoundReport:
    """sum_{M<m<=2M} e(a m^g1 + b m^g2) against M R^{-1/2} with R/M <= 1/8."""

    def trial(rng: np.random.Generator) -> Trial:
        M = int(rng.integers(50, 2000))
        g1, g2 = (float(v) for v in rng.uniform(1.01, 1.99, size=2))
        while abs(g1 - g2) < 1e-3:
            g2 = float(rng.uniform(1.01, 1.99))
        target = M * float(10 ** rng.uniform(-3.0, math.log10(0.125)))
        share = float(rng.uniform(0.1, 0.9))
        a = share * target / M ** g1 * (1 if rng.random() < 0.5 else -1)
        b = (1.0 - share) * target / M ** g2 * (1 if rng.random() < 0.5 else -1)
        _, bound1, _ = zhai_bounds(M, a, b, g1, g2)
        m = np.arange(M + 1, 2 * M + 1, dtype=float)
        value = _phase_sum(a * m ** g1 + b * m ** g2)
        return value / bound1, {"M": M, "a": a, "b": b, "g1": g1, "g2": g2}

    return _run_trials(trial, count, seed, threads)


def fit_kratzel(count: int = 100, seed: int = 0, threads: int = 1) -> BoundReport:
    """sum_{N<n<=2N} min(D, 1/||theta n||) against kratzel_bound(2N theta, D, theta)."""

    def trial(rng: np.random.Generator) -> Trial:
        N = int(rng.integers(10, 5000))
        theta = float(10 ** rng.uniform(-3.0, math.log10(0.5)))
        D = float(10 ** rng.uniform(0.0, 3.0))
        n = np.arange(N + 1, 2 * N + 1, dtype=float)
        phase = theta * n
        distance = np.abs(phase - np.rint(phase))
        with np.errstate(divide="ignore"):
            terms = np.where(distance > 0, np.minimum(D, 1.0 / distance), D)
        value = float(pairwise_sum(terms))
        bound = kratzel_bound(2.0 * N * theta, D, theta)
        return value / bound, {"N": N, "theta": theta, "D": D}

    return _run_trials(trial, count, seed, threads)
