"""
Gaussian kernels and the exponential sums

    S(x, y) = sum_{lambda X < p <= X} (log p) e(p^c x + p^d y)
    T_alpha(x) = sum_{lambda X < n <= X} e(n^alpha x)

with e(t) = exp(2 pi i t), plus grid evaluation and the mean-value
integrals used for shape checks.

Phases are reduced mod 1 before any trigonometry: x * (hi + lo) is
formed with an error-free two-product on x * hi, so the reduced phase
is accurate to a few ulps of 1 even when x * p^c is around 1e9. Sums
over primes use a fixed balanced pairwise tree, so a value never
depends on chunking or thread count.
"""
import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from errors import DomainViolationError, GridTooLargeError, InvalidParamsError, StepTooCoarseError
from params import DerivedScales, classify_regions
from primes import PrimeTable, integer_power_table, sieve, split_powers

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MAX_GRID_POINTS = 10 ** 8
_SPLITTER = 134217729.0  # 2**27 + 1
# Elements per (rows x primes) block handed to numpy at once.
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class ComplexValue:
    re: float
    im: float

    @classmethod
    def of(cls, z: complex) -> "ComplexValue":
        return cls(float(z.real), float(z.imag))

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def __abs__(self) -> float:
        return math.hypot(self.re, self.im)

    def conjugate(self) -> "ComplexValue":
        return ComplexValue(self.re, -self.im)


# --- kernels ---------------------------------------------------------------

def phi(t: Any) -> Any:
    """e^{-pi t^2}."""
    t = np.asarray(t, dtype=float)
    value = np.exp(-math.pi * t * t)
    return float(value) if value.ndim == 0 else value


def phi_delta(delta: float, t: Any) -> Any:
    """delta * phi(delta * t); unit mass for every delta > 0."""
    if not delta > 0:
        raise DomainViolationError(f"delta must be positive, got {delta!r}")
    return delta * phi(delta * np.asarray(t, dtype=float))


def indicator_vs_kernel(t: float, rho: float) -> Tuple[float, float]:
    """(1_{[-1,1]}(t/rho), phi(t) - e^{-pi rho^2}); the first always dominates."""
    if not rho > 0:
        raise DomainViolationError(f"rho must be positive, got {rho!r}")
    lhs = 1.0 if abs(t / rho) <= 1.0 else 0.0
    rhs = phi(t) - math.exp(-math.pi * rho * rho)
    return lhs, rhs


def trapezoid_nodes(a: float, b: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and composite-trapezoid weights on [a, b] with spacing <= step."""
    if b <= a:
        return np.array([a], dtype=float), np.zeros(1)
    n = max(1, int(math.ceil((b - a) / step)))
    h = (b - a) / n
    nodes = a + h * np.arange(n + 1, dtype=float)
    nodes[-1] = b
    weights = np.full(n + 1, h)
    weights[0] = weights[-1] = h / 2.0
    return nodes, weights


def kernel_transform(x: float, half_width: float = 8.0, step: float = 1e-3) -> float:
    """Trapezoid value of the integral of phi(t) e(-x t) over |t| <= half_width.

    phi is its own Fourier transform, so this reproduces phi(x).
    """
    t, w = trapezoid_nodes(-half_width, half_width, step)
    # Imaginary part vanishes by symmetry of phi.
    return float(pairwise_sum(w * phi(t) * np.cos(TWO_PI * x * t)))


# --- error-free arithmetic ---------------------------------------------------

def two_sum(a: Any, b: Any) -> Tuple[Any, Any]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a: Any) -> Tuple[Any, Any]:
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_product(a: Any, b: Any) -> Tuple[Any, Any]:
    """(p, e) with p = fl(a*b) and p + e = a*b exactly (no overflow assumed)."""
    p = a * b
    a_hi, a_lo = _split(a)
    b_hi, b_lo = _split(b)
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


def reduce_phase(x: Any, hi: Any, lo: Any) -> np.ndarray:
    """x * (hi + lo) mod 1, in [-1/2, 1/2]."""
    p, e = two_product(np.asarray(x, dtype=float), np.asarray(hi, dtype=float))
    frac = p - np.rint(p)
    frac = frac + (e + x * np.asarray(lo, dtype=float))
    return frac - np.rint(frac)


def pairwise_sum(values: Any, axis: int = -1) -> Any:
    """Balanced pairwise reduction along axis with a fixed tree shape."""
    v = np.moveaxis(np.asarray(values), axis, -1)
    if v.shape[-1] == 0:
        return np.zeros(v.shape[:-1], dtype=v.dtype)[()]
    while v.shape[-1] > 1:
        if v.shape[-1] % 2:
            pad = np.zeros(v.shape[:-1] + (1,), dtype=v.dtype)
            v = np.concatenate([v, pad], axis=-1)
        v = v[..., 0::2] + v[..., 1::2]
    return v[..., 0][()]


def _terms(phase: np.ndarray, weights: np.ndarray) -> np.ndarray:
    angle = TWO_PI * phase
    out = np.empty(np.broadcast(angle, weights).shape, dtype=np.complex128)
    out.real = weights * np.cos(angle)
    out.imag = weights * np.sin(angle)
    return out


def _joint_phase(frac_c: np.ndarray, frac_d: np.ndarray) -> np.ndarray:
    t = frac_c + frac_d
    return t - np.rint(t)


def _check_exponents(table: PrimeTable, c: float, d: float) -> None:
    if table.c != c or table.d != d:
        raise InvalidParamsError(
            [f"table built for (c, d)=({table.c}, {table.d}), called with ({c}, {d})"]
        )


# --- point evaluation --------------------------------------------------------

def eval_S(table: PrimeTable, c: float, d: float, x: float, y: float) -> ComplexValue:
    _check_exponents(table, c, d)
    frac_c = reduce_phase(x, table.pc_hi, table.pc_lo)
    frac_d = reduce_phase(y, table.pd_hi, table.pd_lo)
    return ComplexValue.of(complex(pairwise_sum(_terms(_joint_phase(frac_c, frac_d), table.logp))))


def eval_T(X: float, lambda_cut: float, alpha: float, x: float) -> ComplexValue:
    if not alpha > 0:
        raise DomainViolationError(f"alpha must be positive, got {alpha!r}")
    low = int(math.floor(lambda_cut * X)) + 1
    high = int(math.floor(X))
    if high < low:
        return ComplexValue(0.0, 0.0)
    _, hi, lo = integer_power_table(low, high, float(alpha))
    phase = reduce_phase(x, hi, lo)
    return ComplexValue.of(complex(pairwise_sum(_terms(phase, np.ones_like(hi)))))


def weighted_sum(
    n_values: Sequence[int], weights: Sequence[float], c: float, d: float, x: float, y: float
) -> ComplexValue:
    """sum_k w_k e(x n_k^c + y n_k^d) for an arbitrary integer sequence."""
    n_values = list(n_values)
    pc_hi, pc_lo = split_powers(n_values, c)
    pd_hi, pd_lo = split_powers(n_values, d)
    phase = _joint_phase(reduce_phase(x, pc_hi, pc_lo), reduce_phase(y, pd_hi, pd_lo))
    return ComplexValue.of(complex(pairwise_sum(_terms(phase, np.asarray(weights, dtype=float)))))


# --- grids -------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def x_points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    def y_points(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """From 'x_min,x_max,nx,y_min,y_max,ny'."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise DomainViolationError(f"grid spec needs 6 comma-separated values, got {text!r}")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]), float(parts[3]), float(parts[4]), int(parts[5]))


@dataclass(frozen=True)
class ExpSumGrid:
    x_points: np.ndarray
    y_points: np.ndarray
    values: np.ndarray
    params_digest: str

    def value(self, i: int, j: int) -> ComplexValue:
        return ComplexValue.of(complex(self.values[i, j]))

    def max_modulus(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0


def params_digest(table: PrimeTable) -> str:
    h = hashlib.sha256()
    h.update(repr((table.X, table.lambda_cut, table.c, table.d, len(table))).encode())
    h.update(np.ascontiguousarray(table.primes, dtype="<i8").tobytes())
    return h.hexdigest()[:16]


def _rows(frac_rows: np.ndarray, frac_cols: np.ndarray, logp: np.ndarray) -> np.ndarray:
    """S for every (row, column) pair, given per-prime reduced phases.

    frac_rows: (r, P) phases of the row variable; frac_cols: (m, P).
    """
    out = np.empty((frac_rows.shape[0], frac_cols.shape[0]), dtype=np.complex128)
    P = max(1, logp.size)
    cols_per_block = max(1, _BLOCK_ELEMENTS // P)
    for i in range(frac_rows.shape[0]):
        for j0 in range(0, frac_cols.shape[0], cols_per_block):
            block = frac_cols[j0 : j0 + cols_per_block]
            out[i, j0 : j0 + block.shape[0]] = pairwise_sum(
                _terms(_joint_phase(frac_rows[i][None, :], block), logp), axis=-1
            )
    return out


def _row_chunks(n: int, threads: int) -> List[Tuple[int, int]]:
    size = max(1, int(math.ceil(n / max(1, threads * 4))))
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def grid_eval(table: PrimeTable, c: float, d: float, grid_spec: GridSpec, threads: int = 1) -> ExpSumGrid:
    _check_exponents(table, c, d)
    if grid_spec.size > MAX_GRID_POINTS:
        raise GridTooLargeError(f"{grid_spec.size} grid points above {MAX_GRID_POINTS}")
    xs = grid_spec.x_points()
    ys = grid_spec.y_points()
    frac_d = reduce_phase(ys[:, None], table.pd_hi[None, :], table.pd_lo[None, :])

    def work(bounds: Tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        frac_c = reduce_phase(xs[lo:hi, None], table.pc_hi[None, :], table.pc_lo[None, :])
        return _rows(frac_c, frac_d, table.logp)

    chunks = _row_chunks(xs.size, threads)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(b) for b in chunks]
    values = np.concatenate(parts, axis=0) if parts else np.zeros((0, ys.size), dtype=np.complex128)
    logger.info(f"grid_eval: {xs.size}x{ys.size} points over {len(table)} primes")
    return ExpSumGrid(x_points=xs, y_points=ys, values=values, params_digest=params_digest(table))


# --- mean values -------------------------------------------------------------

def _power_span(table: PrimeTable, e: float) -> float:
    return table.X ** e - (table.lambda_cut * table.X) ** e


def _mean_square(
    table: PrimeTable,
    fixed_frac: np.ndarray,
    moving_hi: np.ndarray,
    moving_lo: np.ndarray,
    nodes: np.ndarray,
    weights: np.ndarray,
    threads: int,
) -> float:
    if len(table) == 0:
        return 0.0

    def work(bounds: Tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        frac = reduce_phase(nodes[lo:hi, None], moving_hi[None, :], moving_lo[None, :])
        values = pairwise_sum(_terms(_joint_phase(frac, fixed_frac[None, :]), table.logp), axis=-1)
        return np.atleast_1d(values.real ** 2 + values.imag ** 2)

    rows_per_block = max(1, _BLOCK_ELEMENTS // len(table))
    bounds = [(s, min(nodes.size, s + rows_per_block)) for s in range(0, nodes.size, rows_per_block)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            squares = list(pool.map(work, bounds))
    else:
        squares = [work(b) for b in bounds]
    return float(pairwise_sum(weights * np.concatenate(squares)))


def mean_square_x(
    table: PrimeTable, c: float, d: float, y: float, half_width: float, step: float, threads: int = 1
) -> float:
    """Trapezoid value of the integral of |S(x, y)|^2 over |x| <= half_width."""
    _check_exponents(table, c, d)
    limit = 1.0 / (20.0 * _power_span(table, c))
    if step > limit:
        raise StepTooCoarseError(f"step {step:.3g} above 1/(20(X^c - (lambda X)^c)) = {limit:.3g}")
    nodes, weights = trapezoid_nodes(-half_width, half_width, step)
    fixed = reduce_phase(y, table.pd_hi, table.pd_lo)
    return _mean_square(table, fixed, table.pc_hi, table.pc_lo, nodes, weights, threads)


def mean_square_y(
    table: PrimeTable, c: float, d: float, x: float, half_width: float, step: float, threads: int = 1
) -> float:
    """Trapezoid value of the integral of |S(x, y)|^2 over |y| <= half_width."""
    _check_exponents(table, c, d)
    limit = 1.0 / (20.0 * _power_span(table, d))
    if step > limit:
        raise StepTooCoarseError(f"step {step:.3g} above 1/(20(X^d - (lambda X)^d)) = {limit:.3g}")
    nodes, weights = trapezoid_nodes(-half_width, half_width, step)
    fixed = reduce_phase(x, table.pc_hi, table.pc_lo)
    return _mean_square(table, fixed, table.pd_hi, table.pd_lo, nodes, weights, threads)


def _axis_tables(table: PrimeTable, axis: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(moving_hi, moving_lo, fixed_hi, fixed_lo) for integration along axis."""
    if axis == "x":
        return table.pc_hi, table.pc_lo, table.pd_hi, table.pd_lo
    if axis == "y":
        return table.pd_hi, table.pd_lo, table.pc_hi, table.pc_lo
    raise DomainViolationError(f"axis must be 'x' or 'y', got {axis!r}")


def _pair_sum(table: PrimeTable, axis: str, kernel) -> float:
    """sum_{p,q} log p log q Re[e(D_fixed(p,q))] * kernel(D_moving(p,q)), row blocks in order."""
    m_hi, m_lo, f_hi, f_lo = _axis_tables(table, axis)
    P = len(table)
    if P == 0:
        return 0.0
    rows_per_block = max(1, _BLOCK_ELEMENTS // P)
    partial = []
    for s in range(0, P, rows_per_block):
        e = min(P, s + rows_per_block)
        d_moving = (m_hi[s:e, None] - m_hi[None, :]) + (m_lo[s:e, None] - m_lo[None, :])
        d_fixed = (f_hi[s:e, None] - f_hi[None, :]) + (f_lo[s:e, None] - f_lo[None, :])
        weight = table.logp[s:e, None] * table.logp[None, :]
        values = kernel(d_moving, d_fixed) * weight
        partial.append(pairwise_sum(values, axis=-1))
    return float(pairwise_sum(np.concatenate(partial)))


def mean_square_exact(
    table: PrimeTable, c: float, d: float, fixed: float, a: float, b: float, axis: str = "x"
) -> float:
    """Closed form of the integral of |S|^2 over [a, b] along axis, the other variable fixed.

    Expanding |S|^2 as a double sum over primes turns each term into
    (b - a) sinc(D (b - a)) e(D mid) with D a difference of powers.
    """
    _check_exponents(table, c, d)
    if b < a:
        raise DomainViolationError(f"need a <= b, got [{a}, {b}]")
    length = b - a
    mid = (a + b) / 2.0

    def kernel(d_moving: np.ndarray, d_fixed: np.ndarray) -> np.ndarray:
        phase = d_moving * mid + d_fixed * fixed
        phase = phase - np.rint(phase)
        return length * np.sinc(d_moving * length) * np.cos(TWO_PI * phase)

    return _pair_sum(table, axis, kernel)


@dataclass(frozen=True)
class SmoothedMeanSquare:
    value: float
    tail_bound: float


def smoothed_mean_square(
    table: PrimeTable, c: float, d: float, fixed: float, eps: float, axis: str = "x"
) -> SmoothedMeanSquare:
    """Integral of |S|^2 phi_eps over |t| <= log X / eps along axis.

    Uses the self-duality of phi: the integral of phi_eps(t) e(D t) over the
    line is phi(D / eps). tail_bound covers the part beyond the K cutoff.
    """
    _check_exponents(table, c, d)
    if not eps > 0:
        raise DomainViolationError(f"eps must be positive, got {eps!r}")

    def kernel(d_moving: np.ndarray, d_fixed: np.ndarray) -> np.ndarray:
        phase = d_fixed * fixed
        phase = phase - np.rint(phase)
        return phi(d_moving / eps) * np.cos(TWO_PI * phase)

    value = _pair_sum(table, axis, kernel)
    total = float(np.sum(table.logp))
    tail = total * total * math.erfc(math.sqrt(math.pi) * math.log(table.X))
    return SmoothedMeanSquare(value=value, tail_bound=tail)


def fourth_moment(table: PrimeTable, c: float, d: float, eps1: float, eps2: float) -> float:
    """Double integral of |S|^4 phi_eps1(x) phi_eps2(y) over the plane.

    Equals sum over p1..p4 of the log weights times
    phi((p1^c + p2^c - p3^c - p4^c)/eps1) phi((same with d)/eps2); pair sums
    are sorted so only differences within 8 widths are visited.
    """
    _check_exponents(table, c, d)
    if not (eps1 > 0 and eps2 > 0):
        raise DomainViolationError("windows must be positive")
    if len(table) == 0:
        return 0.0
    pc = table.pc_hi + table.pc_lo
    pd = table.pd_hi + table.pd_lo
    sc = (pc[:, None] + pc[None, :]).ravel()
    sd = (pd[:, None] + pd[None, :]).ravel()
    w = (table.logp[:, None] * table.logp[None, :]).ravel()
    order = np.argsort(sc, kind="stable")
    sc, sd, w = sc[order], sd[order], w[order]

    reach = 8.0 * eps1
    left = np.searchsorted(sc, sc - reach, side="left")
    right = np.searchsorted(sc, sc + reach, side="right")
    partial = []
    block = max(1, _BLOCK_ELEMENTS // max(1, int(np.max(right - left))))
    for s in range(0, sc.size, block):
        e = min(sc.size, s + block)
        counts = right[s:e] - left[s:e]
        owner = np.repeat(np.arange(s, e), counts)
        offsets = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
        partner = np.repeat(left[s:e], counts) + offsets
        values = (
            w[owner] * w[partner]
            * phi((sc[owner] - sc[partner]) / eps1)
            * phi((sd[owner] - sd[partner]) / eps2)
        )
        partial.append(pairwise_sum(values) if values.size else 0.0)
    return float(pairwise_sum(np.asarray(partial, dtype=float)))


@dataclass(frozen=True)
class SupReport:
    max_modulus: float
    at: Optional[Tuple[float, float]]
    points: int
    reference: float
    ratio: float


def sup_modulus(table: PrimeTable, c: float, d: float, scales: DerivedScales, grid_spec: GridSpec, threads: int = 1) -> SupReport:
    """Largest |S| over the grid points lying in the intermediate region."""
    grid = grid_eval(table, c, d, grid_spec, threads=threads)
    codes = classify_regions(scales, grid.x_points[:, None], grid.y_points[None, :])
    mask = codes == 2
    log_X = math.log(table.X)
    exponent = (34.0 / 37.0) * log_X + 205.0 * math.log(log_X)
    reference = math.exp(exponent) if exponent < 709.0 else math.inf
    if not mask.any():
        return SupReport(0.0, None, 0, reference, 0.0)
    modulus = np.where(mask, np.abs(grid.values), -1.0)
    i, j = np.unravel_index(int(np.argmax(modulus)), modulus.shape)
    best = float(modulus[i, j])
    return SupReport(best, (float(grid.x_points[i]), float(grid.y_points[j])), int(mask.sum()), reference, best / reference)


def mean_square_sweep(
    log2_X: Sequence[int],
    c: float,
    d: float,
    lambda_cut: float = 0.1,
    eta: float = 0.01,
    kind: str = "interval",
) -> List[dict]:
    """Rows (X, value, reference, ratio) for the mean-value shape checks.

    kind='interval': integral of |S(x,0)|^2 over |x| <= tau1 against X^{2-c} (log X)^3.
    kind='smoothed': integral of |S(x,0)|^2 phi_eps1 over |x| <= K1 against X (log X)^4,
    with eps1 = X^{-(39/37 - c)}.
    """
    rows = []
    for k in log2_X:
        X = float(2 ** int(k))
        table = sieve(X, lambda_cut, c, d)
        log_X = math.log(X)
        if kind == "interval":
            tau1 = X ** (0.75 - c - eta)
            value = mean_square_exact(table, c, d, 0.0, -tau1, tau1, axis="x")
            reference = X ** (2.0 - c) * log_X ** 3
        elif kind == "smoothed":
            eps1 = X ** (-(39.0 / 37.0 - c))
            value = smoothed_mean_square(table, c, d, 0.0, eps1, axis="x").value
            reference = X * log_X ** 4
        else:
            raise DomainViolationError(f"unknown sweep kind {kind!r}")
        logger.info(f"mean-square sweep X=2^{k}: value={value:.6g} ratio={value / reference:.6g}")
        rows.append({"X": X, "value": value, "reference": reference, "ratio": value / reference})
    return rows
