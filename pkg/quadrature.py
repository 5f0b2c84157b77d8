"""
Quadrature of S^5(x, y) e(-N1 x - N2 y) phi_eps1(x) phi_eps2(y) over the
plane and over the three regions of the (x, y) decomposition.

The Gaussian weights make the integral equal to the smoothed tuple count;
the quadrature here checks that numerically and reports how the value
splits between the regions.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from counting import _multiplicity, _residuals, _weights
from errors import DomainViolationError, GridTooLargeError, StepTooCoarseError
from expsum import (
    MAX_GRID_POINTS,
    ComplexValue,
    _BLOCK_ELEMENTS,
    _joint_phase,
    _rows,
    _terms,
    pairwise_sum,
    phi_delta,
    reduce_phase,
)
from params import DerivedScales, RegionLabel, SystemParams
from primes import PrimeTable

logger = logging.getLogger(__name__)

ALL = "all"
AUTO = "auto"
SEPARABLE = "separable"
GRID = "grid"

DEFAULT_WIDTHS = 8.0
# auto switches to the grid route above this many multiset-node products
MAX_SEPARABLE_WORK = 10 ** 9
SMALL_TABLE = 10

RegionArg = Union[str, RegionLabel]


@dataclass(frozen=True)
class IntegralResult:
    value: ComplexValue
    region: str
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    step_x: float
    step_y: float
    tail_bound: float
    decay_bound: float
    method: str

    def to_dict(self) -> Dict[str, object]:
        return {
            "region": self.region,
            "re": self.value.re,
            "im": self.value.im,
            "modulus": abs(self.value),
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "step_x": self.step_x,
            "step_y": self.step_y,
            "tail_bound": self.tail_bound,
            "decay_bound": self.decay_bound,
            "method": self.method,
        }


@dataclass(frozen=True)
class RegionReport:
    d1: IntegralResult
    d2: IntegralResult
    d3: IntegralResult
    total: IntegralResult

    @property
    def ratio_d2_d1(self) -> float:
        d1 = abs(self.d1.value)
        return abs(self.d2.value) / d1 if d1 > 0 else math.inf

    @property
    def modulus_d3(self) -> float:
        return abs(self.d3.value)

    def to_dict(self) -> Dict[str, object]:
        return {
            "D1": self.d1.to_dict(),
            "D2": self.d2.to_dict(),
            "D3": self.d3.to_dict(),
            "D": self.total.to_dict(),
            "ratio_D2_D1": self.ratio_d2_d1,
            "modulus_D3": self.modulus_d3,
        }


def max_steps(table: PrimeTable, params: SystemParams) -> Tuple[float, float]:
    """Largest steps resolving the fastest oscillation of the integrand."""
    step_x = 1.0 / (20.0 * (5.0 * table.X ** params.c + abs(params.N1)))
    step_y = 1.0 / (20.0 * (5.0 * table.X ** params.d + abs(params.N2)))
    return step_x, step_y


def _region_name(region: RegionArg) -> str:
    if isinstance(region, RegionLabel):
        return region.value
    if region == ALL:
        return ALL
    try:
        return RegionLabel(region).value
    except ValueError:
        raise DomainViolationError(f"unknown region {region!r}") from None


def symmetric_nodes(half_width: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes on [-half_width, half_width], symmetric about 0, spacing <= step."""
    m = max(1, int(math.ceil(half_width / step)))
    h = half_width / m
    nodes = h * np.arange(-m, m + 1, dtype=float)
    weights = np.full(nodes.size, h)
    weights[0] = weights[-1] = h / 2.0
    return nodes, weights


# Each axis splits into four atoms by (inside tau, inside K):
# 0 = tau and K, 1 = tau only, 2 = K only, 3 = neither.
_ATOMS = 4


def _atoms(nodes: np.ndarray, tau: float, K: float) -> np.ndarray:
    a = np.abs(nodes)
    return (2 * (a >= tau) + (a > K)).astype(np.int8)


def _atom_region(xa: int, ya: int) -> int:
    in_tau = xa < 2 and ya < 2
    in_K = xa % 2 == 0 and ya % 2 == 0
    if in_tau:
        return 1
    return 2 if in_K else 3


_REGION_PAIRS: Dict[int, List[Tuple[int, int]]] = {1: [], 2: [], 3: []}
for _xa, _ya in itertools.product(range(_ATOMS), repeat=2):
    _REGION_PAIRS[_atom_region(_xa, _ya)].append((_xa, _ya))


@dataclass(frozen=True)
class _Axis:
    nodes: np.ndarray
    gauss: np.ndarray  # trapezoid weight times phi_eps at each node
    atoms: np.ndarray

    def masses(self) -> np.ndarray:
        return np.array([float(pairwise_sum(self.gauss[self.atoms == a])) for a in range(_ATOMS)])


def _axis(half_width: float, step: float, eps: float, tau: float, K: float) -> _Axis:
    nodes, weights = symmetric_nodes(half_width, step)
    return _Axis(nodes=nodes, gauss=weights * phi_delta(eps, nodes), atoms=_atoms(nodes, tau, K))


def _bounds(table: PrimeTable, ax: _Axis, ay: _Axis, widths: float) -> Tuple[float, float]:
    total = float(np.sum(table.logp)) ** 5
    outside = 2.0 * math.erfc(math.sqrt(math.pi) * widths)
    mx, my = ax.masses(), ay.masses()
    omega3 = math.fsum(mx[a] * my[b] for a, b in _REGION_PAIRS[3])
    return total * outside, total * omega3


# --- separable route ---------------------------------------------------------

def _multisets(P: int) -> np.ndarray:
    if P == 0:
        return np.zeros((0, 5), dtype=np.int64)
    return np.array(list(itertools.combinations_with_replacement(range(P), 5)), dtype=np.int64)


def _axis_sums(residual: np.ndarray, ax: _Axis) -> np.ndarray:
    """(m, 4) sums over each atom of gauss * e(residual * node)."""
    phase = reduce_phase(ax.nodes[None, :], residual[:, None], 0.0)
    terms = _terms(phase, ax.gauss[None, :])
    out = np.empty((residual.size, _ATOMS), dtype=np.complex128)
    for a in range(_ATOMS):
        out[:, a] = pairwise_sum(terms[:, ax.atoms == a], axis=-1)
    return out


def _separable(
    table: PrimeTable, params: SystemParams, ax: _Axis, ay: _Axis, threads: int
) -> Dict[int, complex]:
    rows = _multisets(len(table))
    if rows.shape[0] == 0:
        return {1: 0j, 2: 0j, 3: 0j}
    coef = _multiplicity(rows).astype(np.float64) * _weights(table.logp, rows)
    r1 = _residuals(table.pc_hi, table.pc_lo, rows, params.N1)
    r2 = _residuals(table.pd_hi, table.pd_lo, rows, params.N2)
    per_block = max(1, _BLOCK_ELEMENTS // max(ax.nodes.size, ay.nodes.size))
    bounds = [(s, min(rows.shape[0], s + per_block)) for s in range(0, rows.shape[0], per_block)]

    def work(span: Tuple[int, int]) -> np.ndarray:
        lo, hi = span
        sx = _axis_sums(r1[lo:hi], ax)
        sy = _axis_sums(r2[lo:hi], ay)
        out = np.empty((3, hi - lo), dtype=np.complex128)
        for region in (1, 2, 3):
            acc = np.zeros(hi - lo, dtype=np.complex128)
            for a, b in _REGION_PAIRS[region]:
                acc += sx[:, a] * sy[:, b]
            out[region - 1] = coef[lo:hi] * acc
        return out

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    values = np.concatenate(parts, axis=1)
    return {region: complex(pairwise_sum(values[region - 1])) for region in (1, 2, 3)}


# --- grid route ----------------------------------------------------------------

def _grid(
    table: PrimeTable,
    params: SystemParams,
    ax: _Axis,
    ay: _Axis,
    threads: int,
    symmetric: bool,
) -> Dict[int, complex]:
    n_points = ax.nodes.size * ay.nodes.size
    if n_points > MAX_GRID_POINTS:
        raise GridTooLargeError(f"{n_points} quadrature nodes above {MAX_GRID_POINTS}")
    frac_d = reduce_phase(ay.nodes[:, None], table.pd_hi[None, :], table.pd_lo[None, :])
    target_y = reduce_phase(ay.nodes, params.N2, 0.0)
    region_of = np.array([[_atom_region(a, b) for b in range(_ATOMS)] for a in range(_ATOMS)], dtype=np.int8)
    rows_idx = np.flatnonzero(ax.nodes >= 0.0) if symmetric else np.arange(ax.nodes.size)
    per_block = max(1, _BLOCK_ELEMENTS // max(1, ay.nodes.size * max(1, len(table))))
    bounds = [(s, min(rows_idx.size, s + per_block)) for s in range(0, rows_idx.size, per_block)]

    def work(span: Tuple[int, int]) -> np.ndarray:
        idx = rows_idx[span[0] : span[1]]
        x = ax.nodes[idx]
        frac_c = reduce_phase(x[:, None], table.pc_hi[None, :], table.pc_lo[None, :])
        s = _rows(frac_c, frac_d, table.logp)
        s2 = s * s
        s5 = s2 * s2 * s
        shift = _joint_phase(reduce_phase(x, params.N1, 0.0)[:, None], target_y[None, :])
        values = s5 * _terms(-shift, ax.gauss[idx][:, None] * ay.gauss[None, :])
        if symmetric:
            values = np.where((x > 0.0)[:, None], 2.0 * values.real, values)
        codes = region_of[ax.atoms[idx][:, None], ay.atoms[None, :]]
        out = np.empty((3, idx.size), dtype=np.complex128)
        for region in (1, 2, 3):
            out[region - 1] = pairwise_sum(np.where(codes == region, values, 0.0), axis=-1)
        return out

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    values = np.concatenate(parts, axis=1) if parts else np.zeros((3, 0), dtype=np.complex128)
    return {region: complex(pairwise_sum(values[region - 1])) for region in (1, 2, 3)}


# --- public --------------------------------------------------------------------

def _choose(method: str, P: int, ax: _Axis, ay: _Axis) -> str:
    if method in (SEPARABLE, GRID):
        return method
    if method != AUTO:
        raise DomainViolationError(f"unknown quadrature method {method!r}")
    multisets = math.comb(P + 4, 5)
    if P <= SMALL_TABLE or multisets * (ax.nodes.size + ay.nodes.size) <= MAX_SEPARABLE_WORK:
        return SEPARABLE
    return GRID


def _all_regions(
    table: PrimeTable,
    params: SystemParams,
    scales: DerivedScales,
    steps: Optional[Tuple[float, float]],
    method: str,
    threads: int,
    widths: float,
    symmetric: bool,
) -> Tuple[Dict[int, complex], Tuple[float, float], _Axis, _Axis, str]:
    if table.c != params.c or table.d != params.d:
        raise DomainViolationError(
            f"table built for (c, d)=({table.c}, {table.d}), params use ({params.c}, {params.d})"
        )
    if not (scales.eps1 > 0 and scales.eps2 > 0):
        raise DomainViolationError("the Gaussian weights need positive windows")
    limit_x, limit_y = max_steps(table, params)
    step_x, step_y = steps if steps is not None else (limit_x, limit_y)
    if step_x > limit_x or step_y > limit_y:
        raise StepTooCoarseError(
            f"steps ({step_x:.3g}, {step_y:.3g}) above the limits ({limit_x:.3g}, {limit_y:.3g})"
        )
    ax = _axis(widths / scales.eps1, step_x, scales.eps1, scales.tau1, scales.K1)
    ay = _axis(widths / scales.eps2, step_y, scales.eps2, scales.tau2, scales.K2)
    route = _choose(method, len(table), ax, ay)
    logger.info(f"integrating over {ax.nodes.size}x{ay.nodes.size} nodes, {len(table)} primes, route {route}")
    if route == SEPARABLE:
        values = _separable(table, params, ax, ay, threads)
    else:
        values = _grid(table, params, ax, ay, threads, symmetric)
    return values, (step_x, step_y), ax, ay, route


def _result(region: str, value: complex, ax: _Axis, ay: _Axis, bounds: Tuple[float, float], route: str) -> IntegralResult:
    return IntegralResult(
        value=ComplexValue.of(value),
        region=region,
        x_range=(float(ax.nodes[0]), float(ax.nodes[-1])),
        y_range=(float(ay.nodes[0]), float(ay.nodes[-1])),
        step_x=float(ax.nodes[1] - ax.nodes[0]),
        step_y=float(ay.nodes[1] - ay.nodes[0]),
        tail_bound=bounds[0],
        decay_bound=bounds[1],
        method=route,
    )


def integrate_D(
    table: PrimeTable,
    params: SystemParams,
    scales: DerivedScales,
    region: RegionArg = ALL,
    steps: Optional[Tuple[float, float]] = None,
    method: str = AUTO,
    threads: int = 1,
    widths: float = DEFAULT_WIDTHS,
    symmetric: bool = False,
) -> IntegralResult:
    """Trapezoid value of the weighted integral over region, truncated at widths/eps.

    steps defaults to max_steps(table, params). tail_bound covers the
    truncation; decay_bound is (sum log p)^5 times the Gaussian node mass
    of the Omega3 region.
    """
    name = _region_name(region)
    values, _, ax, ay, route = _all_regions(table, params, scales, steps, method, threads, widths, symmetric)
    bounds = _bounds(table, ax, ay, widths)
    if name == ALL:
        value = values[1] + values[2] + values[3]
    else:
        value = values[RegionLabel(name).code]
    return _result(name, value, ax, ay, bounds, route)


def region_report(
    table: PrimeTable,
    params: SystemParams,
    scales: DerivedScales,
    steps: Optional[Tuple[float, float]] = None,
    method: str = AUTO,
    threads: int = 1,
    widths: float = DEFAULT_WIDTHS,
) -> RegionReport:
    """The three region pieces and their sum from one pass over the nodes."""
    values, _, ax, ay, route = _all_regions(table, params, scales, steps, method, threads, widths, False)
    bounds = _bounds(table, ax, ay, widths)
    report = RegionReport(
        d1=_result(RegionLabel.OMEGA1.value, values[1], ax, ay, bounds, route),
        d2=_result(RegionLabel.OMEGA2.value, values[2], ax, ay, bounds, route),
        d3=_result(RegionLabel.OMEGA3.value, values[3], ax, ay, bounds, route),
        total=_result(ALL, values[1] + values[2] + values[3], ax, ay, bounds, route),
    )
    logger.info(f"region report: |D2|/|D1|={report.ratio_d2_d1:.3g} |D3|={report.modulus_d3:.3g}")
    return report
