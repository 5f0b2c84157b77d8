#!/usr/bin/env python3
"""
Tests for the region integrals of S^5 against the Gaussian weights
"""
import math

import numpy as np
import pytest

from counting import smoothed_count
from errors import DomainViolationError, GridTooLargeError, StepTooCoarseError
from params import DerivedScales, RegionLabel, SystemParams, derive_scales
from primes import sieve
from quadrature import (
    GRID,
    SEPARABLE,
    _REGION_PAIRS,
    integrate_D,
    max_steps,
    region_report,
    symmetric_nodes,
)


def small_instance(eps=2.0):
    params = SystemParams.for_experiment(1.03, 1.01, 40.0, 1.031, lambda_cut=0.5)
    table = sieve(40.0, 0.5)
    return table, params, derive_scales(params, eps, eps)


def wide_scales():
    """Windows wide enough for a direct grid, with boxes cutting through the Gaussian mass"""
    return DerivedScales(X=40.0, eps1=40.0, eps2=40.0, K1=0.12, K2=0.12, tau1=0.05, tau2=0.05)


def test_symmetric_nodes():
    nodes, weights = symmetric_nodes(1.0, 0.3)
    assert np.array_equal(nodes, -nodes[::-1])
    assert 0.0 in nodes.tolist()
    assert np.all(np.diff(nodes) <= 0.3 + 1e-15)
    assert float(np.sum(weights)) == pytest.approx(2.0)


def test_max_steps():
    table, params, _ = small_instance()
    step_x, step_y = max_steps(table, params)
    assert step_x == pytest.approx(1.0 / (20.0 * (5.0 * 40.0 ** 1.03 + params.N1)))
    assert step_y == pytest.approx(1.0 / (20.0 * (5.0 * 40.0 ** 1.01 + params.N2)))


def test_atom_pairs_partition_into_regions():
    assert sorted(_REGION_PAIRS[1]) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert sorted(_REGION_PAIRS[2]) == [(0, 2), (2, 0), (2, 2)]
    assert len(_REGION_PAIRS[3]) == 9


def test_integral_equals_smoothed_count():
    table, params, scales = small_instance()
    integral = integrate_D(table, params, scales)
    count = smoothed_count(table, params, scales.eps1, scales.eps2)
    assert integral.method == SEPARABLE
    assert integral.value.re == pytest.approx(count.weighted_count, rel=1e-6)
    assert abs(integral.value.im) <= 1e-6 * abs(integral.value.re)


def test_region_pieces_add_up():
    table, params, scales = small_instance()
    report = region_report(table, params, scales)
    parts = complex(report.d1.value) + complex(report.d2.value) + complex(report.d3.value)
    assert abs(parts - complex(report.total.value)) <= 1e-12 * abs(report.total.value)
    only_d2 = integrate_D(table, params, scales, region=RegionLabel.OMEGA2)
    assert only_d2.region == "Omega2"
    assert complex(only_d2.value) == complex(report.d2.value)
    assert integrate_D(table, params, scales, region="Omega1").value == report.d1.value


def test_outer_region_stays_below_its_decay_bound():
    table, params, scales = small_instance()
    report = region_report(table, params, scales)
    total = float(np.sum(table.logp)) ** 5
    assert report.d3.tail_bound == pytest.approx(total * 2.0 * math.erfc(8.0 * math.sqrt(math.pi)))
    assert report.modulus_d3 <= report.d3.decay_bound * (1.0 + 1e-9) + 1e-300
    assert report.ratio_d2_d1 >= 0.0
    document = report.to_dict()
    assert set(document) == {"D1", "D2", "D3", "D", "ratio_D2_D1", "modulus_D3"}
    assert document["D"]["region"] == "all"


def test_grid_route_matches_separable_route():
    table, params, _ = small_instance()
    scales = wide_scales()
    separable = region_report(table, params, scales, method=SEPARABLE)
    grid = region_report(table, params, scales, method=GRID)
    scale = float(np.sum(table.logp)) ** 5
    for a, b in ((separable.d1, grid.d1), (separable.d2, grid.d2), (separable.d3, grid.d3)):
        assert abs(complex(a.value) - complex(b.value)) <= 1e-8 * scale
    assert grid.total.method == GRID
    assert abs(separable.d1.value) > 0 and abs(separable.d2.value) > 0 and abs(separable.d3.value) > 0


def test_symmetric_grid_uses_conjugate_pairs():
    table, params, _ = small_instance()
    scales = wide_scales()
    full = integrate_D(table, params, scales, method=GRID)
    half = integrate_D(table, params, scales, method=GRID, symmetric=True)
    scale = float(np.sum(table.logp)) ** 5
    assert abs(complex(full.value) - complex(half.value)) <= 1e-8 * scale


def test_threads_do_not_change_the_value():
    table, params, scales = small_instance()
    assert integrate_D(table, params, scales, threads=4).value == integrate_D(table, params, scales).value


def test_quadrature_errors():
    table, params, scales = small_instance()
    with pytest.raises(StepTooCoarseError):
        integrate_D(table, params, scales, steps=(1e-2, 1e-2))
    with pytest.raises(DomainViolationError):
        integrate_D(table, params, scales, region="Omega4")
    with pytest.raises(DomainViolationError):
        integrate_D(table, params, scales, method="simpson")
    with pytest.raises(DomainViolationError):
        integrate_D(sieve(40.0, 0.5, c=1.04), params, scales)
    zero = DerivedScales(X=40.0, eps1=0.0, eps2=1.0, K1=math.inf, K2=1.0, tau1=0.1, tau2=0.1)
    with pytest.raises(DomainViolationError):
        integrate_D(table, params, zero)
    with pytest.raises(GridTooLargeError):
        integrate_D(table, params, scales, method=GRID)
