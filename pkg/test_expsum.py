#!/usr/bin/env python3
"""
Tests for the kernels, phase reduction and exponential sums
"""
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from errors import DomainViolationError, GridTooLargeError, InvalidParamsError, StepTooCoarseError
from expsum import (
    ComplexValue,
    GridSpec,
    eval_S,
    eval_T,
    fourth_moment,
    grid_eval,
    indicator_vs_kernel,
    kernel_transform,
    mean_square_exact,
    mean_square_sweep,
    mean_square_x,
    pairwise_sum,
    params_digest,
    phi,
    phi_delta,
    reduce_phase,
    smoothed_mean_square,
    sup_modulus,
    trapezoid_nodes,
    two_product,
    two_sum,
    weighted_sum,
)
from params import SystemParams, classify_regions, derive_scales
from primes import chebyshev_weight, sieve


def direct_S(table, x, y):
    """S(x, y) summed term by term at 120 bits"""
    total = mpmath.mpc(0)
    with mpmath.workprec(120):
        for p, logp in zip(table.primes.tolist(), table.logp.tolist()):
            phase = mpmath.mpf(x) * mpmath.mpf(p) ** mpmath.mpf(table.c) + mpmath.mpf(y) * mpmath.mpf(p) ** mpmath.mpf(table.d)
            total += logp * mpmath.expjpi(2 * phase)
    return complex(total)


def test_phi_values():
    assert phi(0.0) == 1.0
    assert phi(1.0) == pytest.approx(math.exp(-math.pi))
    assert np.allclose(phi(np.array([-2.0, 2.0])), math.exp(-4 * math.pi))


def test_phi_delta_has_unit_mass():
    for delta in (0.3, 1.0, 2.5):
        t, w = trapezoid_nodes(-10.0 / delta, 10.0 / delta, 1e-3 / delta)
        assert float(np.sum(w * phi_delta(delta, t))) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DomainViolationError):
        phi_delta(0.0, 1.0)


def test_indicator_dominates_kernel():
    rng = np.random.default_rng(3)
    for t, rho in zip(rng.uniform(-10, 10, 2000).tolist(), (10 ** rng.uniform(-2, 1, 2000)).tolist()):
        lhs, rhs = indicator_vs_kernel(t, rho)
        assert lhs >= rhs
    with pytest.raises(DomainViolationError):
        indicator_vs_kernel(0.0, -1.0)


def test_kernel_transform_reproduces_phi():
    for x in (0.0, 0.5, 1.0, 2.0):
        assert abs(kernel_transform(x) - phi(x)) <= 1e-8


def test_trapezoid_nodes():
    nodes, weights = trapezoid_nodes(-1.0, 1.0, 0.3)
    assert nodes[0] == -1.0 and nodes[-1] == 1.0
    assert np.all(np.diff(nodes) <= 0.3 + 1e-15)
    assert float(np.sum(weights)) == pytest.approx(2.0)


def test_error_free_transforms_are_exact():
    rng = np.random.default_rng(5)
    a = rng.uniform(-1e6, 1e6, 200)
    b = rng.uniform(-1e3, 1e3, 200)
    s, e = two_sum(a, b)
    p, f = two_product(a, b)
    for i in range(200):
        ai, bi = Fraction(float(a[i])), Fraction(float(b[i]))
        assert Fraction(float(s[i])) + Fraction(float(e[i])) == ai + bi
        assert Fraction(float(p[i])) + Fraction(float(f[i])) == ai * bi


def test_reduce_phase_matches_high_precision():
    table = sieve(10 ** 4, 0.5)
    rng = np.random.default_rng(9)
    for x in rng.uniform(-1e3, 1e3, 5).tolist():
        frac = reduce_phase(x, table.pc_hi, table.pc_lo)
        assert np.all(np.abs(frac) <= 0.5)
        with mpmath.workprec(200):
            for i in range(0, len(table), 97):
                exact = mpmath.mpf(x) * (mpmath.mpf(float(table.pc_hi[i])) + mpmath.mpf(float(table.pc_lo[i])))
                exact = exact - mpmath.nint(exact)
                gap = abs(float(exact) - float(frac[i]))
                assert min(gap, 1.0 - gap) < 1e-12


def test_pairwise_sum():
    assert pairwise_sum(np.arange(7, dtype=float)) == 21.0
    assert pairwise_sum(np.zeros(0)) == 0.0
    assert np.array_equal(pairwise_sum(np.ones((3, 5)), axis=-1), np.full(3, 5.0))


def test_S_at_origin_is_the_chebyshev_weight():
    table = sieve(1000, 0.1)
    value = eval_S(table, 1.03, 1.01, 0.0, 0.0)
    assert value.re == pytest.approx(chebyshev_weight(table), rel=1e-13)
    assert value.im == 0.0


def test_S_matches_term_by_term_sum():
    table = sieve(200, 0.2)
    for x, y in ((0.37, -1.2), (12.5, 3.25), (-250.0, 77.7)):
        expected = direct_S(table, x, y)
        assert abs(complex(eval_S(table, 1.03, 1.01, x, y)) - expected) < 1e-9


def test_S_conjugate_symmetry():
    table = sieve(500, 0.1)
    value = eval_S(table, 1.03, 1.01, 0.123, -4.5)
    mirrored = eval_S(table, 1.03, 1.01, -0.123, 4.5)
    assert abs(complex(mirrored) - complex(value.conjugate())) < 1e-12
    assert abs(value) <= chebyshev_weight(table) + 1e-9


def test_S_rejects_mismatched_exponents():
    table = sieve(100, 0.1, c=1.03, d=1.01)
    with pytest.raises(InvalidParamsError):
        eval_S(table, 1.04, 1.01, 0.0, 0.0)


def test_T_values():
    assert eval_T(100, 0.1, 1.5, 0.0).re == pytest.approx(90.0)
    assert abs(eval_T(100, 0.1, 1.0, 0.5)) < 1e-9
    assert eval_T(10.5, 0.96, 1.2, 0.3) == ComplexValue(0.0, 0.0)
    with pytest.raises(DomainViolationError):
        eval_T(100, 0.1, 0.0, 0.5)


def test_weighted_sum_agrees_with_S():
    table = sieve(300, 0.1)
    expected = complex(eval_S(table, 1.03, 1.01, 0.7, -0.2))
    got = complex(weighted_sum(table.primes.tolist(), table.logp.tolist(), 1.03, 1.01, 0.7, -0.2))
    assert abs(got - expected) < 1e-10


def test_grid_spec_parse():
    spec = GridSpec.parse("-1, 1, 5, -2, 2, 3")
    assert spec == GridSpec(-1.0, 1.0, 5, -2.0, 2.0, 3)
    assert spec.size == 15
    with pytest.raises(DomainViolationError):
        GridSpec.parse("1,2,3")


def test_grid_matches_points_and_threads():
    table = sieve(400, 0.1)
    spec = GridSpec(-0.5, 0.5, 9, -1.0, 1.0, 7)
    grid = grid_eval(table, 1.03, 1.01, spec)
    threaded = grid_eval(table, 1.03, 1.01, spec, threads=3)
    assert np.array_equal(grid.values, threaded.values)
    assert grid.values.shape == (9, 7)
    for i, j in ((0, 0), (4, 3), (8, 6)):
        expected = complex(eval_S(table, 1.03, 1.01, float(grid.x_points[i]), float(grid.y_points[j])))
        assert abs(complex(grid.value(i, j)) - expected) < 1e-10
    assert grid.params_digest == params_digest(table)
    assert grid.max_modulus() <= chebyshev_weight(table) + 1e-9


def test_grid_limit():
    table = sieve(100, 0.1)
    with pytest.raises(GridTooLargeError):
        grid_eval(table, 1.03, 1.01, GridSpec(0.0, 1.0, 20000, 0.0, 1.0, 20000))


def test_mean_square_closed_form_matches_trapezoid():
    table = sieve(60, 0.5)
    exact = mean_square_exact(table, 1.03, 1.01, 0.3, -0.5, 0.5, axis="x")
    numeric = mean_square_x(table, 1.03, 1.01, 0.3, 0.5, 1e-4)
    assert numeric == pytest.approx(exact, rel=1e-2)
    with pytest.raises(StepTooCoarseError):
        mean_square_x(table, 1.03, 1.01, 0.3, 0.5, 0.1)
    with pytest.raises(DomainViolationError):
        mean_square_exact(table, 1.03, 1.01, 0.0, 1.0, -1.0)


def test_mean_square_over_a_long_interval_tends_to_the_diagonal():
    table = sieve(60, 0.5)
    length = 2000.0
    value = mean_square_exact(table, 1.03, 1.01, 0.0, -length / 2, length / 2, axis="x") / length
    diagonal = float(np.sum(table.logp ** 2))
    assert value == pytest.approx(diagonal, rel=0.05)


def test_smoothed_mean_square_matches_quadrature():
    table = sieve(60, 0.5)
    eps = 2.0
    report = smoothed_mean_square(table, 1.03, 1.01, 0.0, eps, axis="x")
    x, w = trapezoid_nodes(-4.0, 4.0, 5e-4)
    grid = grid_eval(table, 1.03, 1.01, GridSpec(-4.0, 4.0, x.size, 0.0, 0.0, 1))
    numeric = float(np.sum(w * np.abs(grid.values[:, 0]) ** 2 * phi_delta(eps, x)))
    assert report.value == pytest.approx(numeric, rel=1e-6)
    assert report.tail_bound >= 0.0


def test_fourth_moment_matches_brute_force():
    table = sieve(40, 0.5)
    eps1, eps2 = 0.7, 0.5
    pc = (table.pc_hi + table.pc_lo).tolist()
    pd = (table.pd_hi + table.pd_lo).tolist()
    logp = table.logp.tolist()
    P = len(table)
    expected = 0.0
    for a in range(P):
        for b in range(P):
            for c in range(P):
                for d in range(P):
                    expected += (
                        logp[a] * logp[b] * logp[c] * logp[d]
                        * phi((pc[a] + pc[b] - pc[c] - pc[d]) / eps1)
                        * phi((pd[a] + pd[b] - pd[c] - pd[d]) / eps2)
                    )
    assert fourth_moment(table, 1.03, 1.01, eps1, eps2) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DomainViolationError):
        fourth_moment(table, 1.03, 1.01, 0.0, 1.0)


def test_sup_modulus_only_looks_at_the_intermediate_region():
    params = SystemParams.for_experiment(1.03, 1.01, 100.0, 1.028)
    scales = derive_scales(params)
    table = sieve(scales.X, params.lambda_cut)
    spec = GridSpec(-2 * scales.K1, 2 * scales.K1, 21, -2 * scales.K2, 2 * scales.K2, 21)
    report = sup_modulus(table, 1.03, 1.01, scales, spec)
    codes = classify_regions(scales, spec.x_points()[:, None], spec.y_points()[None, :])
    assert report.points == int(np.sum(codes == 2))
    assert 0.0 < report.max_modulus <= chebyshev_weight(table) + 1e-9
    assert report.ratio == pytest.approx(report.max_modulus / report.reference)


def test_mean_square_sweep_rows():
    rows = mean_square_sweep((8, 9), 1.05, 1.01)
    assert [row["X"] for row in rows] == [256.0, 512.0]
    assert all(row["ratio"] > 0 for row in rows)
    with pytest.raises(DomainViolationError):
        mean_square_sweep((8,), 1.05, 1.01, kind="unknown")


@pytest.mark.slow
def test_smoothed_mean_square_keeps_its_shape():
    """Smoothed mean square over X = 2^12..2^15 stays within a factor 5 of X (log X)^4"""
    rows = mean_square_sweep((12, 13, 14, 15), 1.05, 1.01, kind="smoothed")
    ratios = [row["ratio"] for row in rows]
    assert min(ratios) > 0.0
    assert max(ratios) / min(ratios) < 5.0
