#!/usr/bin/env python3
"""
Tests for exponent-pair words, the bound formulas and the seeded bound fits
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from errors import DomainViolationError, MalformedWordError
from exppair import (
    TRIVIAL_PAIR,
    ExponentPair,
    a_process,
    apply_word,
    b_process,
    expand_word,
    fit_kratzel,
    fit_td_bound,
    fit_vdc_first,
    gk_bound,
    kratzel_bound,
    pair_record,
    td_bound,
    vdc_bounds,
    weyl_vdc_check,
    zhai_bounds,
)


def test_word_BA2B_gives_two_sevenths():
    pair = apply_word("BAAB")
    assert (pair.kappa, pair.lam) == (Fraction(2, 7), Fraction(4, 7))
    assert apply_word("BA^2B") == pair
    assert str(pair) == "(2/7, 4/7)"


def test_words_apply_right_to_left():
    assert apply_word("B") == ExponentPair(Fraction(1, 2), Fraction(1, 2))
    assert apply_word("AB") == ExponentPair(Fraction(1, 6), Fraction(2, 3))
    assert apply_word("BA") == b_process(a_process(TRIVIAL_PAIR))


def test_process_identities():
    assert a_process(TRIVIAL_PAIR) == TRIVIAL_PAIR
    pair = apply_word("AAB")
    assert b_process(b_process(pair)) == pair


def test_malformed_words():
    for word in ("", "ABC", "A^", "x"):
        with pytest.raises(MalformedWordError):
            apply_word(word)
    assert expand_word("B A^3") == "BAAA"


def test_pair_domain():
    with pytest.raises(DomainViolationError):
        ExponentPair(Fraction(3, 4), Fraction(1))
    with pytest.raises(DomainViolationError):
        ExponentPair(Fraction(0), Fraction(1, 4))
    assert ExponentPair(Fraction(2, 4), Fraction(6, 12)).kappa == Fraction(1, 2)


def test_pair_record():
    record = pair_record("BA^2B", apply_word("BA^2B"))
    assert record == {"word": "BA^2B", "kappa_num": 2, "kappa_den": 7, "lam_num": 4, "lam_den": 7}


def test_bound_formulas():
    pair = ExponentPair(Fraction(2, 7), Fraction(4, 7))
    assert gk_bound(1.0, 1.0, pair) == pytest.approx(2.0)
    assert td_bound(1.0, 100.0, 1.01, pair) == pytest.approx(
        100.0 ** (2 / 7 * 1.01 - 2 / 7 + 4 / 7) + 1.0 / 100.0 ** 0.01
    )
    assert vdc_bounds(10, 0.25, 4.0) == pytest.approx((4.0, 20.5))
    assert kratzel_bound(0.0, 1.0, 1.0) == pytest.approx(2.0 * math.log(3.0))


def test_bound_formula_domains():
    pair = ExponentPair(Fraction(2, 7), Fraction(4, 7))
    with pytest.raises(DomainViolationError):
        gk_bound(0.0, 1.0, pair)
    with pytest.raises(DomainViolationError):
        td_bound(1.0, 100.0, 1.0, pair)
    with pytest.raises(DomainViolationError):
        vdc_bounds(4, 0.25, 1.0)
    with pytest.raises(DomainViolationError):
        zhai_bounds(10, 1.0, 1.0, 1.5, 1.5)
    with pytest.raises(DomainViolationError):
        kratzel_bound(1.0, 1.0, 0.0)


def test_zhai_bounds_ranges():
    R, first, second = zhai_bounds(100, 1e-4, 1e-4, 1.5, 1.2)
    assert R == pytest.approx(1e-4 * 100 ** 1.5 + 1e-4 * 100 ** 1.2)
    assert first == pytest.approx(100 / math.sqrt(R))
    assert second is None
    R, first, second = zhai_bounds(100, 1.0, 1.0, 1.5, 1.2)
    assert first is None
    assert second == pytest.approx(math.sqrt(R) + 100 * R ** (-1 / 3))


def test_weyl_vdc_single_term():
    assert weyl_vdc_check([1 + 0j], 1) == pytest.approx((1.0, 2.0))
    with pytest.raises(DomainViolationError):
        weyl_vdc_check([], 1)
    with pytest.raises(DomainViolationError):
        weyl_vdc_check([1.0], 0)


def test_weyl_vdc_holds_on_random_sequences():
    rng = np.random.default_rng(17)
    for _ in range(500):
        L = int(rng.integers(1, 60))
        z = rng.normal(size=L) + 1j * rng.normal(size=L)
        Q = int(rng.integers(1, L + 1))
        lhs, rhs = weyl_vdc_check(z, Q)
        assert lhs <= rhs + 1e-9 * max(1.0, rhs)


def test_fits_are_seeded_and_thread_independent():
    report = fit_vdc_first(count=20, seed=4)
    assert fit_vdc_first(count=20, seed=4, threads=3) == report
    assert report.samples == 20
    assert 0.0 < report.max_ratio <= 1.0 + 1e-9
    assert set(report.to_dict()) == {"samples", "max_ratio", "arg_max"}


def test_kratzel_and_td_fits_stay_bounded():
    assert fit_kratzel(count=20, seed=2).max_ratio <= 10.0
    td = fit_td_bound(X=2000.0, points=8)
    assert td.samples == 8
    assert 0.0 < td.max_ratio <= 10.0
