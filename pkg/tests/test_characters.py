import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy import jacobi_symbol, totient

from qcorr.characters import (DiscriminantCharacter, PrimeClass, character, divisor_char_sum,
                              divisor_char_sum_table, kronecker, prime_class,
                              proper_class_rep_count, proper_class_rep_count_bruteforce,
                              r_D_formula, tau_D, tau_D_table)
from qcorr.qform import r_D, rep_table, reduced_forms, automorph_count

DISCS = [-3, -4, -7, -8, -11, -15, -19, -20, -23, -24, -31, -35, -39, -40, -47, -51, -52, -55, -56, -84]


def test_kronecker_examples():
    assert kronecker(-4, 3) == -1
    assert kronecker(-4, 5) == 1
    assert kronecker(-20, 10) == 0 and kronecker(-4, 6) == 0


@given(st.integers(-500, 500), st.integers(1, 999).filter(lambda n: n % 2))
@settings(max_examples=300, deadline=None)
def test_kronecker_matches_jacobi_for_odd_moduli(a, n):
    assert kronecker(a, n) == jacobi_symbol(a, n)


def test_chi_minus4_is_the_mod4_character():
    for d in range(1, 101):
        want = 0 if d % 2 == 0 else (1 if d % 4 == 1 else -1)
        assert kronecker(-4, d) == want


@pytest.mark.parametrize("D", [D for D in DISCS if abs(D) <= 100])
def test_complete_multiplicativity(D):
    chi = character(D)
    vals = chi.values(250000)
    for m in range(1, 501):
        if math.gcd(m, D) != 1:
            assert vals[m] == 0
            continue
        ns = np.arange(1, 501)
        assert np.array_equal(vals[m * ns], vals[m] * vals[ns])


@pytest.mark.parametrize("D", DISCS)
def test_split_and_inert_residue_classes(D):
    q = abs(D)
    res = [r for r in range(q) if math.gcd(r, q) == 1]
    split = [r for r in res if character(D)(r if r else q) == 1]
    inert = [r for r in res if character(D)(r if r else q) == -1]
    assert len(split) == len(inert) == totient(q) // 2


@pytest.mark.parametrize("D,p,cls", [(-4, 5, PrimeClass.SPLIT), (-4, 2, PrimeClass.RAMIFIED),
                                     (-4, 7, PrimeClass.INERT), (-20, 5, PrimeClass.RAMIFIED)])
def test_prime_class(D, p, cls):
    assert prime_class(D, p) is cls


def test_character_table_and_on_demand_agree():
    big = DiscriminantCharacter(-400004)
    small = DiscriminantCharacter(-84)
    for n in range(1, 2000):
        assert big(n) == kronecker(-400004, n)
        assert small(n) == kronecker(-84, n)


@pytest.mark.parametrize("n,expected", [(5, 2), (3, 0), (9, 1), (25, 3), (1, 1)])
def test_divisor_char_sum_examples(n, expected):
    assert divisor_char_sum(-4, n) == expected


@pytest.mark.parametrize("n,expected", [(25, 3), (7, 1), (1, 1), (65, 4)])
def test_tau_D_examples(n, expected):
    assert tau_D(-4, n) == expected


def test_rejects_nonpositive():
    with pytest.raises(ValueError):
        divisor_char_sum(-4, 0)
    with pytest.raises(ValueError):
        tau_D(-4, -3)


@pytest.mark.parametrize("D", [-3, -4, -20, -23, -84])
def test_tables_match_pointwise_and_nonnegative(D):
    N = 10**5
    t = divisor_char_sum_table(D, N)
    assert t[1:].min() >= 0
    tt = tau_D_table(D, 5000)
    for n in range(1, 5001, 7):
        assert t[n] == divisor_char_sum(D, n)
        assert tt[n] == tau_D(D, n)


def test_divisor_char_sum_factorisation():
    # tau_D(n) times the indicator that every inert prime appears to an even power
    from qcorr.arith import factor

    for D in (-4, -20, -23):
        for n in range(1, 3000):
            ind = all(e % 2 == 0 for p, e in factor(n).items() if kronecker(D, p) == -1)
            assert divisor_char_sum(D, n) == tau_D(D, n) * ind


def test_proper_class_rep_count_examples():
    assert proper_class_rep_count(-4, 1) == 1
    assert proper_class_rep_count(-4, 3) == 0
    # x^2 = -4 mod 20 has the four roots 4, 6, 14, 16, all primitive: 4/2 = 2
    assert proper_class_rep_count_bruteforce(-4, 5) == 2
    assert proper_class_rep_count(-4, 5) == 2
    # consistent with r_{-4}(5) = R(5)/4 = 2, which has no square divisor to add
    assert r_D(-4, 5) == 2


@pytest.mark.parametrize("D", DISCS)
def test_proper_class_rep_count_against_root_counting(D):
    for m in range(1, 300):
        assert proper_class_rep_count(D, m) == proper_class_rep_count_bruteforce(D, m)


@pytest.mark.parametrize("D", [-3, -4, -20, -24])
def test_r_D_formula_against_lattice_enumeration(D):
    N = 10**4
    cs = reduced_forms(D)
    k = automorph_count(D)
    total = sum(rep_table(f, N).astype(np.int64) for f in cs.classes)
    chars = divisor_char_sum_table(D, N)
    for n in range(1, N + 1):
        lattice = Fraction(int(total[n]), k)
        if n <= 2500:
            assert r_D_formula(D, n) == lattice
        if math.gcd(n, D) == 1:
            assert lattice == chars[n]


def test_r_D_formula_examples():
    assert r_D_formula(-20, 21) == r_D(-20, 21)
    assert r_D_formula(-4, 25) == 3 == r_D(-4, 25)
