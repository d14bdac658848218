import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcorr.characters import divisor_char_sum
from qcorr.qform import (QuadraticForm, are_equivalent, automorph_count, discriminant,
                         read_table_binary, reduce, reduced_forms, rep_count, rep_table,
                         rep_table_blocked, r_D, r_f, r_g, write_table_binary, write_table_csv)


def brute_count(f, n):
    a, b, c = f
    r = math.isqrt(4 * max(a, c) * max(n, 0)) + 2
    return sum(1 for x in range(-r, r + 1) for y in range(-r, r + 1) if a * x * x + b * x * y + c * y * y == n)


def unimodular_orbit(f, bound=10):
    """Forms properly equivalent to f via matrices with entries <= bound."""
    a, b, c = f
    out = set()
    rng = range(-bound, bound + 1)
    for p, q, r, s in itertools.product(rng, repeat=4):
        if p * s - q * r != 1:
            continue
        A = a * p * p + b * p * r + c * r * r
        B = 2 * a * p * q + b * (p * s + q * r) + 2 * c * r * s
        C = a * q * q + b * q * s + c * s * s
        out.add((A, B, C))
    return out


@pytest.mark.parametrize("f,D", [((1, 0, 1), -4), ((1, 1, 1), -3), ((1, 0, 5), -20)])
def test_discriminant(f, D):
    assert discriminant(f) == D


@pytest.mark.parametrize("D,k", [(-3, 6), (-4, 4), (-20, 2), (-23, 2)])
def test_automorph_count(D, k):
    assert automorph_count(D) == k


@pytest.mark.parametrize("D", [0, 5, -5, -2])
def test_automorph_count_rejects(D):
    with pytest.raises(ValueError):
        automorph_count(D)


def test_rejects_indefinite_and_parse_garbage():
    with pytest.raises(ValueError):
        QuadraticForm(1, 3, 1)
    with pytest.raises(ValueError):
        QuadraticForm.parse("1,2")
    assert QuadraticForm.parse(" 2, 2,3 ").as_tuple() == (2, 2, 3)


def test_reduce_examples_against_unimodular_search():
    assert reduce((1, 2, 2)).as_tuple() == (1, 0, 1)
    assert (1, 2, 2) in unimodular_orbit((1, 0, 1), 3)
    assert reduce((1, 0, 1)).as_tuple() == (1, 0, 1)
    assert reduce((2, 2, 3)).as_tuple() == (2, 2, 3)
    # the only reduced form properly equivalent to (1,0,1) is itself
    reduced_in_orbit = {g for g in unimodular_orbit((1, 0, 1), 4)
                        if QuadraticForm(*g).is_reduced}
    assert reduced_in_orbit == {(1, 0, 1)}


forms = st.tuples(st.integers(1, 30), st.integers(-40, 40), st.integers(1, 60)).filter(
    lambda t: t[1] ** 2 - 4 * t[0] * t[2] < 0)


@given(forms)
@settings(max_examples=200, deadline=None)
def test_reduce_idempotent_and_invariant(f):
    g = reduce(f)
    assert g.is_reduced
    assert reduce(g) == g
    assert g.discriminant == discriminant(f)
    assert g.is_primitive == QuadraticForm(*f).is_primitive


@pytest.mark.parametrize("D,expected,genera", [
    (-4, {(1, 0, 1)}, 1),
    (-20, {(1, 0, 5), (2, 2, 3)}, 2),
    (-3, {(1, 1, 1)}, 1),
])
def test_reduced_forms_examples(D, expected, genera):
    cs = reduced_forms(D)
    assert {f.as_tuple() for f in cs.classes} == expected
    assert len(cs.genera) == genera


def _exhaustive_reduced(D):
    out = set()
    amax = math.isqrt(-D // 3) + 1
    for a in range(1, amax + 1):
        for b in range(-a, a + 1):
            if (b * b - D) % (4 * a):
                continue
            c = (b * b - D) // (4 * a)
            if c < a or math.gcd(math.gcd(a, b), c) != 1:
                continue
            if b < 0 and (-b == a or a == c):
                continue
            out.add((a, b, c))
    return out


@pytest.mark.parametrize("D,h", [(-23, 3), (-56, 4), (-84, 4), (-420, 8), (-71, 7), (-47, 5)])
def test_class_numbers_and_genus_structure(D, h):
    cs = reduced_forms(D)
    assert cs.class_number == h
    assert {f.as_tuple() for f in cs.classes} == _exhaustive_reduced(D)
    # pairwise inequivalent
    for f, g in itertools.combinations(cs.classes, 2):
        assert not are_equivalent(f, g)
    # genera partition the classes, residue sets disjoint, equal genus sizes
    seen = [f for g in cs.genera for f in g.classes]
    assert sorted(seen, key=lambda f: f.as_tuple()) == sorted(cs.classes, key=lambda f: f.as_tuple())
    for g1, g2 in itertools.combinations(cs.genera, 2):
        assert not (g1.residues & g2.residues)
    assert len({len(g) for g in cs.genera}) == 1


def test_genus_residues_are_values_represented():
    D = -84
    cs = reduced_forms(D)
    for g in cs.genera:
        for f in g.classes:
            vals = {f(x, y) % -D for x in range(-12, 13) for y in range(-12, 13)
                    if math.gcd(f(x, y), D) == 1}
            assert vals <= set(g.residues)


@pytest.mark.parametrize("n,expected", [(5, 8), (3, 0), (0, 1), (-1, 0), (25, 12)])
def test_rep_count_examples(n, expected):
    assert rep_count((1, 0, 1), n) == expected


def test_rep_table_examples_and_consistency():
    assert rep_table((1, 0, 1), 5).tolist() == [1, 4, 4, 0, 4, 8]
    for f in [(1, 0, 1), (2, 2, 3), (3, 1, 7)]:
        assert rep_table(f, 0).tolist() == [1]
        t = rep_table(f, 1000)
        assert all(t[n] == rep_count(f, n) for n in range(1001))


@pytest.mark.parametrize("f", [(1, 0, 1), (1, 1, 1), (2, 2, 3), (5, 4, 7), (1, 0, 5)])
def test_rep_table_matches_brute_force(f):
    t = rep_table(f, 400)
    assert all(t[n] == brute_count(f, n) for n in range(401))


def test_rep_table_tail_window_and_blocked():
    f = (2, 1, 3)
    full = rep_table(f, 5000)
    assert np.array_equal(rep_table(f, 5000, start=3000), full[3000:])
    assert np.array_equal(rep_table_blocked(f, 5000, block=777), full)


def test_r_functions():
    assert r_f((1, 0, 1), 5) == 2
    assert r_f((1, 0, 1), 0) == 1          # convention, not R(0)/k
    # x^2 + 5y^2 = 21 has the solutions (4, 1) and (1, 2) up to sign: R = 8
    assert brute_count((1, 0, 5), 21) == 8 and brute_count((2, 2, 3), 21) == 0
    assert r_D(-20, 21) == 4 == divisor_char_sum(-20, 21)
    assert r_D(-20, -3) == 0
    g = reduced_forms(-20).genus_of((1, 0, 5))
    assert r_g(g, 21) == 4
    cs = reduced_forms(-84)
    for n in range(1, 300):
        avg = sum(r_g(g, n) * len(g) for g in cs.genera)
        assert avg == r_D(-84, n)


def test_jacobi_identity_for_gaussian_form():
    t = rep_table((1, 0, 1), 10**4)
    for n in range(1, 10**4 + 1):
        assert Fraction(int(t[n]), 4) == divisor_char_sum(-4, n)


def test_table_io_roundtrip(tmp_path):
    f = QuadraticForm(2, 2, 3)
    tab = rep_table(f, 300)
    p = tmp_path / "t.bin"
    write_table_binary(p, f, tab)
    raw = p.read_bytes()
    assert raw[:4] == b"QFRT"
    g, back = read_table_binary(p)
    assert g == f and np.array_equal(back, tab)
    csvp = tmp_path / "t.csv"
    with open(csvp, "w") as fh:
        write_table_csv(fh, tab[:4])
    lines = csvp.read_text().splitlines()
    assert lines[0] == "n,value" and lines[1] == "0,1"


def test_gauss_circle_mean():
    N = 10**5
    t = rep_table((1, 0, 1), N)
    assert abs(t[1:].sum() / N - math.pi) < 0.02
