import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from qcorr.correlate import (alpha_infinity, gowers_norm, gowers_norm_direct, lhs_direct,
                             lhs_enumerate, rhs_predict, second_moment, zeros_count,
                             zeros_count_bruteforce, zeros_predict)
from qcorr.lattice import AffineSystem, ConvexBody
from qcorr.qform import rep_count

G = (1, 0, 1)


def disc_count(N):
    r = math.isqrt(N)
    return sum(1 for x in range(-r, r + 1) for y in range(-r, r + 1) if x * x + y * y <= N)


def test_lhs_single_form_is_disc_count_minus_origin():
    K = ConvexBody(box=[(1, 100)])
    assert lhs_enumerate(K, AffineSystem([[1]]), [G]) == disc_count(100) - 1


def test_lhs_factorises_for_independent_system():
    N = 200
    one = lhs_enumerate(ConvexBody(box=[(1, N)]), AffineSystem([[1]]), [G])
    two = lhs_enumerate(ConvexBody(box=[(1, N), (1, N)]), AffineSystem([[1, 0], [0, 1]]), [G, (1, 1, 1)])
    other = lhs_enumerate(ConvexBody(box=[(1, N)]), AffineSystem([[1]]), [(1, 1, 1)])
    assert two == one * other


def test_lhs_empty_body():
    assert lhs_enumerate(ConvexBody(box=[(5, 1)]), AffineSystem([[1]]), [G]) == 0


CASES = [
    (ConvexBody(box=[(1, 30), (1, 30)]), AffineSystem([[1, 0], [0, 1], [1, 1]]), [G, G, G]),
    (ConvexBody(box=[(0, 12), (-5, 9)]), AffineSystem([[1, 1], [2, -1], [1, 3]], [3, 10, 20]),
     [G, (1, 1, 1), (2, 2, 3)]),
    (ConvexBody(M=[[1, 1], [-1, 0], [0, -1]], b=[25, 0, 0]), AffineSystem([[1, 0], [0, 1], [1, 1]]),
     [G, (1, 0, 5), G]),
    (ConvexBody(box=[(1, 8), (1, 8), (1, 8)]), AffineSystem([[1, 0, 0], [1, 1, 0], [1, 1, 1], [0, 2, 1]]),
     [G, G, (1, 1, 1), G]),
    (ConvexBody(box=[(-3, 3)]), AffineSystem([[-2]], [5]), [G]),
]


@pytest.mark.parametrize("K,system,forms", CASES)
def test_lhs_enumerate_matches_table_free_recomputation(K, system, forms):
    assert lhs_enumerate(K, system, forms) == lhs_direct(K, system, forms)


def test_lhs_negative_arguments_read_as_zero():
    K = ConvexBody(box=[(-10, 10)])
    s = AffineSystem([[1]])
    assert lhs_enumerate(K, s, [G]) == sum(rep_count(G, n) for n in range(-10, 11))


def test_rhs_single_form_is_pi_N():
    N = 10**4
    rep = rhs_predict(ConvexBody(box=[(0, N)]), AffineSystem([[1]]), [G], P_max=30)
    assert math.isclose(rep.beta_inf, math.pi * N)
    assert rep.truncated_product == 1
    assert math.isclose(rep.rhs, math.pi * N)
    assert abs(rep.ratio - 1) < 0.01
    assert math.isclose(rep.rhs, rep.beta_inf * float(rep.truncated_product))


def test_rhs_independent_system_is_product():
    N = 3000
    K1 = ConvexBody(box=[(0, N)])
    a = rhs_predict(K1, AffineSystem([[1]]), [G], P_max=20)
    b = rhs_predict(K1, AffineSystem([[1]]), [(1, 1, 1)], P_max=20)
    ab = rhs_predict(ConvexBody(box=[(0, N), (0, N)]), AffineSystem([[1, 0], [0, 1]]), [G, (1, 1, 1)], P_max=20)
    assert math.isclose(ab.rhs, a.rhs * b.rhs, rel_tol=1e-12)
    assert ab.lhs == a.lhs * b.lhs


def test_rhs_triple_system():
    N = 300
    K = ConvexBody(box=[(1, N), (1, N)])
    s = AffineSystem([[1, 0], [0, 1], [1, 1]])
    rep = rhs_predict(K, s, [G, G, G], P_max=13)
    vals = {lf.p: lf.value for lf in rep.local_factors}
    assert vals[3] == Fraction(14, 15) and vals[5] == Fraction(31, 30) and vals[2] == 1
    assert math.isclose(rep.beta_inf, math.pi**3 * (N - 1) ** 2)
    assert 0.9 < rep.ratio < 1.1
    js = rep.to_json()
    assert js["rhs"] == rep.rhs and js["not_stabilized"] == []
    lo, hi = rep.tail_bracket
    assert lo <= 1 <= hi


def test_rhs_rejects_infinite_complexity():
    with pytest.raises(ValueError, match="forms 1 and 2"):
        rhs_predict(ConvexBody(box=[(0, 10)]), AffineSystem([[1], [2]], [0, 1]), [G, G])


def test_ratio_invariant_under_row_swap():
    K = ConvexBody(box=[(1, 60), (1, 60)])
    s1 = AffineSystem([[1, 0], [1, 1], [1, 2]])
    s2 = AffineSystem([[1, 2], [1, 0], [1, 1]])
    f1 = [G, (1, 1, 1), (2, 2, 3)]
    f2 = [(2, 2, 3), G, (1, 1, 1)]
    r1 = rhs_predict(K, s1, f1, P_max=11)
    r2 = rhs_predict(K, s2, f2, P_max=11)
    assert r1.lhs == r2.lhs
    assert math.isclose(r1.ratio, r2.ratio, rel_tol=1e-12)


def test_second_moment():
    N = 1000
    K = ConvexBody(box=[(1, N)])
    m, scaled = second_moment(K, AffineSystem([[1]]), [G])
    direct = Fraction(sum((rep_count(G, n) // 4) ** 2 for n in range(1, N + 1)), N)
    assert m == direct
    assert 0 < scaled < 10
    assert second_moment(ConvexBody(box=[(3, 1)]), AffineSystem([[1]]), [G])[0] == 0
    K2 = ConvexBody(box=[(1, 200), (1, 200)])
    m2, _ = second_moment(K2, AffineSystem([[1, 0], [0, 1]]), [G, (1, 1, 1)])
    ma, _ = second_moment(ConvexBody(box=[(1, 200)]), AffineSystem([[1]]), [G])
    mb, _ = second_moment(ConvexBody(box=[(1, 200)]), AffineSystem([[1]]), [(1, 1, 1)])
    assert m2 == ma * mb


A4 = [[1, 1, -1, -1]]


@pytest.mark.parametrize("N", [1, 3, 5, 8])
def test_zeros_count_methods_agree_with_brute_force(N):
    forms = [G] * 4
    brute = zeros_count_bruteforce(forms, A4, N)
    assert zeros_count(forms, A4, N, method="kernel").total == brute
    assert zeros_count(forms, A4, N, method="convolution").total == brute


def test_zeros_count_mixed_forms_and_two_equations():
    forms = [G, (1, 1, 1), G, (2, 2, 3), G]
    A = [[1, 1, -1, 0, -1], [0, 1, 1, -1, -1]]
    for N in (2, 4):
        assert zeros_count(forms, A, N).total == zeros_count_bruteforce(forms, A, N)


def test_zeros_count_positive_part_and_zero():
    forms = [G] * 4
    c = zeros_count(forms, A4, 6)
    assert c.positive + c.with_zero_coordinate == c.total
    # all-positive solutions by direct enumeration over z
    tab = {n: rep_count(G, n) for n in range(1, 37)}
    direct = sum(tab[a] * tab[b] * tab[c_] * tab[a + b - c_]
                 for a in range(1, 37) for b in range(1, 37) for c_ in range(1, 37) if 1 <= a + b - c_ <= 36)
    assert c.positive == direct
    z = zeros_count(forms, A4, 0)
    assert z.total == 1 and z.positive == 0 and z.with_zero_coordinate == 1


def test_zeros_rejects_short_support():
    with pytest.raises(ValueError):
        zeros_count([G] * 4, [[1, -1, 0, 0]], 3)


def test_alpha_infinity_direct():
    N = 4
    top = N * N
    direct = sum(1 for z in itertools.product(range(1, top + 1), repeat=3) if 1 <= z[0] + z[1] - z[2] <= top)
    assert alpha_infinity(A4, N) == direct


def test_zeros_predict_moderate_scale():
    rep = zeros_predict([G] * 4, A4, 40, P_max=20)
    assert 0.95 < rep.ratio < 1.05
    assert rep.extra["count"]["count"] == str(rep.lhs)


def test_gowers_constant_and_alternating():
    assert math.isclose(gowers_norm(np.ones(300), 2), 1.0, rel_tol=1e-12)
    assert math.isclose(gowers_norm(np.ones(40), 3), 1.0, rel_tol=1e-12)
    alt = (-1.0) ** np.arange(1, 1001)
    assert math.isclose(gowers_norm(alt, 2), 1.0, rel_tol=1e-12)
    assert math.isclose(gowers_norm_direct(alt[:100], 2), 1.0, rel_tol=1e-12)


def test_gowers_matches_direct_oracle_and_reflection():
    rng = np.random.default_rng(7)
    for s in (1, 2, 3):
        f = rng.normal(size=30 if s == 3 else 100)
        g = gowers_norm(f, s)
        assert abs(g - gowers_norm_direct(f, s)) < 1e-12
        assert abs(g - gowers_norm(f[::-1], s)) < 1e-12
        assert g >= 0


def test_gowers_centered_data_is_finite_and_guards():
    from qcorr.qform import rep_table

    r = rep_table(G, 500)[1:].astype(float) / 4
    g = gowers_norm(r - r.mean(), 2)
    assert math.isfinite(g) and g >= 0
    with pytest.raises(ValueError):
        gowers_norm(np.ones(3), 2)
    with pytest.raises(TypeError):
        gowers_norm(np.ones(8, dtype=complex), 2)
