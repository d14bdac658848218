"""Local representation densities and local factors.

rho(f, beta, q) counts pairs (x, y) mod q with f(x, y) = beta (mod q).  The
local factor at p is the p-adic limit of the averaged product of normalised
densities along an affine system; it is computed exactly as a Fraction.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arith import NotStabilized, check_alloc, factor, fraction_json, vp
from .characters import kronecker
from .lattice import AffineSystem, count_solutions_mod_prime_power, rank_mod_p, rank_q
from .qform import QuadraticForm, as_form, automorph_count, reduced_forms

RHO_BRUTE_MAX = 10**5
ENUM_MAX = 2 * 10**7


@dataclass(frozen=True)
class DensityQuery:
    form: QuadraticForm
    beta: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1 or not (0 <= self.beta < self.modulus):
            raise ValueError("need q >= 1 and 0 <= beta < q")


@dataclass(frozen=True)
class LocalFactor:
    p: int
    value: Fraction
    depth: int
    stabilized: bool
    method: str = "enumerate"
    history: tuple = field(default=(), compare=False)

    def to_json(self):
        out = {"p": self.p, "num": str(self.value.numerator), "den": str(self.value.denominator),
               "depth": self.depth, "stabilized": self.stabilized, "method": self.method}
        return out

    def __float__(self):
        return float(self.value)


def rho_bruteforce(f, beta: int, q: int) -> int:
    f = as_form(f)
    if q < 1:
        raise ValueError("q must be >= 1")
    if q > RHO_BRUTE_MAX:
        raise ValueError(f"q = {q} exceeds the brute-force bound {RHO_BRUTE_MAX}")
    a, b, c = f.as_tuple()
    beta %= q
    xs = np.arange(q, dtype=np.int64)
    ax2 = (a * xs * xs) % q
    total = 0
    for y in range(q):
        vals = (ax2 + (b * y % q) * xs + c * y * y) % q
        total += int(np.count_nonzero(vals == beta))
    return total


@lru_cache(maxsize=256)
def _rho_table_cached(abc, q):
    a, b, c = abc
    check_alloc(8 * q * 4, "density table")
    if q % 2 and math.gcd(2 * a, q) == 1 and q > 64:
        out = _rho_table_conv(a, b, c, q)
        out.setflags(write=False)
        return out
    xs = np.arange(q, dtype=np.int64)
    ax2 = (a * xs * xs) % q
    out = np.zeros(q, dtype=np.int64)
    rows = []
    for y in range(q):
        rows.append((ax2 + (b * y % q) * xs + c * y * y) % q)
        if len(rows) * q >= (1 << 22):
            out += np.bincount(np.concatenate(rows), minlength=q)
            rows = []
    if rows:
        out += np.bincount(np.concatenate(rows), minlength=q)
    out.setflags(write=False)
    return out


def _rho_table_conv(a, b, c, q):
    """Odd q prime to 2a: f = a (x + b y / 2a)^2 + (-D / 4a) y^2 mod q, so the
    value distribution is a cyclic convolution of two square histograms."""
    D = b * b - 4 * a * c
    c2 = (-D * pow(4 * a, -1, q)) % q
    xs = np.arange(q, dtype=np.int64)
    sq = (xs * xs) % q
    h1 = np.bincount((a * sq) % q, minlength=q).astype(np.float64)
    h2 = np.bincount((c2 * sq) % q, minlength=q).astype(np.float64)
    conv = np.fft.irfft(np.fft.rfft(h1) * np.fft.rfft(h2), q)
    out = np.rint(conv).astype(np.int64)
    if int(out.sum()) != q * q or np.abs(conv - out).max() > 1e-3:
        raise ArithmeticError("convolution lost precision")
    return out


def rho_table(f, q: int) -> np.ndarray:
    """rho(f, beta, q) for every beta mod q (O(q^2) sweep, cached)."""
    f = as_form(f)
    if q > RHO_BRUTE_MAX:
        raise ValueError(f"q = {q} exceeds the brute-force bound {RHO_BRUTE_MAX}")
    return _rho_table_cached(f.as_tuple(), q)


def rho(f, beta: int, q: int) -> int:
    """rho(f, beta, q) through the prime-power factorisation of q."""
    total = 1
    for p, e in factor(q).items() if q > 1 else []:
        total *= int(rho_table(f, p**e)[beta % p**e])
    return total


def rho_formula_split(f, beta: int, p: int, alpha: int) -> Fraction:
    """rho(f, beta, p^alpha) / p^alpha for p not dividing D(f)."""
    f = as_form(f)
    D = f.discriminant
    if D % p == 0:
        raise ValueError(f"p = {p} divides the discriminant {D}")
    if beta % p**alpha == 0:
        raise ValueError("beta must be nonzero mod p^alpha")
    chi = kronecker(D, p)
    v = vp(beta, p)
    s = sum(chi**j for j in range(v + 1))
    return (1 - Fraction(chi, p)) * s


def lift_stability_check(f, beta: int, p: int, alpha: int, method: str = "table") -> bool:
    """rho(beta, p^alpha)/p^alpha equals rho(beta + k p^alpha, p^(alpha+1))/p^(alpha+1)
    for every k < p.  ``method="bruteforce"`` recounts each density directly."""
    f = as_form(f)
    q = p**alpha
    if beta % q == 0:
        raise ValueError("beta must be nonzero mod p^alpha")
    if alpha < vp(f.discriminant, p):
        raise ValueError("alpha must be at least v_p(D)")
    if method == "bruteforce":
        count = rho_bruteforce
    else:
        count = lambda f, b, m: int(rho_table(f, m)[b % m])
    base = Fraction(count(f, beta, q), q)
    return all(Fraction(count(f, beta + k * q, q * p), q * p) == base for k in range(p))


def _grid_values(system: AffineSystem, q: int, mods=None):
    """psi_i(n) mod mods[i] over the grid (Z/q)^d, flattened."""
    d = system.d
    size = q**d
    check_alloc(size * 8 * 3, "enumeration grid")
    coords = np.indices((q,) * d, dtype=np.int64).reshape(d, -1)
    out = []
    for i, (row, c) in enumerate(zip(system.linear, system.offset)):
        m = q if mods is None else mods[i]
        v = np.full(size, c % m, dtype=np.int64)
        for a, x in zip(row, coords):
            if a % m:
                v = (v + (a % m) * x) % m
        out.append(v)
    return out


def alpha_density(system: AffineSystem, ds, method: str = "auto") -> Fraction:
    """Probability over n mod lcm(ds) that d_i | psi_i(n) for every i."""
    ds = [int(x) for x in ds]
    if len(ds) != system.t or min(ds) < 1:
        raise ValueError("need one modulus d_i >= 1 per form")
    primes = set()
    for x in ds:
        if x > 1:
            primes |= set(factor(x))
    total = Fraction(1)
    for p in sorted(primes):
        es = [vp(x, p) for x in ds]
        total *= _alpha_local(system, p, es, method)
        if total == 0:
            break
    return total


def _alpha_local(system, p, es, method="auto"):
    k = max(es)
    q = p**k
    if method == "auto":
        method = "enumerate" if q**system.d <= 10**6 else "lattice"
    if method == "enumerate":
        if q**system.d > ENUM_MAX:
            raise ValueError(f"enumeration of (Z/{q})^{system.d} exceeds the size guard")
        vals = _grid_values(system, q, [p**e for e in es])
        ok = np.ones(q**system.d, dtype=bool)
        for v in vals:
            ok &= v == 0
        return Fraction(int(np.count_nonzero(ok)), q**system.d)
    return Fraction(_divisibility_count(system, p, es, k), q**system.d)


def _divisibility_count(system, p, es, k):
    # scale row i by p^(k - e_i) so that every congruence is mod p^k
    A, b = [], []
    for row, c, e in zip(system.linear, system.offset, es):
        s = p ** (k - e)
        A.append([s * x for x in row])
        b.append(-s * c)
    return count_solutions_mod_prime_power(A, b, p, k)


def beta_depth_enumerate(forms, system: AffineSystem, p: int, m: int) -> Fraction:
    """The depth-m average E_a prod_i rho_{f_i, psi_i(a)}(p^m) / p^m by enumerating a."""
    q = p**m
    if q**system.d > ENUM_MAX:
        raise ValueError(f"enumeration of (Z/{q})^{system.d} exceeds the size guard")
    tables = [rho_table(f, q) for f in forms]
    vals = _grid_values(system, q)
    bound = 1
    for tab in tables:
        bound *= max(1, int(tab.max()))
    if bound >= 2**62:
        prod = np.ones(len(vals[0]), dtype=object)
        for tab, v in zip(tables, vals):
            prod = prod * tab[v].astype(object)
        total = int(prod.sum())
    else:
        prod = tables[0][vals[0]]
        pos = np.arange(len(prod))
        for tab, v in zip(tables[1:], vals[1:]):
            keep = np.flatnonzero(prod)
            pos = pos[keep]
            prod = prod[keep] * tab[v[pos]]
        chunk = max(1, (2**62) // bound)
        total = sum(int(prod[i : i + chunk].sum()) for i in range(0, len(prod), chunk))
    return Fraction(total, q ** (system.d + len(forms)))


def _unramified_rho_by_valuation(D, p, m):
    """rho(f, beta, p^m) for p not dividing D, indexed by min(v_p(beta), m)."""
    chi = kronecker(D, p)
    out = []
    for v in range(m):
        out.append(p ** (m - 1) * (p - chi) * sum(chi**j for j in range(v + 1)))
    rest = sum((p ** (m - v) - p ** (m - v - 1)) * out[v] for v in range(m))
    out.append(p ** (2 * m) - rest)
    return out


def beta_depth_unramified(forms, system: AffineSystem, p: int, m: int) -> Fraction:
    """Depth-m average for p not dividing any discriminant, summed over
    valuation patterns of (psi_1(a), ..., psi_t(a))."""
    Ds = [as_form(f).discriminant for f in forms]
    if any(D % p == 0 for D in Ds):
        raise ValueError("valuation method needs p prime to every discriminant")
    t, d = system.t, system.d
    rhos = [_unramified_rho_by_valuation(D, p, m) for D in Ds]
    # counts of a mod p^m with p^{u_i} | psi_i(a)
    Q = {}
    for u in itertools.product(range(m + 1), repeat=t):
        Q[u] = _divisibility_count(system, p, list(u), m) if any(u) else p ** (m * d)
    # exact-valuation counts by differencing along each axis
    P = dict(Q)
    for axis in range(t):
        newP = {}
        for u, val in P.items():
            if u[axis] < m:
                w = list(u)
                w[axis] += 1
                newP[u] = val - P[tuple(w)]
            else:
                newP[u] = val
        P = newP
    total = 0
    for u, cnt in P.items():
        if cnt:
            term = cnt
            for r, ui in zip(rhos, u):
                term *= r[ui]
            total += term
    return Fraction(total, p ** (m * (d + t)))


def subsystems_saturated(system: AffineSystem, p: int) -> bool:
    rows = system.linear
    for r in range(1, system.t + 1):
        for S in itertools.combinations(range(system.t), r):
            sub = [rows[i] for i in S]
            if rank_mod_p(sub, p) != rank_q(sub):
                return False
    return True


def beta_closed_form(forms, system: AffineSystem, p: int) -> Fraction:
    """Exact limit for p prime to every discriminant, homogeneous system,
    every subsystem saturated at p.

    Writing the limiting density of f_j at beta as (1 - chi_j/p) times
    sum_{k <= v_p(beta)} chi_j^k, the average becomes a sum over weakly
    decreasing chains of index sets S, each step weighted by
    chi_S * p^{-rank S}; that sum is resolved by a recursion over subsets."""
    if not system.is_homogeneous:
        raise ValueError("closed form needs a homogeneous system")
    t = system.t
    chis = [kronecker(as_form(f).discriminant, p) for f in forms]
    if any(c == 0 for c in chis):
        raise ValueError("closed form needs p prime to every discriminant")
    if not subsystems_saturated(system, p):
        raise ValueError("closed form needs saturated subsystems at p")
    rows = system.linear
    weight = {}
    for mask in range(1, 1 << t):
        S = [i for i in range(t) if mask >> i & 1]
        sign = 1
        for i in S:
            sign *= chis[i]
        weight[mask] = Fraction(sign, p ** rank_q([rows[i] for i in S]))
    T = {0: Fraction(1)}
    for mask in sorted(weight, key=lambda s: bin(s).count("1")):
        q = weight[mask]
        inner = Fraction(0)
        sub = (mask - 1) & mask
        while True:
            inner += T[sub]
            if sub == 0:
                break
            sub = (sub - 1) & mask
        T[mask] = q / (1 - q) * inner
    total = sum(T.values(), Fraction(0))
    for c in chis:
        total *= 1 - Fraction(c, p)
    return total


def berlekamp_massey(seq):
    """Shortest recurrence s_n + c_1 s_{n-1} + ... + c_L s_{n-L} = 0 over Q.
    Returns (L, [1, c_1, ..., c_L])."""
    C, B = [Fraction(1)], [Fraction(1)]
    L, m, b = 0, 1, Fraction(1)
    for n in range(len(seq)):
        d = seq[n] + sum(C[i] * seq[n - i] for i in range(1, L + 1))
        if d == 0:
            m += 1
            continue
        coef = d / b
        T = C[:]
        need = len(B) + m
        if len(C) < need:
            C = C + [Fraction(0)] * (need - len(C))
        for i, x in enumerate(B):
            C[i + m] -= coef * x
        if 2 * L <= n:
            L, B, b, m = n + 1 - L, T, d, 1
        else:
            m += 1
    return L, (C + [Fraction(0)] * (L + 1))[: L + 1]


def recurrence_limit(seq, extra: int = 2):
    """Limit of a sequence satisfying a certified linear recurrence.

    The recurrence must be the shortest one fitting the slice and the slice
    must hold at least 2L + extra terms.  Returns (limit, start, L) or None."""
    for start in range(len(seq)):
        tail = seq[start:]
        L, C = berlekamp_massey(tail)
        if L == 0 or len(tail) < 2 * L + extra:
            continue
        # generating function P/Q with Q = sum C_i T^i
        P = [sum(C[j] * tail[i - j] for j in range(0, min(i, L) + 1)) for i in range(L)]
        Qsum = sum(C)
        roots = np.roots([float(x) for x in C]) if L > 0 else []
        # roots of sum C_i x^(L-i) are the characteristic roots
        big = [r for r in roots if abs(r) >= 1 - 1e-9]
        if Qsum == 0:
            if len(big) != 1 or abs(big[0] - 1) > 1e-6:
                continue
            # Q(T) = (1-T) R(T): synthetic division
            R, carry = [], Fraction(0)
            for c in C[:-1]:
                carry += c
                R.append(carry)
            Rsum = sum(R)
            if Rsum == 0:
                continue
            return sum(P) / Rsum, start, L
        if big:
            continue
        return Fraction(0), start, L
    return None


def _discriminants(forms):
    return [as_form(f).discriminant for f in forms]


def beta_p(forms, system: AffineSystem, p: int, m_max: int = 10, method: str = "auto") -> LocalFactor:
    """Local factor at p of the system with the given forms."""
    forms = [as_form(f) for f in forms]
    if len(forms) != system.t:
        raise ValueError("need one form per row of the system")
    Ds = _discriminants(forms)
    unramified = all(D % p for D in Ds)
    if method == "auto":
        if unramified and system.is_homogeneous and subsystems_saturated(system, p):
            method = "closed-form"
        elif unramified:
            method = "valuation"
        else:
            method = "enumerate"
    if method == "closed-form":
        value = beta_closed_form(forms, system, p)
        return LocalFactor(p, value, 1, True, "closed-form")
    depth_fn = beta_depth_unramified if method == "valuation" else beta_depth_enumerate
    history = []
    for m in range(1, m_max + 1):
        try:
            history.append(depth_fn(forms, system, p, m))
        except ValueError:
            if method == "enumerate" and not history:
                raise
            break
        n = len(history)
        # two equal consecutive depths, confirmed by a third when available
        if n >= 3 and history[-1] == history[-2] == history[-3]:
            return LocalFactor(p, history[-3], n - 2, True, method, tuple(history))
    seq = history
    if len(seq) >= 2 and seq[-1] == seq[-2]:
        return LocalFactor(p, seq[-2], len(seq) - 1, True, method, tuple(history))
    found = recurrence_limit(seq)
    if found is not None:
        value, start, L = found
        return LocalFactor(p, value, start + 2 * L, True, method + "+recurrence", tuple(history))
    best = LocalFactor(p, seq[-1], len(seq), False, method, tuple(history)) if seq else None
    raise NotStabilized(f"local factor at p={p} did not stabilise by depth {len(seq)}", best)


def local_factors(forms, system: AffineSystem, P_max: int, m_max: int = 10):
    from .arith import primes_upto

    return [beta_p(forms, system, p, m_max) for p in primes_upto(P_max)]


def class_number_L_value(D: int) -> float:
    """L(1, chi_D) = 2 pi h(D) / (k(D) sqrt(-D))."""
    h = reduced_forms(D).class_number
    return 2 * math.pi * h / (automorph_count(D) * math.sqrt(-D))


def progression_mean_char_sum(D: int, q0: int, beta0: int, M: int):
    """(empirical mean, predicted main term) of sum_{d | n} chi_D(d) over
    n = q0*m + beta0, 1 <= m <= M."""
    from .characters import divisor_char_sum_table

    if q0 % D:
        raise ValueError("D must divide q0")
    for p, e in factor(q0).items():
        if beta0 % p**e == 0:
            raise ValueError(f"beta0 must be nonzero mod {p}^{e}")
    table = divisor_char_sum_table(D, q0 * M + beta0)
    vals = table[q0 * np.arange(1, M + 1) + beta0]
    empirical = Fraction(int(vals.sum()), M)
    g = math.gcd(beta0, q0)
    C = (1 + kronecker(D, beta0 // g)) * class_number_L_value(D)
    main = C
    for p in factor(q0):
        chi = kronecker(D, p)
        s = sum(chi**a for a in range(0, vp(beta0, p) + 1))
        main *= (1 - chi / p) * s
    return empirical, main


@dataclass(frozen=True)
class PiMultiple:
    """coeff * pi / sqrt(radicand) with squarefree radicand."""

    coeff: Fraction
    radicand: int

    def __float__(self):
        return float(self.coeff) * math.pi / math.sqrt(self.radicand)

    def __str__(self):
        if self.radicand == 1:
            return f"{self.coeff}*pi"
        return f"{self.coeff}*pi/sqrt({self.radicand})"


def ellipse_volume(f, N) -> PiMultiple:
    """Area of {f(x, y) <= N}, namely 2 pi N / sqrt(-D)."""
    f = as_form(f)
    rad = -f.discriminant
    coeff = Fraction(2) * Fraction(N)
    k = 2
    while k * k <= rad:
        while rad % (k * k) == 0:
            rad //= k * k
            coeff /= k
        k += 1
    return PiMultiple(coeff, rad)
