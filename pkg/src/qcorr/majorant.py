"""Divisor-type and sieve-type majorants for representation functions, their
W-tricked versions and empirical checks of the majorisation properties.

Logarithms are natural.  Constants that the construction leaves unspecified
are computed as empirical normalisers at the chosen scale.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .arith import ResourceLimitError, check_alloc, factor, prime_mask, primes_upto
from .characters import character, kronecker, tau_D
from .local import rho_table
from .qform import as_form, automorph_count, rep_table_blocked


# -- cutoff functions -------------------------------------------------------

def _e(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=np.float64)
    a, b = _e(u), _e(1.0 - u)
    return a / (a + b)


def _smooth_step_deriv(u):
    u = np.asarray(u, dtype=np.float64)
    a, b = _e(u), _e(1.0 - u)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(u > 0, a / np.maximum(u, 1e-300) ** 2, 0.0)
        db = np.where(u < 1, b / np.maximum(1.0 - u, 1e-300) ** 2, 0.0)
        out = (da * b + a * db) / (a + b) ** 2
    return np.nan_to_num(out)


class CutoffFunction:
    """Even, smooth, supported on [-1, 1], constant on [-1/2, 1/2].

    ``scale`` multiplies the unit-plateau profile; ``energy`` is the
    integral of |chi'|^2 over [0, 1] for the scaled function."""

    def __init__(self, scale: float = 1.0, name: str = "plateau"):
        self.scale = float(scale)
        self.name = name

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=np.float64))
        out = np.where(x <= 0.5, 1.0, 1.0 - smooth_step(2 * x - 1))
        out = np.where(x >= 1, 0.0, out) * self.scale
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        mid = (ax > 0.5) & (ax < 1)
        d = np.where(mid, -2.0 * _smooth_step_deriv(2 * ax - 1), 0.0) * np.sign(x)
        return d * self.scale

    @property
    def plateau_value(self) -> float:
        return self.scale

    @property
    def energy(self) -> float:
        val, _ = integrate.quad(lambda u: float(_smooth_step_deriv(u)) ** 2, 0, 1,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return 2.0 * val * self.scale**2


UNIT_PLATEAU = CutoffFunction(1.0, "unit-plateau")


@lru_cache(maxsize=1)
def energy_normalized_cutoff() -> CutoffFunction:
    """Same profile scaled so that the integral of |chi'|^2 over [0,1] is 1.
    Its plateau value is then below 1, so it cannot also satisfy chi = 1 on
    the plateau; the unit-plateau version is used inside the majorants."""
    e = UNIT_PLATEAU.energy
    return CutoffFunction(1.0 / math.sqrt(e), "energy-normalised")


def bump_cutoff(x):
    """exp(1 - 1/(1 - x^2)) on (-1, 1): chi(0) = 1, no plateau."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(np.abs(x) < 1, np.exp(1 - 1 / np.maximum(1 - x * x, 1e-300)), 0.0)
    return out if out.ndim else float(out)


# -- helpers ----------------------------------------------------------------

def _loglog(N):
    L = math.log(N)
    LL = math.log(L)
    if LL <= 1:
        raise ValueError("N too small: need log log log N > 0 (N > e^e)")
    return L, LL, math.log(LL)


def _split(D, p):
    return kronecker(D, p) == 1


def _inert(D, p):
    return kronecker(D, p) == -1


# -- exceptional set --------------------------------------------------------

def exceptional_set_member(n: int, N: int, C1: float, gamma: float) -> bool:
    # the three conditions make sense for any n >= 1, also beyond N
    if n < 1:
        raise ValueError("need n >= 1")
    L, LL, _ = _loglog(N)
    fac = factor(n) if n > 1 else {}
    rough_bound = L**C1
    if any(e >= 2 and math.log(p) * e > math.log(rough_bound) for p, e in fac.items()):
        return True
    y = math.exp(L / LL**3)
    smooth_log = sum(e * math.log(p) for p, e in fac.items() if p <= y)
    if smooth_log >= gamma * L / LL:
        return True
    sq_log = sum((e // 2) * math.log(p) for p, e in fac.items())
    return sq_log > gamma * L


def exceptional_mask(N: int, C1: float, gamma: float) -> np.ndarray:
    """Boolean array over 0..N marking the exceptional set (index 0 unused)."""
    check_alloc(24 * (N + 1), "exceptional-set mask")
    L, LL, _ = _loglog(N)
    mask = np.zeros(N + 1, dtype=bool)
    rough_log = C1 * math.log(L)
    y = math.exp(L / LL**3)
    smooth = np.zeros(N + 1)
    square = np.zeros(N + 1)
    for p in primes_upto(N):
        lp = math.log(p)
        if p <= y:
            pk = p
            while pk <= N:
                smooth[pk::pk] += lp
                pk *= p
        if p * p > N:
            if p > y:
                break
            continue
        # smallest a >= 2 with p^a > log^C1 N
        a = max(2, math.floor(rough_log / lp) + 1)
        if p**a <= N:
            mask[p**a :: p**a] = True
        pk = p * p
        while pk <= N:
            square[pk::pk] += lp
            pk *= p * p
    mask |= smooth >= gamma * L / LL - 1e-12
    mask |= square > gamma * L + 1e-12
    mask[0] = False
    return mask


# -- truncated divisor functions ---------------------------------------------

def _divisors_from(fac):
    divs = [1]
    for p, e in fac.items():
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return divs


def tau_trunc(n: int, N: int, gamma: float) -> int:
    bound = N**gamma
    return sum(1 for d in _divisors_from(factor(n)) if d <= bound)


def tau_D_trunc(D: int, n: int, N: int, gamma: float) -> int:
    fac = {p: e for p, e in factor(n).items() if _split(D, p)}
    bound = N**gamma
    return sum(1 for d in _divisors_from(fac) if d <= bound)


def tau_D_smooth(D: int, n: int, N: int, gamma: float, cutoff=UNIT_PLATEAU) -> float:
    fac = {p: e for p, e in factor(n).items() if _split(D, p)}
    scale = gamma * math.log(N)
    return float(sum(cutoff(math.log(d) / scale) for d in _divisors_from(fac) if d <= N**gamma))


# -- U(i, s) sets and the Erdos-type weights -----------------------------------

def _is_pow2(x):
    return x >= 1 and float(x).is_integer() and (int(x) & (int(x) - 1)) == 0


def u_sets(i: int, s: int, N: int, xi: float):
    """Lazily yield U(i, s)."""
    base = 2 / xi
    if abs(s - base) < 1e-9:
        if i == round(math.log2(base)) - 2:
            yield 1
        return
    m0 = math.ceil(xi * s * (i + 3 - math.log2(s)) / 100)
    if m0 <= 0:
        return
    lo, hi = N ** (1 / 2 ** (i + 1)), N ** (1 / 2**i)
    ps = [p for p in primes_upto(int(hi)) if p >= lo]
    for combo in itertools.combinations(ps, m0):
        yield math.prod(combo)


def majorant_terms(N: int, xi: float, lead: float = None, max_terms: int = 10**6):
    """(weight 2^s, u) pairs of the triple sum over s, i and u in U(i, s).

    s runs over powers of two from ``lead`` (default 2/xi) up to
    (log log N)^3 and i from log2(s) - 2 up to 6 log log log N.  The
    leading s always contributes its U = {1} term, which keeps the sum
    nonempty when (log log N)^3 < 2/xi as happens at desk-sized N."""
    _, LL, LLL = _loglog(N)
    s0 = 2 / xi if lead is None else lead
    if not _is_pow2(s0):
        raise ValueError("2/xi must be a power of two")
    terms = [(2.0 ** s0, 1)]
    s = 2 * s0
    while s <= LL**3:
        for i in range(int(math.log2(s)) - 2, math.floor(6 * LLL) + 1):
            for u in u_sets(i, s, N, xi):
                terms.append((2.0**s, u))
                if len(terms) > max_terms:
                    raise ResourceLimitError("too many majorant terms")
        s *= 2
    return terms


def _term_weights(terms, size):
    w = np.zeros(size, dtype=np.float64)
    for weight, u in terms:
        w[u::u] += weight
    w[0] = 0
    return w


def _restricted_divisor_sum(D, size, bound, scale, cutoff, coprime_to=1, kind="split"):
    """sum over d | n with d in <primes of the given kind>, d <= bound, of
    cutoff(log d / scale), for every n < size."""
    out = np.zeros(size, dtype=np.float64)
    top = int(math.floor(bound + 1e-9))
    test = _split if kind == "split" else _inert
    gens = [p for p in primes_upto(max(top, 1)) if test(D, p) and coprime_to % p and p > 0]
    for d in _generated(gens, top, squarefree=(kind != "split")):
        c = float(cutoff(math.log(d) / scale)) if d > 1 else float(cutoff(0.0))
        if c:
            out[d::d] += c
    return out


def _generated(gens, top, squarefree=False):
    """All d <= top built from the given primes (squarefree if asked)."""
    out = [1]
    for p in gens:
        new = []
        for d in out:
            x = d * p
            while x <= top:
                new.append(x)
                if squarefree:
                    break
                x *= p
        out += new
    return sorted(out)


def _mobius_generated(gens, top):
    out = [(1, 1)]
    for p in gens:
        out += [(d * p, -m) for d, m in out if d * p <= top]
    return sorted(out)


# -- the non-W-tricked majorants ----------------------------------------------

@dataclass
class DivisorMajorant:
    """C nu_{D,gamma}(n) = (log N)^{-1/2} (main(n) tau*_{D,gamma}(n) + 1_{X0}(n) tau_D(n))."""

    D: int
    N: int
    gamma: float
    C1: float = 2.0
    raw: np.ndarray = field(default=None, repr=False)
    C: float = 0.0

    def __post_init__(self):
        N, g = self.N, self.gamma
        L, _, _ = _loglog(N)
        xi = g / 2
        terms = majorant_terms(N, xi)
        tstar = _restricted_divisor_sum(self.D, N + 1, N**g, g * L, UNIT_PLATEAU)
        from .characters import tau_D_table

        tD = tau_D_table(self.D, N).astype(np.float64)
        x0 = exceptional_mask(N, self.C1, g)
        self.raw = (_term_weights(terms, N + 1) * tstar + x0 * tD) / math.sqrt(L)
        self.raw[0] = 0
        if not self.C:
            self.C = float(self.raw[1:].mean())
        self.tau_D = tD
        self.exceptional = x0

    def __call__(self, n):
        return self.raw[n] / self.C

    def check(self, n_max: int):
        """Indices n <= n_max where tau_D(n)/sqrt(log N) > C nu(n)."""
        L = math.log(self.N)
        lhs = self.tau_D[1 : n_max + 1] / math.sqrt(L)
        rhs = self.raw[1 : n_max + 1]
        return np.flatnonzero(lhs > rhs * (1 + 1e-12)) + 1


@lru_cache(maxsize=8)
def _divisor_majorant(D, N, gamma, C1):
    return DivisorMajorant(D, N, gamma, C1)


def divisor_majorant(D: int, n: int, N: int, gamma: float, C1: float = 2.0) -> float:
    return float(_divisor_majorant(D, N, gamma, C1)(n))


@dataclass
class SelbergWeight:
    """beta(n) = C' sqrt(log N) (sum over squarefree d | n built from inert
    primes of mu(d) chi(log d / log N^gamma))^2."""

    D: int
    N: int
    gamma: float
    cutoff: object = UNIT_PLATEAU
    inner: np.ndarray = field(default=None, repr=False)
    C_prime: float = 0.0

    def __post_init__(self):
        N, g = self.N, self.gamma
        L = math.log(N)
        self.inner = self._inner(N + 1)
        if not self.C_prime:
            self.C_prime = 1.0 / (math.sqrt(L) * float((self.inner[1:] ** 2).mean()))

    def _inner(self, size):
        L = math.log(self.N)
        top = int(math.floor(self.N**self.gamma + 1e-9))
        gens = [p for p in primes_upto(max(top, 1)) if _inert(self.D, p)]
        out = np.zeros(size, dtype=np.float64)
        for d, mu in _mobius_generated(gens, top):
            c = float(self.cutoff(math.log(d) / (self.gamma * L))) if d > 1 else float(self.cutoff(0.0))
            if c:
                out[d::d] += mu * c
        return out

    def __call__(self, n):
        return self.C_prime * math.sqrt(math.log(self.N)) * self.inner[n] ** 2

    def values(self):
        return self.C_prime * math.sqrt(math.log(self.N)) * self.inner**2


def p_star_indicator(D: int, N: int) -> np.ndarray:
    """1 on integers without inert prime factors (ramified primes allowed)."""
    out = np.ones(N + 1, dtype=bool)
    out[0] = False
    for p in primes_upto(N):
        if _inert(D, p):
            out[p::p] = False
    return out


@lru_cache(maxsize=8)
def _selberg(D, N, gamma):
    return SelbergWeight(D, N, gamma)


def selberg_weight(D: int, n: int, N: int, gamma: float) -> float:
    return float(_selberg(D, N, gamma)(n))


# -- W-trick ------------------------------------------------------------------

@dataclass
class WTrickContext:
    N: int
    w: int
    C1: float
    alphas: dict
    W: int
    admissible: dict = field(default_factory=dict)

    def to_json(self):
        return {"N": self.N, "w": self.w, "C1": self.C1, "W": self.W,
                "W_factorisation": {str(p): a for p, a in self.alphas.items()},
                "admissible_sizes": {k: len(v) for k, v in self.admissible.items()}}

    def density(self, f, b: int) -> Fraction:
        """rho_{f,b}(W)/W computed prime by prime."""
        f = as_form(f)
        out = Fraction(1)
        for p, a in self.alphas.items():
            q = p**a
            out *= Fraction(int(rho_table(f, q)[b % q]), q)
        return out

    def admissible_set(self, f):
        f = as_form(f)
        key = str(f)
        if key not in self.admissible:
            ok = np.ones(self.W, dtype=bool)
            res = np.arange(self.W)
            for p, a in self.alphas.items():
                q = p**a
                tab = rho_table(f, q)
                ok &= (tab[res % q] > 0) & (res % q != 0)
            self.admissible[key] = [int(x) for x in np.flatnonzero(ok)]
        return self.admissible[key]


def wtrick_context(N: int, w: int, C1: float) -> WTrickContext:
    if w < 2 or N < 16 or C1 <= 0:
        raise ValueError("need w >= 2, N >= 16 and C1 > 0")
    bound = math.log(N) ** (C1 + 1)
    alphas = {}
    for p in primes_upto(w):
        a = 1
        while p**a < bound:
            a += 1
        alphas[p] = a
    W = math.prod(p**a for p, a in alphas.items())
    return WTrickContext(N, w, C1, alphas, W)


def _prime_scale(f):
    f = as_form(f)
    D = f.discriminant
    return automorph_count(D) * math.sqrt(-D) / (2 * math.pi)


def r_prime(ctx: WTrickContext, f, b: int, m: int, table=None) -> float:
    f = as_form(f)
    if b not in set(ctx.admissible_set(f)):
        raise ValueError(f"{b} is not an admissible residue mod {ctx.W}")
    from .qform import r_f

    n = ctx.W * m + b
    r = Fraction(int(table[n]), automorph_count(f.discriminant)) if table is not None else r_f(f, n)
    return _prime_scale(f) * float(r) / float(ctx.density(f, b))


def r_prime_values(ctx: WTrickContext, f, b: int, ms, table) -> np.ndarray:
    """r'_{f,b}(m) for an array of m, reading R_f from a precomputed table."""
    f = as_form(f)
    k = automorph_count(f.discriminant)
    vals = table[ctx.W * np.asarray(ms, dtype=np.int64) + b].astype(np.float64) / k
    return _prime_scale(f) * vals / float(ctx.density(f, b))


def wtrick_table(ctx: WTrickContext, f, M: int):
    """R_f on [0, W*M + W] (enough for every admissible residue)."""
    return rep_table_blocked(f, ctx.W * (M + 1))


def wtrick_mean_check(ctx: WTrickContext, f, M: int, table=None):
    """Per admissible residue: mean of r' over 1 <= m <= M and the tolerance
    5 W^3 M^{-1/2}."""
    if table is None:
        table = wtrick_table(ctx, f, M)
    tol = 5 * ctx.W**3 / math.sqrt(M)
    ms = np.arange(1, M + 1)
    rows = []
    for b in ctx.admissible_set(f):
        mean = float(r_prime_values(ctx, f, b, ms, table).mean())
        rows.append({"residue": b, "mean": mean, "deviation": abs(mean - 1), "tolerance": tol,
                     "ok": abs(mean - 1) <= tol})
    return rows


def major_arc_check(ctx: WTrickContext, f, q1: int, q0: int, M: int, table=None):
    """Mean of r'_{f,b}(q1 m + q0), 0 <= m < M, for every admissible b, with
    the tolerance 5 W (W q1)^2 M^{-1/2}; q1 must be w-smooth."""
    from .equid import is_smooth

    if not is_smooth(q1, ctx.w):
        raise ValueError(f"{q1} is not {ctx.w}-smooth")
    need = ctx.W * (q1 * (M - 1) + q0 + 1) + 1
    if table is None or len(table) < need:
        table = rep_table_blocked(f, need)
    tol = 5 * ctx.W * (ctx.W * q1) ** 2 / math.sqrt(M)
    ms = q1 * np.arange(M) + q0
    rows = []
    for b in ctx.admissible_set(f):
        mean = float(r_prime_values(ctx, f, b, ms, table).mean())
        rows.append({"residue": b, "mean": mean, "deviation": abs(mean - 1), "tolerance": tol,
                     "ok": abs(mean - 1) <= tol})
    return rows


@dataclass
class WTrickedMajorant:
    """beta'_{D,gamma} and nu'_{D,gamma} on [0, size) for a W-trick context."""

    ctx: WTrickContext
    D: int
    gamma: float
    size: int
    beta: np.ndarray = field(default=None, repr=False)
    nu: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        check_alloc(40 * self.size, "W-tricked majorant arrays")
        N, g, w = self.ctx.N, self.gamma, self.ctx.w
        L = math.log(N)
        rough = math.prod(primes_upto(w))
        # nu': leading weight 2^{2/gamma} with U = {1}, plus any genuine terms
        terms = majorant_terms(N, g)
        tprime = _restricted_divisor_sum(self.D, self.size, N ** (2 * g), 2 * g * L, UNIT_PLATEAU,
                                         coprime_to=rough)
        self.nu = _term_weights(terms, self.size) * tprime
        # beta': sum over w-rough m in <Q_D>, m < N^gamma, of squared sieve sums
        top = N**g
        gens = [p for p in primes_upto(max(int(top) + 1, 2)) if _inert(self.D, p) and p > w]
        self.beta = np.zeros(self.size, dtype=np.float64)
        ms = [m for m in _generated(gens, int(math.ceil(top))) if m < top]
        dgens = [p for p in primes_upto(max(int(top), 2)) if _inert(self.D, p) and p > w]
        dlist = [(d, mu, float(UNIT_PLATEAU(math.log(d) / (g * L))) if d > 1 else 1.0)
                 for d, mu in _mobius_generated(dgens, int(math.floor(top + 1e-9)))]
        for m in ms:
            inner = np.zeros(self.size, dtype=np.float64)
            for d, mu, c in dlist:
                step = m * m * d
                if c and step < self.size:
                    inner[step::step] += mu * c
            self.beta += inner**2
        self.beta[0] = 0
        self.nu[0] = 0

    def product(self):
        return self.beta * self.nu


@lru_cache(maxsize=8)
def _wtricked(ctx_key, D, gamma, size):
    ctx = wtrick_context(*ctx_key)
    return WTrickedMajorant(ctx, D, gamma, size)


def combined_majorant(ctx: WTrickContext, D: int, n: int, gamma: float) -> float:
    """beta'_{D,gamma}(n) nu'_{D,gamma}(n)."""
    size = max(ctx.N, n) + 1
    maj = _wtricked((ctx.N, ctx.w, ctx.C1), D, gamma, size)
    return float(maj.beta[n] * maj.nu[n])


def majorant_normaliser(maj: WTrickedMajorant) -> dict:
    """Mean of beta', of nu', the product of means C_{D,gamma} and the mean
    of the product, all over n <= N."""
    N = maj.ctx.N
    b = maj.beta[1 : N + 1]
    v = maj.nu[1 : N + 1]
    C = float(b.mean()) * float(v.mean())
    return {"mean_beta": float(b.mean()), "mean_nu": float(v.mean()), "C": C,
            "mean_product_over_C": float((b * v).mean()) / C}


def simultaneous_majorant(ctx: WTrickContext, forms, residues, m, gamma: float = 1 / 8) -> float:
    """Average over i of beta'nu'(W m + a_i) / C_{D_i,gamma}."""
    forms = [as_form(f) for f in forms]
    total = 0.0
    for f, a in zip(forms, residues):
        D = f.discriminant
        n = ctx.W * m + a
        maj = _wtricked((ctx.N, ctx.w, ctx.C1), D, gamma, max(ctx.N, n) + 1)
        C = majorant_normaliser(maj)["C"]
        total += maj.beta[n] * maj.nu[n] / C
    return total / len(forms)


def linear_forms_check(ctx: WTrickContext, system, forms, K, residues=None, gamma: float = 1 / 8):
    """E over n in K of prod_j beta'nu'(W psi_j(n) + b_j) against prod_j C_j."""
    from .correlate import _value_ranges, weighted_sum

    forms = [as_form(f) for f in forms]
    if residues is None:
        residues = [1] * system.t
    top = max(hi for _, hi in _value_ranges(K, system))
    size = ctx.W * top + max(residues) + 1
    # evaluate on the W-dilated progression so the generic weighted sum applies
    tables, consts = [], []
    scale = 2**40
    for f, b in zip(forms, residues):
        maj = _wtricked((ctx.N, ctx.w, ctx.C1), f.discriminant, gamma, max(size, ctx.N + 1))
        C = majorant_normaliser(maj)["C"]
        vals = maj.product()[b :: ctx.W][: top + 1] / C
        tables.append(np.round(vals * scale).astype(object))
        consts.append(C)
    from .lattice import count_points

    npts = count_points(K)
    total = _exact_weighted(K, system, tables)
    mean = float(Fraction(total, npts)) / scale ** system.t
    return {"mean_normalised_product": mean, "ratio": mean, "constants": consts,
            "points": npts, "residues": list(residues)}


def _exact_weighted(K, system, tables):
    from .lattice import integer_points

    total = 0
    for n in integer_points(K):
        vals = system(n)
        term = 1
        for tab, v in zip(tables, vals):
            if not 0 <= v < len(tab):
                term = 0
                break
            term *= int(tab[v])
            if term == 0:
                break
        total += term
    return total


def correlation_moments(maj: WTrickedMajorant, H: int, qmax: int = 4, n_max: int = None):
    """q-th moments over 1 <= h <= H of E_n nu(n) nu(n + h) for the normalised
    combined weight, q <= qmax."""
    N = maj.ctx.N if n_max is None else n_max
    N = min(N, maj.size - 1 - H)
    if N < 1:
        raise ValueError("majorant array too short for the requested shifts")
    C = majorant_normaliser(maj)["C"]
    v = maj.product()[1 : N + H + 1] / C
    c = np.array([float((v[:N] * v[h : h + N]).mean()) for h in range(1, H + 1)])
    return {q: float((c**q).mean()) for q in range(1, qmax + 1)}
