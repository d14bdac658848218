"""Polynomial sequences on R/Z: binomial and monomial coefficients, the
smoothness norm, exponential-sum equidistribution tests on a finite grid of
frequencies and progressions, Weyl-type witnesses and polynomial
subsequences."""

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from sympy.functions.combinatorial.numbers import stirling

from .arith import factor

PREC_BITS = 256          # working precision for irrational coefficients
PHASE_BITS = 192         # fixed-point precision used when evaluating g(n) mod 1

_ctx = mpmath.MPContext()
_ctx.prec = PREC_BITS


def _is_exact(x):
    return isinstance(x, (int, Fraction))


def _frac(x):
    """x mod 1 in [0, 1)."""
    if _is_exact(x):
        x = Fraction(x)
        return x - math.floor(x)
    x = _ctx.mpf(x)
    return x - _ctx.floor(x)


def torus_norm(x) -> float:
    f = _frac(x)
    return float(min(f, 1 - f))


def _norm_exact(x):
    f = _frac(x)
    return min(f, 1 - f)


# -- basis changes ----------------------------------------------------------

def binomial_to_monomial(alpha):
    """Monomial coefficients of sum_j alpha_j binom(n, j), exact for rationals."""
    d = len(alpha) - 1
    beta = [0] * (d + 1)
    for j, a in enumerate(alpha):
        if not a:
            continue
        fj = math.factorial(j)
        for i in range(j + 1):
            s = int(stirling(j, i, kind=1, signed=True))
            if s:
                beta[i] += a * Fraction(s, fj) if _is_exact(a) else a * _ctx.mpf(s) / fj
    return beta


def monomial_to_binomial(beta):
    """Binomial-basis coefficients of sum_i beta_i n^i (integer matrix)."""
    d = len(beta) - 1
    alpha = [0] * (d + 1)
    for i, b in enumerate(beta):
        if not b:
            continue
        for j in range(i + 1):
            c = math.factorial(j) * int(stirling(i, j, kind=2))
            if c:
                alpha[j] += c * b
    return alpha


def _binom(n: int, j: int) -> int:
    """binom(n, j) as a polynomial in n, valid for negative n too."""
    if n >= 0:
        return math.comb(n, j)
    return (-1) ** j * math.comb(j - n - 1, j)


# -- polynomials ------------------------------------------------------------

class TorusPolynomial:
    """g(n) = sum_j alpha_j binom(n, j) mod 1.

    Coefficients are kept reduced to [0, 1).  Integers and Fractions give the
    exact rational mode; anything else is held as a 256-bit mpmath real."""

    def __init__(self, alpha):
        alpha = list(alpha) or [0]
        while len(alpha) > 1 and alpha[-1] == 0:
            alpha.pop()
        self.exact = all(_is_exact(a) for a in alpha)
        self.alpha = tuple(_frac(a) for a in alpha)

    @classmethod
    def from_monomial(cls, beta):
        return cls(monomial_to_binomial(list(beta)))

    @property
    def degree(self) -> int:
        return len(self.alpha) - 1

    @property
    def beta(self):
        """Monomial coefficients mod 1 (valid since n^j is an integer)."""
        return tuple(_frac(b) for b in binomial_to_monomial(list(self.alpha)))

    def __call__(self, n: int):
        return _frac(sum(a * _binom(n, j) for j, a in enumerate(self.alpha)))

    def __eq__(self, other):
        return isinstance(other, TorusPolynomial) and self.alpha == other.alpha

    def __repr__(self):
        mode = "exact" if self.exact else "real"
        return f"TorusPolynomial({[str(a) if self.exact else float(a) for a in self.alpha]}, {mode})"

    def scale(self, k: int) -> "TorusPolynomial":
        return TorusPolynomial([k * a for a in self.alpha])

    def _fixed_point(self):
        out = []
        for b in self.beta:
            if _is_exact(b):
                out.append((b.numerator << PHASE_BITS) // b.denominator)
            else:
                out.append(int(_ctx.floor(b * _ctx.mpf(2) ** PHASE_BITS)))
        return out

    def phases(self, ns) -> np.ndarray:
        """g(n) mod 1 as float64 for an integer array n (Horner in fixed point)."""
        ns = np.asarray(ns, dtype=np.int64).astype(object)
        mask = (1 << PHASE_BITS) - 1
        coeffs = self._fixed_point()
        acc = np.full(len(ns), coeffs[-1], dtype=object)
        for c in reversed(coeffs[:-1]):
            acc = (acc * ns + c) & mask
        top = (acc >> (PHASE_BITS - 53)).astype(np.float64)
        return top / float(1 << 53)

    def to_json(self):
        if self.exact:
            return {"mode": "exact", "alpha": [{"num": str(a.numerator), "den": str(a.denominator)}
                                               for a in self.alpha]}
        return {"mode": "real", "alpha": [_ctx.nstr(a, 40) for a in self.alpha]}


_CONSTANTS = {
    "golden": lambda: (_ctx.sqrt(5) - 1) / 2,
    "phi": lambda: (_ctx.sqrt(5) + 1) / 2,
    "pi": lambda: +_ctx.pi,
    "e": lambda: _ctx.e,
}


def _coef_token(tok: str):
    tok = tok.strip()
    if tok in _CONSTANTS:
        return _CONSTANTS[tok]()
    m = re.fullmatch(r"sqrt\(?(\d+)\)?", tok)
    if m:
        return _ctx.sqrt(int(m.group(1)))
    if re.fullmatch(r"\d+(/\d+)?", tok):
        return Fraction(tok)
    if re.fullmatch(r"\d*\.\d+", tok):
        return Fraction(tok)
    raise ValueError(f"unknown coefficient '{tok}'")


def parse_poly(text: str) -> TorusPolynomial:
    """Parse e.g. "0 + golden*n", "sqrt2*n^2 - 1/3*n" in the monomial basis."""
    src = text.replace(" ", "")
    if not src:
        raise ValueError("empty polynomial")
    terms = re.findall(r"[+-]?[^+-]+", src)
    if "".join(terms) != src:
        raise ValueError(f"cannot parse polynomial '{text}'")
    beta = {}
    for term in terms:
        sign = -1 if term.startswith("-") else 1
        body = term.lstrip("+-")
        coef, deg = Fraction(sign), 0
        for fac in body.replace("**", "^").split("*"):
            m = re.fullmatch(r"n(?:\^(\d+))?", fac)
            if m:
                deg += int(m.group(1) or 1)
            elif fac:
                coef = coef * _coef_token(fac)
            else:
                raise ValueError(f"empty factor in '{term}'")
        beta[deg] = beta.get(deg, 0) + coef
    d = max(beta)
    return TorusPolynomial.from_monomial([beta.get(j, 0) for j in range(d + 1)])


def smoothness_norm(g: TorusPolynomial, N: int) -> float:
    if N < 1:
        raise ValueError("N must be positive")
    return max((float(N**j * _norm_exact(a)) for j, a in enumerate(g.alpha) if j >= 1), default=0.0)


def monomial_smoothness(g: TorusPolynomial, N: int, factorial_weights: bool = False) -> float:
    """sup_j N^j ||beta_j|| (or ||j! beta_j|| when factorial_weights), the
    monomial-side quantities that bound the smoothness norm from each side."""
    vals = []
    for j, b in enumerate(g.beta):
        if j:
            x = math.factorial(j) * b if factorial_weights else b
            vals.append(float(N**j * _norm_exact(x)))
    return max(vals, default=0.0)


def variation_constant(d: int) -> float:
    """C_d with ||g(n) - g(n-1)|| <= C_d ||g||/N on [N]: sum_{j<=d} 1/(j-1)!."""
    return sum(1 / math.factorial(j - 1) for j in range(1, d + 1))


# -- equidistribution tests --------------------------------------------------

@dataclass
class EquidReport:
    discrepancy: float
    witness_k: int
    witness_progression: tuple
    delta: float
    N: int
    grid: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.delta

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self):
        return {"discrepancy": self.discrepancy, "witness_k": self.witness_k,
                "witness_progression": {"modulus": self.witness_progression[0],
                                        "residue": self.witness_progression[1]},
                "grid": self.grid, "verdict": self.verdict, "delta": self.delta, "N": self.N}


def equid_test(g: TorusPolynomial, N: int, delta: float, K_max: int = 50, Q_max: int = 50,
               offsets: int = 64, seed: int = 0) -> EquidReport:
    """max |E_{n in P} e(k g(n))| over 1 <= k <= K_max and the progressions
    P = {n in [N] : n = r mod q}, q <= Q_max, with |P| >= delta N.  When q
    exceeds ``offsets`` only that many residues, drawn with a fixed seed,
    are tested."""
    if N < 1 or delta <= 0 or K_max < 1 or Q_max < 1:
        raise ValueError("parameters must be positive")
    ns = np.arange(1, N + 1)
    phi = g.phases(ns)
    rng = np.random.default_rng(seed)
    need = delta * N
    plans = []
    for q in range(1, Q_max + 1):
        sizes = np.bincount(ns % q, minlength=q)
        if sizes.min() < need:
            continue
        res = np.arange(q) if q <= offsets else np.sort(rng.choice(q, offsets, replace=False))
        plans.append((q, res, sizes[res]))
    best, wk, wp = 0.0, 0, (1, 0)
    for k in range(1, K_max + 1):
        arg = 2 * np.pi * ((k * phi) % 1.0)
        c, s = np.cos(arg), np.sin(arg)
        for q, res, sizes in plans:
            idx = ns % q
            sc = np.bincount(idx, weights=c, minlength=q)[res]
            ss = np.bincount(idx, weights=s, minlength=q)[res]
            vals = np.hypot(sc, ss) / sizes
            i = int(np.argmax(vals))
            if vals[i] > best + 1e-12:
                best, wk, wp = float(vals[i]), k, (q, int(res[i]))
    grid = {"K_max": K_max, "Q_max": Q_max, "moduli_tested": [p[0] for p in plans],
            "offsets": offsets, "seed": seed,
            "note": "finite grid of frequencies and full residue classes; "
                    "not the quantifier over all Lipschitz functions and progressions"}
    return EquidReport(min(best, 1.0), wk, wp, delta, N, grid)


def weyl_witness(g: TorusPolynomial, N: int, delta: float, c: float = None):
    """Smallest k <= ceil(delta^-c) with ||k g||_{C^inf[N]} <= delta^-c, or None.
    The exponent c defaults to 2^d."""
    c = 2.0**g.degree if c is None else c
    bound = delta**-c
    for k in range(1, math.ceil(bound) + 1):
        if smoothness_norm(g.scale(k), N) <= bound:
            return k
    return None


def witness_discrepancy(g: TorusPolynomial, N: int, k: int) -> dict:
    """|E e(g(kn))| over an initial range on which n -> g(kn) stays within
    1/8 of its starting value, the range being read off the smoothness norm
    of h(n) = g(kn) on [N/k]."""
    h = compose(g, [0, k])
    M = max(1, N // k)
    B = smoothness_norm(h, M)
    length = M if B == 0 else max(1, min(M, int(M * math.log1p(1 / (8 * B)))))
    phi = h.phases(np.arange(0, length))
    val = abs(np.exp(2j * np.pi * phi).mean())
    return {"k": k, "length": length, "norm": B, "discrepancy": float(val)}


def compose(g: TorusPolynomial, P) -> TorusPolynomial:
    """g o P for an integer polynomial P given by coefficients low to high."""
    P = [int(x) for x in P]
    while len(P) > 1 and P[-1] == 0:
        P.pop()
    beta = g.beta
    out = [0] * (g.degree * (len(P) - 1) + 1)
    power = [1]
    for j, b in enumerate(beta):
        if j:
            power = _polymul(power, P)
        if b:
            for i, c in enumerate(power):
                out[i] += b * c
    return TorusPolynomial.from_monomial(out)


def _polymul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def is_smooth(n: int, k: int) -> bool:
    if n < 1:
        raise ValueError("n must be positive")
    return n == 1 or max(factor(n)) <= k


def smooth_numbers(k: int, bound: int):
    out = [1]
    for p in [p for p in range(2, k + 1) if all(p % r for r in range(2, int(p**0.5) + 1))]:
        out += [x * p**e for x in list(out) for e in range(1, int(math.log(bound, p)) + 2) if x * p**e <= bound]
    return sorted(set(out))


def subsequence_equid_check(g: TorusPolynomial, P, N: int, delta: float, A: float = 2.0,
                            K_max: int = 50, Q_max: int = 50, smooth_k: int = None,
                            q_bound: int = 16) -> dict:
    """Test g on [N] at level delta and g o P on [N^(1/d')] at level
    delta^(1/A).  With ``smooth_k`` the leading coefficient of P must be
    smooth instead of small, and g o P is tested on the progressions
    q n + r for smooth q <= q_bound, r < q."""
    P = [int(x) for x in P]
    while len(P) > 1 and P[-1] == 0:
        P.pop()
    dp = len(P) - 1
    lead = P[-1]
    checks = {"delta_below_half": 0 < delta < 0.5, "degree_positive": dp >= 1}
    if smooth_k is None:
        checks["leading_coefficient_small"] = 0 < abs(lead) <= delta ** (-1 / A)
        checks["lower_coefficients_bounded"] = all(abs(P[i]) <= N ** ((dp - i) / dp) for i in range(dp))
    else:
        checks["leading_coefficient_smooth"] = lead > 0 and is_smooth(lead, smooth_k)
        checks["lower_coefficients_bounded"] = all(
            abs(P[i]) <= N ** ((dp - i) / dp) * lead ** (i / dp) for i in range(dp))
    report = {"preconditions": checks, "precondition_ok": all(checks.values()),
              "N": N, "delta": delta, "A": A}
    if not report["precondition_ok"]:
        report["verdict"] = "precondition-violated"
        return report
    base = equid_test(g, N, delta, K_max, Q_max)
    report["base"] = base.to_json()
    level = delta ** (1 / A)
    h = compose(g, P)
    if smooth_k is None:
        M = int(round(N ** (1 / dp)))
        while M**dp > N:
            M -= 1
        sub = equid_test(h, M, level, K_max, Q_max)
        report["subsequence"] = sub.to_json()
        ok = sub.passed
    else:
        runs = []
        for q in smooth_numbers(smooth_k, q_bound):
            M = int((N / (lead * q**dp)) ** (1 / dp))
            if M < 2:
                continue
            worst = None
            for r in range(q):
                hr = compose(h, [r, q])
                rep = equid_test(hr, M, level, K_max, Q_max)
                if worst is None or rep.discrepancy > worst.discrepancy:
                    worst = rep
            runs.append({"q": q, "length": M, "worst": worst.to_json(), "passed": worst.passed})
        report["progressions"] = runs
        ok = any(r["passed"] for r in runs)
    report["subsequence_passed"] = ok
    # the propositions predict: base passes => subsequence passes
    report["implication_holds"] = (not base.passed) or ok
    report["verdict"] = "pass" if base.passed and ok else ("consistent" if report["implication_holds"] else "fail")
    return report
