"""Both sides of the correlation asymptotic at desk scale, the zero count of
diagonal quadratic systems, Gowers norms and a second-moment diagnostic."""

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arith import NotStabilized, fraction_json, primes_upto
from .lattice import (AffineSystem, ConvexBody, count_points, finite_complexity,
                      kernel_system, rowspan_support_check, volume)
from .local import beta_p
from .qform import as_form, automorph_count, rep_table


@lru_cache(maxsize=16)
def _cached_table(abc, N):
    tab = rep_table(abc, N)
    tab.setflags(write=False)
    return tab


def table_for(f, N: int) -> np.ndarray:
    return _cached_table(as_form(f).as_tuple(), int(N))


def _value_ranges(K: ConvexBody, system: AffineSystem):
    bounds = K.bounds
    out = []
    for row, c in zip(system.linear, system.offset):
        lo = hi = c
        for a, (blo, bhi) in zip(row, bounds):
            lo += min(a * blo, a * bhi)
            hi += max(a * blo, a * bhi)
        out.append((lo, hi))
    return out


def _ceildiv(p, q):
    return -((-p) // q)


def _line_view(tab, base, step, lo, hi):
    """tab[base + step*x] for lo <= x <= hi as a strided view."""
    start = base + step * lo
    stop = base + step * hi
    if step > 0:
        return tab[start : stop + 1 : step]
    if step < 0:
        end = stop - 1
        return tab[start : (end if end >= 0 else None) : step]
    return np.full(hi - lo + 1, tab[base])


def weighted_sum(K: ConvexBody, system: AffineSystem, tables) -> int:
    """Exact sum over integer n in K of prod_i tables[i][psi_i(n)], where a
    table entry outside its index range counts as 0."""
    if K.is_empty:
        return 0
    if K.dim != system.d:
        raise ValueError("body and system have different dimensions")
    lin, off = system.linear, system.offset
    last = [row[-1] for row in lin]
    sizes = [len(t) for t in tables]
    total = 0
    for prefix, lo, hi in K.slices():
        bases = [c + sum(a * x for a, x in zip(row[:-1], prefix)) for row, c in zip(lin, off)]
        # restrict x so that every argument lies inside its table
        for b, a, n in zip(bases, last, sizes):
            if a == 0:
                if not (0 <= b < n):
                    lo, hi = 1, 0
            elif a > 0:
                lo = max(lo, _ceildiv(-b, a))
                hi = min(hi, (n - 1 - b) // a)
            else:
                lo = max(lo, _ceildiv(n - 1 - b, a))
                hi = min(hi, (-b) // a)
        if lo > hi:
            continue
        scalar = 1
        vecs = []
        for tab, b, a in zip(tables, bases, last):
            if a == 0:
                scalar *= int(tab[b])
            else:
                vecs.append(_line_view(tab, b, a, lo, hi))
            if scalar == 0:
                break
        if scalar == 0:
            continue
        length = hi - lo + 1
        if not vecs:
            total += scalar * length
            continue
        bound = length
        for tab, a in zip(tables, last):
            if a != 0:
                bound *= max(1, int(np.max(tab)))
        if len(vecs) == 1:
            total += scalar * int(vecs[0].sum(dtype=np.int64))
        elif len(vecs) == 2 and bound < 2**53:
            total += scalar * int(round(float(np.dot(vecs[0].astype(np.float64), vecs[1].astype(np.float64)))))
        elif bound < 2**62:
            prod = vecs[0].astype(np.int64)
            for v in vecs[1:]:
                prod = prod * v
            total += scalar * int(prod.sum())
        else:
            prod = vecs[0].astype(object)
            for v in vecs[1:]:
                prod = prod * v.astype(object)
            total += scalar * int(prod.sum())
    return total


def _tables_for(K, system, forms):
    forms = [as_form(f) for f in forms]
    if len(forms) != system.t:
        raise ValueError("need one form per row of the system")
    if K.is_empty:
        return forms, None
    ranges = _value_ranges(K, system)
    top = max(0, max(hi for _, hi in ranges))
    return forms, [table_for(f, top) for f in forms]


def lhs_enumerate(K: ConvexBody, system: AffineSystem, forms) -> int:
    """sum over n in K of prod_i R_{f_i}(psi_i(n))."""
    forms, tables = _tables_for(K, system, forms)
    if tables is None:
        return 0
    return weighted_sum(K, system, tables)


def lhs_direct(K: ConvexBody, system: AffineSystem, forms) -> int:
    """Table-free recomputation used as an oracle on small bodies."""
    from .lattice import integer_points
    from .qform import rep_count

    forms = [as_form(f) for f in forms]
    total = 0
    for n in integer_points(K):
        term = 1
        for f, v in zip(forms, system(n)):
            term *= rep_count(f, v)
            if term == 0:
                break
        total += term
    return total


def second_moment(K: ConvexBody, system: AffineSystem, forms):
    """(E over K of prod r_{f_i}(psi_i(n))^2, same divided by (log N)^t)."""
    forms, tables = _tables_for(K, system, forms)
    if tables is None:
        return Fraction(0), 0.0
    sq, denom = [], 1
    for f, tab in zip(forms, tables):
        k = automorph_count(f.discriminant)
        t2 = tab.astype(np.int64).copy()
        t2[0] = k  # r_f(0) = 1
        sq.append(t2 * t2)
        denom *= k * k
    npts = count_points(K)
    if npts == 0:
        return Fraction(0), 0.0
    moment = Fraction(weighted_sum(K, system, sq), denom * npts)
    N = max(max(abs(x) for x in b) for b in K.bounds)
    scale = math.log(max(N, 3)) ** system.t
    return moment, float(moment) / scale


@dataclass
class CorrelationReport:
    lhs: int
    beta_inf: float
    beta_inf_exact: dict
    local_factors: list
    truncated_product: Fraction
    rhs: float
    ratio: float
    N: int
    P_max: int
    depth: int
    tail_bracket: tuple = (1.0, 1.0)
    tail_constant: float = 0.0
    unstable: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self):
        out = {
            "N": self.N,
            "P_max": self.P_max,
            "depth": self.depth,
            "lhs": str(self.lhs) if isinstance(self.lhs, int) else self.lhs,
            "beta_inf": self.beta_inf,
            "beta_inf_exact": self.beta_inf_exact,
            "local_factors": [lf.to_json() for lf in self.local_factors],
            "truncated_product": fraction_json(self.truncated_product),
            "truncated_product_float": float(self.truncated_product),
            "tail_constant": self.tail_constant,
            "tail_bracket": list(self.tail_bracket),
            "rhs": self.rhs,
            "ratio": self.ratio,
            "not_stabilized": self.unstable,
            "note": "tolerances at desk scale are engineering targets; the asymptotic has no explicit error term",
        }
        out.update(self.extra)
        return out


def _local_product(forms, system, P_max, depth):
    factors, unstable = [], []
    prod = Fraction(1)
    for p in primes_upto(P_max):
        try:
            lf = beta_p(forms, system, p, depth)
        except NotStabilized as exc:
            unstable.append(p)
            lf = exc.best
            if lf is None:
                continue
        factors.append(lf)
        prod *= lf.value
    c = max((lf.p**2 * abs(float(lf.value) - 1) for lf in factors), default=0.0)
    lo = hi = 1.0
    for p in primes_upto(10 * P_max):
        if p > P_max:
            lo *= max(0.0, 1 - c / p**2)
            hi *= 1 + c / p**2
    return factors, prod, unstable, c, (lo, hi)


def rhs_predict(K: ConvexBody, system: AffineSystem, forms, P_max: int = 100, depth: int = 10,
                lhs=None) -> CorrelationReport:
    forms = [as_form(f) for f in forms]
    pair = system.dependent_pair()
    if pair is not None:
        raise ValueError(f"system has infinite complexity: forms {pair[0] + 1} and {pair[1] + 1} are dependent")
    vol = volume(K)
    rad = 1
    for f in forms:
        rad *= -f.discriminant
    beta_inf = float(vol.value) * (2 * math.pi) ** system.t / math.sqrt(rad)
    exact = {"volume": fraction_json(vol.value) if vol.exact else float(vol.value),
             "volume_exact": vol.exact, "two_pi_power": system.t, "sqrt_of": rad}
    if not vol.exact:
        exact["volume_bracket"] = [float(vol.lower), float(vol.upper)]
    factors, prod, unstable, c, bracket = _local_product(forms, system, P_max, depth)
    rhs = beta_inf * float(prod)
    if lhs is None:
        lhs = lhs_enumerate(K, system, forms)
    N = max(max(abs(x) for x in b) for b in K.bounds) if not K.is_empty else 0
    ratio = lhs / rhs if rhs else float("nan")
    return CorrelationReport(lhs, beta_inf, exact, factors, prod, rhs, ratio, N, P_max, depth,
                             bracket, c, unstable)


def _check_zero_system(forms, A):
    A = [[int(x) for x in row] for row in A]
    s, t = len(A), len(A[0])
    if len(forms) != t:
        raise ValueError("need one form per column of A")
    if s > t - 2:
        raise ValueError("need s <= t - 2")
    if not rowspan_support_check(A):
        raise ValueError("row span of A contains a vector with at most two nonzero entries")
    for f in forms:
        if not as_form(f).is_primitive:
            raise ValueError(f"form {f} is not primitive")
    return A


def _conv_count(A_row, tables):
    """sum over z with sum_j a_j z_j = 0 of prod_j tables[j][z_j]."""
    half = len(tables) // 2

    def poly(idx):
        # coefficients indexed by sum a_j z_j - offset
        acc, offset = np.array([1], dtype=object), 0
        for j in idx:
            a, tab = A_row[j], tables[j]
            spread = np.zeros(abs(a) * (len(tab) - 1) + 1, dtype=object)
            if a > 0:
                spread[::a] = tab.astype(object)
            else:
                spread[::-a] = tab[::-1].astype(object)
                offset += a * (len(tab) - 1)
            acc = _convolve_exact(acc, spread)
        return acc, offset

    p1, o1 = poly(range(half))
    p2, o2 = poly(range(half, len(tables)))
    # need (i + o1) + (j + o2) = 0
    total = 0
    for i in range(len(p1)):
        j = -(i + o1) - o2
        if 0 <= j < len(p2) and p1[i]:
            total += int(p1[i]) * int(p2[j])
    return total


def _convolve_exact(x, y):
    # split into 24-bit limbs so float64 convolution stays exact, then recombine
    xi = [int(v) for v in x]
    yi = [int(v) for v in y]
    if max(map(abs, xi), default=0) < 2**20 and max(map(abs, yi), default=0) < 2**20 \
            and min(len(xi), len(yi)) * 2**40 < 2**62:
        return np.convolve(np.array(xi, dtype=np.int64), np.array(yi, dtype=np.int64)).astype(object)
    return _convolve_limbs(xi, yi)


def _convolve_limbs(xi, yi):
    B = 16
    mask = (1 << B) - 1

    def limbs(v):
        out, k = [], 0
        mag = max(map(abs, v), default=0)
        while (mag >> (B * k)) > 0 or k == 0:
            out.append(np.array([(abs(a) >> (B * k)) & mask for a in v], dtype=np.int64)
                       * np.array([1 if a >= 0 else -1 for a in v], dtype=np.int64))
            k += 1
        return out

    lx, ly = limbs(xi), limbs(yi)
    res = np.zeros(len(xi) + len(yi) - 1, dtype=object)
    for i, a in enumerate(lx):
        for j, b in enumerate(ly):
            res += np.convolve(a, b).astype(object) * (1 << (B * (i + j)))
    return res


def _kernel_body(system: AffineSystem, top: int) -> ConvexBody:
    M, b = [], []
    for row, c in zip(system.linear, system.offset):
        M.append([-x for x in row])
        b.append(c)
        M.append(list(row))
        b.append(top - c)
    return ConvexBody(M=M, b=b)


@dataclass
class ZeroCount:
    total: int
    positive: int
    with_zero_coordinate: int
    N: int
    method: str

    def to_json(self):
        return {"N": self.N, "count": str(self.total), "count_positive": str(self.positive),
                "count_with_zero_coordinate": str(self.with_zero_coordinate), "method": self.method}


def zeros_count(forms, A, N: int, method: str = "auto") -> ZeroCount:
    """Number of x in Z^{2t} with H(x) <= N and sum_j a_ij f_j(x_{2j-1}, x_{2j}) = 0
    for every row i of A, where H(x)^2 = max_j f_j(x_{2j-1}, x_{2j})."""
    forms = [as_form(f) for f in forms]
    A = _check_zero_system(forms, A)
    top = N * N
    tabs = [table_for(f, top) for f in forms]
    pos = []
    for t in tabs:
        u = t.astype(np.int64).copy()
        u[0] = 0
        pos.append(u)
    if method == "auto":
        method = "convolution" if len(A) == 1 else "kernel"
    if method == "convolution":
        if len(A) != 1:
            raise ValueError("convolution path handles a single equation")
        total = _conv_count(A[0], tabs)
        positive = _conv_count(A[0], pos)
    elif method == "kernel":
        system = kernel_system(A)
        K = _kernel_body(system, top)
        total = weighted_sum(K, system, tabs)
        positive = weighted_sum(K, system, pos)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ZeroCount(total, positive, total - positive, N, method)


def zeros_count_bruteforce(forms, A, N: int) -> int:
    """Independent oracle: enumerate every pair (x_{2j-1}, x_{2j}) with
    f_j <= N^2 directly, then match the two halves of the 2t variables."""
    forms = [as_form(f) for f in forms]
    A = [[int(x) for x in row] for row in A]
    top = N * N
    values = []
    for f in forms:
        a, b, c = f.as_tuple()
        cnt = Counter()
        r = math.isqrt(4 * max(a, c) * top) + 2
        for x in range(-r, r + 1):
            for y in range(-r, r + 1):
                v = a * x * x + b * x * y + c * y * y
                if v <= top:
                    cnt[v] += 1
        values.append(cnt)
    t = len(forms)
    half = t // 2

    def sums(idx):
        acc = Counter({(0,) * len(A): 1})
        for j in idx:
            nxt = Counter()
            for key, w in acc.items():
                for v, m in values[j].items():
                    nxt[tuple(k + row[j] * v for k, row in zip(key, A))] += w * m
            acc = nxt
        return acc

    left = sums(range(half))
    right = sums(range(half, t))
    return sum(w * right.get(tuple(-k for k in key), 0) for key, w in left.items())


def alpha_infinity(A, N: int) -> int:
    """#{z in [1, N^2]^t : A z = 0}."""
    A = [[int(x) for x in row] for row in A]
    t = len(A[0])
    ones = np.ones(N * N + 1, dtype=np.int64)
    ones[0] = 0
    if len(A) == 1:
        return _conv_count(A[0], [ones] * t)
    system = kernel_system(A)
    return weighted_sum(_kernel_body(system, N * N), system, [ones] * t)


def zeros_predict(forms, A, N: int, P_max: int = 100, depth: int = 10, count=None) -> CorrelationReport:
    forms = [as_form(f) for f in forms]
    A = _check_zero_system(forms, A)
    system = kernel_system(A)
    if not finite_complexity(system):
        raise ValueError("kernel system has infinite complexity")
    a_inf = alpha_infinity(A, N)
    rad = 1
    for f in forms:
        rad *= -f.discriminant
    scale = (2 * math.pi) ** len(forms) / math.sqrt(rad)
    beta_inf = scale * a_inf
    factors, prod, unstable, c, bracket = _local_product(forms, system, P_max, depth)
    rhs = beta_inf * float(prod)
    if count is None:
        count = zeros_count(forms, A, N)
    ratio = count.total / rhs if rhs else float("nan")
    rep = CorrelationReport(count.total, beta_inf, {"alpha_inf": str(a_inf), "two_pi_power": len(forms),
                            "sqrt_of": rad}, factors, prod, rhs, ratio, N, P_max, depth, bracket, c, unstable)
    rep.extra = {"count": count.to_json(), "kernel_basis": [list(r) for r in system.linear]}
    return rep


def gowers_norm(f, s: int) -> float:
    """U^s[N] norm of a real sequence f(1..N): the average of the cube
    products over x in [N] and h in {0, ..., N-1}^s with every vertex
    x + omega.h inside [N], normalised by the same count for f = 1."""
    if np.iscomplexobj(f):
        raise TypeError("gowers_norm expects real values")
    f = np.asarray(f, dtype=np.float64)
    N = len(f)
    if s < 1:
        raise ValueError("s must be >= 1")
    if N < 2**s:
        raise ValueError(f"need N >= 2^s = {2**s}")
    total = _cube_sum(f, s)
    count = math.comb(N + s, s + 1)
    avg = total / count
    if avg < 0:
        # rounding only: each innermost sum is (S^2 + Q)/2 >= 0
        avg = 0.0
    return avg ** (1.0 / 2**s)


def _cube_sum(g, s):
    if s == 1:
        S = g.sum()
        return 0.5 * (S * S + np.dot(g, g))
    total = 0.0
    n = len(g)
    for h in range(n):
        total += _cube_sum(g[: n - h] * g[h:], s - 1)
    return total


def gowers_norm_direct(f, s: int = 2) -> float:
    """Literal sum over x and h with every vertex inside [N] (oracle)."""
    import itertools

    f = np.asarray(f, dtype=np.float64)
    N = len(f)
    total = 0.0
    count = 0
    for hs in itertools.product(range(N), repeat=s):
        span = sum(hs)
        if span >= N:
            continue
        xs = np.arange(N - span)
        prod = np.ones(len(xs))
        for omega in itertools.product((0, 1), repeat=s):
            prod = prod * f[xs + sum(w * h for w, h in zip(omega, hs))]
        total += float(prod.sum())
        count += len(xs)
    avg = total / count
    return max(avg, 0.0) ** (1.0 / 2**s)
