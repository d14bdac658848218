"""Affine-linear systems, convex bodies and integer lattices."""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def _ext_gcd(a, b):
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def rank_q(rows) -> int:
    """Rank over the rationals."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(len(m)):
            if i != rank and m[i][col] != 0:
                f = m[i][col] / m[rank][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


def rank_mod_p(rows, p: int) -> int:
    m = [[x % p for x in r] for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][col], -1, p)
        for i in range(len(m)):
            if i != rank and m[i][col]:
                f = m[i][col] * inv % p
                m[i] = [(a - f * b) % p for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


@dataclass(frozen=True)
class AffineSystem:
    """t affine-linear forms psi_i(n) = offset_i + linear_i . n on Z^d."""

    linear: tuple
    offset: tuple

    def __init__(self, linear, offset=None):
        lin = tuple(tuple(int(x) for x in row) for row in linear)
        if not lin:
            raise ValueError("system needs at least one form")
        d = len(lin[0])
        if any(len(r) != d for r in lin):
            raise ValueError("all rows of the linear part need the same length")
        off = tuple(int(x) for x in offset) if offset is not None else (0,) * len(lin)
        if len(off) != len(lin):
            raise ValueError("offset length must equal the number of forms")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "offset", off)

    @classmethod
    def parse(cls, text: str) -> "AffineSystem":
        """Rows 'c1 c2 ... cd : c0' separated by ';' or newlines."""
        rows, offs = [], []
        for k, chunk in enumerate(t for t in text.replace("\n", ";").split(";") if t.strip()):
            lin, _, const = chunk.partition(":")
            try:
                rows.append([int(v) for v in lin.split()])
                offs.append(int(const) if const.strip() else 0)
            except ValueError:
                raise ValueError(f"row {k + 1} of system {text!r} is not 'c1 ... cd : c0'") from None
        return cls(rows, offs)

    @property
    def t(self) -> int:
        return len(self.linear)

    @property
    def d(self) -> int:
        return len(self.linear[0])

    @property
    def L(self) -> int:
        return max(abs(x) for row in self.linear + (self.offset,) for x in row)

    @property
    def is_homogeneous(self) -> bool:
        return not any(self.offset)

    def __call__(self, n):
        return tuple(c + sum(a * x for a, x in zip(row, n)) for row, c in zip(self.linear, self.offset))

    def matrix(self) -> np.ndarray:
        return np.array(self.linear, dtype=np.int64)

    def dependent_pair(self):
        """First pair (i, j) of proportional linear parts, or None."""
        for i, j in itertools.combinations(range(self.t), 2):
            if rank_q([self.linear[i], self.linear[j]]) < 2:
                return (i, j)
        if self.t == 1 and not any(self.linear[0]):
            return (0, 0)
        return None

    def __str__(self):
        return "; ".join(" ".join(map(str, r)) + " : " + str(c) for r, c in zip(self.linear, self.offset))


def finite_complexity(system: AffineSystem) -> bool:
    return system.dependent_pair() is None


@dataclass(frozen=True)
class Volume:
    value: object
    lower: object
    upper: object
    exact: bool

    def __float__(self):
        return float(self.value)


class ConvexBody:
    """Either an integer box prod [lo_i, hi_i] or a polytope {x : Mx <= b}."""

    def __init__(self, box=None, M=None, b=None):
        if box is not None:
            self.kind = "box"
            self.bounds = tuple((int(lo), int(hi)) for lo, hi in box)
            self.M = self.b = None
            self.dim = len(self.bounds)
        else:
            self.kind = "polytope"
            self.M = tuple(tuple(Fraction(x) for x in row) for row in M)
            self.b = tuple(Fraction(x) for x in b)
            if len(self.M) != len(self.b):
                raise ValueError("M and b must have the same number of rows")
            self.dim = len(self.M[0])
            self.bounds = self._bounding_box()

    @classmethod
    def from_json(cls, spec) -> "ConvexBody":
        if "box" in spec:
            return cls(box=spec["box"])
        if "ineq" in spec:
            return cls(M=spec["ineq"]["M"], b=spec["ineq"]["b"])
        raise ValueError("body must be {'box': ...} or {'ineq': {'M': ..., 'b': ...}}")

    def to_json(self):
        if self.kind == "box":
            return {"box": [list(b) for b in self.bounds]}
        return {"ineq": {"M": [[str(x) for x in r] for r in self.M], "b": [str(x) for x in self.b]}}

    def _bounding_box(self, slack=None):
        from scipy.optimize import linprog

        A = np.array([[float(x) for x in row] for row in self.M])
        bb = np.array([float(x) for x in self.b])
        if slack is not None:
            bb = bb + np.array([float(x) for x in slack])
        out = []
        for i in range(self.dim):
            c = np.zeros(self.dim)
            c[i] = 1
            lo = linprog(c, A_ub=A, b_ub=bb, bounds=[(None, None)] * self.dim, method="highs")
            hi = linprog(-c, A_ub=A, b_ub=bb, bounds=[(None, None)] * self.dim, method="highs")
            if lo.status == 2 or hi.status == 2:
                return None
            if lo.status != 0 or hi.status != 0:
                raise ValueError("polytope is unbounded")
            # LP optimum is a float; widen by one and let the exact test decide
            out.append((math.floor(lo.fun) - 1, math.ceil(-hi.fun) + 1))
        return tuple(out)

    @property
    def is_empty(self):
        if self.bounds is None:
            return True
        return any(lo > hi for lo, hi in self.bounds)

    def contains(self, x) -> bool:
        if self.kind == "box":
            return all(lo <= v <= hi for v, (lo, hi) in zip(x, self.bounds))
        return all(sum(a * v for a, v in zip(row, x)) <= c for row, c in zip(self.M, self.b))

    def last_axis_range(self, prefix, slack=None):
        """Integer interval for the last coordinate given the others, or None."""
        if self.kind == "box":
            if not all(lo <= v <= hi for v, (lo, hi) in zip(prefix, self.bounds)):
                return None
            lo, hi = self.bounds[-1]
            return (lo, hi) if lo <= hi else None
        lo, hi = -math.inf, math.inf
        for k, (row, c) in enumerate(zip(self.M, self.b)):
            rest = c - sum(a * v for a, v in zip(row[:-1], prefix))
            if slack is not None:
                rest += slack[k]
            a = row[-1]
            if a > 0:
                hi = min(hi, math.floor(rest / a))
            elif a < 0:
                lo = max(lo, math.ceil(rest / a))
            elif rest < 0:
                return None
        if lo > hi or lo == -math.inf or hi == math.inf:
            return None
        return int(lo), int(hi)

    def slices(self, slack=None):
        """Yield (prefix, lo, hi): integer points are prefix + (x,) with lo <= x <= hi."""
        bounds = self.bounds
        if slack is not None and self.kind == "polytope":
            bounds = self._bounding_box(slack)
        if bounds is None or any(lo > hi for lo, hi in bounds):
            return
        ranges = [range(lo, hi + 1) for lo, hi in bounds[:-1]]
        for prefix in itertools.product(*ranges):
            r = self.last_axis_range(prefix, slack)
            if r is not None:
                yield prefix, r[0], r[1]


def integer_points(K: ConvexBody):
    """Integer points of K, each once, in lexicographic order."""
    for prefix, lo, hi in K.slices():
        for x in range(lo, hi + 1):
            yield prefix + (x,)


def count_points(K: ConvexBody, slack=None) -> int:
    return sum(hi - lo + 1 for _, lo, hi in K.slices(slack))


def volume(K: ConvexBody) -> Volume:
    if K.kind == "box":
        v = Fraction(1)
        for lo, hi in K.bounds:
            v *= max(0, hi - lo)
        return Volume(v, v, v, True)
    if K.is_empty:
        return Volume(Fraction(0), Fraction(0), Fraction(0), True)
    # unit cubes around lattice points: inner ones lie in K, outer ones cover K
    half = [sum(abs(a) for a in row) / 2 for row in K.M]
    inner = count_points(K, [-h for h in half])
    outer = count_points(K, half)
    return Volume(count_points(K), inner, outer, False)


def kernel_lattice_basis(A):
    """Basis of {z in Z^t : A z = 0} for a full-rank integer matrix A (s x t).

    Column operations with extended gcds bring A to lower echelon form
    B = A U with U unimodular; the trailing t - s columns of U span the kernel."""
    B = [[int(x) for x in row] for row in A]
    s, t = len(B), len(B[0])
    if rank_q(B) < s:
        raise ValueError("matrix A is rank deficient")
    U = [[int(i == j) for j in range(t)] for i in range(t)]

    def colop(c, j, x, y, u, v):
        # (col_c, col_j) <- (x col_c + y col_j, u col_c + v col_j)
        for M in (B, U):
            for row in M:
                a, b = row[c], row[j]
                row[c], row[j] = x * a + y * b, u * a + v * b

    for r in range(s):
        for j in range(r + 1, t):
            a, b = B[r][r], B[r][j]
            if b == 0:
                continue
            g, x, y = _ext_gcd(a, b)
            colop(r, j, x, y, -b // g, a // g)
        if B[r][r] == 0:
            raise ValueError("matrix A is rank deficient")
    basis = [tuple(U[i][j] for i in range(t)) for j in range(s, t)]
    return basis


def kernel_system(A) -> AffineSystem:
    """The homogeneous system z = sum_k n_k v_k parametrising ker A."""
    basis = kernel_lattice_basis(A)
    t = len(basis[0])
    return AffineSystem([[v[i] for v in basis] for i in range(t)])


def rowspan_support_check(A) -> bool:
    """True iff no nonzero rational combination of the rows of A has at most
    two nonzero entries."""
    rows = [[int(x) for x in r] for r in A]
    s, t = len(rows), len(rows[0])
    if rank_q(rows) < s:
        return False
    for j, k in itertools.combinations(range(t), 2):
        rest = [[r[i] for i in range(t) if i not in (j, k)] for r in rows]
        if rank_q(rest) < s:
            return False
    return True


def count_solutions_mod_prime_power(A, b, p: int, k: int) -> int:
    """Number of n in (Z/p^k)^d with A n = b (mod p^k).

    Elimination over Z/p^k pivoting on entries of least p-adic valuation."""
    q = p**k
    M = [[x % q for x in row] for row in A]
    rhs = [x % q for x in b]
    d = len(M[0]) if M else 0
    live_rows = list(range(len(M)))
    live_cols = list(range(d))
    count = 1
    while True:
        best = None
        for i in live_rows:
            for j in live_cols:
                x = M[i][j]
                if x:
                    v = _val(x, p)
                    if best is None or v < best[0]:
                        best = (v, i, j)
                        if v == 0:
                            break
            if best is not None and best[0] == 0:
                break
        if best is None:
            break
        v, i, j = best
        pv = p**v
        inv = pow(M[i][j] // pv, -1, q)
        for i2 in live_rows:
            if i2 != i and M[i2][j]:
                f = (M[i2][j] // pv) * inv % q
                M[i2] = [(a - f * c) % q for a, c in zip(M[i2], M[i])]
                rhs[i2] = (rhs[i2] - f * rhs[i]) % q
        if rhs[i] % pv:
            return 0
        count *= pv
        live_rows.remove(i)
        live_cols.remove(j)
    if any(rhs[i] for i in live_rows):
        return 0
    return count * q ** len(live_cols)


def _val(x, p):
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v
