"""Positive definite binary quadratic forms a*x^2 + b*x*y + c*y^2.

Reduction, class and genus enumeration, and exact representation counts,
both pointwise and as a full table over [0, N].
"""

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arith import check_alloc, factor

MAX_ABS_DISCRIMINANT = 10**6
TABLE_MAGIC = b"QFRT"


@dataclass(frozen=True)
class QuadraticForm:
    a: int
    b: int
    c: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c):
            if not isinstance(v, (int, np.integer)):
                raise TypeError("form coefficients must be integers")
        if self.a <= 0 or self.b * self.b - 4 * self.a * self.c >= 0:
            raise ValueError(f"form {self.as_tuple()} is not positive definite")

    @classmethod
    def parse(cls, text: str) -> "QuadraticForm":
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 3:
            raise ValueError(f"form literal {text!r} must look like 'a,b,c'")
        try:
            a, b, c = (int(p) for p in parts)
        except ValueError:
            raise ValueError(f"form literal {text!r} has a non-integer entry") from None
        return cls(a, b, c)

    def as_tuple(self):
        return (int(self.a), int(self.b), int(self.c))

    def __str__(self):
        return "%d,%d,%d" % self.as_tuple()

    def __call__(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    @property
    def is_primitive(self) -> bool:
        return math.gcd(math.gcd(self.a, self.b), self.c) == 1

    @property
    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        if not (abs(b) <= a <= c):
            return False
        if (abs(b) == a or a == c) and b < 0:
            return False
        return True


def as_form(f) -> QuadraticForm:
    if isinstance(f, QuadraticForm):
        return f
    if isinstance(f, str):
        return QuadraticForm.parse(f)
    return QuadraticForm(*(int(v) for v in f))


def discriminant(f) -> int:
    return as_form(f).discriminant


def check_discriminant(D: int):
    if D >= 0 or D % 4 not in (0, 1):
        raise ValueError(f"{D} is not a negative discriminant (need D < 0, D = 0,1 mod 4)")


def automorph_count(D: int) -> int:
    check_discriminant(D)
    if D == -3:
        return 6
    if D == -4:
        return 4
    return 2


def reduce(f) -> QuadraticForm:
    f = as_form(f)
    a, b, c = f.as_tuple()
    while True:
        if not (-a < b <= a):
            # x -> x + k*y moves b by 2ak
            k = (a - b) // (2 * a)
            c = a * k * k + b * k + c
            b = b + 2 * a * k
        if a > c:
            a, b, c = c, -b, a
            continue
        if a == c and b < 0:
            b = -b
        return QuadraticForm(a, b, c)


def are_equivalent(f, g) -> bool:
    return reduce(f) == reduce(g)


@dataclass(frozen=True)
class Genus:
    discriminant: int
    classes: tuple
    residues: frozenset
    signature: tuple

    def __len__(self):
        return len(self.classes)


@dataclass(frozen=True)
class FormClassSet:
    discriminant: int
    classes: tuple
    genera: tuple

    @property
    def class_number(self) -> int:
        return len(self.classes)

    def genus_of(self, f) -> Genus:
        g = reduce(f)
        for genus in self.genera:
            if g in genus.classes:
                return genus
        raise KeyError(f"{g} has discriminant {g.discriminant}, not {self.discriminant}")


def _kron_small(m: int, p: int) -> int:
    # Legendre symbol for odd prime p
    r = pow(m % p, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


def genus_characters(D: int):
    """The assigned characters of discriminant D, as functions on integers prime to D."""
    chars = []
    for p in sorted(factor(-D)):
        if p != 2:
            chars.append(("p%d" % p, lambda m, p=p: _kron_small(m, p)))

    def delta(m):
        return 1 if m % 4 == 1 else -1

    def eps(m):
        return 1 if m % 8 in (1, 7) else -1

    if D % 4 == 0:
        n = -D // 4
        if n % 4 == 1:
            chars.append(("delta", delta))
        elif n % 8 == 2:
            chars.append(("delta*eps", lambda m: delta(m) * eps(m)))
        elif n % 8 == 6:
            chars.append(("eps", eps))
        elif n % 8 == 4:
            chars.append(("delta", delta))
        elif n % 8 == 0:
            chars.append(("delta", delta))
            chars.append(("eps", eps))
    return chars


def _coprime_value(f: QuadraticForm, D: int) -> int:
    bound = 1
    while True:
        for x in range(-bound, bound + 1):
            for y in range(-bound, bound + 1):
                v = f(x, y)
                if v > 0 and math.gcd(v, D) == 1:
                    return v
        bound *= 2


@lru_cache(maxsize=64)
def reduced_forms(D: int) -> FormClassSet:
    check_discriminant(D)
    if -D > MAX_ABS_DISCRIMINANT:
        raise ValueError(f"|D| = {-D} exceeds the configured bound {MAX_ABS_DISCRIMINANT}")
    classes = []
    amax = math.isqrt(-D // 3)
    for a in range(1, amax + 1):
        for b in range(-a + 1, a + 1):
            if (b - D) % 2:
                continue
            num = b * b - D
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (a == c and b < 0):
                continue
            if math.gcd(math.gcd(a, b), c) != 1:
                continue
            classes.append(QuadraticForm(a, b, c))
    chars = genus_characters(D)
    groups = {}
    for f in classes:
        m = _coprime_value(f, D)
        sig = tuple(ch(m) for _, ch in chars)
        groups.setdefault(sig, []).append(f)
    modulus = -D
    units = [u for u in range(1, modulus + 1) if math.gcd(u, modulus) == 1]
    genera = []
    for sig in sorted(groups, reverse=True):
        res = frozenset(u % modulus for u in units if tuple(ch(u) for _, ch in chars) == sig)
        genera.append(Genus(D, tuple(groups[sig]), res, sig))
    return FormClassSet(D, tuple(classes), tuple(genera))


def rep_count(f, n: int) -> int:
    """Number of integer pairs (x, y) with f(x, y) = n."""
    f = as_form(f)
    if n < 0:
        return 0
    if n == 0:
        return 1
    a, b, c = f.as_tuple()
    D = f.discriminant
    total = 0
    ymax = math.isqrt(4 * a * n // -D)
    for y in range(-ymax, ymax + 1):
        disc = 4 * a * n + D * y * y
        if disc < 0:
            continue
        s = math.isqrt(disc)
        if s * s != disc:
            continue
        for num in {-b * y + s, -b * y - s}:
            if num % (2 * a) == 0:
                total += 1
    return total


def _row_span(a, b, D, y, bound):
    """x-range [lo, hi] with (2ax + by)^2 <= 4a*bound + D*y^2, or None."""
    disc = 4 * a * bound + D * y * y
    if disc < 0:
        return None
    s = math.isqrt(disc)
    lo = -((b * y + s) // (2 * a))
    hi = (s - b * y) // (2 * a)
    if lo > hi:
        return None
    return lo, hi


def rep_table(f, N: int, start: int = 0, dtype=np.int64) -> np.ndarray:
    """R_f(n) for start <= n <= N as an array indexed by n - start."""
    f = as_form(f)
    if N < 0:
        raise ValueError("N must be >= 0")
    start = max(0, start)
    if start > N:
        return np.zeros(0, dtype=dtype)
    check_alloc((N - start + 1) * np.dtype(dtype).itemsize, "representation table")
    a, b, c = f.as_tuple()
    D = f.discriminant
    size = N - start + 1
    out = np.zeros(size, dtype=np.int64)
    pending, pending_len = [], 0

    def flush():
        nonlocal pending, pending_len
        if pending:
            out[:] += np.bincount(np.concatenate(pending), minlength=size)
        pending, pending_len = [], 0

    ymax = math.isqrt(4 * a * N // -D)
    for y in range(-ymax, ymax + 1):
        span = _row_span(a, b, D, y, N)
        if span is None:
            continue
        lo, hi = span
        pieces = [(lo, hi)]
        if start > 0:
            inner = _row_span(a, b, D, y, start - 1)
            if inner is not None:
                pieces = [(lo, inner[0] - 1), (inner[1] + 1, hi)]
        for plo, phi in pieces:
            if plo > phi:
                continue
            xs = np.arange(plo, phi + 1, dtype=np.int64)
            vals = (a * xs + b * y) * xs + c * y * y - start
            pending.append(vals)
            pending_len += len(vals)
            if pending_len > (1 << 22):
                flush()
    flush()
    return out.astype(dtype, copy=False)


def rep_table_blocked(f, N: int, block: int = 1 << 22, dtype=np.int32) -> np.ndarray:
    """Same values as rep_table but built window by window to bound temporaries."""
    f = as_form(f)
    check_alloc((N + 1) * np.dtype(dtype).itemsize, "representation table")
    out = np.empty(N + 1, dtype=dtype)
    lo = 0
    while lo <= N:
        hi = min(N, lo + block - 1)
        out[lo : hi + 1] = rep_table(f, hi, start=lo, dtype=np.int64)
        lo = hi + 1
    return out


def r_f(f, n: int) -> Fraction:
    f = as_form(f)
    if n < 0:
        return Fraction(0)
    if n == 0:
        # convention: r_f(0) = 1 even though R_f(0)/k(D) differs
        return Fraction(1)
    return Fraction(rep_count(f, n), automorph_count(f.discriminant))


def r_D(D: int, n: int) -> Fraction:
    return sum((r_f(g, n) for g in reduced_forms(D).classes), Fraction(0))


def r_g(genus: Genus, n: int) -> Fraction:
    return sum((r_f(g, n) for g in genus.classes), Fraction(0)) / len(genus.classes)


def write_table_binary(path, f, table):
    f = as_form(f)
    N = len(table) - 1
    arr = np.asarray(table)
    if arr.size and (arr.max() > 2**31 - 1 or arr.min() < 0):
        raise ValueError("table values do not fit in 32 bits")
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<qqqq", N, *f.as_tuple()))
        fh.write(arr.astype("<u4").tobytes())


def read_table_binary(path):
    with open(path, "rb") as fh:
        if fh.read(4) != TABLE_MAGIC:
            raise ValueError(f"{path} is not a representation table (bad magic)")
        N, a, b, c = struct.unpack("<qqqq", fh.read(32))
        data = np.frombuffer(fh.read(), dtype="<u4")
    if data.size != N + 1:
        raise ValueError(f"{path}: expected {N + 1} counts, found {data.size}")
    return QuadraticForm(a, b, c), data.astype(np.int64)


def write_table_csv(path_or_file, table, start=0):
    close = False
    fh = path_or_file
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        fh = open(path_or_file, "w", newline="")
        close = True
    try:
        fh.write("n,value\n")
        for i, v in enumerate(np.asarray(table).tolist()):
            fh.write(f"{start + i},{v}\n")
    finally:
        if close:
            fh.close()
