"""Kronecker symbols, the quadratic character of a discriminant, divisor
character sums and the explicit class-representation counts."""

import enum
import math
from fractions import Fraction

import numpy as np

from .arith import factor, prime_mask, vp
from .qform import check_discriminant

TABLE_THRESHOLD = 10**5


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n) with the usual conventions at 2, -1 and 0."""
    if n == 0:
        return 1 if abs(a) == 1 else 0
    if a % 2 == 0 and n % 2 == 0:
        return 0
    k = 1
    if n < 0:
        n = -n
        if a < 0:
            k = -k
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v % 2 and a % 8 in (3, 5):
        k = -k
    # Jacobi symbol (a/n), n odd positive
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                k = -k
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            k = -k
        a %= n
    return k if n == 1 else 0


class PrimeClass(enum.Enum):
    SPLIT = "split"
    INERT = "inert"
    RAMIFIED = "ramified"


class DiscriminantCharacter:
    """n -> (D/n) for a discriminant D; periodic mod |D| on positive n."""

    def __init__(self, D: int):
        if D == 0 or D % 4 not in (0, 1):
            raise ValueError(f"{D} is not a discriminant")
        self.D = D
        self.modulus = abs(D)
        self.table = None
        if self.modulus <= TABLE_THRESHOLD:
            self.table = np.array([kronecker(D, r) for r in range(self.modulus)], dtype=np.int8)
            # residue 0 stands for n = |D|, where the symbol is 0 unless |D| = 1
            self.table[0] = kronecker(D, self.modulus)

    def __call__(self, n: int) -> int:
        if n <= 0:
            if n == 0:
                return kronecker(self.D, 0)
            return kronecker(self.D, -1) * self(-n)
        if self.table is not None:
            return int(self.table[n % self.modulus])
        return kronecker(self.D, n)

    def values(self, N: int) -> np.ndarray:
        """chi(n) for 0 <= n <= N."""
        if self.table is None:
            out = np.array([kronecker(self.D, n) for n in range(N + 1)], dtype=np.int8)
        else:
            idx = np.arange(N + 1) % self.modulus
            out = self.table[idx].copy()
        out[0] = kronecker(self.D, 0)
        return out


_CHAR_CACHE = {}


def character(D: int) -> DiscriminantCharacter:
    ch = _CHAR_CACHE.get(D)
    if ch is None:
        ch = _CHAR_CACHE[D] = DiscriminantCharacter(D)
    return ch


def prime_class(D: int, p: int) -> PrimeClass:
    if D % p == 0:
        return PrimeClass.RAMIFIED
    return PrimeClass.SPLIT if kronecker(D, p) == 1 else PrimeClass.INERT


def divisor_char_sum(D: int, n: int) -> int:
    """sum over d | n of chi_D(d)."""
    if n <= 0:
        raise ValueError("n must be positive")
    total = 1
    for p, e in factor(n).items():
        chi = kronecker(D, p)
        if chi == 1:
            total *= e + 1
        elif chi == -1:
            total *= 1 if e % 2 == 0 else 0
    return total


def tau_D(D: int, n: int) -> int:
    """Product of (a+1) over split prime powers p^a || n."""
    if n <= 0:
        raise ValueError("n must be positive")
    total = 1
    for p, e in factor(n).items():
        if kronecker(D, p) == 1:
            total *= e + 1
    return total


def divisor_char_sum_table(D: int, N: int) -> np.ndarray:
    """divisor_char_sum(D, n) for 0 <= n <= N (entry 0 is unused and set to 0)."""
    chi = character(D).values(N)
    out = np.zeros(N + 1, dtype=np.int64)
    for d in range(1, N + 1):
        c = chi[d]
        if c:
            out[d::d] += c
    return out


def tau_D_table(D: int, N: int) -> np.ndarray:
    """tau_D(n) for 0 <= n <= N (entry 0 set to 0)."""
    out = np.ones(N + 1, dtype=np.int64)
    out[0] = 0
    chi = character(D)
    for p in np.flatnonzero(prime_mask(N)).tolist():
        if chi(p) != 1:
            continue
        idx = np.arange(p, N + 1, p)
        v = np.ones(len(idx), dtype=np.int64)
        step = p
        while step * p <= N:
            v[step - 1 :: step] += 1
            step *= p
        out[idx] *= v + 1
    return out


def _local_root_count(D: int, p: int, e: int, m_divisible: bool) -> int:
    """Solutions x mod p^e of x^2 = D (mod p^e); when p | m also require that
    the form (m, x, (x^2-D)/4m) stays primitive at p."""
    q = p**e
    xs = np.arange(q, dtype=object) if q > 2**20 else np.arange(q, dtype=np.int64)
    sq = (xs * xs - D) % q
    ok = sq == 0
    if m_divisible:
        # primitive at p fails iff p | x and x^2 = D mod p^(e+1)
        deep = ((xs * xs - D) % (q * p)) == 0
        ok &= ~((xs % p == 0) & deep)
    return int(np.count_nonzero(ok))


def proper_class_rep_count(D: int, m: int) -> Fraction:
    """Weighted number of proper representations of m by the classes of
    discriminant D (proper representations divided by k(D)).

    Computed as half the number of x mod 4m with x^2 = D (mod 4m) whose
    associated form (m, x, (x^2-D)/4m) is primitive, prime by prime."""
    check_discriminant(D)
    if m <= 0:
        raise ValueError("m must be positive")
    total = 1
    for p, e in factor(4 * m).items():
        if p != 2 and D % p:
            total *= 1 + kronecker(D, p)
            continue
        # the count at p is constant once e exceeds v_p(D) + 3
        e = min(e, vp(D, p) + 4)
        total *= _local_root_count(D, p, e, m % p == 0)
    return Fraction(total, 2)


def proper_class_rep_count_bruteforce(D: int, m: int) -> Fraction:
    q = 4 * m
    count = 0
    for x in range(q):
        if (x * x - D) % q:
            continue
        c = (x * x - D) // q
        if math.gcd(math.gcd(m, x), c) == 1:
            count += 1
    return Fraction(count, 2)


def r_D_formula(D: int, n: int) -> Fraction:
    """sum over delta^2 | n of proper_class_rep_count(D, n / delta^2)."""
    if n <= 0:
        raise ValueError("n must be positive")
    total = Fraction(0)
    delta = 1
    while delta * delta <= n:
        if n % (delta * delta) == 0:
            total += proper_class_rep_count(D, n // (delta * delta))
        delta += 1
    return total
