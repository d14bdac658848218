"""Small arithmetic helpers shared by the other modules: sieves, factoring,
resource guards and exception types."""

import math
import os
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy import factorint

DEFAULT_MAX_MEMORY = 2 * 1024**3


class ResourceLimitError(RuntimeError):
    """Raised when a computation would allocate more than the configured limit."""


class NotStabilized(ArithmeticError):
    """A local limit could not be pinned down within the allowed depth.

    ``best`` holds the last value computed (a LocalFactor)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def max_memory() -> int:
    raw = os.environ.get("QCORR_MAX_MEMORY")
    if not raw:
        return DEFAULT_MAX_MEMORY
    raw = raw.strip().upper()
    scale = 1
    for suffix, mult in (("K", 1024), ("M", 1024**2), ("G", 1024**3)):
        if raw.endswith(suffix):
            raw, scale = raw[:-1], mult
            break
    return int(float(raw) * scale)


def check_alloc(nbytes: int, what: str = "table"):
    limit = max_memory()
    if nbytes > limit:
        raise ResourceLimitError(
            f"{what} needs {nbytes} bytes, limit is {limit} (set QCORR_MAX_MEMORY)"
        )


def factor(n: int) -> dict:
    if n < 1:
        raise ValueError("factor expects n >= 1")
    return {int(p): int(e) for p, e in factorint(n).items()}


def vp(n: int, p: int) -> int:
    """p-adic valuation; vp(0) is reported as a large sentinel."""
    if n == 0:
        return 10**9
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@lru_cache(maxsize=8)
def _prime_list(limit: int):
    return tuple(int(p) for p in np.flatnonzero(prime_mask(limit)))


def primes_upto(limit: int) -> list:
    return list(_prime_list(int(limit)))


def prime_mask(limit: int) -> np.ndarray:
    limit = int(limit)
    mask = np.ones(max(limit + 1, 2), dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return mask[: limit + 1]


def spf_table(limit: int) -> np.ndarray:
    """Smallest prime factor of every n <= limit (spf[0]=0, spf[1]=1)."""
    check_alloc(4 * (limit + 1), "smallest-prime-factor sieve")
    spf = np.zeros(limit + 1, dtype=np.int32)
    if limit >= 1:
        spf[1] = 1
    for p in range(2, limit + 1):
        if p * p > limit:
            break
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
            spf[p] = p
    rest = spf == 0
    rest[:2] = False
    spf[rest] = np.flatnonzero(rest)
    return spf


def factor_with_spf(n: int, spf) -> dict:
    out = {}
    while n > 1:
        p = int(spf[n])
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out[p] = e
    return out


def fraction_json(x) -> dict:
    x = Fraction(x)
    return {"num": str(x.numerator), "den": str(x.denominator)}


def lcm_all(values) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out
