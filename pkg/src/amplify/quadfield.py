"""Real quadratic fields Q(sqrt D): units, orders, ideal counts and norm-form scans.

Elements of the maximal order are stored in half-integer coordinates
``(A, B)`` meaning ``(A + B sqrt(D0)) / 2`` where D0 is the squarefree part of
D.  All comparisons between quadratic irrationals are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np
from sympy import factorint

FACTOR_LIMIT = 10**12
SCAN_LIMIT = 10**7


class FactorizationError(ValueError):
    pass


def is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def factor(m: int) -> dict[int, int]:
    if m < 1:
        raise ValueError("factor expects a positive integer")
    if m > FACTOR_LIMIT:
        raise FactorizationError(f"{m} exceeds the factorization limit {FACTOR_LIMIT}")
    return {int(p): int(e) for p, e in factorint(m).items()}


def squarefree_decomposition(D: int) -> tuple[int, int]:
    """Return (D0, c) with D = c^2 D0 and D0 squarefree."""
    D0, c = 1, 1
    for p, e in factor(D).items():
        c *= p ** (e // 2)
        if e % 2:
            D0 *= p
    return D0, c


def divisor_count(m: int) -> int:
    return math.prod(e + 1 for e in factor(m).values())


def kronecker(d: int, p: int) -> int:
    """Kronecker symbol (d / p) for a prime p."""
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    r = d % p
    if r == 0:
        return 0
    return 1 if pow(r, (p - 1) // 2, p) == 1 else -1


def quad_sign(a, b, D: int) -> int:
    """Exact sign of a + b sqrt(D) for rationals a, b and D > 0 non-square."""
    sa = (a > 0) - (a < 0)
    sb = (b > 0) - (b < 0)
    if sa == sb or sb == 0:
        return sa
    if sa == 0:
        return sb
    # opposite signs: compare a^2 with D b^2
    diff = a * a - D * b * b
    return sa if diff > 0 else sb


def _mul(x: tuple, y: tuple, D0: int) -> tuple:
    """Product in half-integer coordinates."""
    A1, B1 = x
    A2, B2 = y
    A = A1 * A2 + D0 * B1 * B2
    B = A1 * B2 + A2 * B1
    return (A // 2, B // 2) if A % 2 == 0 and B % 2 == 0 else (Fraction(A, 2), Fraction(B, 2))


def _pell(D: int) -> tuple[int, int]:
    """Least x + y sqrt(D) > 1 with x^2 - D y^2 = +-1, via the continued fraction of sqrt(D)."""
    a0 = math.isqrt(D)
    m, d, a = 0, 1, a0
    h1, h2 = 1, 0
    k1, k2 = 0, 1
    while True:
        h, k = a * h1 + h2, a * k1 + k2
        if h * h - D * k * k in (1, -1):
            return h, k
        h2, h1 = h1, h
        k2, k1 = k1, k
        m = d * a - m
        d = (D - m * m) // d
        a = (a0 + m) // d


def pell_bruteforce(D: int, limit: int = 10**4) -> tuple[int, int]:
    """Scan y = 1..limit for the least solution of x^2 - D y^2 = +-1."""
    for y in range(1, limit + 1):
        for s in (-1, 1):
            x2 = D * y * y + s
            if is_square(x2):
                return math.isqrt(x2), y
    raise ValueError(f"no Pell solution with y <= {limit}")


def _icbrt(n: int) -> int:
    lo, hi = 0, 1 << ((n.bit_length() + 2) // 3 + 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid**3 <= n:
            lo = mid
        else:
            hi = mid - 1
    return lo


@dataclass(frozen=True)
class UnitData:
    """A fundamental unit t + u sqrt(D) of some order, with its logs.

    ``t``, ``u`` are expressed against sqrt(D) for the D the field was built with.
    """

    D: int
    t: Fraction
    u: Fraction
    norm: int
    regulator: float
    totally_positive_generator_log: float
    conductor: int = 1

    def __post_init__(self):
        if self.t * self.t - self.D * self.u * self.u != self.norm:
            raise ValueError("unit does not satisfy its Pell equation")

    @property
    def fundamental_unit(self) -> tuple[Fraction, Fraction]:
        return self.t, self.u


@dataclass(frozen=True)
class OrderData:
    conductor: int
    discriminant: int


class QuadraticField:
    """Q(sqrt D) for a positive non-square D."""

    def __init__(self, D: int):
        D = int(D)
        if D <= 0 or is_square(D):
            raise ValueError(f"D={D} must be a positive non-square")
        self.D = D
        self.D0, self.c = squarefree_decomposition(D)
        self.discriminant = self.D0 if self.D0 % 4 == 1 else 4 * self.D0

    def __repr__(self):
        return f"QuadraticField({self.D})"

    def splitting(self, p: int) -> str:
        return {1: "split", -1: "inert", 0: "ramified"}[kronecker(self.discriminant, p)]

    def splitting_character(self, p: int) -> int:
        return kronecker(self.discriminant, p)

    @property
    def monogenic_conductor(self) -> int:
        """Conductor of Z[sqrt D] inside the maximal order."""
        return 2 * self.c if self.D0 % 4 == 1 else self.c

    def order(self, conductor: int = 1) -> "QuadOrder":
        return QuadOrder(self, conductor)

    @cached_property
    def maximal(self) -> "QuadOrder":
        return QuadOrder(self, 1)

    @cached_property
    def fundamental_unit_coords(self) -> tuple[int, int]:
        """Fundamental unit of the maximal order in half-integer coordinates."""
        x, y = _pell(self.D0)
        if self.D0 % 4 != 1:
            return 2 * x, 2 * y
        # Z[sqrt D0] has index dividing 3 in the unit group of the maximal order
        N1 = x * x - self.D0 * y * y
        guess = _icbrt(2 * x)
        for A in range(max(1, guess - 2), guess + 3):
            for N in (N1,):
                rest = A * A - 4 * N
                if rest > 0 and rest % self.D0 == 0 and is_square(rest // self.D0):
                    B = math.isqrt(rest // self.D0)
                    cube = _mul(_mul((A, B), (A, B), self.D0), (A, B), self.D0)
                    if cube == (2 * x, 2 * y):
                        return A, B
        return 2 * x, 2 * y

    def sigma(self, x: tuple) -> float:
        A, B = x
        return (float(A) + float(B) * math.sqrt(self.D0)) / 2

    def norm(self, x: tuple):
        A, B = x
        return Fraction(A * A - self.D0 * B * B, 4) if isinstance(A, Fraction) else (A * A - self.D0 * B * B) // 4

    def log_sigma(self, x: tuple) -> float:
        A, B = x
        # A and B can be huge; log of the sum of two positive big numbers
        if A > 0 and B > 0:
            big = max(A, B)
            return math.log(big) + math.log(A / big + B / big * math.sqrt(self.D0)) - math.log(2)
        return math.log(abs(self.sigma(x)))


def fundamental_unit(D: int) -> UnitData:
    """Fundamental unit of the maximal order of Q(sqrt D)."""
    return QuadraticField(D).maximal.unit_data


class QuadOrder:
    """The order Z + f O_K of conductor f."""

    def __init__(self, K: QuadraticField, conductor: int = 1):
        if conductor < 1:
            raise ValueError("conductor must be positive")
        self.K = K
        self.f = int(conductor)

    def __repr__(self):
        return f"QuadOrder(D={self.K.D}, f={self.f})"

    @property
    def data(self) -> OrderData:
        return OrderData(self.f, self.f * self.f * self.K.discriminant)

    def contains(self, x: tuple) -> bool:
        A, B = x
        if isinstance(A, Fraction) or isinstance(B, Fraction):
            if A.denominator != 1 or B.denominator != 1:
                return False
            A, B = int(A), int(B)
        D0, f = self.K.D0, self.f
        if D0 % 4 == 1:
            return (A - B) % 2 == 0 and B % f == 0 and (f % 2 == 1 or A % 2 == 0)
        return A % 2 == 0 and B % (2 * f) == 0

    @cached_property
    def unit_coords(self) -> tuple[int, int]:
        """Least power of the maximal-order unit lying in this order."""
        eps = self.K.fundamental_unit_coords
        x = eps
        for _ in range(max(1, 6 * self.f * self.f)):
            if self.contains(x):
                return (int(x[0]), int(x[1]))
            x = _mul(x, eps, self.K.D0)
        raise ArithmeticError(f"no unit power found in the order of conductor {self.f}")

    @cached_property
    def unit_norm(self) -> int:
        return int(self.K.norm(self.unit_coords))

    @cached_property
    def norm_one_unit(self) -> tuple[int, int]:
        u = self.unit_coords
        return u if self.unit_norm == 1 else _mul(u, u, self.K.D0)

    @cached_property
    def unit_data(self) -> UnitData:
        A, B = self.unit_coords
        K = self.K
        reg = K.log_sigma((A, B))
        tp = reg if self.unit_norm == 1 else 2 * reg
        # against sqrt(D) = c sqrt(D0)
        return UnitData(K.D, Fraction(A, 2), Fraction(B, 2 * K.c), self.unit_norm, reg, tp, self.f)

    def fundamental_elements(self, m: int, unit: tuple | None = None) -> list[tuple[int, int]]:
        """Elements of norm exactly m, one per orbit of {+-unit^k}.

        The domain is sigma(x) > 0 with sqrt|m| <= sigma(x) < sqrt|m| sigma(unit).
        ``unit`` defaults to the fundamental unit of the order; any unit u > 1
        or its inverse (< 1) is accepted.
        """
        if m == 0:
            return []
        K = self.K
        D0 = K.D0
        u = unit or self.unit_coords
        if K.sigma(u) < 1:
            u = _conj_inverse(u, K)
        u_bar = _conj_inverse(u, K)          # 1/u, a unit in the order as well
        su = K.sigma(u)
        am = abs(m)
        bmax = (math.sqrt(am) * su + math.sqrt(am)) / math.sqrt(D0) + 2
        if bmax > SCAN_LIMIT:
            raise ArithmeticError("fundamental domain too large for a scan")
        out = []
        for B in range(-int(bmax), int(bmax) + 1):
            rest = D0 * B * B + 4 * m
            if rest < 0 or not is_square(rest):
                continue
            r = math.isqrt(rest)
            for A in {r, -r}:
                x = (A, B)
                if not self.contains(x):
                    continue
                if quad_sign(A, B, D0) <= 0:
                    continue
                # sigma(x)^2 >= |m| and (x / u)^2 < |m|, exactly
                sq = _mul(x, x, D0)
                if quad_sign(sq[0] - 2 * am, sq[1], D0) < 0:
                    continue
                y = _mul(x, u_bar, D0)
                sq = _mul(y, y, D0)
                if quad_sign(sq[0] - 2 * am, sq[1], D0) >= 0:
                    continue
                out.append(x)
        return sorted(out)


def _conj_inverse(u: tuple, K: QuadraticField) -> tuple:
    """1/u for a unit u: its conjugate times the norm."""
    A, B = u
    n = K.norm(u)
    return (A * n, -B * n)


def _canonical_generator(x: tuple, K: QuadraticField) -> tuple:
    """Unit-shift x into the maximal-order fundamental domain, positive sigma."""
    D0 = K.D0
    if quad_sign(x[0], x[1], D0) < 0:
        x = (-x[0], -x[1])
    eps = K.maximal.unit_coords
    eps_inv = _conj_inverse(eps, K)
    m = abs(K.norm(x))
    while True:
        sq = _mul(x, x, D0)
        if quad_sign(sq[0] - 2 * m, sq[1], D0) < 0:
            x = _mul(x, eps, D0)
            continue
        y = _mul(x, eps_inv, D0)
        sq = _mul(y, y, D0)
        if quad_sign(sq[0] - 2 * m, sq[1], D0) >= 0:
            x = y
            continue
        return (int(x[0]), int(x[1]))


def count_ideals_of_norm(K: QuadraticField, m: int) -> int:
    """Number of integral ideals of the maximal order with norm m."""
    if m < 1:
        raise ValueError("m must be positive")
    total = 1
    for p, e in factor(m).items():
        chi = K.splitting_character(p)
        if chi == 1:
            total *= e + 1
        elif chi == -1:
            total *= 1 if e % 2 == 0 else 0
    return total


def principal_ideals_of_norm(K: QuadraticField, n: int, order: QuadOrder | None = None,
                             signed: bool = True) -> set:
    """Canonical generators of principal ideals of norm n with a generator in ``order``.

    With ``signed`` the generator must have field norm +n (the image of the
    norm-n elements of the order); otherwise norm -n generators count too.
    """
    order = order or K.maximal
    # generators of equal norm differ by a norm-one unit, so signed counting
    # scans the fundamental domain of the norm-one unit
    unit = order.norm_one_unit if signed else order.unit_coords
    gens = set()
    for m in ((n,) if signed else (n, -n)):
        for x in order.fundamental_elements(m, unit):
            gens.add(_canonical_generator(x, K))
    return gens


def count_principal_generated(K: QuadraticField, O: OrderData | QuadOrder, n: int,
                              signed: bool = True) -> int:
    """|P_{R_F}(n)|: principal ideals of norm n admitting a generator of norm n in the order O."""
    f = O.conductor if isinstance(O, OrderData) else O.f
    if math.gcd(n, f) != 1:
        raise ValueError(f"n={n} shares a factor with the conductor {f}")
    return len(principal_ideals_of_norm(K, n, K.order(f), signed))


def closed_geodesic_length(U: UnitData) -> float:
    """log P0 = 2 |log sigma(eta0)| for the totally positive unit generator."""
    return 2 * U.totally_positive_generator_log


# --------------------------------------------------------------------------
# approximate solutions of the norm form u^2 - D v^2 = n


def decimal_limit(delta: float, n: int) -> int:
    """floor(delta * n), reading delta as the decimal it was written as."""
    return math.floor(Fraction(repr(float(delta))) * n)


def count_approx_norm_solutions(D: int, n: int, delta: float, B: float, method: str = "rows") -> int:
    """#{(u, v) : 0 < |u^2 - D v^2 - n| <= delta n, |u|, |v| <= B n}.

    ``rows`` counts u per v with integer square roots, ``scan`` tests every
    lattice point of the box, ``orbit`` sums unit-orbit counts over the
    admissible norms m.
    """
    if delta <= 0 or B < delta:
        raise ValueError("need delta > 0 and B >= delta")
    lim = decimal_limit(delta, n)
    box = math.floor(Fraction(repr(float(B))) * n)
    if lim == 0:
        return 0
    if method == "rows":
        return _count_rows(D, n, lim, box)
    if method == "scan":
        return _count_scan(D, n, lim, box)
    if method == "orbit":
        return _count_orbit(D, n, lim, box)
    raise ValueError(f"unknown method {method!r}")


def _count_upto(x: int, box: int) -> int:
    """#{u in Z : |u| <= box, u^2 <= x}."""
    if x < 0:
        return 0
    r = min(math.isqrt(x), box)
    return 2 * r + 1


def _count_rows(D: int, n: int, lim: int, box: int) -> int:
    total = 0
    for v in range(-box, box + 1):
        base = n + D * v * v
        total += _count_upto(base + lim, box) - _count_upto(base - lim - 1, box)
        if is_square(base) and math.isqrt(base) <= box:
            total -= 1 if base == 0 else 2
    return total


def _count_scan(D: int, n: int, lim: int, box: int) -> int:
    u = np.arange(-box, box + 1, dtype=np.int64)
    u2 = u * u
    total = 0
    for v in range(-box, box + 1):
        diff = np.abs(u2 - D * v * v - n)
        total += int(np.count_nonzero((diff > 0) & (diff <= lim)))
    return total


def _count_orbit(D: int, n: int, lim: int, box: int) -> int:
    K = QuadraticField(D)
    ring = K.order(K.monogenic_conductor)          # Z[sqrt D]
    eta = ring.norm_one_unit
    eta_bar = _conj_inverse(eta, K)
    bound = box * (1 + math.sqrt(D)) + 1
    c = K.c

    def in_box(x):
        # x = (A + B sqrt D0)/2 = u + v sqrt D with u = A/2, v = B/(2c)
        return abs(x[0]) <= 2 * box and abs(x[1]) <= 2 * c * box

    total = 0
    for m in range(n - lim, n + lim + 1):
        if m == n:
            continue
        if m == 0:
            total += 1                    # only u = v = 0
            continue
        for x0 in ring.fundamental_elements(m, eta):
            for step in (eta, eta_bar):
                x = x0 if step is eta else _mul(x0, eta_bar, K.D0)
                while True:
                    s, sb = abs(K.sigma(x)), abs(K.sigma((x[0], -x[1])))
                    if max(s, sb) > bound:
                        break
                    if in_box(x):
                        total += 2        # x and -x
                    x = _mul(x, step, K.D0)
    return total


def iter_primes(lo: int, hi: int) -> Iterator[int]:
    """Primes p with lo < p <= hi, by a segmented sieve."""
    if hi < 2:
        return
    seg = 1 << 20
    base = _small_primes(math.isqrt(hi) + 1)
    start = max(lo + 1, 2)
    while start <= hi:
        end = min(hi, start + seg - 1)
        mark = np.ones(end - start + 1, dtype=bool)
        for p in base:
            if p * p > end:
                break
            first = max(p * p, ((start + p - 1) // p) * p)
            mark[first - start::p] = False
        for i in np.nonzero(mark)[0]:
            yield int(start + i)
        start = end + 1


@lru_cache(maxsize=8)
def _small_primes(n: int) -> tuple[int, ...]:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return tuple(int(p) for p in np.nonzero(sieve)[0])
