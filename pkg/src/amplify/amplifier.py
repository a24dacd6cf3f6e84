"""Hecke-square expansion, the four amplifier sums and the split-prime resonator.

Hecke operators are handled purely combinatorially through

    T_m T_n = sum_{d | (m, n)} d T_{mn/d^2}    for m, n coprime to the level.

A resonator is a finite map n -> a_n >= 0.  Stabilizer counts enter through an
oracle ``stab(l)``; the tables label every row with where its counts came from.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .quadfield import (
    QuadraticField,
    count_principal_generated,
    factor,
    is_square,
    iter_primes,
)

log = logging.getLogger(__name__)

PRIME_WINDOW_LIMIT = 10**7
EXACT_STAB_LIMIT = 10**4


class CoprimalityError(ValueError):
    pass


@dataclass(frozen=True)
class ResonatorSequence:
    weights: Mapping[int, float]
    excluded: frozenset = frozenset()
    M: Optional[float] = None
    primes: tuple = ()
    truncated: bool = False

    def __post_init__(self):
        for n, a in self.weights.items():
            if n < 1 or int(n) != n:
                raise ValueError(f"support element {n} is not a positive integer")
            if a < 0:
                raise ValueError(f"weight a_{n} = {a} is negative")
            bad = [p for p in self.excluded if n % p == 0]
            if bad:
                raise CoprimalityError(f"support element {n} is divisible by excluded primes {bad}")

    @property
    def support(self) -> list[int]:
        return sorted(n for n, a in self.weights.items() if a != 0)

    def mass(self) -> float:
        return math.fsum(self.weights[n] for n in self.support)


def delta(n: int = 1, excluded: Iterable[int] = ()) -> ResonatorSequence:
    return ResonatorSequence({n: 1}, frozenset(excluded))


@dataclass
class AmplifierSums:
    B: float
    R: float
    B_L: float
    R_L: float
    error_C: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.B, self.R, self.B_L, self.R_L)


# --------------------------------------------------------------------------
# Hecke algebra

def _common_divisors(m: int, n: int) -> list[int]:
    g = math.gcd(m, n)
    return [d for d in range(1, g + 1) if g % d == 0]


def hecke_product(m: int, n: int) -> dict[int, int]:
    """T_m T_n in the T_l basis, straight from the divisor-sum formula."""
    return {m * n // (d * d): d for d in _common_divisors(m, n)}


def _check_support(a: ResonatorSequence):
    for n in a.support:
        bad = [p for p in a.excluded if n % p == 0]
        if bad:
            raise CoprimalityError(f"support element {n} is divisible by excluded primes {bad}")


def hecke_square_expand(a: ResonatorSequence) -> dict[int, float]:
    """Coefficients of (sum a_n T_n)^2 in the T_l basis."""
    _check_support(a)
    out: dict[int, float] = defaultdict(int)
    sup = a.support
    w = a.weights
    for m in sup:
        for n in sup:
            c = w[m] * w[n]
            for l, d in hecke_product(m, n).items():
                out[l] += c * d
    return dict(sorted(out.items()))


# independent oracle: multiplicativity plus the prime-power recurrence
# T_p T_{p^k} = T_{p^{k+1}} + p T_{p^{k-1}}

def _prime_power_product(p: int, a: int, b: int) -> dict[int, int]:
    """T_{p^a} T_{p^b} as {exponent: coefficient}."""
    if a < b:
        a, b = b, a
    if b == 0:
        return {a: 1}
    if b == 1:
        out = {a + 1: 1}
        if a >= 1:
            out[a - 1] = out.get(a - 1, 0) + p
        return out
    # T_{p^b} = T_p T_{p^{b-1}} - p T_{p^{b-2}}
    out: dict[int, int] = defaultdict(int)
    for e, c in _prime_power_product(p, a, b - 1).items():
        for e2, c2 in _prime_power_product(p, e, 1).items():
            out[e2] += c * c2
    for e, c in _prime_power_product(p, a, b - 2).items():
        out[e] -= p * c
    return {e: c for e, c in out.items() if c}


def hecke_product_recursive(m: int, n: int) -> dict[int, int]:
    if m == 1 or n == 1 or math.gcd(m, n) == 1:
        return {m * n: 1}
    fm, fn = factor(m), factor(n)
    terms = {1: 1}
    for p in sorted(set(fm) | set(fn)):
        local = _prime_power_product(p, fm.get(p, 0), fn.get(p, 0))
        new: dict[int, int] = defaultdict(int)
        for l, c in terms.items():
            for e, c2 in local.items():
                new[l * p**e] += c * c2
        terms = new
    return dict(terms)


def hecke_square_expand_recursive(a: ResonatorSequence) -> dict[int, float]:
    _check_support(a)
    out: dict[int, float] = defaultdict(int)
    for m in a.support:
        for n in a.support:
            for l, c in hecke_product_recursive(m, n).items():
                out[l] += a.weights[m] * a.weights[n] * c
    return {l: c for l, c in sorted(out.items()) if c}


def sigma1(n: int) -> int:
    return math.prod((p ** (e + 1) - 1) // (p - 1) for p, e in factor(n).items()) if n > 1 else 1


# --------------------------------------------------------------------------
# the four sums

def square_indicator(n: int) -> int:
    return 1 if is_square(n) else 0


def error_weight(l: int, C: float) -> float:
    """exp(C log l / log log(1 + l)); equal to 1 at l = 1."""
    if l == 1:
        return 1.0
    return math.exp(C * math.log(l) / math.log(math.log(1 + l)))


def _term(l: int, stab: Callable[[int], int], C: float) -> tuple[float, float, float, float]:
    w = error_weight(l, C)
    return (square_indicator(l), l**1.5 * w, stab(l), l * w)


def compute_sums(a: ResonatorSequence, stab: Callable[[int], int], C: float = 2.0,
                 order: str = "pairs") -> AmplifierSums:
    """B, R, B_L, R_L.

    ``order="pairs"`` loops over (m, n, d) directly; ``order="grouped"``
    first expands the Hecke square and then sums over l = mn/d^2.
    """
    if C <= 0:
        raise ValueError("error constant must be positive")
    _check_support(a)
    cols: list[list[float]] = [[], [], [], []]
    cache: dict[int, tuple] = {}

    def term(l):
        if l not in cache:
            cache[l] = _term(l, stab, C)
        return cache[l]

    if order == "pairs":
        w = a.weights
        for m in a.support:
            for n in a.support:
                for d in _common_divisors(m, n):
                    c = w[m] * w[n] * d
                    for col, t in zip(cols, term(m * n // (d * d))):
                        col.append(c * t)
    elif order == "grouped":
        for l, c in hecke_square_expand(a).items():
            for col, t in zip(cols, term(l)):
                col.append(c * t)
    else:
        raise ValueError(f"unknown evaluation order {order!r}")
    B, R, BL, RL = (math.fsum(col) for col in cols)
    return AmplifierSums(B, R, BL, RL, C)


# --------------------------------------------------------------------------
# the resonator

def window(M: float) -> tuple[float, float, float]:
    """(L, L^2, exp(log^2 L)) for the resonator of length M."""
    L = math.sqrt(2 * math.log(M) * math.log(math.log(M)))
    return L, L * L, math.exp(math.log(L) ** 2)


def admissible_prime(p: int, K: QuadraticField, excluded: Iterable[int], lo: float, hi: float) -> bool:
    return (K.splitting_character(p) == 1
            and all(p % q for q in excluded)
            and lo < p <= hi)


def build_resonator(M: float, K: QuadraticField, excluded: Iterable[int] = (),
                    prime_limit: int = PRIME_WINDOW_LIMIT) -> ResonatorSequence:
    """a_n = f(n) for squarefree n <= M built from split primes in the window."""
    if M <= 3:
        raise ValueError("M must exceed 3")
    excluded = frozenset(int(p) for p in excluded)
    L, lo, hi = window(M)
    truncated = hi > prime_limit
    top = min(hi, prime_limit, M)
    primes = [p for p in iter_primes(int(lo), int(top))
              if admissible_prime(p, K, excluded, lo, hi)]
    if truncated:
        log.warning("prime window (%.6g, %.6g] clipped at %d", lo, hi, prime_limit)
    fp = {p: L / (p * math.log(p)) for p in primes}
    weights = {1: 1.0}
    # squarefree products, primes ascending so each n is built once
    frontier = [(1, 1.0, 0)]
    while frontier:
        n, w, start = frontier.pop()
        for i in range(start, len(primes)):
            m = n * primes[i]
            if m > M:
                break
            weights[m] = w * fp[primes[i]]
            frontier.append((m, weights[m], i + 1))
    weights = dict(sorted(weights.items()))
    return ResonatorSequence(weights, excluded, M, tuple(primes), truncated)


def ratio_predictor(M: float) -> float:
    return math.exp(2 * math.sqrt(2) * math.sqrt(math.log(M) / math.log(math.log(M))))


def excluded_primes(order) -> frozenset:
    """Primes dividing 4 D E f and the conductor of R_F for a basis order."""
    n = 4 * order.D * order.E * order.f * order.field_order.f
    return frozenset(factor(n))


class StabilizerOracle:
    """Exact quaternionic counts up to ``exact_limit``, the principal-ideal lower bound beyond."""

    def __init__(self, order, exact_limit: int = EXACT_STAB_LIMIT):
        from .quatorder import exact_stabilizer_count

        self.order = order
        self.exact_limit = exact_limit
        self._exact = exact_stabilizer_count
        self.provenance: dict[int, str] = {}
        self._cache: dict[int, int] = {}

    def __call__(self, l: int) -> int:
        if l not in self._cache:
            if l <= self.exact_limit:
                self._cache[l] = self._exact(self.order, l)
                self.provenance[l] = "exact"
            else:
                self._cache[l] = count_principal_generated(self.order.field, self.order.field_order, l)
                self.provenance[l] = "lower_bound"
        return self._cache[l]

    def label(self, ls: Iterable[int]) -> str:
        kinds = {self.provenance[l] for l in ls}
        return "lower_bound" if "lower_bound" in kinds else "exact"


@dataclass
class ResonatorRow:
    M: float
    B: float
    R: float
    B_L: float
    R_L: float
    ratio: float
    predictor: float
    truncated: bool
    stab_source: str
    support_size: int
    primes: tuple
    mass: float
    exponent: float = field(default=float("nan"))

    CSV_FIELDS = ("M", "B", "R", "B_L", "R_L", "ratio", "predictor", "truncated")


def resonator_report(Ms: Iterable[float], order, stab: Optional[Callable[[int], int]] = None,
                     C: float = 2.0, prime_limit: int = PRIME_WINDOW_LIMIT) -> list[ResonatorRow]:
    """One row per M.  ``exponent`` is log(ratio) / sqrt(log M / log log M)."""
    K = order.field
    excl = excluded_primes(order)
    stab = stab or StabilizerOracle(order)
    rows = []
    for M in Ms:
        a = build_resonator(M, K, excl, prime_limit)
        s = compute_sums(a, stab, C)
        ls = hecke_square_expand(a)
        source = stab.label(ls) if isinstance(stab, StabilizerOracle) else "oracle"
        ratio = s.B_L / s.B
        rows.append(ResonatorRow(
            M=float(M), B=s.B, R=s.R, B_L=s.B_L, R_L=s.R_L, ratio=ratio,
            predictor=ratio_predictor(M), truncated=a.truncated, stab_source=source,
            support_size=len(a.support), primes=a.primes, mass=a.mass(),
            exponent=math.log(ratio) / math.sqrt(math.log(M) / math.log(math.log(M))),
        ))
    return rows


# --------------------------------------------------------------------------
# the final budget

def budget_length(nu: float, A: float) -> float:
    """M = nu^(1/4) exp(-A log nu / log log nu)."""
    ln = math.log(nu)
    return math.exp(ln / 4 - A * ln / math.log(ln))


def period_prediction(nu: float) -> float:
    """exp(1/2 sqrt(log lam / log log lam)) with lam = nu^2 + 1/4."""
    lam = nu * nu + 0.25
    return math.exp(0.5 * math.sqrt(math.log(lam) / math.log(math.log(lam))))


@dataclass
class Budget:
    nu: float
    A: float
    Cpp: float
    M: float
    B: float
    R: float
    B_L: float
    R_L: float
    main_standard: float
    main_relative: float
    R_bound: float
    R_L_bound: float
    lower_bound_prediction: float
    dominance_flags: dict


def theorem_budget(nu: float, A: float, Cpp: float, order, C: float = 2.0,
                   stab: Optional[Callable[[int], int]] = None) -> Budget:
    """Sizes of the main and error terms for the resonator of length M(nu, A).

    ``main_standard`` is nu B and ``main_relative`` is B_L, the orders of the
    two main terms; the flags test R <= nu B and nu^(-1/2) R_L <= B_L.
    """
    M = budget_length(nu, A)
    if M <= 3:
        raise ValueError(f"M = {M:.6g} is not above 3; increase nu or decrease A")
    a = build_resonator(M, order.field, excluded_primes(order))
    s = compute_sums(a, stab or StabilizerOracle(order), C)
    lM = math.log(M)
    flags = {
        "standard": s.R <= nu * s.B,
        "relative": s.R_L / math.sqrt(nu) <= s.B_L,
    }
    return Budget(
        nu=nu, A=A, Cpp=Cpp, M=M, B=s.B, R=s.R, B_L=s.B_L, R_L=s.R_L,
        main_standard=nu * s.B, main_relative=s.B_L,
        R_bound=M**3 * math.exp(Cpp * lM / math.log(lM)),
        R_L_bound=M**2 * math.exp(Cpp * lM / math.log(lM)),
        lower_bound_prediction=period_prediction(nu),
        dominance_flags=flags,
    )
