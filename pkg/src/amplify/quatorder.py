"""Lattice arithmetic in a basis order of the quaternion algebra (D, -E).

Elements are x0 + x1 alpha + x2 omega + x3 alpha omega with alpha^2 = D,
omega^2 = -E and omega alpha = -alpha omega.  Coordinates live in (1/f)Z and
are stored as integer numerators X = f x.  The splitting map is

    rho(x) = [[x0 + x1 sqrt D,        x2 + x3 sqrt D],
              [-E (x2 - x3 sqrt D),   x0 - x1 sqrt D]]

so F = Q(alpha) is diagonal and its geodesic is the imaginary axis.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .psl2 import GroupElement, dist_to_diagonal_normalizer
from .quadfield import (
    QuadOrder,
    QuadraticField,
    factor,
    is_square,
    quad_sign,
)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# the algebra


def _split_p(x: int, p: int) -> tuple[int, int]:
    k = 0
    while x % p == 0:
        x //= p
        k += 1
    return k, x


def _legendre(u: int, p: int) -> int:
    return 1 if pow(u % p, (p - 1) // 2, p) == 1 else -1


def hilbert_symbol(a: int, b: int, p: int) -> int:
    """(a, b)_p for nonzero integers and a prime p (p = -1 for the real place)."""
    if p == -1:
        return -1 if a < 0 and b < 0 else 1
    al, u = _split_p(a, p)
    be, v = _split_p(b, p)
    if p == 2:
        eps = lambda x: ((x - 1) // 2) % 2           # noqa: E731
        omg = lambda x: ((x * x - 1) // 8) % 2       # noqa: E731
        e = eps(u) * eps(v) + al * omg(v) + be * omg(u)
        return -1 if e % 2 else 1
    sign = -1 if (al * be * ((p - 1) // 2)) % 2 else 1
    if be % 2:
        sign *= _legendre(u, p)
    if al % 2:
        sign *= _legendre(v, p)
    return sign


@dataclass(frozen=True)
class QuaternionAlgebra:
    a: int
    b: int
    ramified_primes: tuple
    is_division: bool


def classify_algebra(a: int, b: int) -> QuaternionAlgebra:
    if a == 0 or b == 0:
        raise ValueError("a and b must be nonzero")
    if a <= 0:
        raise ValueError("a must be positive so the algebra splits at infinity")
    primes = {2} | set(factor(abs(a))) | set(factor(abs(b)))
    ram = tuple(sorted(p for p in primes if hilbert_symbol(a, b, p) == -1))
    if len(ram) % 2:
        raise ArithmeticError(f"odd number of ramified places for ({a}, {b}): {ram}")
    return QuaternionAlgebra(a, b, ram, bool(ram))


# --------------------------------------------------------------------------
# the order


def quat_mul(x, y, D, E):
    """Product of coordinate vectors in the algebra (D, -E)."""
    a, b = D, -E
    x0, x1, x2, x3 = x
    y0, y1, y2, y3 = y
    return (
        x0 * y0 + a * x1 * y1 + b * x2 * y2 - a * b * x3 * y3,
        x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
        x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
        x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
    )


def quat_conj(x):
    return (x[0], -x[1], -x[2], -x[3])


def _canonical_sign(X: tuple) -> tuple:
    for v in X:
        if v != 0:
            return X if v > 0 else tuple(-w for w in X)
    return X


@dataclass(frozen=True)
class LatticePoint:
    """An element of R(n), with numerators X over the common denominator f."""

    X: tuple
    f: int
    D: int
    E: int

    @property
    def coords(self) -> tuple:
        return tuple(Fraction(v, self.f) for v in self.X)

    @property
    def reduced_norm(self) -> int:
        X0, X1, X2, X3 = self.X
        num = X0 * X0 - self.D * X1 * X1 + self.E * X2 * X2 - self.D * self.E * X3 * X3
        q, r = divmod(num, self.f * self.f)
        return q if r == 0 else Fraction(num, self.f * self.f)

    @property
    def trace(self) -> Fraction:
        return Fraction(2 * self.X[0], self.f)

    @property
    def trace_proj(self) -> float:
        return float(self.trace) / math.sqrt(self.reduced_norm)

    @property
    def matrix(self) -> np.ndarray:
        return rho_matrix(self.X, self.D, self.E) / self.f

    @property
    def matrix_image(self) -> GroupElement:
        return GroupElement.scaled(self.matrix)

    @property
    def in_field(self) -> bool:
        return self.X[2] == 0 and self.X[3] == 0

    @property
    def stabilizes(self) -> bool:
        """eta F eta^-1 = F, i.e. eta in F or in omega F."""
        return self.in_field or (self.X[0] == 0 and self.X[1] == 0)

    @property
    def is_scalar(self) -> bool:
        return self.X[1] == self.X[2] == self.X[3] == 0


def rho_matrix(X, D: int, E: int) -> np.ndarray:
    r = math.sqrt(D)
    X0, X1, X2, X3 = (float(v) for v in X)
    return np.array([[X0 + X1 * r, X2 + X3 * r], [-E * (X2 - X3 * r), X0 - X1 * r]])


class BasisOrder:
    """The integral elements of (1/f) Z<1, alpha, omega, alpha omega>."""

    def __init__(self, D: int, E: int, f: int = 1):
        if E <= 0:
            raise ValueError("E = N(omega) must be positive")
        if f < 1:
            raise ValueError("f must be a positive integer")
        self.D, self.E, self.f = int(D), int(E), int(f)
        self.field = QuadraticField(self.D)

    def __repr__(self):
        return f"BasisOrder(D={self.D}, E={self.E}, f={self.f})"

    @cached_property
    def algebra(self) -> QuaternionAlgebra:
        return classify_algebra(self.D, -self.E)

    def norm_form(self, x) -> Fraction:
        x0, x1, x2, x3 = (Fraction(v) for v in x)
        D, E = self.D, self.E
        return x0 * x0 - D * x1 * x1 + E * x2 * x2 - D * E * x3 * x3

    def mul(self, x, y):
        return quat_mul(x, y, self.D, self.E)

    def contains_numerators(self, X) -> bool:
        f = self.f
        if (2 * X[0]) % f:
            return False
        X0, X1, X2, X3 = X
        return (X0 * X0 - self.D * X1 * X1 + self.E * X2 * X2 - self.D * self.E * X3 * X3) % (f * f) == 0

    def point(self, X) -> LatticePoint:
        return LatticePoint(tuple(int(v) for v in X), self.f, self.D, self.E)

    # -- the embedded field ---------------------------------------------------

    def _field_member(self, AB: tuple) -> bool:
        """Is (A + B sqrt D0)/2 of the form (X0 + X1 sqrt D)/f inside R?"""
        A, B = AB
        K, f = self.field, self.f
        if isinstance(A, Fraction) or isinstance(B, Fraction):
            return False
        # t = A/2, u = B/(2c); numerators X0 = f t, X1 = f u
        if (f * A) % 2 or (f * B) % (2 * K.c):
            return False
        return self.contains_numerators(((f * A) // 2, (f * B) // (2 * K.c), 0, 0))

    @cached_property
    def field_order(self) -> QuadOrder:
        """R_F = R cap F as an order Z + f' O_F, identified by membership on a probe box."""
        K = self.field
        if self.f == 1:
            return K.order(K.monogenic_conductor)
        for fp in range(1, 4 * K.c * self.f + 1):
            Q = K.order(fp)
            span = 4 * fp * K.c
            probe = [(A, B) for A in range(-span, span + 1) for B in range(0, span + 1)
                     if K.maximal.contains((A, B))]
            if all(Q.contains(x) == self._field_member(x) for x in probe):
                return Q
        raise ArithmeticError("could not identify R cap F as a quadratic order")

    @cached_property
    def field_norm_one_unit(self) -> tuple:
        """Generator eta0 > 1 of R_F^1 modulo +-1, in half-integer coordinates."""
        return self.field_order.norm_one_unit

    @property
    def geodesic_length(self) -> float:
        """Vol(Gamma_L \\ L) = log P0 for the geodesic of F."""
        u = self.field_norm_one_unit
        return 2 * self.field.log_sigma(u)

    # -- enumeration ------------------------------------------------------------

    def ball_predicate(self, X0, X1, X2, X3, n, Cprime):
        """Operator-norm condition ||rho(eta)|| <= C' sqrt(n), batched.

        With det = n the spectral norm is at most C' sqrt(n) exactly when the
        squared Frobenius norm is at most n (C'^2 + C'^-2).
        """
        r = math.sqrt(self.D)
        f = float(self.f)
        x0, x1, x2, x3 = (np.asarray(v, dtype=float) / f for v in (X0, X1, X2, X3))
        fro2 = 2 * x0 * x0 + 2 * self.D * x1 * x1 + (x2 + x3 * r) ** 2 + self.E**2 * (x2 - x3 * r) ** 2
        return fro2 <= np.asarray(n, dtype=float) * (Cprime**2 + Cprime**-2)

    def _bounds(self, n: float, Cprime: float) -> tuple[int, int, int, int]:
        s = Cprime * math.sqrt(n) * self.f * (1 + 1e-12)
        r = math.sqrt(self.D)
        w = s * (1 + 1 / self.E) / 2
        return int(s) + 1, int(s / r) + 1, int(w) + 1, int(w / r) + 1


def enumerate_norm_ball(O: BasisOrder, n: int, Cprime: float) -> list[LatticePoint]:
    """R(n) inside the operator-norm ball of radius C' sqrt(n), one point per +- pair.

    Stratified over (x2, x3): the remaining norm n - E (x2^2 - D x3^2) is
    solved for (x0, x1) by a bounded Pell-type scan.
    """
    if Cprime < 1:
        raise ValueError("Cprime must be at least 1")
    D, E, f = O.D, O.E, O.f
    b0, b1, b2, b3 = O._bounds(n, Cprime)
    target = f * f * n
    x1 = np.arange(-b1, b1 + 1, dtype=np.int64)
    x3 = np.arange(-b3, b3 + 1, dtype=np.int64)
    X3, X1 = np.meshgrid(x3, x1, indexing="ij")
    X3, X1 = X3.ravel(), X1.ravel()
    found = set()
    for x2 in range(-b2, b2 + 1):
        T = target - E * (x2 * x2 - D * X3 * X3) + D * X1 * X1
        ok = T >= 0
        T0, X1s, X3s = T[ok], X1[ok], X3[ok]
        r = np.floor(np.sqrt(T0.astype(float))).astype(np.int64)
        r = np.where(r * r > T0, r - 1, r)
        r = np.where((r + 1) * (r + 1) <= T0, r + 1, r)
        hit = (r * r == T0) & (r <= b0)
        for sgn in (1, -1):
            x0 = sgn * r[hit]
            inside = O.ball_predicate(x0, X1s[hit], x2, X3s[hit], n, Cprime)
            for a, b, d in zip(x0[inside], X1s[hit][inside], X3s[hit][inside]):
                X = _canonical_sign((int(a), int(b), x2, int(d)))
                if O.contains_numerators(X):
                    found.add(X)
    return [O.point(X) for X in sorted(found)]


def box_scan_balls(O: BasisOrder, n_max: int, Cprime: float) -> dict[int, list[LatticePoint]]:
    """Independent oracle: sweep every lattice point of the n_max bounding region once.

    Loops run over (x0, x1) with the whole (x2, x3) plane vectorized; points are
    bucketed by their reduced norm.
    """
    D, E, f = O.D, O.E, O.f
    b0, b1, b2, b3 = O._bounds(n_max, Cprime)
    x2 = np.arange(-b2, b2 + 1, dtype=np.int64)
    x3 = np.arange(-b3, b3 + 1, dtype=np.int64)
    X2, X3 = np.meshgrid(x2, x3, indexing="ij")
    X2, X3 = X2.ravel(), X3.ravel()
    r = math.sqrt(D)
    plane_q = E * (X2 * X2 - D * X3 * X3)
    plane_f = ((X2 + X3 * r) ** 2 + E**2 * (X2 - X3 * r) ** 2) / f**2
    order = np.argsort(plane_f, kind="stable")
    X2, X3, plane_q, plane_f = X2[order], X3[order], plane_q[order], plane_f[order]
    fmax = n_max * (Cprime**2 + Cprime**-2) * (1 + 1e-9)
    buckets: dict[int, set] = defaultdict(set)
    ff = f * f
    for x0 in range(-b0, b0 + 1):
        for x1 in range(-b1, b1 + 1):
            head = (2 * x0 * x0 + 2 * D * x1 * x1) / ff
            if head > fmax:
                continue
            k = int(np.searchsorted(plane_f, fmax - head, side="right"))
            if k == 0:
                continue
            num = x0 * x0 - D * x1 * x1 + plane_q[:k]
            good = (num > 0) & (num % ff == 0) & (num <= ff * n_max)
            if not good.any():
                continue
            nn = num[good] // ff
            a2, a3 = X2[:k][good], X3[:k][good]
            inside = O.ball_predicate(np.full(nn.shape, x0), np.full(nn.shape, x1), a2, a3, nn, Cprime)
            for m, c2, c3 in zip(nn[inside], a2[inside], a3[inside]):
                X = (x0, x1, int(c2), int(c3))
                if O.contains_numerators(X):
                    buckets[int(m)].add(_canonical_sign(X))
    return {m: [O.point(X) for X in sorted(pts)] for m, pts in buckets.items()}


# --------------------------------------------------------------------------
# stabilizers


def _orbit_reps(D: int, target: int, unit: tuple, accept) -> list[tuple[int, int]]:
    """(U, V) with U^2 - D V^2 = target, one per orbit of {+-unit^k}.

    ``unit`` = (t, u) rationals with t + u sqrt(D) > 1 or < 1 and norm 1.
    The fundamental domain is a half-open sigma-interval between sqrt|target|
    and sqrt|target| * unit, closed at sqrt|target|.
    """
    t, u = (Fraction(v) for v in unit)
    above = quad_sign(t - 1, u, D) > 0
    su = float(t) + float(u) * math.sqrt(D)
    su = max(su, 1 / su)
    am = abs(target)
    vmax = int((math.sqrt(am) * su + math.sqrt(am)) / (2 * math.sqrt(D))) + 2
    out = []
    for V in range(-vmax, vmax + 1):
        rest = target + D * V * V
        if rest < 0 or not is_square(rest):
            continue
        r = math.isqrt(rest)
        for U in {r, -r}:
            if quad_sign(U, V, D) <= 0 or not accept(U, V):
                continue
            # compare sigma^2 with |target|, and (sigma / unit)^2 with |target|
            low = quad_sign(U * U + D * V * V - am, 2 * U * V, D)
            a, b = U * t - D * V * u, V * t - U * u
            shifted = quad_sign(a * a + D * b * b - am, 2 * a * b, D)
            if above:
                # unit > 1: sqrt|T| <= sigma < sqrt|T| * unit
                keep = low >= 0 and shifted < 0
            else:
                # unit < 1: sqrt|T| * unit < sigma <= sqrt|T|
                keep = low <= 0 and shifted > 0
            if keep:
                out.append((U, V))
    return sorted(out)


def _unit_against_sqrtD(O: BasisOrder, AB: tuple) -> tuple[Fraction, Fraction]:
    A, B = AB
    return Fraction(A, 2), Fraction(B, 2 * O.field.c)


def stabilizer_orbits(O: BasisOrder, n: int, invert_unit: bool = False) -> dict[str, list]:
    """Orbit representatives of N_{R(n)}(F) under R_F^1, split into F and omega F."""
    D, E, f = O.D, O.E, O.f
    unit = _unit_against_sqrtD(O, O.field_norm_one_unit)
    if invert_unit:
        unit = (unit[0], -unit[1])
    reps_F = _orbit_reps(D, f * f * n, unit,
                         lambda U, V: O.contains_numerators((U, V, 0, 0)))
    reps_w = []
    if (f * f * n) % E == 0:
        reps_w = _orbit_reps(D, f * f * n // E, unit,
                             lambda U, V: O.contains_numerators((0, 0, U, V)))
    return {"F": reps_F, "omegaF": reps_w}


def exact_stabilizer_count(O: BasisOrder, n: int, invert_unit: bool = False) -> int:
    """|N_{R(n)}(F) / R_F^1|."""
    orbits = stabilizer_orbits(O, n, invert_unit)
    return len(orbits["F"]) + len(orbits["omegaF"])


def points_array(points: list[LatticePoint]) -> np.ndarray:
    return np.array([p.X for p in points], dtype=np.int64).reshape(-1, 4)


def normalizer_distances(points: list[LatticePoint], n: Optional[int] = None) -> np.ndarray:
    """d(rho-bar(eta), N_G(A)) for each point, in one batch."""
    if not points:
        return np.zeros(0)
    O0 = points[0]
    X = points_array(points).astype(float)
    n = O0.reduced_norm if n is None else n
    r = math.sqrt(O0.D)
    s = O0.f * math.sqrt(n)
    a = (X[:, 0] + X[:, 1] * r) / s
    b = (X[:, 2] + X[:, 3] * r) / s
    c = -O0.E * (X[:, 2] - X[:, 3] * r) / s
    d = (X[:, 0] - X[:, 1] * r) / s
    return dist_to_diagonal_normalizer(a, b, c, d)


def approx_stabilizers(O: BasisOrder, n: int, delta: float, Cprime: float,
                       ball: Optional[list[LatticePoint]] = None) -> list[LatticePoint]:
    """M(n, delta): ball points moved by at most delta off N_G(A) but not stabilizing F."""
    ball = enumerate_norm_ball(O, n, Cprime) if ball is None else ball
    cand = [p for p in ball if not p.stabilizes]
    d = normalizer_distances(cand, n)
    return [p for p, di in zip(cand, d) if 0 < di <= delta]


def coordinate_criterion_count(O: BasisOrder, n: int, delta: float, Cprime: float,
                               ball: Optional[list[LatticePoint]] = None) -> int:
    """Ball points with |N(x0 + x1 alpha) - n| <= delta n or the omega analogue, not stabilizing."""
    ball = enumerate_norm_ball(O, n, Cprime) if ball is None else ball
    D, E = O.D, O.E
    count = 0
    for p in ball:
        if p.stabilizes:
            continue
        x0, x1, x2, x3 = p.coords
        nf = x0 * x0 - D * x1 * x1
        nw = E * (x2 * x2 - D * x3 * x3)
        if abs(nf - n) <= delta * n or abs(nw - n) <= delta * n:
            count += 1
    return count


# --------------------------------------------------------------------------
# conjugacy-class invariants


@dataclass(frozen=True)
class ClassInvariants:
    type: str
    trace_proj: float
    P: Optional[float]
    theta: Optional[float]
    D_O: int


def order_discriminant(O: BasisOrder, p: LatticePoint) -> int:
    """Discriminant of R cap Q(eta).

    With v = eta - x0 the pure part, R cap Q(eta) = Z + Z (c + v)/k for the
    largest k admitting some c; its discriminant is 4 (x0^2 - n) / k^2.
    """
    n = p.reduced_norm
    x0 = p.coords[0]
    base = 4 * (x0 * x0 - n)
    X = p.X
    g = math.gcd(math.gcd(X[1], X[2]), X[3])
    for k in sorted({d for d in range(1, 2 * O.f * g + 1) if (2 * O.f * g) % d == 0}, reverse=True):
        for c in range(k):
            # (c + v)/k has numerators (f c/k, X1/k, X2/k, X3/k) over f
            if (O.f * c) % k or any(v % k for v in X[1:]):
                continue
            Y = ((O.f * c) // k, X[1] // k, X[2] // k, X[3] // k)
            if O.contains_numerators(Y):
                val = base / (k * k)
                if val.denominator != 1:
                    raise ArithmeticError("non-integral order discriminant")
                return int(val)
    raise ArithmeticError("eta is not in the order")


def class_invariants(O: BasisOrder, p: LatticePoint, n: int) -> ClassInvariants:
    if p.is_scalar:
        raise ValueError("class invariants are undefined for scalar eta")
    if p.reduced_norm != n:
        raise ValueError("reduced norm does not match n")
    x0 = p.coords[0]
    tr = p.trace_proj
    D_O = order_discriminant(O, p)
    if x0 * x0 > n:
        t = abs(tr)
        lam = (t + math.sqrt(t * t - 4)) / 2
        return ClassInvariants("hyperbolic", tr, lam * lam, None, D_O)
    if x0 * x0 < n:
        return ClassInvariants("elliptic", tr, None, math.acos(min(1.0, abs(tr) / 2)), D_O)
    raise ArithmeticError("parabolic element in a division algebra")


def unit_ball(O: BasisOrder, H: int = 20) -> list[tuple]:
    """Elements of R^1 with all numerators bounded by H."""
    D, E, f = O.D, O.E, O.f
    r = np.arange(-H, H + 1, dtype=np.int64)
    X1, X2, X3 = np.meshgrid(r, r, r, indexing="ij")
    X1, X2, X3 = X1.ravel(), X2.ravel(), X3.ravel()
    out = []
    for x0 in range(-H, H + 1):
        num = x0 * x0 - D * X1 * X1 + E * X2 * X2 - D * E * X3 * X3
        hit = num == f * f
        for a, b, c in zip(X1[hit], X2[hit], X3[hit]):
            X = (x0, int(a), int(b), int(c))
            if O.contains_numerators(X):
                out.append(X)
    return out


def conjugate(O: BasisOrder, gamma: tuple, X: tuple) -> tuple:
    """gamma eta gamma^-1 on numerators; gamma has norm 1 so its inverse is its conjugate."""
    f = O.f
    num = quat_mul(quat_mul(gamma, X, O.D, O.E), quat_conj(gamma), O.D, O.E)
    return tuple(v // (f * f) if v % (f * f) == 0 else Fraction(v, f * f) for v in num)


# --------------------------------------------------------------------------
# the standard geometric side


def _class_groups(O: BasisOrder, pts: list[LatticePoint], n: int, H: int):
    """Group non-scalar points by (trace, D_O), then split each group by
    explicit conjugation with unit-ball elements."""
    by_key: dict[tuple, list] = defaultdict(list)
    inv: dict[tuple, ClassInvariants] = {}
    for p in pts:
        if p.is_scalar:
            continue
        ci = class_invariants(O, p, n)
        key = (p.trace, ci.D_O)
        by_key[key].append(p.X)
        inv[key] = ci
    units = unit_ball(O, H) if by_key else []
    groups = []
    for key, members in sorted(by_key.items()):
        index = {X: i for i, X in enumerate(members)}
        parent = list(range(len(members)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, X in enumerate(members):
            for g in units:
                Y = conjugate(O, g, X)
                if all(isinstance(v, int) for v in Y):
                    j = index.get(_canonical_sign(Y))
                    if j is not None:
                        parent[find(i)] = find(j)
        comps = len({find(i) for i in range(len(members))})
        groups.append((key, inv[key], len(members), comps))
    return groups


def _imag_unit_count(D_O: int) -> int:
    """|Z| for an elliptic class: norm-one units of the imaginary order modulo +-1."""
    return {-3: 3, -4: 2}.get(D_O, 1)


def hyperbolic_weight(hk, logP: float, method: str = "gl") -> float:
    """(2 pi)^-1 int_R hk(r) e^{i r log P} dr for an even transform."""
    R = hk.R_max
    if method == "gl":
        from .quadrature import gl_panels
        width = min(0.25, math.pi / max(logP, 1e-9) / 4)
        r, w = gl_panels(0.0, R, width, 16)
        return float(np.sum(w * hk(r) * np.cos(r * logP)) / math.pi)
    if method == "filon":
        return float(filon_cos(hk.r, hk.values, logP) / math.pi)
    raise ValueError(method)


def filon_cos(x: np.ndarray, y: np.ndarray, w: float) -> float:
    """Filon-Simpson rule for int y(x) cos(w x) dx on an even number of uniform panels."""
    n = len(x) - 1
    if n % 2:
        x, y, n = x[:-1], y[:-1], n - 1
    h = x[1] - x[0]
    th = w * h
    if abs(th) < 1e-4:
        return float(np.sum((y[:-2:2] + 4 * y[1:-1:2] + y[2::2])) * h / 3)
    s, c = math.sin(th), math.cos(th)
    alpha = (th * th + th * s * c - 2 * s * s) / th**3
    beta = 2 * (th * (1 + c * c) - 2 * s * c) / th**3
    gamma = 4 * (s - th * c) / th**3
    cx = y * np.cos(w * x)
    c2 = np.sum(cx[::2]) - 0.5 * (cx[0] + cx[-1])
    c2m1 = np.sum(cx[1::2])
    return float(h * (alpha * (y[-1] * math.sin(w * x[-1]) - y[0] * math.sin(w * x[0]))
                      + beta * c2 + gamma * c2m1))


def elliptic_weight(hk, theta: float) -> float:
    """(pi/2) int_R hk(r) cosh((pi - 2 theta) r) / cosh(pi r) dr."""
    from .quadrature import gl_panels
    r, w = gl_panels(0.0, hk.R_max, 0.25, 16)
    ker = np.exp(-2 * theta * r) * (1 + np.exp(-2 * (math.pi - 2 * theta) * r)) / (1 + np.exp(-2 * math.pi * r))
    return float(math.pi * np.sum(w * hk(r) * ker))


@dataclass
class StandardSide:
    main: float
    hyperbolic_sum: float
    elliptic_sum: float
    classes: list
    ambiguous: list


def standard_geometric_side(O: BasisOrder, nu: float, n: int, vol: float, Cprime: float,
                            H: int = 20, family=None) -> StandardSide:
    from .hctransform import build_knu

    pts = enumerate_norm_ball(O, n, Cprime)
    entry = build_knu(nu, family)
    main = (vol * entry.k_e) if is_square(n) else 0.0
    hyp = ell = 0.0
    classes, ambiguous = [], []
    for key, ci, size, comps in _class_groups(O, pts, n, H):
        if ci.type == "hyperbolic":
            Kd = QuadraticField(ci.D_O)
            fO = math.isqrt(ci.D_O // Kd.discriminant)
            U = Kd.order(fO).unit_data
            logP0 = 2 * U.totally_positive_generator_log
            P = ci.P
            val = logP0 / (math.sqrt(P) - 1 / math.sqrt(P)) * hyperbolic_weight(entry.transform, math.log(P))
            hyp += comps * val
        else:
            z = _imag_unit_count(ci.D_O)
            val = elliptic_weight(entry.transform, ci.theta) / (z * math.sin(ci.theta))
            ell += comps * val
        classes.append({"trace": str(key[0]), "D_O": key[1], "type": ci.type,
                        "members": size, "classes": comps, "value": val})
        if comps > 1:
            ambiguous.append(key)
    return StandardSide(main, hyp, ell, classes, ambiguous)


def relative_ball_radius(R: float, half_width: float) -> float:
    """Operator-norm radius beyond which every orbital integral vanishes."""
    return math.exp((R + 2 * half_width) / 2)


def enumerate_many(O: BasisOrder, ns: Iterable[int], Cprime: float, threads: int = 1) -> dict:
    """Balls for several n; threads only change scheduling, never the result."""
    ns = list(ns)
    if threads <= 1:
        return {n: enumerate_norm_ball(O, n, Cprime) for n in ns}
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(threads) as ex:
        res = list(ex.map(lambda n: enumerate_norm_ball(O, n, Cprime), ns))
    return dict(zip(ns, res))
