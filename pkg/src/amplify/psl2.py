"""Primitives for PSL2(R): subgroups A, K, N, Iwasawa and Cartan coordinates,
geodesics in the upper half-plane, and distances to diagonal normalizers.

Matrices are stored as a flat 4-tuple ``(a, b, c, d)`` for ``[[a, b], [c, d]]``.
Entries may be floats or ``fractions.Fraction``; arithmetic is generic so exact
inputs stay exact until a transcendental function is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

DET_TOL = 1e-12
INF = math.inf


def _normalize_sign(entries: Sequence) -> tuple:
    for x in entries:
        if x != 0:
            if x < 0:
                return tuple(-y for y in entries)
            break
    return tuple(entries)


@dataclass(frozen=True)
class GroupElement:
    """A point of PSL2(R), normalized so the first nonzero entry is positive."""

    entries: tuple

    def __post_init__(self):
        if len(self.entries) != 4:
            raise ValueError("GroupElement needs four entries")
        a, b, c, d = self.entries
        det = a * d - b * c
        if isinstance(det, Fraction) or isinstance(det, int):
            if det != 1:
                raise ValueError(f"determinant {det} != 1")
        elif abs(det - 1) > DET_TOL * max(1.0, float(a * a + b * b + c * c + d * d)):
            raise ValueError(f"determinant {det} != 1")
        object.__setattr__(self, "entries", _normalize_sign(self.entries))

    @classmethod
    def from_matrix(cls, m) -> "GroupElement":
        m = np.asarray(m, dtype=float) if not _is_exact(m) else m
        return cls((m[0][0], m[0][1], m[1][0], m[1][1]))

    @classmethod
    def scaled(cls, m) -> "GroupElement":
        """Project a matrix with positive determinant to PSL2 by scaling."""
        a, b, c, d = (float(m[0][0]), float(m[0][1]), float(m[1][0]), float(m[1][1]))
        det = a * d - b * c
        if det <= 0:
            raise ValueError("matrix must have positive determinant")
        s = 1.0 / math.sqrt(det)
        return cls((a * s, b * s, c * s, d * s))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=float).reshape(2, 2)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        a, b, c, d = self.entries
        e, f, g, h = other.entries
        return GroupElement((a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h))

    def inverse(self) -> "GroupElement":
        a, b, c, d = self.entries
        return GroupElement((d, -b, -c, a))

    def act(self, z: complex) -> complex:
        """Moebius action on the upper half-plane (finite points)."""
        a, b, c, d = (float(x) for x in self.entries)
        return (a * z + b) / (c * z + d)

    def act_boundary(self, x: float) -> float:
        """Moebius action on R u {inf}; returns ``math.inf`` for the cusp."""
        a, b, c, d = (float(v) for v in self.entries)
        if x == INF:
            return a / c if c != 0 else INF
        den = c * x + d
        return (a * x + b) / den if den != 0 else INF

    def isclose(self, other: "GroupElement", tol: float = 1e-10) -> bool:
        return dist(self, other) <= tol


def _is_exact(m) -> bool:
    try:
        return all(isinstance(x, (int, Fraction)) for row in m for x in row)
    except TypeError:
        return False


IDENTITY = GroupElement((1, 0, 0, 1))
W = GroupElement((0, 1, -1, 0))


def make_a(t: float) -> GroupElement:
    if t == 0:
        return IDENTITY
    return GroupElement((math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2)))


def make_k(theta: float) -> GroupElement:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return GroupElement((c, s, -s, c))


def make_n(x) -> GroupElement:
    return GroupElement((1, x, 0, 1))


def iwasawa_H(g: GroupElement) -> float:
    """Height t with g in N a(t) K, i.e. log Im(g i)."""
    _, _, c, d = (float(x) for x in g.entries)
    return -math.log(c * c + d * d)


def iwasawa(g: GroupElement) -> tuple[float, float, float]:
    """Return (x, t, theta) with g = n(x) a(t) k(theta) in PSL2."""
    a, b, c, d = (float(x) for x in g.entries)
    q = c * c + d * d
    x = (a * c + b * d) / q
    t = -math.log(q)
    theta = 2 * math.atan2(-c, d)
    return x, t, theta


def cartan_t(g: GroupElement) -> float:
    """Nonnegative t with g in K a(t) K (hyperbolic distance from i to g i)."""
    a, b, c, d = (float(x) for x in g.entries)
    return 2 * math.asinh(math.hypot(a - d, b + c) / 2)


def cartan_t_array(a, b, c, d):
    """Vectorized Cartan coordinate for arrays of matrix entries."""
    return 2 * np.arcsinh(np.hypot(a - d, b + c) / 2)


def dist(g: GroupElement, h: GroupElement) -> float:
    """Reference metric: min over signs of the Frobenius distance."""
    x = np.array(g.entries, dtype=float)
    y = np.array(h.entries, dtype=float)
    return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))


def alpha_map(g: GroupElement, k: GroupElement) -> GroupElement:
    """K-part of k g in the decomposition NA K."""
    _, _, theta = iwasawa(k @ g)
    return make_k(theta)


@dataclass(frozen=True)
class GeodesicDescriptor:
    """Oriented geodesic g A i: ``endpoints[0] = g.0`` and ``endpoints[1] = g.inf``."""

    kind: str
    endpoints: tuple
    center: Optional[float] = None
    radius: Optional[float] = None
    top_s: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("vertical", "half-circle"):
            raise ValueError(f"unknown geodesic kind {self.kind!r}")
        if self.kind == "half-circle":
            e0, e1 = self.endpoints
            if not self.radius or self.radius <= 0:
                raise ValueError("half-circle needs positive radius")
            if abs(self.center - (e0 + e1) / 2) > 1e-9 * max(1.0, abs(self.center)):
                raise ValueError("center must be the midpoint of the endpoints")
        elif sum(1 for e in self.endpoints if e == INF) != 1:
            raise ValueError("vertical geodesic carries exactly one finite endpoint")

    def base_element(self) -> GroupElement:
        """Some g0 with g0 A i equal to this geodesic (orientation preserved)."""
        e0, e1 = self.endpoints
        if e1 == INF:
            return make_n(e0)
        if e0 == INF:
            return make_n(e1) @ W
        # columns (e1, 1) and (e0, 1): sends inf -> e1 and 0 -> e0
        det = e1 - e0
        if det > 0:
            s = 1 / math.sqrt(det)
            return GroupElement((e1 * s, e0 * s, s, s))
        s = 1 / math.sqrt(-det)
        return GroupElement((e1 * s, -e0 * s, s, -s))


A_GEODESIC = GeodesicDescriptor("vertical", (0.0, INF))


def geodesic_of(g: GroupElement) -> GeodesicDescriptor:
    a, b, c, d = (float(x) for x in g.entries)
    if c == 0:
        return GeodesicDescriptor("vertical", (b / d, INF))
    if d == 0:
        return GeodesicDescriptor("vertical", (INF, a / c))
    e0, e1 = b / d, a / c
    return GeodesicDescriptor(
        "half-circle",
        (e0, e1),
        center=(e0 + e1) / 2,
        radius=abs(e1 - e0) / 2,
        top_s=math.log(abs(d / c)),
    )


def _normalizer_paths(L: GeodesicDescriptor):
    g0 = L.base_element()
    g0i = g0.inverse()
    m0 = g0.matrix
    m0i = g0i.matrix
    w = W.matrix

    def on_a(t):
        return m0 @ np.diag([math.exp(t / 2), math.exp(-t / 2)]) @ m0i

    def on_aw(t):
        return m0 @ np.diag([math.exp(t / 2), math.exp(-t / 2)]) @ w @ m0i

    return on_a, on_aw


def _proj_dist(x: np.ndarray, y: np.ndarray) -> float:
    return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))


def dist_to_normalizer(g: GroupElement, L: GeodesicDescriptor = A_GEODESIC) -> float:
    """Distance from g to the normalizer of the stabilizer of L (both components).

    Each component is a one-parameter curve; a coarse scan over the bracket
    |t| <= 2 cartan_t(g) + 10 picks the basin, then golden-section refines it.
    """
    gm = g.matrix
    bound = 2 * cartan_t(g) + 10
    best = math.inf
    for path in _normalizer_paths(L):
        f = lambda t: _proj_dist(gm, path(t))  # noqa: E731
        ts = np.linspace(-bound, bound, 801)
        vals = np.array([f(t) for t in ts])
        i = int(np.argmin(vals))
        if 0 < i < len(ts) - 1:
            res = minimize_scalar(f, bracket=(ts[i - 1], ts[i], ts[i + 1]),
                                  method="golden", options={"xtol": 1e-12})
            val = min(float(res.fun), float(vals[i]))
        else:
            val = float(vals[i])
        best = min(best, val)
    return best


def _min_inverse_pair(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """min over x > 0 of (p - x)^2 + (q - 1/x)^2, batched.

    Critical points are the positive roots of x^4 - p x^3 + q x - 1.
    """
    n = p.size
    comp = np.zeros((n, 4, 4))
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    comp[:, 0, 0] = p
    comp[:, 0, 2] = -q
    comp[:, 0, 3] = 1.0
    roots = np.linalg.eigvals(comp)
    x = roots.real
    ok = (np.abs(roots.imag) <= 1e-7 * (1 + np.abs(x))) & (x > 0)
    x = np.where(ok, x, 1.0)
    for _ in range(2):                      # Newton polish on the quartic
        P = p[:, None]
        Q = q[:, None]
        f = x**4 - P * x**3 + Q * x - 1
        df = 4 * x**3 - 3 * P * x**2 + Q
        x = np.where(ok & (np.abs(df) > 0), x - f / np.where(df == 0, 1, df), x)
        x = np.where(x > 0, x, 1.0)
    val = (p[:, None] - x) ** 2 + (q[:, None] - 1 / x) ** 2
    val = np.where(ok, val, np.inf)
    return val.min(axis=1)


def dist_to_diagonal_normalizer(a, b, c, d) -> np.ndarray:
    """Batched distance to N_G(A) for arrays of SL2 entries (closed form)."""
    a, b, c, d = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a, b, c, d))
    best = np.full(a.shape, np.inf)
    for s in (1.0, -1.0):
        best = np.minimum(best, _min_inverse_pair(s * a, s * d) + b * b + c * c)
        best = np.minimum(best, _min_inverse_pair(s * b, -s * c) + a * a + d * d)
    return np.sqrt(best)
