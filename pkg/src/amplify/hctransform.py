"""Rank-one spherical harmonic analysis on PSL2(R).

Bi-K-invariant functions are handled through their Cartan profile t -> k(a(t)).
Three equivalent pictures are used:

* the Cartan picture, integrating against spherical functions with the
  Haar density 2*pi*sinh(t) dt (hyperbolic area, mass-one K);
* the Abel picture: g(xi) = e^{xi/2} * integral over N of k(a(xi) n), whose
  cosine transform is the Harish-Chandra transform;
* the Plancherel picture: k(t) = integral of hk(r) phi_ir(t) beta(r) dr.

The fast paths go through the Abel picture; the slower Cartan and Plancherel
forms are kept as independent cross-checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .psl2 import (
    IDENTITY,
    GroupElement,
    cartan_t,
    cartan_t_array,
    make_k,
)
from .quadrature import QuadratureError, gl_on_breaks, gl_panels

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
INTERP_STEP = 2.0**-12          # internal Cartan-profile resolution
KNU_TOL = 1e-9                   # relative level below which k_nu counts as zero


def beta(r):
    """Plancherel density r tanh(pi r) / (2 pi)."""
    r = np.asarray(r)
    return r * np.tanh(np.pi * r) / (2 * np.pi)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, S(x) + S(1 - x) = 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1 - x, 1.0)), 0.0)
    return a / (a + b)


def bump(t0: float = 0.5, power: float = 1.0) -> Callable:
    """Even bump exp(-power / (1 - (t/t0)^2)) on |t| < t0."""

    def k(t):
        x = np.asarray(t, dtype=float) / t0
        inside = np.abs(x) < 1
        safe = np.where(inside, 1 - x * x, 1.0)
        return np.where(inside, np.exp(-power / safe), 0.0)

    k.support = t0
    return k


# --------------------------------------------------------------------------
# spherical functions


def _circle_breaks(t: float, freq: float, refine: int) -> np.ndarray:
    """Panel breaks on [0, pi] that resolve both theta and the phase log(...)."""
    uniform = np.linspace(0.0, math.pi, 32 * refine + 1)
    if t == 0.0 or freq == 0.0:
        return uniform
    m = max(1, int(math.ceil(2 * t * (freq + 1) / math.pi))) * refine
    levels = np.linspace(-t, t, m + 1)
    c = (np.exp(levels) - math.cosh(t)) / math.sinh(t)
    phase = np.arccos(np.clip(c, -1.0, 1.0))
    return np.unique(np.concatenate([uniform, phase]))


def _circle_rule(t: float, freq: float, refine: int):
    th, w = gl_on_breaks(_circle_breaks(t, freq, refine), 16)
    L = np.log(math.cosh(t) + np.cos(th) * math.sinh(t))
    return L, w / math.pi


def spherical(r, t: float, tol: float = 1e-10, max_refine: int = 64) -> float:
    """phi_{ir}(a(t)) from the circle integral with the uniform probability measure.

    ``r`` may be real or purely imaginary (|Im r| <= 1/2 is the admissible
    segment).  The rule is refined by doubling until successive values agree.
    """
    r = complex(r)
    t = abs(float(t))
    if t == 0.0:
        return 1.0
    expo = 1j * r - 0.5
    prev = None
    refine = 1
    while refine <= max_refine:
        L, w = _circle_rule(t, abs(r.real), refine)
        val = np.sum(w * np.exp(expo * L))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return float(val.real)
        prev = val
        refine *= 2
    raise QuadratureError(f"spherical(r={r}, t={t}) did not converge", abs(val - prev))


def spherical_mehler(r: float, t: float) -> float:
    """Independent evaluation via the Mehler-type line integral (real r only)."""
    t = abs(float(t))
    if t == 0.0:
        return 1.0
    # u = t - w^2 removes the inverse square-root singularity at u = t
    W = math.sqrt(t)
    w, wt = gl_panels(0.0, W, min(W, math.pi / (2 * abs(r) * W + 1)), 16)
    u = t - w * w
    den = np.sqrt(2 * np.sinh((t + u) / 2) * np.sinh((t - u) / 2))
    return float(SQRT2 / math.pi * np.sum(wt * np.cos(r * u) * 2 * w / den))


# --------------------------------------------------------------------------
# profiles


@dataclass(eq=False)
class SphericalProfile:
    """Cartan profile of a bi-K-invariant function on a uniform grid in t."""

    t: np.ndarray
    values: np.ndarray
    T_max: float
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        # zero slope at t = 0 keeps the even extension smooth
        self._spline = CubicSpline(self.t, self.values, bc_type=((1, 0.0), "not-a-knot"))

    @classmethod
    def from_function(cls, f: Callable, T_max: float, step: float = INTERP_STEP):
        n = int(math.ceil(T_max / step))
        t = np.linspace(0.0, n * step, n + 1)
        return cls(t, f(t), T_max)

    def __call__(self, t):
        tt = np.abs(np.asarray(t, dtype=float))
        inside = tt < min(self.T_max, self.t[-1])
        return np.where(inside, self._spline(np.where(inside, tt, 0.0)), 0.0)


@dataclass(eq=False)
class AbelTransform:
    """Samples of the Abel transform g on Gauss-Legendre nodes of [0, support]."""

    xi: np.ndarray
    weights: np.ndarray
    g: np.ndarray

    def fourier(self, z) -> np.ndarray:
        """h(z) = integral over R of g(xi) e^{i z xi}, for complex z."""
        z = np.asarray(z)
        flat = z.ravel()
        wg = self.weights * self.g
        out = np.empty(flat.shape, dtype=complex)
        for i in range(0, flat.size, 4096):
            out[i:i + 4096] = 2 * np.cos(np.outer(flat[i:i + 4096], self.xi)) @ wg
        return out.reshape(z.shape)


def abel_transform(k: Callable, support: float, width: float = 0.01) -> AbelTransform:
    """g(xi) = 2 Q(sinh^2(xi/2)) with Q(v) = int k(u) (u - v)^{-1/2} du, u = sinh^2(t/2)."""
    xi, wx = gl_panels(0.0, support, width, 16)
    u0 = math.sinh(support / 2) ** 2
    v = np.sinh(xi / 2) ** 2
    W = np.sqrt(np.maximum(u0 - v, 0.0))
    y, wy = np.polynomial.legendre.leggauss(64)
    w = (y[None, :] + 1) / 2 * W[:, None]
    u = v[:, None] + w * w
    inner = k(2 * np.arcsinh(np.sqrt(u)))
    g = 4 * np.sum(wy[None, :] * inner, axis=1) * W / 2
    return AbelTransform(xi, wx, g)


@dataclass(eq=False)
class TransformProfile:
    """Samples of hk(ir) on [0, R_max] and on the segment r in i[0, 1/2]."""

    func: Callable
    R_max: float
    center: float = 0.0
    step: float = 0.01
    r: np.ndarray = field(init=False)
    values: np.ndarray = field(init=False)
    seg_y: np.ndarray = field(init=False)
    seg_values: np.ndarray = field(init=False)
    decay: dict = field(init=False)

    def __post_init__(self):
        n = int(round(self.R_max / self.step))
        self.r = np.linspace(0.0, n * self.step, n + 1)
        raw = self.func(self.r.astype(complex))
        self.values = raw.real
        self.seg_y = np.linspace(0.0, 0.5, 51)
        self.seg_values = self.func(1j * self.seg_y)
        self.imag_residue = float(max(np.max(np.abs(raw.imag)), np.max(np.abs(self.seg_values.imag))))
        tail = self.r >= self.R_max - max(self.R_max / 4, 10.0)
        env = 1 + np.abs(self.r[tail] - self.center)
        self.decay = {N: float(np.max(np.abs(self.values[tail]) * env**N)) for N in (2, 4, 6, 8, 10, 12)}

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=complex)).real

    def tail_bound(self) -> float:
        """Bound on int_{R_max}^inf |hk| beta dr from the fitted decay envelopes."""
        x = 1 + self.R_max - self.center
        best = math.inf
        for N, C in self.decay.items():
            if N <= 2:
                continue
            # int_{x}^inf y^{-N} (y + center - 1) dy / (2 pi)
            val = C / (2 * math.pi) * (x ** (2 - N) / (N - 2) + (self.center - 1) * x ** (1 - N) / (N - 1))
            best = min(best, abs(val))
        return best


def transform_from_abel(abel: AbelTransform, R_max: float, step: float = 0.01) -> TransformProfile:
    return TransformProfile(abel.fourier, R_max, 0.0, step)


# --------------------------------------------------------------------------
# transform and inverse


def hc_transform(k, s: complex, method: str = "abel", support: Optional[float] = None) -> float:
    """Harish-Chandra transform of a bi-K-invariant k at s on R u iR.

    ``k`` is a callable Cartan profile (SphericalProfile or vectorized
    function); ``support`` defaults to ``k.T_max`` or ``k.support``.
    ``method="cartan"`` integrates 2 pi k(t) phi_s(t) sinh t dt with the
    circle-integral spherical function; ``"abel"`` uses the Abel picture.
    """
    s = complex(s)
    if abs(s.real) > 1e-15 and abs(s.imag) > 1e-15:
        raise ValueError("s must lie on R or iR")
    T = support if support is not None else getattr(k, "T_max", None) or getattr(k, "support")
    r = -1j * s
    if method == "abel":
        return float(abel_transform(k, T).fourier(np.array([r]))[0].real)
    if method == "cartan":
        width = min(0.05, math.pi / (abs(r.real) * 1.0 + 1))
        t, w = gl_panels(0.0, T, width, 16)
        vals = np.array([spherical(r, ti) for ti in t])
        return float(2 * math.pi * np.sum(w * k(t) * vals * np.sinh(t)))
    raise ValueError(f"unknown method {method!r}")


def inverse_hc(hk: TransformProfile, t, tol: float = 1e-10, tail_tol: float = 1e-8):
    """Plancherel inversion k(t) = int_0^inf hk(ir) phi_ir(a(t)) beta(r) dr.

    Interchanging the r- and circle integrals turns this into a circle
    integral of exp(-L/2) F(L) with F(x) = int hk beta cos(r x) dr.
    """
    tail = hk.tail_bound()
    if not tail <= tail_tol:
        raise QuadratureError("insufficient decay certificate for the Plancherel integral", tail)
    rn, rw = gl_panels(0.0, hk.R_max, 1.0, 16)
    weights = rw * hk(rn) * beta(rn)
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.abs(np.asarray(t, dtype=float)))
    out = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        if ti == 0.0:
            out[i] = float(np.sum(weights))
            continue
        prev = None
        for refine in (1, 2, 4, 8):
            L, w = _circle_rule(ti, hk.R_max, refine)
            F = np.empty(L.shape)
            for j in range(0, L.size, 2048):
                F[j:j + 2048] = np.cos(np.outer(L[j:j + 2048], rn)) @ weights
            val = float(np.sum(w * np.exp(-L / 2) * F))
            if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
                break
            prev = val
        else:
            raise QuadratureError(f"inverse_hc at t={ti} did not converge", abs(val - prev))
        out[i] = val
    return float(out[0]) if scalar else out


def abel_inverse(hk: TransformProfile, T: float, step: float = INTERP_STEP) -> SphericalProfile:
    """Cartan profile of the inverse transform on [0, T] via Abel inversion.

    g'(xi) = -(1/pi) int r hk(r) sin(r xi) dr, then
    k(t) = -(1/(sqrt 2 pi)) int_t^T g'(xi) (cosh xi - cosh t)^{-1/2} dxi,
    assuming hk is the transform of a function supported in [0, T].
    """
    rn, rw = gl_panels(0.0, hk.R_max, 1.0, 16)
    wr = rw * rn * hk(rn)
    n_xi = int(math.ceil((T + 0.01) / (step / 2)))
    xi = np.linspace(0.0, n_xi * step / 2, n_xi + 1)
    gp = np.empty(xi.shape)
    for j in range(0, xi.size, 1024):
        gp[j:j + 1024] = -np.sin(np.outer(xi[j:j + 1024], rn)) @ wr / math.pi
    gps = CubicSpline(xi, gp)
    n = int(math.ceil(T / step))
    ts = np.linspace(0.0, n * step, n + 1)
    vals = np.zeros(ts.shape)
    for i, t in enumerate(ts):
        W = math.sqrt(max(T - t, 0.0))
        if W == 0.0:
            continue
        w, ww = gl_panels(0.0, W, 0.02, 16)
        x = t + w * w
        den = np.sqrt(2 * np.sinh(t + w * w / 2) * np.sinh(w * w / 2))
        vals[i] = -np.sum(ww * gps(x) * 2 * w / den) / (SQRT2 * math.pi)
    return SphericalProfile(ts, vals, T)


# --------------------------------------------------------------------------
# the k_nu family


@dataclass(eq=False)
class KnuEntry:
    """One member k_nu: its transform, Cartan profile and certificate."""

    nu: float
    transform: TransformProfile
    profile: SphericalProfile
    k_e: float
    certificate: dict


class KnuFamily:
    """Approximate spectral projectors built from a fixed base bump.

    h(r) is the transform of the base bump, h1 = h^2 is the transform of its
    self-convolution, h2(r) = 2 h1(delta r) / h1(0) and
    h_nu(r) = h2(nu + r) + h2(nu - r).
    """

    def __init__(self, t0: float = 0.5, power: float = 1.0, window: float = 320.0,
                 grid_step: float = 0.01):
        self.t0 = t0
        self.power = power
        self.window = window
        self.grid_step = grid_step
        self.base = bump(t0, power)
        self.abel = abel_transform(self.base, t0)
        self.h1_0 = float(self.abel.fourier(np.array([0.0]))[0].real) ** 2
        self.delta = self._find_delta()
        self.support_radius = 2 * t0 / self.delta
        self._cache: dict[float, KnuEntry] = {}

    def h1(self, z):
        return self.abel.fourier(z) ** 2

    def _find_delta(self) -> float:
        """Largest delta <= 1 with h1 > h1(0)/2 on |s| <= delta (both axes)."""
        half = self.h1_0 / 2

        def ok(d):
            x = np.linspace(0.0, d, 401)
            on_ir = self.h1(x.astype(complex)).real     # s = i x
            on_r = self.h1(-1j * x).real                 # s = x
            return bool(np.all(on_ir > half) and np.all(on_r > half))

        if ok(1.0):
            return 1.0
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        return lo

    def h2(self, z):
        return 2 * self.h1(self.delta * np.asarray(z)) / self.h1_0

    def hk_func(self, nu: float) -> Callable:
        def h(r):
            r = np.asarray(r, dtype=complex)
            return self.h2(nu + r) + self.h2(nu - r)
        return h

    def entry(self, nu: float) -> KnuEntry:
        nu = float(nu)
        if nu not in self._cache:
            self._cache[nu] = self._build(nu)
        return self._cache[nu]

    def _build(self, nu: float) -> KnuEntry:
        hk = TransformProfile(self.hk_func(nu), nu + self.window, nu, self.grid_step)
        rn, rw = gl_panels(0.0, hk.R_max, 1.0, 16)
        k_e = float(np.sum(rw * hk(rn) * beta(rn)))
        probe = self.support_radius + 0.25
        profile = abel_inverse(hk, probe)
        profile.T_max = probe
        cert = certify(nu, hk, profile, k_e, self.grid_step)
        # cut the profile at the support radius: the values beyond it are
        # quadrature noise, checked in the certificate
        profile = SphericalProfile(profile.t, profile.values, self.support_radius)
        return KnuEntry(nu, hk, profile, k_e, cert)


def measured_support(profile: SphericalProfile, step: float, rel_tol: float = KNU_TOL) -> float:
    """Smallest grid point T with |k(t)| <= rel_tol * max|k| for all sampled t >= T."""
    n = int(math.floor(profile.t[-1] / step))
    grid = np.arange(n + 1) * step
    fine = profile._spline(profile.t)
    scale = np.max(np.abs(fine))
    big = np.abs(fine) > rel_tol * scale
    last = profile.t[np.nonzero(big)[0][-1]] if big.any() else 0.0
    return float(grid[np.searchsorted(grid, last, side="right")]) if last < grid[-1] else float(grid[-1])


def certify(nu: float, hk: TransformProfile, profile: SphericalProfile, k_e: float,
            grid_step: float) -> dict:
    """Numerical margins for the five defining properties of k_nu."""
    near_r = np.linspace(max(nu - 1, 0.0), nu + 1, 201)
    near = hk(near_r)
    seg = hk.seg_values.real
    decay4 = float(np.max(hk.values * (1 + np.abs(nu - hk.r)) ** 4))
    return {
        "nu": nu,
        "support_radius": measured_support(profile, grid_step),
        "min_hk": float(min(hk.values.min(), seg.min())),
        "min_hk_real_axis": float(hk.values.min()),
        "min_hk_segment": float(seg.min()),
        "imag_residue": hk.imag_residue,
        "min_near_nu": float(near.min()),
        "decay_sup_N4": decay4,
        "k_e": k_e,
        "k_e_over_nu": k_e / nu if nu > 0 else math.inf,
        "tail_bound": hk.tail_bound(),
    }


_DEFAULT_FAMILY: Optional[KnuFamily] = None


def default_family() -> KnuFamily:
    global _DEFAULT_FAMILY
    if _DEFAULT_FAMILY is None:
        _DEFAULT_FAMILY = KnuFamily()
    return _DEFAULT_FAMILY


def build_knu(nu: float, family: Optional[KnuFamily] = None, strict: bool = False) -> KnuEntry:
    """Build k_nu; with ``strict`` a violated property raises CertificationError."""
    fam = family or default_family()
    entry = fam.entry(nu)
    if strict:
        failures = knu_failures(entry.certificate)
        if failures:
            raise CertificationError(f"k_nu certification failed for nu={nu}: {failures}")
    return entry


class CertificationError(RuntimeError):
    pass


def knu_failures(cert: dict) -> list[str]:
    out = []
    if cert["min_near_nu"] < 1 - 1e-6:
        out.append("lower bound on |r - nu| <= 1")
    if cert["min_hk"] < -1e-9:
        out.append("nonnegativity")
    if cert["imag_residue"] > 1e-9:
        out.append("realness")
    if cert["tail_bound"] > 1e-8:
        out.append("decay certificate")
    return out


def geodesic_mass(nu: float, family: Optional[KnuFamily] = None, refine: int = 1) -> float:
    """int over R of k_nu(a(t)) dt."""
    entry = build_knu(nu, family)
    R = entry.profile.T_max
    width = min(0.05, math.pi / (max(nu, 1.0) * 2)) / refine
    t, w = gl_panels(0.0, R, width, 16)
    return float(2 * np.sum(w * entry.profile(t)))


# --------------------------------------------------------------------------
# the model integral


def cutoff_c(t, R: float = 1.0):
    """Equal to 1 on [-R-1, R+1], decaying smoothly to 0 over one unit."""
    return smooth_step(R + 2 - np.abs(np.asarray(t, dtype=float)))


def model_integral(r: float, R: Optional[float] = None, nodes_per_panel: int = 8,
                   with_error: bool = False):
    """L(r) = int over R of c(t) phi_ir(a(t)) dt, Gauss-Legendre panels of width pi/r.

    The error estimate is the change when the panel width is halved.
    """
    R = default_family().support_radius if R is None else R
    end = R + 2

    def rule(width):
        t, w = gl_panels(0.0, end, width, nodes_per_panel)
        phi = np.array([spherical(r, ti, tol=1e-12) for ti in t])
        return float(2 * np.sum(w * cutoff_c(t, R) * phi))

    width = math.pi / max(r, 1.0)
    coarse = rule(width)
    fine = rule(width / 2)
    if with_error:
        return fine, abs(fine - coarse)
    return fine


def phase_model(x1: float, t: float) -> float:
    """Phase log(cosh t + x1 sinh t) of the model integral."""
    return math.log(math.cosh(t) + x1 * math.sinh(t))


# --------------------------------------------------------------------------
# orbital integrals


@dataclass(frozen=True)
class CutoffB:
    """Smooth b >= 0 whose translates by the period sum to 1.

    b(t) = S(t/period + 1/2) * (1 - S(t/period - 1/2)) with S a smooth
    transition over [-eta, eta]; support is |t| <= period * (1/2 + eta).
    """

    period: float
    eta: float = 0.25

    def _step(self, y):
        return smooth_step((np.asarray(y) + self.eta) / (2 * self.eta))

    def __call__(self, t):
        y = np.asarray(t, dtype=float) / self.period
        return self._step(y + 0.5) * (1 - self._step(y - 0.5))

    @property
    def half_width(self) -> float:
        return self.period * (0.5 + self.eta)

    def residual(self, t) -> float:
        """max |sum_k b(t + k period) - 1| over the sample points."""
        t = np.asarray(t, dtype=float)
        total = sum(self(t + j * self.period) for j in range(-3, 4))
        return float(np.max(np.abs(total - 1)))


def support_bound(R: float, b: CutoffB) -> float:
    """C' with I(nu, g) = 0 whenever d(g, e) > C' in the reference metric.

    I(nu, g) != 0 forces cartan_t(g) <= R + 2 * half_width, and
    d(g, e)^2 <= 2 cosh(cartan_t) + 2 gives d(g, e) <= 2 cosh((R + 2w)/2).
    """
    return 2 * math.cosh((R + 2 * b.half_width) / 2)


def _orbital_rule(nu: float, b: CutoffB, refine: int = 1):
    width = min(0.1, math.pi / max(nu, 1.0)) / refine
    return gl_panels(-b.half_width, b.half_width, width, 8)


def orbital_integral(nu: float, g: GroupElement, b: CutoffB, family: Optional[KnuFamily] = None,
                     refine: int = 1, shortcut: bool = True) -> float:
    """I(nu, g) = int int b(s) b(t) k_nu(a(-s) g a(t)) ds dt.

    With ``shortcut`` the integral is skipped when g is provably outside the
    support; pass False to run the full quadrature anyway.
    """
    entry = build_knu(nu, family)
    R = entry.profile.T_max
    if shortcut and math.isfinite(R) and cartan_t_of(g) > R + 2 * b.half_width:
        return 0.0
    x, w = _orbital_rule(nu, b, refine)
    bw = b(x) * w
    live = bw != 0
    x, bw = x[live], bw[live]
    a_, b_, c_, d_ = (float(v) for v in g.entries)
    es = np.exp(-x / 2)            # s-axis factors
    et = np.exp(x / 2)             # t-axis factors
    total = 0.0
    for i in range(0, x.size, 256):
        S = es[i:i + 256, None]
        A = a_ * S * et[None, :]
        B = b_ * S / et[None, :]
        C = c_ / S * et[None, :]
        D = d_ / S / et[None, :]
        vals = entry.profile(cartan_t_array(A, B, C, D))
        total += float(bw[i:i + 256] @ vals @ bw)
    return total


def cartan_t_of(g: GroupElement) -> float:
    return cartan_t(g)


def orbital_integral_on_A(nu: float, s0: float, b: CutoffB, family: Optional[KnuFamily] = None) -> float:
    """I(nu, a(s0)) through its one-dimensional convolution form."""
    entry = build_knu(nu, family)
    x, w = _orbital_rule(nu, b)
    bw = b(x) * w
    conv = np.array([np.sum(bw * entry.profile(x - s + s0)) for s in x])
    return float(np.sum(bw * conv))


# --------------------------------------------------------------------------
# the oscillatory integral J(r, g)


def _H_bottom(p, q):
    return -np.log(p * p + q * q)


def H_k_g_a(theta, g: GroupElement, t):
    """H(k(theta) g a(t)), vectorized over theta and t."""
    a_, b_, c_, d_ = (float(v) for v in g.entries)
    p0, q0 = -np.sin(theta / 2), np.cos(theta / 2)
    p, q = p0 * a_ + q0 * c_, p0 * b_ + q0 * d_
    return _H_bottom(p * np.exp(t / 2), q * np.exp(-t / 2))


def phase_phi(s, t, theta, g: GroupElement):
    """phi(s, t, theta, g) = H(k(theta) g a(t)) - H(k(theta) a(s))."""
    return H_k_g_a(theta, g, t) - H_k_g_a(theta, IDENTITY, s)


def jacobian_sigma(s, theta):
    """d sigma / d theta for k(sigma) = alpha_{a(s)}(k(theta))."""
    c, sn = np.cos(theta / 2), np.sin(theta / 2)
    return np.exp(s) / (c * c + np.exp(2 * s) * sn * sn)


def top_parameter(theta, g: GroupElement):
    """Parameter t at which k(theta) g a(t) i is the top of its half-circle."""
    a_, b_, c_, d_ = (float(v) for v in g.entries)
    p0, q0 = -np.sin(theta / 2), np.cos(theta / 2)
    c = p0 * a_ + q0 * c_
    d = p0 * b_ + q0 * d_
    with np.errstate(divide="ignore"):
        return np.log(np.abs(d / c))


def oscillatory_J(r: float, g: GroupElement, b: CutoffB, refine: int = 1) -> complex:
    """J(r, g) = int_K int int b(s) b(t) exp((1/2 + i r) H(k a(-s) g a(t))) ds dt dk.

    Evaluated in the separated form: for k(theta) = alpha_{a(-s)}(k(sigma))
    the exponent splits into a t-part and an s-part.  The (s, t, theta)
    tensor rule is refined by doubling until two levels agree.
    """
    expo = 0.5 + 1j * r

    def level(m):
        width = min(0.1, math.pi / max(r, 1.0)) / m
        x, w = gl_panels(-b.half_width, b.half_width, width, 8)
        bw = b(x) * w
        live = bw != 0
        x, bw = x[live], bw[live]
        th, wt = gl_panels(0.0, 2 * math.pi, width / 2, 8)
        total = 0.0 + 0.0j
        for i in range(0, th.size, 128):
            T = th[i:i + 128, None]
            Hs = H_k_g_a(T, IDENTITY, x[None, :])
            Ht = H_k_g_a(T, g, x[None, :])
            S = np.sum(bw * jacobian_sigma(x[None, :], T) * np.exp(-expo * Hs), axis=1)
            Tt = np.sum(bw * np.exp(expo * Ht), axis=1)
            total += np.sum(wt[i:i + 128] * S * Tt)
        return total / (2 * math.pi)

    prev = level(refine)
    val = level(2 * refine)
    if abs(val - prev) > 1e-6 * max(1.0, abs(val)):
        val2 = level(4 * refine)
        if abs(val2 - val) > 1e-6 * max(1.0, abs(val2)):
            raise QuadratureError(f"oscillatory_J(r={r}) did not converge", abs(val2 - val))
        val = val2
    return complex(val)


def oscillatory_J_direct(r: float, g: GroupElement, b: CutoffB, n_sigma: int = 512) -> complex:
    """Brute-force J(r, g) on the original (sigma, s, t) variables; small r only."""
    expo = 0.5 + 1j * r
    width = min(0.1, math.pi / max(r, 1.0))
    x, w = gl_panels(-b.half_width, b.half_width, width, 8)
    bw = b(x) * w
    a_, b_, c_, d_ = (float(v) for v in g.entries)
    total = 0.0 + 0.0j
    sig = np.linspace(0, 2 * math.pi, n_sigma, endpoint=False)
    for sg in sig:
        p0, q0 = -math.sin(sg / 2), math.cos(sg / 2)
        p = p0 * np.exp(-x / 2)
        q = q0 * np.exp(x / 2)
        P = p[:, None] * a_ + q[:, None] * c_
        Q = p[:, None] * b_ + q[:, None] * d_
        H = _H_bottom(P * np.exp(x[None, :] / 2), Q * np.exp(-x[None, :] / 2))
        total += bw @ np.exp(expo * H) @ bw
    return complex(total / n_sigma)


def phase_hessian(theta: float, g: GroupElement, h: float = 1e-4) -> np.ndarray:
    """Finite-difference (s, t) Hessian of phi at its critical point."""
    s0 = float(top_parameter(theta, make_k(0.0)))
    t0 = float(top_parameter(theta, g))
    f = lambda s, t: float(phase_phi(s, t, theta, g))  # noqa: E731
    fss = (f(s0 + h, t0) - 2 * f(s0, t0) + f(s0 - h, t0)) / h**2
    ftt = (f(s0, t0 + h) - 2 * f(s0, t0) + f(s0, t0 - h)) / h**2
    fst = (f(s0 + h, t0 + h) - f(s0 + h, t0 - h) - f(s0 - h, t0 + h) + f(s0 - h, t0 - h)) / (4 * h * h)
    return np.array([[fss, fst], [fst, ftt]])


def psi(theta, g: GroupElement):
    """Critical value of the (s, t) phase: H(k g a(xi2)) - H(k a(xi1))."""
    xi1 = top_parameter(theta, IDENTITY)
    xi2 = top_parameter(theta, g)
    return H_k_g_a(theta, g, xi2) - H_k_g_a(theta, IDENTITY, xi1)


def stationary_phase_J(r: float, g: GroupElement, b: CutoffB, n_theta: int = 20000) -> complex:
    """Leading term r^{-1} int c1(theta) e^{i r psi(theta)} dtheta of J(r, g).

    c1 = 2 pi |det Hess|^{-1/2} c at the critical point; the (s, t) Hessian
    is diag(1, -1) for the unit-speed parametrization a(t) i = e^t i.
    """
    th, wt = gl_panels(0.0, 2 * math.pi, 2 * math.pi / n_theta * 8, 8)
    with np.errstate(all="ignore"):
        xi1 = top_parameter(th, IDENTITY)
        xi2 = top_parameter(th, g)
        ok = np.isfinite(xi1) & np.isfinite(xi2)
        xi1 = np.where(ok, xi1, 0.0)
        xi2 = np.where(ok, xi2, 0.0)
        ps = H_k_g_a(th, g, xi2) - H_k_g_a(th, IDENTITY, xi1)
        amp = jacobian_sigma(xi1, th) * b(xi1) * b(xi2) * np.exp(ps / 2) / (2 * math.pi)
        c1 = np.where(ok, 2 * math.pi * amp, 0.0)
    return complex(np.sum(wt * c1 * np.exp(1j * r * ps)) / r)


def critical_thetas(g: GroupElement, n: int = 20000) -> list[float]:
    """Critical points of theta -> psi(theta, g), located by root-finding on d psi / d theta."""
    from scipy.optimize import brentq

    def dpsi(th, h=1e-6):
        return float((psi(th + h, g) - psi(th - h, g)) / (2 * h))

    th = np.linspace(0.0, 2 * math.pi, n + 1)[1:-1]
    with np.errstate(all="ignore"):
        vals = np.array([dpsi(x) for x in th])
        xi1 = top_parameter(th, make_k(0.0))
        xi2 = top_parameter(th, g)
    regular = np.isfinite(vals) & np.isfinite(xi1) & np.isfinite(xi2) & (np.abs(vals) < 1e3)
    roots = []
    for i in range(len(th) - 1):
        if regular[i] and regular[i + 1] and vals[i] * vals[i + 1] < 0:
            roots.append(brentq(dpsi, th[i], th[i + 1], xtol=1e-13))
    return roots


# --------------------------------------------------------------------------
# the relative geometric side


def _may_touch_support(mats: np.ndarray, b: CutoffB, R: float, m: int = 41) -> np.ndarray:
    """False only when k_nu(a(-s) g a(t)) vanishes on all of supp b x supp b.

    (s, t) -> cartan_t(a(-s) g a(t)) is 1-Lipschitz in each variable, so the
    grid minimum minus the grid spacing is a lower bound.
    """
    x = np.linspace(-b.half_width, b.half_width, m)
    h = x[1] - x[0]
    es, et = np.exp(-x / 2), np.exp(x / 2)
    S, T = es[:, None], et[None, :]
    keep = np.zeros(len(mats), dtype=bool)
    for i, (a_, b_, c_, d_) in enumerate(mats):
        ct = cartan_t_array(a_ * S * T, b_ * S / T, c_ / S * T, d_ / S / T)
        keep[i] = ct.min() - h <= R
    return keep


def relative_geometric_side(order, nu: float, n: int, b: Optional[CutoffB] = None,
                            family: Optional[KnuFamily] = None) -> dict:
    """Main term and error sum of the relative pre-trace formula at (nu, n).

    The error sum runs over the non-stabilizing ball points up to sign; the
    ball radius covers every point whose orbital integral can be nonzero.
    """
    from . import quatorder as qo

    fam = family or default_family()
    entry = build_knu(nu, fam)
    b = b or CutoffB(order.geodesic_length)
    stab = qo.exact_stabilizer_count(order, n)
    main = stab * order.geodesic_length * geodesic_mass(nu, fam)
    radius = qo.relative_ball_radius(entry.profile.T_max, b.half_width)
    ball = qo.enumerate_norm_ball(order, n, radius)
    movers = [p for p in ball if not p.stabilizes]
    mats = np.array([p.matrix.ravel() / math.sqrt(n) for p in movers]).reshape(-1, 4)
    live = _may_touch_support(mats, b, entry.profile.T_max) if len(movers) else np.zeros(0, bool)
    total, biggest = 0.0, 0.0
    for m in mats[live]:
        val = orbital_integral(nu, GroupElement(tuple(float(v) for v in m)), b, fam)
        total += val
        biggest = max(biggest, abs(val))
    return {
        "main": main,
        "error_sum": total,
        "stabilizer_count": stab,
        "ball_size": len(ball),
        "movers": len(movers),
        "evaluated": int(live.sum()),
        "max_abs_I": biggest,
    }
