"""Verification suites behind the command line.

Each suite returns a :class:`SuiteResult` with report rows and a list of
failed invariants.  Suites only read the configuration; they never write.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import amplifier as amp
from . import hctransform as hc
from . import quatorder as qo
from .config import ExperimentConfig
from .psl2 import IDENTITY, GroupElement, dist, dist_to_normalizer, make_a, make_k, make_n
from .quadfield import count_principal_generated

log = logging.getLogger(__name__)

FOUR_PI = 4 * math.pi
ENVELOPE_EXPONENT = 1.0
TUBE_RADIUS = 0.2                 # excluded neighborhood of N_G(A) for the J checks
J_ELEMENT = GroupElement.scaled([[3, 1], [1, 1]])


@dataclass
class SuiteResult:
    name: str
    columns: list
    rows: list
    failures: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)   # report name -> (columns, rows)

    @property
    def ok(self) -> bool:
        return not self.failures


# --------------------------------------------------------------------------
# shared context

@lru_cache(maxsize=4)
def _family(window: float, grid_step: float) -> hc.KnuFamily:
    return hc.KnuFamily(window=window, grid_step=grid_step)


def family(cfg: ExperimentConfig) -> hc.KnuFamily:
    fam = hc.default_family()
    if (cfg.analysis.rmax, cfg.analysis.grid_step) == (fam.window, fam.grid_step):
        return fam
    return _family(cfg.analysis.rmax, cfg.analysis.grid_step)


def order(cfg: ExperimentConfig) -> qo.BasisOrder:
    al = cfg.algebra
    return qo.BasisOrder(al.D, al.E, al.f)


def cutoff(cfg: ExperimentConfig) -> hc.CutoffB:
    return hc.CutoffB(order(cfg).geodesic_length)


def cprime(cfg: ExperimentConfig) -> float:
    if cfg.algebra.Cprime is not None:
        return cfg.algebra.Cprime
    return hc.support_bound(family(cfg).support_radius, cutoff(cfg))


# --------------------------------------------------------------------------
# k_nu

def verify_knu(cfg: ExperimentConfig) -> SuiteResult:
    fam = family(cfg)
    rows, failures, extra = [], [], {}
    for nu in cfg.run.nus:
        entry = hc.build_knu(nu, fam)
        cert = entry.certificate
        hk, prof = entry.transform, entry.profile
        extra[f"knu-hk-nu{nu:g}"] = (["r", "hk"], [{"r": r, "hk": v} for r, v in
                                                   zip(hk.r.tolist(), hk.values.tolist())])
        inside = prof.t <= prof.T_max
        extra[f"knu-k-nu{nu:g}"] = (["t", "k"], [{"t": t, "k": v} for t, v in
                                                zip(prof.t[inside].tolist(), prof.values[inside].tolist())])
        rows.append({k: cert[k] for k in (
            "nu", "support_radius", "min_near_nu", "min_hk", "min_hk_real_axis", "min_hk_segment",
            "imag_residue", "decay_sup_N4", "tail_bound", "k_e", "k_e_over_nu")})
        failures += [f"nu={nu}: {f}" for f in hc.knu_failures(cert)]
    supports = [r["support_radius"] for r in rows]
    if max(supports) - min(supports) > cfg.analysis.grid_step + 1e-12:
        failures.append(f"support radius varies across nu: {supports}")
    decay = [r["decay_sup_N4"] for r in rows]
    if max(decay) / min(decay) - 1 >= 0.5:
        failures.append(f"decay constant varies by >= 50%: {decay}")
    ke = [r["k_e_over_nu"] for r in rows]
    if max(ke) / min(ke) > 1.5:
        failures.append(f"k_e / nu outside a factor-1.5 band: {ke}")
    return SuiteResult("verify-knu", list(rows[0]), rows, failures,
                       {"delta": fam.delta, "t0": fam.t0, "support_radius_design": fam.support_radius},
                       extra)


# --------------------------------------------------------------------------
# stationary phase

def stationary_phase(cfg: ExperimentConfig) -> SuiteResult:
    rows, failures = [], []
    for r in cfg.run.r_grid:
        L, err = hc.model_integral(r, family(cfg).support_radius, with_error=True)
        rL = r * L
        ok = abs(rL - FOUR_PI) <= 60 / r
        rows.append({"r": r, "L": L, "rL": rL, "quad_error": err, "ref_4pi": FOUR_PI,
                     "diff": rL - FOUR_PI, "tolerance": 60 / r, "within": ok})
        if not ok:
            failures.append(f"r={r}: |r L(r) - 4 pi| = {abs(rL - FOUR_PI):.6g} > {60 / r:.6g}")
    jrows = oscillatory_rows(cfg, [r for r in cfg.run.r_grid if 50 <= r <= 300])
    scaled = [j["gap_r2"] for j in jrows]
    if any(x > scaled[0] * (1 + 1e-9) for x in scaled[1:]):
        failures.append(f"|J - stationary phase| r^2 grows with r: {scaled}")
    extra = {"stationary-phase-J": (list(jrows[0]), jrows)} if jrows else {}
    return SuiteResult("stationary-phase", list(rows[0]), rows, failures,
                       {"tube_radius": TUBE_RADIUS, "J_element": list(J_ELEMENT.entries)}, extra)


def oscillatory_rows(cfg: ExperimentConfig, rs) -> list[dict]:
    """J(r, g) against its stationary-phase term for a fixed element outside the tube.

    gap_r2 is |J - SP| r^2; vdc is |r SP| r^(1/2), the size of the theta
    integral measured against the r^(-1/2) van der Corput rate.
    """
    b = cutoff(cfg)
    d = dist_to_normalizer(J_ELEMENT)
    if d < TUBE_RADIUS:
        raise ArithmeticError(f"test element lies inside the tube: d = {d}")
    out = []
    for r in rs:
        J = hc.oscillatory_J(r, J_ELEMENT, b)
        sp = hc.stationary_phase_J(r, J_ELEMENT, b, cfg.analysis.osc_panels)
        out.append({"r": r, "d": d, "J_re": J.real, "J_im": J.imag, "SP_re": sp.real,
                    "SP_im": sp.imag, "gap_r2": abs(J - sp) * r * r,
                    "vdc": abs(sp) * r * math.sqrt(r)})
    return out


# --------------------------------------------------------------------------
# orbital integrals

def orbital_grid(n_each: int = 10, d_lo: float = 0.01, d_hi: float = 0.5) -> list[tuple]:
    """Unipotent and rotation elements at log-spaced distances from N_G(A)."""
    out = []
    for d in np.geomspace(d_lo, d_hi, n_each):
        x = brentq(lambda x: dist_to_normalizer(make_n(x)) - d, 1e-12, 5.0, xtol=1e-14)
        th = brentq(lambda t: dist_to_normalizer(make_k(t)) - d, 1e-12, 1.5, xtol=1e-14)
        out.append(("n", x, make_n(x)))
        out.append(("k", th, make_k(th)))
    return out


def far_elements(bound: float, count: int = 10) -> list:
    """Elements with d(g, e) > bound, mixing hyperbolic and unipotent directions."""
    out = []
    for j in range(count):
        s = 1.05 + 0.1 * j
        # ||a(t) - I||_F >= e^{t/2} - 1 and ||n(x) -+ I||_F >= |x|
        g = make_a(2 * math.log(s * bound + 1)) if j % 2 == 0 else make_n(s * bound)
        if dist(g, IDENTITY) <= bound:
            raise ArithmeticError("far element construction fell inside the bound")
        out.append(g)
    return out


def orbital(cfg: ExperimentConfig) -> SuiteResult:
    fam, b = family(cfg), cutoff(cfg)
    rows, failures = [], []
    grid = orbital_grid()
    for nu in cfg.run.nus:
        for kind, p, g in grid:
            d = dist_to_normalizer(g)
            I = hc.orbital_integral(nu, g, b, fam)
            rows.append({"nu": nu, "kind": kind, "param": p, "d": d, "I": I,
                         "scaled": abs(I) * math.sqrt(1 + nu * d)})
    scaled = [r["scaled"] for r in rows]
    spread = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
    if spread > 10:
        failures.append(f"max/min of |I| (1 + nu d)^(1/2) is {spread:.6g} > 10")
    if max(scaled) > cfg.run.orbital_max:
        failures.append(f"max {max(scaled):.6g} exceeds the recorded constant {cfg.run.orbital_max}")
    C = hc.support_bound(fam.support_radius, b)
    vanish = []
    for g in far_elements(C):
        for nu in cfg.run.nus:
            vanish.append(hc.orbital_integral(nu, g, b, fam, shortcut=False))
    if any(v != 0.0 for v in vanish):
        failures.append(f"nonzero orbital integral beyond the support bound: {max(map(abs, vanish))}")
    meta = {"max_scaled": max(scaled), "min_scaled": min(scaled), "spread": spread,
            "support_bound": C, "vanishing_checked": len(vanish)}
    return SuiteResult("orbital", list(rows[0]), rows, failures, meta)


# --------------------------------------------------------------------------
# counting

def envelope(counts: dict, n_lo: int, n_hi: int, c: float = ENVELOPE_EXPONENT) -> float:
    """max |M(n, delta)| / (delta n e^{c log n / log log(n + 1)}) over n in [n_lo, n_hi]."""
    best = 0.0
    for (n, delta), m in counts.items():
        if n_lo <= n <= n_hi:
            best = max(best, m / (delta * n * math.exp(c * math.log(n) / math.log(math.log(n + 1)))))
    return best


def discriminant_violations(O: qo.BasisOrder, pts: list, n: int, C: float) -> int:
    """Points breaking |D_O| <= (2C' + 2) n | |Tr| - 2 |.

    |D_O| = |4 (x0^2 - n)| / k^2 for some k >= 1, so testing k = 1 bounds every point.
    """
    if not pts:
        return 0
    X0 = qo.points_array(pts)[:, 0].astype(object)
    f = O.f
    base = [abs(4 * (x * x - f * f * n)) / (f * f) for x in X0]
    tr = np.abs(np.array([2 * float(x) / f for x in X0])) / math.sqrt(n)
    rhs = (2 * C + 2) * n * np.abs(tr - 2)
    return int(np.sum(np.array(base, dtype=float) > rhs * (1 + 1e-12) + 1e-9))


def counts(cfg: ExperimentConfig) -> SuiteResult:
    O, C = order(cfg), cprime(cfg)
    n_max = cfg.run.n_max
    balls = qo.enumerate_many(O, range(1, n_max + 1), C, cfg.run.threads)
    boxed = qo.box_scan_balls(O, n_max, C)
    rows, failures, M = [], [], {}
    mismatched = disc_bad = overlap = 0
    for n in range(1, n_max + 1):
        pts = balls[n]
        if {p.X for p in pts} != {p.X for p in boxed.get(n, [])}:
            mismatched += 1
        stab = [p for p in pts if p.stabilizes]
        movers = [p for p in pts if not p.stabilizes]
        d_stab = qo.normalizer_distances(stab, n)
        d_move = qo.normalizer_distances(movers, n)
        if np.any(d_stab > 1e-9) or np.any(d_move <= 0):
            overlap += 1
        disc = discriminant_violations(O, pts, n, C)
        disc_bad += disc
        row = {"n": n, "ball": len(pts), "stabilizers": len(stab), "disc_violations": disc}
        for delta in cfg.run.deltas:
            m = int(np.sum((d_move > 0) & (d_move <= delta)))
            row[f"M_{delta:g}"] = m
            if n >= 10:
                M[(n, delta)] = m
        rows.append(row)
    if mismatched:
        failures.append(f"stratified and box-scan enumerations differ for {mismatched} values of n")
    if overlap:
        failures.append(f"normalizer distances inconsistent with the stabilizer test for {overlap} n")
    if disc_bad:
        failures.append(f"{disc_bad} discriminant-bound violations")
    full = envelope(M, 10, n_max)
    half = envelope(M, 10, n_max // 2)
    drift = full / half - 1 if half > 0 else math.inf
    if abs(drift) > 0.3:
        failures.append(f"envelope constant drifts by {drift:.3g} when the n-range doubles")
    meta = {"Cprime": C, "envelope_full": full, "envelope_half": half, "envelope_drift": drift,
            "envelope_exponent": ENVELOPE_EXPONENT, "points": sum(len(v) for v in balls.values())}
    return SuiteResult("counts", list(rows[0]), rows, failures, meta)


# --------------------------------------------------------------------------
# stabilizers

def stabilizers(cfg: ExperimentConfig) -> SuiteResult:
    O = order(cfg)
    RF = O.field_order
    rows, failures = [], []
    for n in range(1, cfg.run.stab_n_max + 1):
        if math.gcd(n, RF.f) != 1:
            continue
        exact = qo.exact_stabilizer_count(O, n)
        lower = count_principal_generated(O.field, RF, n)
        rows.append({"n": n, "exact": exact, "principal": lower, "ok": exact >= lower})
        if exact < lower:
            failures.append(f"n={n}: exact {exact} < principal {lower}")
    return SuiteResult("stabilizers", list(rows[0]), rows, failures, {"R_F_conductor": RF.f})


# --------------------------------------------------------------------------
# geometric sides

def geometric_sides(cfg: ExperimentConfig) -> SuiteResult:
    O, fam, C = order(cfg), family(cfg), cprime(cfg)
    nu = cfg.run.side_nu
    rows, failures, dump = [], [], []
    for n in cfg.run.side_ns:
        for p in qo.enumerate_norm_ball(O, n, C):
            kind = "scalar" if p.is_scalar else qo.class_invariants(O, p, n).type
            x0, x1, x2, x3 = p.coords
            dump.append({"n": n, "x0": x0, "x1": x1, "x2": x2, "x3": x3, "trace": p.trace, "type": kind})
        std = qo.standard_geometric_side(O, nu, n, cfg.algebra.vol_gamma, C,
                                         cfg.algebra.unit_height_H, fam)
        rel = hc.relative_geometric_side(O, nu, n, cutoff(cfg), fam)
        row = {"n": n, "nu": nu, "std_main": std.main, "std_hyperbolic": std.hyperbolic_sum,
               "std_elliptic": std.elliptic_sum, "std_classes": len(std.classes),
               "std_ambiguous": len(std.ambiguous), "rel_main": rel["main"],
               "rel_error": rel["error_sum"], "rel_stabilizers": rel["stabilizer_count"],
               "rel_ball": rel["ball_size"], "rel_evaluated": rel["evaluated"]}
        rows.append(row)
        bad = [k for k, v in row.items() if isinstance(v, float) and not math.isfinite(v)]
        if bad:
            failures.append(f"n={n}: non-finite {bad}")
        if rel["main"] < 0:
            failures.append(f"n={n}: negative relative main term")
    return SuiteResult("geometric-sides", list(rows[0]), rows, failures, {"Cprime": C},
                       {"enumeration": (["n", "x0", "x1", "x2", "x3", "trace", "type"], dump)})


# --------------------------------------------------------------------------
# amplifier

def resonate(cfg: ExperimentConfig) -> SuiteResult:
    O = order(cfg)
    C = cfg.analysis.error_C
    stab = amp.StabilizerOracle(O)
    report = amp.resonator_report(cfg.run.M_grid, O, stab, C)
    rows, failures = [], []
    for r in report:
        a = amp.build_resonator(r.M, O.field, amp.excluded_primes(O))
        other = amp.compute_sums(a, stab, C, order="grouped").as_tuple()
        first = (r.B, r.R, r.B_L, r.R_L)
        rel = max(abs(x - y) / max(abs(x), 1e-300) for x, y in zip(first, other))
        sens = {c: amp.compute_sums(a, stab, c) for c in (1.0, 2.0, 4.0)}
        rows.append({"M": r.M, "B": r.B, "R": r.R, "B_L": r.B_L, "R_L": r.R_L, "ratio": r.ratio,
                     "predictor": r.predictor, "truncated": r.truncated, "stab_source": r.stab_source,
                     "support": r.support_size, "mass": r.mass, "exponent": r.exponent,
                     "dual_order_rel": rel, "R_C1": sens[1.0].R, "R_C4": sens[4.0].R,
                     "R_L_C1": sens[1.0].R_L, "R_L_C4": sens[4.0].R_L})
        if r.B < 1:
            failures.append(f"M={r.M:g}: B = {r.B} < 1")
        if rel > 1e-12:
            failures.append(f"M={r.M:g}: evaluation orders differ by {rel:.3g}")
    ratios = [r["ratio"] for r in rows]
    if any(b < a for a, b in zip(ratios, ratios[1:])):
        failures.append(f"B_L/B is not nondecreasing: {ratios}")
    meta = {"error_C": C, "predicted_constant": 2 * math.sqrt(2),
            "primes": {f"{r.M:g}": list(r.primes) for r in report}}
    return SuiteResult("resonate", list(amp.ResonatorRow.CSV_FIELDS) + [
        "stab_source", "support", "mass", "exponent", "dual_order_rel",
        "R_C1", "R_C4", "R_L_C1", "R_L_C4"], rows, failures, meta)


def budget(cfg: ExperimentConfig) -> SuiteResult:
    run = cfg.run
    bud = amp.theorem_budget(run.budget_nu, run.budget_A, run.budget_Cpp, order(cfg),
                             cfg.analysis.error_C)
    row = {k: v for k, v in vars(bud).items() if k != "dominance_flags"}
    row.update({f"dominates_{k}": v for k, v in bud.dominance_flags.items()})
    failures = [f"{k} error term not dominated" for k, v in bud.dominance_flags.items() if not v]
    return SuiteResult("budget", list(row), [row], failures)


SUITES: dict[str, Callable[[ExperimentConfig], SuiteResult]] = {
    "verify-knu": verify_knu,
    "stationary-phase": stationary_phase,
    "orbital": orbital,
    "counts": counts,
    "stabilizers": stabilizers,
    "geometric-sides": geometric_sides,
    "resonate": resonate,
    "budget": budget,
}
