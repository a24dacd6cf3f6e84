import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from amplify import hctransform as hc
from amplify.quadfield import count_principal_generated
from amplify.quatorder import (
    BasisOrder,
    approx_stabilizers,
    box_scan_balls,
    class_invariants,
    classify_algebra,
    conjugate,
    coordinate_criterion_count,
    enumerate_many,
    enumerate_norm_ball,
    exact_stabilizer_count,
    hilbert_symbol,
    hyperbolic_weight,
    normalizer_distances,
    order_discriminant,
    quat_conj,
    quat_mul,
    standard_geometric_side,
    unit_ball,
)


def test_classify_examples():
    m = classify_algebra(1, 1)
    assert m.ramified_primes == () and not m.is_division
    for a, b in [(2, 3), (3, -1), (2, 5), (3, -7)]:
        A = classify_algebra(a, b)
        assert len(A.ramified_primes) % 2 == 0
        assert A.is_division == bool(A.ramified_primes)
    assert classify_algebra(3, -1).ramified_primes == (2, 3)
    with pytest.raises(ValueError):
        classify_algebra(-2, 3)


def _has_small_solution(a, b, H=40):
    return any(a * x * x + b * y * y == z * z
               for x, y in itertools.product(range(H), repeat=2) if (x, y) != (0, 0)
               for z in [math.isqrt(max(a * x * x + b * y * y, 0))])


@pytest.mark.parametrize("a,b", [(1, 1), (6, -5), (2, 7), (5, 11), (2, 3), (3, -1), (3, -7)])
def test_classification_against_conic_search(a, b):
    A = classify_algebra(a, b)
    if _has_small_solution(a, b):
        assert not A.is_division
    else:
        assert A.is_division


def test_hilbert_reciprocity():
    rng = np.random.default_rng(11)
    from amplify.quadfield import factor
    for _ in range(200):
        a = int(rng.integers(1, 300))
        b = int(rng.integers(-300, 300)) or 1
        places = {2} | set(factor(a)) | (set(factor(abs(b))) if abs(b) > 1 else set())
        prod = hilbert_symbol(a, b, -1)
        for p in places:
            prod *= hilbert_symbol(a, b, p)
        assert prod == 1


def test_norm_form_multiplicative():
    O = BasisOrder(3, 1, 1)
    rng = np.random.default_rng(5)
    assert O.norm_form((1, 0, 0, 0)) == 1
    for _ in range(100):
        x = tuple(int(v) for v in rng.integers(-9, 10, 4))
        y = tuple(int(v) for v in rng.integers(-9, 10, 4))
        assert O.norm_form(O.mul(x, y)) == O.norm_form(x) * O.norm_form(y)
        # the norm is x times its conjugate
        assert quat_mul(x, quat_conj(x), 3, 1)[0] == O.norm_form(x)


def test_enumeration_examples(order, cprime):
    ball = enumerate_norm_ball(order, 1, 1.0)
    assert (1, 0, 0, 0) in [p.X for p in ball]
    for n in range(1, 30):
        pts = enumerate_norm_ball(order, n, cprime)
        assert all(p.reduced_norm == n for p in pts)
        assert [p.X for p in pts] == sorted(p.X for p in pts)
        for p in pts:
            assert order.norm_form(p.coords) == n
            num = quat_mul(p.X, quat_conj(p.X), order.D, order.E)[0]
            assert Fraction(num, order.f**2) == n


def test_enumeration_matches_box_scan(order, cprime):
    boxed = box_scan_balls(order, 40, cprime)
    for n in range(1, 41):
        assert [p.X for p in enumerate_norm_ball(order, n, cprime)] == [p.X for p in boxed.get(n, [])]


def test_enumeration_with_denominator():
    O = BasisOrder(3, 1, 2)
    for n in range(1, 13):
        pts = enumerate_norm_ball(O, n, 4.0)
        assert {p.X for p in pts} == {p.X for p in box_scan_balls(O, n, 4.0).get(n, [])}
        assert all(p.reduced_norm == n for p in pts)


def test_enumeration_thread_independent(order, cprime):
    ns = range(1, 25)
    assert enumerate_many(order, ns, cprime, 1) == enumerate_many(order, ns, cprime, 4)


def test_exact_stabilizers(order):
    assert exact_stabilizer_count(order, 1) >= 1
    RF = order.field_order
    for n in range(1, 300):
        assert exact_stabilizer_count(order, n) == exact_stabilizer_count(order, n, invert_unit=True)
        if math.gcd(n, RF.f) == 1:
            assert exact_stabilizer_count(order, n) >= count_principal_generated(order.field, RF, n)


def test_exact_stabilizers_match_ball_orbits(order, cprime):
    # stabilizing ball points fall into orbits of the norm-one unit; with a
    # ball larger than one unit step every orbit is represented
    for n in range(1, 20):
        pts = [p for p in enumerate_norm_ball(order, n, cprime) if p.stabilizes]
        assert (len(pts) == 0) == (exact_stabilizer_count(order, n) == 0)


def test_approx_stabilizers(order, cprime):
    for n in (2, 5, 10):
        ball = enumerate_norm_ball(order, n, cprime)
        sat = approx_stabilizers(order, n, cprime, cprime, ball)
        assert approx_stabilizers(order, n, 2 * cprime, cprime, ball) == sat
        m = approx_stabilizers(order, n, 0.2, cprime, ball)
        assert all(not p.stabilizes for p in m)
        stab = [p for p in ball if p.stabilizes]
        assert np.all(normalizer_distances(stab, n) < 1e-9)


def test_coordinate_criterion_monotone(order, cprime):
    # recorded alongside the geometric count; the two do not track each other
    # at these norms (n=38, delta=0.2 gives 0 geometric, 224 coordinate)
    for n in (10, 31, 38, 59):
        ball = enumerate_norm_ball(order, n, cprime)
        geo = [len(approx_stabilizers(order, n, d, cprime, ball)) for d in (0.05, 0.2, 0.5)]
        coord = [coordinate_criterion_count(order, n, d, cprime, ball) for d in (0.05, 0.2, 0.5)]
        assert geo == sorted(geo) and coord == sorted(coord)
        assert coord[-1] <= sum(not p.stabilizes for p in ball)
    ball = enumerate_norm_ball(order, 38, cprime)
    assert coordinate_criterion_count(order, 38, 0.2, cprime, ball) == 224


def test_class_invariants(order, cprime):
    eta = order.point((2, 1, 0, 0))          # the unit 2 + sqrt 3
    ci = class_invariants(order, eta, 1)
    assert ci.type == "hyperbolic"
    assert ci.P == pytest.approx((2 + math.sqrt(3)) ** 2, rel=1e-12)
    ev = np.linalg.eigvals(eta.matrix)
    assert ci.P == pytest.approx(max(abs(ev)) ** 2, rel=1e-12)
    with pytest.raises(ValueError):
        class_invariants(order, order.point((1, 0, 0, 0)), 1)
    for n in range(1, 60):
        for p in enumerate_norm_ball(order, n, cprime):
            assert abs(abs(p.trace_proj) - 2) > 1e-12 or p.is_scalar


def test_order_discriminant_bound_exact(order, cprime):
    # exact D_O for every point of the small balls
    for n in range(1, 31):
        for p in enumerate_norm_ball(order, n, cprime):
            if p.is_scalar:
                continue
            D_O = order_discriminant(order, p)
            assert abs(D_O) <= (2 * cprime + 2) * n * abs(abs(p.trace_proj) - 2) * (1 + 1e-12)


def test_class_invariants_conjugation(order, cprime):
    units = unit_ball(order, 4)
    assert (1, 0, 0, 0) in units
    rng = np.random.default_rng(2)
    pts = [p for p in enumerate_norm_ball(order, 6, cprime) if not p.is_scalar]
    for p in [pts[i] for i in rng.choice(len(pts), 10, replace=False)]:
        for g in [units[i] for i in rng.choice(len(units), 5, replace=False)]:
            Y = conjugate(order, g, p.X)
            q = order.point(Y)
            a, b = class_invariants(order, p, 6), class_invariants(order, q, 6)
            assert (a.type, a.D_O) == (b.type, b.D_O)
            assert a.trace_proj == pytest.approx(b.trace_proj)


def test_standard_side_examples(order, family):
    empty = standard_geometric_side(order, 40, 3, 2 * math.pi, 1.0, family=family)
    assert (empty.main, empty.hyperbolic_sum, empty.elliptic_sum) == (0.0, 0.0, 0.0)
    one = standard_geometric_side(order, 40, 1, 2 * math.pi, 1.0, family=family)
    assert one.main == pytest.approx(2 * math.pi * hc.build_knu(40, family).k_e, rel=1e-14)


@pytest.mark.parametrize("logP", [0.1, 0.3, 0.6, 0.9])
def test_hyperbolic_weight_two_schemes(family, logP):
    hk = hc.build_knu(40, family).transform
    a = hyperbolic_weight(hk, logP, "gl")
    b = hyperbolic_weight(hk, logP, "filon")
    assert a == pytest.approx(b, rel=1e-6, abs=1e-12)
