import math
import random

import mpmath
import pytest
import sympy

from amplify import amplifier as amp
from amplify.amplifier import (
    CoprimalityError,
    ResonatorSequence,
    compute_sums,
    delta,
    error_weight,
    hecke_square_expand,
    hecke_square_expand_recursive,
)


def unit_stab(l):
    return 1


def test_delta_one():
    s = compute_sums(delta(1), unit_stab)
    assert s.as_tuple() == (1.0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("p", [5, 7, 11])
def test_delta_prime(p):
    stab = {1: 2, p * p: 6}.get
    s = compute_sums(delta(p, {2, 3}), stab, C=2.0)
    w = error_weight(p * p, 2.0)
    assert s.B == 1 + p
    assert s.R == pytest.approx(p**3 * w + p, rel=1e-15)
    assert s.B_L == 6 + 2 * p
    assert s.R_L == pytest.approx(p**2 * w + p, rel=1e-15)


def test_two_primes():
    a = ResonatorSequence({5: 1.0, 7: 1.0})
    assert hecke_square_expand(a) == {1: 12, 25: 1, 35: 2, 49: 1}
    assert compute_sums(a, unit_stab).B == 2 + 5 + 7


def test_support_validation():
    with pytest.raises(CoprimalityError):
        delta(6, {3})
    with pytest.raises(ValueError):
        ResonatorSequence({5: -1.0})
    with pytest.raises(ValueError):
        ResonatorSequence({0: 1.0})
    with pytest.raises(ValueError):
        compute_sums(delta(1), unit_stab, C=0)


def _random_sequence(rng, excluded=(2, 3)):
    pool = [n for n in range(1, 80) if all(n % p for p in excluded)]
    sup = rng.sample(pool, 6)
    return ResonatorSequence({n: rng.choice([0.5, 1.0, 2.0, 3.0]) for n in sup}, frozenset(excluded))


def test_expansion_matches_recursive_oracle():
    rng = random.Random(7)
    for _ in range(30):
        a = _random_sequence(rng)
        assert hecke_square_expand(a) == hecke_square_expand_recursive(a)


def test_degree_is_multiplicative():
    # T_n acts on constants by sigma_1(n)
    rng = random.Random(3)
    for _ in range(30):
        a = _random_sequence(rng)
        lhs = sum(c * amp.sigma1(l) for l, c in hecke_square_expand(a).items())
        rhs = sum(w * amp.sigma1(n) for n, w in a.weights.items()) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-14)


def test_evaluation_orders_agree(order):
    stab = amp.StabilizerOracle(order)
    rng = random.Random(1)
    for _ in range(10):
        a = _random_sequence(rng)
        x = compute_sums(a, stab, order="pairs").as_tuple()
        y = compute_sums(a, stab, order="grouped").as_tuple()
        assert x == pytest.approx(y, rel=1e-14)


def test_error_sums_grow_with_C():
    a = ResonatorSequence({1: 1.0, 5: 1.0, 7: 0.5})
    Rs = [compute_sums(a, unit_stab, C).R for C in (1.0, 2.0, 4.0)]
    assert Rs == sorted(Rs) and Rs[0] < Rs[-1]
    Bs = {compute_sums(a, unit_stab, C).B for C in (1.0, 2.0, 4.0)}
    assert len(Bs) == 1


def test_excluded_primes(order):
    assert amp.excluded_primes(order) == frozenset({2, 3})


def test_build_resonator(order):
    K = order.field
    a = amp.build_resonator(1e6, K, {2, 3})
    L, lo, hi = amp.window(1e6)
    assert a.primes == (73, 83, 97)
    assert not a.truncated
    for p in a.primes:
        assert K.splitting_character(p) == 1 and lo < p <= hi
    for n in a.support:
        f = sympy.factorint(n)
        assert all(e == 1 for e in f.values()) and set(f) <= set(a.primes) and n <= 1e6
        assert a.weights[n] == pytest.approx(math.prod(L / (p * math.log(p)) for p in f), rel=1e-14)
    assert amp.build_resonator(1e3, K, {2, 3}).support == [1]
    with pytest.raises(ValueError):
        amp.build_resonator(3, K)


def test_resonator_report_small(order):
    rows = amp.resonator_report([1e3, 1e4], order)
    for row in rows:
        assert row.ratio == 2.0 and row.stab_source == "exact"
        assert row.support_size == 1


def test_budget_length_high_precision():
    mpmath.mp.dps = 40
    nu, A = mpmath.mpf(10) ** 8, mpmath.mpf(1)
    ln = mpmath.log(nu)
    ref = nu ** mpmath.mpf(0.25) * mpmath.exp(-A * ln / mpmath.log(ln))
    assert amp.budget_length(1e8, 1.0) == pytest.approx(float(ref), rel=1e-14)


def test_exponents_symbolic():
    x = sympy.symbols("x", positive=True)
    expr = 2 * sympy.sqrt(2) * sympy.sqrt(sympy.log(x) / sympy.log(sympy.log(x)))
    for M in (1e4, 1e9):
        assert math.log(amp.ratio_predictor(M)) == pytest.approx(float(sympy.N(expr.subs(x, M), 30)), rel=1e-14)
    lam = sympy.Rational(10**12) + sympy.Rational(1, 4)
    target = sympy.sqrt(sympy.log(lam) / sympy.log(sympy.log(lam))) / 2
    assert math.log(amp.period_prediction(1e6)) == pytest.approx(float(sympy.N(target, 30)), rel=1e-13)


def test_theorem_budget(order):
    b = amp.theorem_budget(1e6, 0.1, 0.1, order)
    assert b.M == pytest.approx(18.685, abs=1e-3)
    assert all(b.dominance_flags.values())
    assert b.main_standard == 1e6 * b.B
    with pytest.raises(ValueError):
        amp.theorem_budget(100.0, 1.0, 0.1, order)
