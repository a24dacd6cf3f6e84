import csv
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from amplify.quadfield import (
    FactorizationError,
    QuadraticField,
    closed_geodesic_length,
    count_approx_norm_solutions,
    count_ideals_of_norm,
    count_principal_generated,
    divisor_count,
    factor,
    fundamental_unit,
    iter_primes,
    kronecker,
    pell_bruteforce,
)

GOLDEN = Path(__file__).parent / "golden" / "approx_norm_counts.csv"


def test_fundamental_units():
    u5 = fundamental_unit(5)
    assert u5.norm == -1
    assert (u5.t, u5.u) == (Fraction(1, 2), Fraction(1, 2))   # (1 + sqrt 5) / 2
    # in Z[sqrt 5] the least unit is 2 + sqrt 5
    z5 = QuadraticField(5).order(2).unit_data
    assert (z5.t, z5.u, z5.norm) == (2, 1, -1)
    u2 = fundamental_unit(2)
    assert (u2.t, u2.u, u2.norm) == (1, 1, -1)
    assert u2.regulator == pytest.approx(math.log(1 + math.sqrt(2)), rel=1e-12)
    u3 = fundamental_unit(3)
    assert (u3.t, u3.u, u3.norm) == (2, 1, 1)


@pytest.mark.parametrize("D", [2, 3, 6, 7, 10, 11, 13, 14, 19, 21, 22, 29, 31, 43, 46])
def test_pell_against_bruteforce(D):
    K = QuadraticField(D)
    if K.D0 % 4 == 1:
        x, y = K.order(2).unit_coords
        t, u = x // 2, y // 2
    else:
        t, u = (int(v) for v in (fundamental_unit(D).t, fundamental_unit(D).u))
    assert (t, u) == pell_bruteforce(D)
    for u2 in range(1, u):
        for s in (1, -1):
            r = D * u2 * u2 + s
            assert r < 0 or math.isqrt(r) ** 2 != r


def test_unit_data_invariants():
    for D in (2, 3, 5, 6, 7, 13, 61, 109):
        U = fundamental_unit(D)
        assert U.t * U.t - D * U.u * U.u in (1, -1)
        assert U.regulator > 0
        assert U.totally_positive_generator_log / U.regulator in (1, 2)
        direct = math.log(float(U.t) + float(U.u) * math.sqrt(D))
        assert U.regulator == pytest.approx(direct, rel=1e-10)


def test_rejects_squares():
    with pytest.raises(ValueError):
        fundamental_unit(9)
    with pytest.raises(ValueError):
        QuadraticField(16)


def test_splitting_matches_residues():
    for D in (2, 3, 5, 7, 12, 13):
        K = QuadraticField(D)
        for p in iter_primes(2, 200):
            chi = K.splitting_character(p)
            if p == 2 or K.discriminant % p == 0:
                continue
            residue = any((x * x - K.discriminant) % p == 0 for x in range(p))
            assert chi == (1 if residue else -1)
        assert K.splitting(3 if D != 3 else 2) in ("split", "inert", "ramified")


def test_count_ideals():
    K = QuadraticField(5)
    assert count_ideals_of_norm(K, 1) == 1
    assert count_ideals_of_norm(K, 4) == 1
    assert count_ideals_of_norm(K, 2) == 0


def test_count_ideals_bruteforce_oracle():
    # ideals of Z[(1 + sqrt 5)/2] are principal: count generators of norm +-m modulo units
    K = QuadraticField(5)
    for m in range(1, 60):
        gens = set()
        for sgn in (1, -1):
            for x in K.maximal.fundamental_elements(sgn * m):
                gens.add(x)
        # fundamental_elements picks one element per +-unit orbit and sign of norm
        assert count_ideals_of_norm(K, m) == len(gens)


def test_count_ideals_multiplicative_and_divisor_bound():
    rng = np.random.default_rng(3)
    K = QuadraticField(7)
    for _ in range(200):
        a, b = (int(v) for v in rng.integers(1, 10**4, size=2))
        if math.gcd(a, b) == 1:
            assert count_ideals_of_norm(K, a * b) == count_ideals_of_norm(K, a) * count_ideals_of_norm(K, b)
    for m in range(1, 10**4, 7):
        assert count_ideals_of_norm(K, m) <= divisor_count(m)


def test_principal_generated():
    K = QuadraticField(5)
    assert count_principal_generated(K, K.maximal, 1) == 1
    assert count_principal_generated(K, K.maximal, 5) == 1
    assert count_principal_generated(K, K.maximal, 4) == 1
    with pytest.raises(ValueError):
        count_principal_generated(K, K.order(2), 4)


def test_factorization_limit():
    assert factor(2**10 * 3**5) == {2: 10, 3: 5}
    with pytest.raises(FactorizationError):
        factor(10**13 + 1)


def test_kronecker():
    assert kronecker(5, 2) == -1
    assert kronecker(12, 11) == 1
    assert kronecker(12, 3) == 0


def test_approx_counts_golden():
    with open(GOLDEN, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["D", "n", "delta", "B", "count"]
    for row in rows:
        D, n, delta, B = int(row["D"]), int(row["n"]), float(row["delta"]), float(row["B"])
        for method in ("rows", "scan", "orbit"):
            assert count_approx_norm_solutions(D, n, delta, B, method) == int(row["count"])


def test_approx_counts_empty_range():
    assert count_approx_norm_solutions(3, 7, 0.1, 1) == 0


def test_approx_counts_bruteforce():
    D, n, delta, B = 5, 10, 0.2, 1
    lim = B * n
    count = sum(1 for u in range(-lim, lim + 1) for v in range(-lim, lim + 1)
                if 0 < abs(u * u - D * v * v - n) <= delta * n)
    assert count == count_approx_norm_solutions(D, n, delta, B)


def test_approx_count_envelope_stable():
    # count / (delta n) against e^{log n / log log n}: the fitted constant is
    # set by small n and does not move when the range doubles
    D, B, delta = 2, 1, 0.1

    def fit(ns):
        return max(count_approx_norm_solutions(D, n, delta, B) / (delta * n)
                   / math.exp(math.log(n) / math.log(math.log(n))) for n in ns)

    small = fit(range(100, 1001, 50))
    large = fit(range(100, 2001, 50))
    assert large <= small * 1.3


def test_closed_geodesic_length():
    U5, U3 = fundamental_unit(5), fundamental_unit(3)
    assert closed_geodesic_length(U5) == pytest.approx(4 * math.log((1 + math.sqrt(5)) / 2), rel=1e-12)
    assert closed_geodesic_length(U3) == pytest.approx(2 * math.log(2 + math.sqrt(3)), rel=1e-12)
    for D in (2, 3, 5, 6, 7, 13):
        U = fundamental_unit(D)
        assert round(closed_geodesic_length(U) / U.regulator, 12) in (2, 4)


def test_iter_primes():
    assert list(iter_primes(10, 30)) == [11, 13, 17, 19, 23, 29]
    assert list(iter_primes(1, 2)) == [2]
