import math

import numpy as np
import pytest

from amplify import hctransform as hc
from amplify.psl2 import GroupElement, make_a
from amplify.quadrature import QuadratureError


def test_smooth_step():
    x = np.linspace(-1, 2, 31)
    assert np.allclose(hc.smooth_step(x) + hc.smooth_step(1 - x), 1.0, atol=1e-15)
    assert hc.smooth_step(np.array([0.0]))[0] == 0.0
    assert hc.smooth_step(np.array([1.0]))[0] == 1.0


@pytest.mark.parametrize("r,t", [(0.5, 0.3), (3.0, 1.2), (10.0, 2.0), (25.0, 0.7)])
def test_spherical_matches_mehler(r, t):
    assert hc.spherical(r, t) == pytest.approx(hc.spherical_mehler(r, t), abs=1e-10)


def test_spherical_examples():
    assert hc.spherical(5.0, 0.0) == 1.0
    # the trivial representation sits at the end of the complementary segment
    assert hc.spherical(0.5j, 1.3) == pytest.approx(1.0, abs=1e-12)
    assert hc.spherical(-0.5j, 1.3) == pytest.approx(1.0, abs=1e-12)
    assert abs(hc.spherical(10.0, 2.0)) < 1


@pytest.mark.parametrize("s", [0.0, 0.3, 0.5, 2.0j, 7.5j])
def test_hc_transform_two_pictures(s):
    k = hc.bump(1.0, 1.0)
    a = hc.hc_transform(k, s)
    assert a == pytest.approx(hc.hc_transform(k, s, "cartan"), rel=1e-10)


def test_hc_transform_positive_on_segment():
    k = hc.bump(0.5, 1.0)
    vals = [hc.hc_transform(k, complex(y)) for y in np.linspace(0, 0.5, 6)]
    assert all(v > 0 for v in vals)
    assert vals == sorted(vals)
    with pytest.raises(ValueError):
        hc.hc_transform(k, 0.3 + 0.2j)


def test_abel_round_trip():
    k = hc.bump(1.0, 1.0)
    hk = hc.transform_from_abel(hc.abel_transform(k, 1.0), 400)
    prof = hc.abel_inverse(hk, 1.0)
    t = np.linspace(0, 1.2, 61)
    assert np.max(np.abs(prof(t) - k(t))) < 1e-8


def test_inverse_refuses_weak_decay():
    hk = hc.transform_from_abel(hc.abel_transform(hc.bump(1.0, 1.0), 1.0), 400)
    with pytest.raises(QuadratureError):
        hc.inverse_hc(hk, 0.4)


def test_knu_certificate(family):
    e = hc.build_knu(40, family, strict=True)
    c = e.certificate
    assert c["support_radius"] <= 1.0
    assert c["min_near_nu"] >= 1
    assert c["min_hk"] >= -1e-12
    assert c["imag_residue"] == 0.0
    assert c["k_e_over_nu"] == pytest.approx(2.9723, abs=1e-3)
    assert family.delta == 1.0
    # hk(nu) = h2(0) + h2(2 nu), the reflected term is about 9e-8
    assert float(e.transform(np.array([40.0]))[0]) == pytest.approx(2.0, abs=1e-6)


def test_knu_support(family):
    e = hc.build_knu(40, family)
    t = np.linspace(1.0, 1.2, 21)
    assert np.all(e.profile(t) == 0.0)
    assert e.profile(np.array([0.0]))[0] == pytest.approx(e.k_e, rel=1e-6)


def test_geodesic_mass(family):
    m40 = hc.geodesic_mass(40, family)
    m80 = hc.geodesic_mass(80, family)
    assert m40 > 0 and m80 > 0
    assert hc.geodesic_mass(40, family, refine=2) == pytest.approx(m40, rel=1e-11)
    # mass along a geodesic stays bounded as nu grows
    assert m80 / m40 == pytest.approx(1.0, abs=1e-3)


def test_model_integral():
    L, err = hc.model_integral(50.0, with_error=True)
    assert isinstance(L, float) and err < 1e-10
    assert 50 * L == pytest.approx(2.0002054, abs=1e-6)


def test_cutoff_partition_of_unity(order):
    b = hc.CutoffB(order.geodesic_length)
    assert b.residual(np.linspace(-5, 5, 1001)) < 1e-14
    assert b(np.array([b.half_width + 1e-9]))[0] == 0.0
    assert hc.support_bound(1.0, b) == pytest.approx(11.971024947998073, rel=1e-12)


@pytest.mark.parametrize("s0", [0.0, 0.3, 1.0, 2.5])
def test_orbital_on_A_matches_convolution(order, family, s0):
    b = hc.CutoffB(order.geodesic_length)
    full = hc.orbital_integral(40, make_a(s0), b, family, shortcut=False)
    assert full == pytest.approx(hc.orbital_integral_on_A(40, s0, b, family), rel=1e-10, abs=1e-14)


def test_orbital_far_element_vanishes(order, family, cprime):
    b = hc.CutoffB(order.geodesic_length)
    t = 2 * math.log(1.1 * cprime + 1)
    g = make_a(t)
    assert hc.orbital_integral(40, g, b, family) == 0.0
    assert hc.orbital_integral(40, g, b, family, shortcut=False) == 0.0


G = GroupElement.scaled([[3, 1], [1, 1]])


def test_critical_points():
    crit = hc.critical_thetas(G)
    assert crit == pytest.approx([math.pi / 3, 5 * math.pi / 3], abs=1e-9)
    for th in crit:
        assert hc.phase_hessian(th, G) == pytest.approx(np.diag([1.0, -1.0]), abs=1e-6)


def test_J_matches_direct(order):
    b = hc.CutoffB(order.geodesic_length)
    assert hc.oscillatory_J(3.0, G, b) == pytest.approx(hc.oscillatory_J_direct(3.0, G, b), abs=1e-8)


def test_J_stationary_phase(order):
    b = hc.CutoffB(order.geodesic_length)
    gaps = []
    for r in (50.0, 100.0):
        J = hc.oscillatory_J(r, G, b)
        gaps.append(abs(J - hc.stationary_phase_J(r, G, b)) * r * r)
    assert gaps[1] < gaps[0] < 1


def test_relative_side_examples(order, family):
    empty = hc.relative_geometric_side(order, 40, 3, family=family)
    assert (empty["main"], empty["error_sum"], empty["stabilizer_count"], empty["ball_size"]) == (0.0, 0.0, 0, 72)


def test_model_phase_hessian():
    # chart (x1, t) around the point x1 = 0, t = 0 of the circle integral
    f, h = hc.phase_model, 1e-4
    grad = ((f(h, 0) - f(-h, 0)) / (2 * h), (f(0, h) - f(0, -h)) / (2 * h))
    assert grad == pytest.approx((0.0, 0.0), abs=1e-12)
    assert (f(1.0, h) - f(1.0, -h)) / (2 * h) == pytest.approx(1.0)
    fxx = (f(h, 0) - 2 * f(0, 0) + f(-h, 0)) / h**2
    ftt = (f(0, h) - 2 * f(0, 0) + f(0, -h)) / h**2
    fxt = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    H = np.array([[fxx, fxt], [fxt, ftt]])
    assert H == pytest.approx(np.array([[0.0, 1.0], [1.0, 1.0]]), abs=1e-6)
    ev = np.linalg.eigvalsh(H)
    assert (int(np.sum(ev > 0)), int(np.sum(ev < 0))) == (1, 1)
