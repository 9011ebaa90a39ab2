import json
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from latticemsd.bodies import Ball, Ellipsoid, Superellipse2D, polar, rotate
from latticemsd.fourier import (FourierSample, TailError, cap_measure, decay_scan, envelope,
                                flat_decay_exponent, indicator_ft, indicator_ft_many, lattice_ball,
                                poisson_rest, poisson_tail)
from latticemsd.mollifier import mollified_rest
from latticemsd.lattice import count_points
from oracles import disk_ft

SE4 = Superellipse2D(4)
PLANAR = [Ball(2), Ellipsoid((2.0, 1.0)), SE4, Superellipse2D(6, 2.0, 1.0), polar(SE4), rotate(SE4, 0.4)]


@pytest.mark.parametrize("body", PLANAR + [Ball(3), Ellipsoid((1.5, 1.0, 0.75))], ids=str)
def test_zero_frequency_is_volume(body):
    assert indicator_ft(body, np.zeros(body.dim)).value == body.volume()


def test_disk_closed_form():
    s = indicator_ft(Ball(2), [5.0, 0.0])
    assert s.method == "closed_form"
    assert s.value.real == pytest.approx(disk_ft(5.0), rel=1e-14)
    assert s.value.real == pytest.approx(-0.4116480848, abs=1e-9)
    assert indicator_ft(Ball(2, 2.0), [3.0, 4.0]).value.real == pytest.approx(4 * disk_ft(10.0), rel=1e-13)


def test_ball3_closed_form():
    s = 7.3
    want = 4 * math.pi * (math.sin(s) - s * math.cos(s)) / s**3
    assert indicator_ft(Ball(3), [0, s, 0]).value.real == pytest.approx(want, rel=1e-12)


def test_ellipse_linear_change():
    xi = np.array([1.7, -3.2])
    assert indicator_ft(Ellipsoid((2.0, 1.0)), xi).value.real == pytest.approx(
        2 * disk_ft(math.hypot(2 * 1.7, 3.2)), rel=1e-13)


@pytest.mark.parametrize("s", [1.0, 7.0, 40.0, 250.0])
def test_superellipse_along_axis_against_1d_quadrature(s):
    y = lambda x: (1 - x**4) ** 0.25
    want = quad(lambda x: 2 * y(x), -1, 1, weight="cos", wvar=s, limit=800)[0]
    got = indicator_ft(SE4, [s, 0.0])
    assert got.method == "boundary_quadrature"
    assert got.value.real == pytest.approx(want, abs=1e-9)


def test_superellipse_m2_matches_ellipse():
    rng = np.random.default_rng(8)
    xi = rng.normal(size=(30, 2)) * 20
    a, _, _ = indicator_ft_many(Superellipse2D(2, 2.0, 1.0), xi)
    b, _, _ = indicator_ft_many(Ellipsoid((2.0, 1.0)), xi)
    assert np.allclose(a, b, atol=1e-10)


def test_two_resolution_agreement():
    s = indicator_ft(SE4, 100 * np.array([1.0, 1.0]) / math.sqrt(2))
    assert s.error <= 1e-8 and s.converged


@pytest.mark.parametrize("body", PLANAR, ids=str)
def test_conjugate_symmetry(body):
    rng = np.random.default_rng(9)
    xi = rng.normal(size=(20, 2)) * 30
    a, ea, _ = indicator_ft_many(body, xi)
    b, eb, _ = indicator_ft_many(body, -xi)
    assert np.all(np.abs(a - np.conj(b)) <= ea + eb + 1e-12)


@given(st.floats(0, 2 * math.pi), st.floats(-60, 60), st.floats(-60, 60))
def test_rotation_equivariance_of_transform(theta, x, y):
    A = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    xi = np.array([x, y])
    a = indicator_ft(SE4, xi, strict=False)
    b = indicator_ft(rotate(SE4, theta), A @ xi, strict=False)
    assert abs(a.value - b.value) <= 1e-10


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        indicator_ft(Ball(3), [1.0, 2.0])


def test_cap_examples():
    c = cap_measure(Ball(2), [50.0, 0.0])
    assert c.gamma_plus == pytest.approx(2 * math.acos(1 - 0.02), rel=1e-12)
    assert c.gamma_minus == c.gamma_plus
    # Archimedes: a spherical cap of depth h has area 2 pi r h
    assert cap_measure(Ball(3), [0, 0, 10.0]).gamma_plus == pytest.approx(2 * math.pi * 0.1, rel=1e-12)
    with pytest.raises(ValueError):
        cap_measure(Ball(2), [0.5, 0.0])


def test_cap_quadrature_path_matches_circle():
    # an ellipse with equal axes takes the boundary root-finding path
    c = cap_measure(Ellipsoid((1.0, 1.0)), [30.0, 40.0])
    assert c.gamma_plus == pytest.approx(2 * math.acos(1 - 0.02), rel=1e-9)


def _cap_slope(body, u):
    s = np.geomspace(10, 1000, 9)
    g = [cap_measure(body, x * np.asarray(u)).gamma_plus for x in s]
    assert all(v > 0 for v in g)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(g, g[1:]))
    return np.polyfit(np.log(s), np.log(g), 1)[0], np.array(g) * s**0.5


def test_cap_decay_disk():
    slope, scaled = _cap_slope(Ball(2), [0.6, 0.8])
    assert slope == pytest.approx(-0.5, abs=0.05)
    assert scaled.max() <= 1.05 * scaled.min()


def test_cap_decay_flat_normal():
    slope, _ = _cap_slope(SE4, [1.0, 0.0])
    assert slope == pytest.approx(-0.25, abs=0.05)


def test_cap_both_sides_for_ellipse():
    c = cap_measure(Ellipsoid((2.0, 1.0)), [0.0, 20.0])
    assert c.gamma_plus == pytest.approx(c.gamma_minus, rel=1e-10)


def test_decay_scan_disk(tmp_path):
    s = np.geomspace(1, 1000, 400)
    full = decay_scan(Ball(2), s, [[1, 0], [1, 1]])
    half = decay_scan(Ball(2), s[::2], [[1, 0], [1, 1]])
    assert math.isfinite(full.sup)
    assert full.sup <= 1.2 * half.sup
    assert full.sup <= 1.2 * full.sup_upto(10**1.5)
    full.to_csv(tmp_path / "f.csv", "ball:d=2,r=1")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[1] == "xi_norm,direction_index,abs_ft,scaled"
    assert len(lines) == 2 + 800


def test_decay_scan_needs_two_decades():
    with pytest.raises(ValueError):
        decay_scan(Ball(2), np.geomspace(1, 50, 10), [[1, 0]])


def test_decay_scan_polar_superellipse_finite():
    sc = decay_scan(polar(SE4), np.geomspace(1, 1000, 300), [[1, 0], [1, 1], [1, 2]])
    assert math.isfinite(sc.sup) and sc.sup < 50


@pytest.mark.parametrize("body", [Ball(2), SE4, polar(SE4), Ellipsoid((2.0, 1.0))], ids=str)
def test_riemann_lebesgue(body):
    s = np.geomspace(1, 1000, 600)
    for u in ([1.0, 0.0], [1.0, 1.0], [0.3, 1.0]):
        u = np.array(u) / np.linalg.norm(u)
        v, _, _ = indicator_ft_many(body, s[:, None] * u)
        width = 4 * math.pi / float(body.support(u) + body.support(-u))
        _, peaks = envelope(s[s <= 10], np.abs(v[s <= 10]), width)
        assert np.abs(v[s >= 100]).max() < peaks.min()


def test_flat_decay_exponent():
    fit = flat_decay_exponent(SE4, [1.0, 0.0])
    assert fit.slope == pytest.approx(-(1 + 1 / 4), abs=0.05)


def test_poisson_examples():
    r = poisson_rest(Ball(2), 7.3, 0.1, 200)
    direct = mollified_rest(Ball(2), 7.3, 0.1)
    assert abs(r.value - direct) <= 1e-3
    assert abs(r.imag) <= 1e-9 and r.tail_bound <= 1e-4
    e = poisson_rest(Ellipsoid((2.0, 1.0)), 5.0, 0.15, 200)
    assert abs(e.value - mollified_rest(Ellipsoid((2.0, 1.0)), 5.0, 0.15)) <= 1e-3


def test_poisson_error_monotone_in_K():
    direct = mollified_rest(Ball(2), 3.0, 0.5)
    errs = [abs(poisson_rest(Ball(2), 3.0, 0.5, K, tail_tol=1.0).value - direct) for K in (25, 50, 100)]
    assert errs[0] >= errs[1] >= errs[2]


def test_poisson_tail_certifies_truncation():
    direct = mollified_rest(Ball(2), 3.0, 0.5)
    for K in (10, 20, 40):
        r = poisson_rest(Ball(2), 3.0, 0.5, K, tail_tol=1.0)
        assert abs(r.value - direct) <= r.tail_bound + 1e-8


def test_poisson_tail_error_suggests_K():
    with pytest.raises(TailError, match="K >="):
        poisson_rest(Ball(2), 7.3, 0.1, 20)


def test_poisson_superellipse_small_K():
    r = poisson_rest(SE4, 3.0, 0.5, 40, tail_tol=1e-3)
    assert abs(r.value - mollified_rest(SE4, 3.0, 0.5)) <= 2 * (r.tail_bound + 1e-6)
    assert abs(r.imag) <= 1e-9


def test_poisson_random_cases():
    rng = random.Random(12)
    for _ in range(20):
        body = rng.choice([Ball(2), Ellipsoid((2.0, 1.0)), Ellipsoid((1.0, 1.5)), Ball(2, 1.25)])
        t = rng.uniform(2, 6)
        eps = rng.uniform(0.25, 0.5)
        K = 20
        while poisson_tail(body, t, eps, K) > 1e-6:
            K *= 2
        r = poisson_rest(body, t, eps, K, tail_tol=1e-6)
        budget = 1e-9 * count_points(body, t + eps)
        assert abs(r.value - mollified_rest(body, t, eps)) <= 2 * (r.tail_bound + budget)


def test_poisson_json(tmp_path):
    r = poisson_rest(Ball(2), 3.0, 0.5, 50)
    r.to_json(tmp_path / "p.json")
    rec = json.loads((tmp_path / "p.json").read_text())
    assert {"t", "eps", "K", "poisson", "direct", "tail_bound"} <= set(rec)


def test_lattice_ball_order():
    k = lattice_ball(2, 2)
    assert k[:4].tolist() == [[-1, 0], [0, -1], [0, 1], [1, 0]]
    n2 = (k * k).sum(1)
    assert np.all(np.diff(n2) >= 0) and len(k) == 12


def test_convergence_rule():
    ok = FourierSample((1.0, 0.0), 2.0 + 0j, "boundary_quadrature", 1e-9)
    bad = FourierSample((1.0, 0.0), 2.0 + 0j, "boundary_quadrature", 1e-5)
    assert ok.converged and not bad.converged
    assert FourierSample((1.0, 0.0), 0j, "boundary_quadrature", 5e-13).converged
