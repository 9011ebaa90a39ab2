import json
import math
import random

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from latticemsd.bodies import Ball, Ellipsoid, Superellipse2D, polar
from latticemsd.discrepancy import (bound, fit_loglog, lattice_rest, make_table, msd_from_events,
                                    normalized_stat, rest_ratio_profile, sweep_and_fit, window_length,
                                    window_msd)
from latticemsd.lattice import count_points, gauge_events
from oracles import brute_gauges


def disk_window_oracle():
    t = sp.symbols("t", positive=True)
    I = sp.integrate((5 - sp.pi * t**2) ** 2, (t, 1, sp.sqrt(2))) + sp.integrate(
        (9 - sp.pi * t**2) ** 2, (t, sp.sqrt(2), 2))
    return sp.sqrt(I)


DISK_G = 1.5383405356729556181  # sqrt of the two-piece integral, evaluated symbolically


def test_symbolic_value_frozen():
    assert float(sp.N(disk_window_oracle(), 30)) == pytest.approx(DISK_G, rel=1e-18)


def test_disk_window_closed_form():
    w = window_msd(Ball(2), 1.0, 1.0)
    assert abs(w.G - DISK_G) <= 1e-10
    assert w.events_used == 4 and not w.relative


def test_lattice_rest_examples():
    assert lattice_rest(Ball(2), 2) == pytest.approx(13 - 4 * math.pi, abs=1e-13)
    assert lattice_rest(Ball(3), 1) == pytest.approx(7 - 4 * math.pi / 3, abs=1e-13)
    for t in (0.1, 0.5, 0.99):
        assert lattice_rest(Ball(2), t) == pytest.approx(1 - math.pi * t * t)
    # only the origin is counted, so E > 0 exactly while the area is below 1
    assert lattice_rest(Ball(2), 0.56) > 0 > lattice_rest(Ball(2), 0.57)


def quad_oracle(body, R, h, relative=False):
    V, d = body.volume(), body.dim
    g = brute_gauges(body, R + h)
    pts = sorted(set(float(x) for x in g if R < x < R + h))

    def f(t):
        e = count_points(body, t) - V * t**d
        return (e / (V * t**d)) ** 2 if relative else e * e

    edges = [R] + pts + [R + h]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        if b > a:
            total += quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return math.sqrt(total / h)


@pytest.mark.parametrize("seed", range(6))
def test_window_matches_quadrature(seed):
    rng = random.Random(seed)
    body = rng.choice([Ball(2), Ellipsoid((2.0, 1.0)), Superellipse2D(4), Ball(3)])
    R = rng.uniform(0.5, 6)
    h = rng.uniform(0.1, 2)
    for rel in (False, True):
        w = window_msd(body, R, h, relative=rel)
        assert w.G == pytest.approx(quad_oracle(body, R, h, rel), rel=1e-6)


def test_zero_event_window():
    R, h = 1.05, 0.3  # (1, 1.4142) holds no gauge value of the disk
    w = window_msd(Ball(2), R, h)
    assert w.events_used == 0
    t = sp.symbols("t")
    want = sp.sqrt(sp.integrate((5 - sp.pi * t**2) ** 2, (t, sp.Rational(105, 100), sp.Rational(135, 100)))
                   / sp.Rational(3, 10))
    assert w.G == pytest.approx(float(want), rel=1e-12)


@given(st.sampled_from([Ball(2), Ellipsoid((2.0, 1.0)), Ball(3)]), st.floats(0.5, 20), st.floats(0.05, 5))
def test_relative_between_weight_bounds(body, R, h):
    a = window_msd(body, R, h).G
    r = window_msd(body, R, h, relative=True).G
    V, d = body.volume(), body.dim
    assert a / ((R + h) ** d * V) * (1 - 1e-12) <= r <= a / (R**d * V) * (1 + 1e-12)


@given(st.floats(1, 30), st.floats(0.05, 5), st.floats(0.05, 5))
def test_window_integral_additive(R, h1, h2):
    body = Ellipsoid((2.0, 1.0))
    whole = window_msd(body, R, h1 + h2)
    a = window_msd(body, R, h1)
    b = window_msd(body, R + h1, h2)
    assert whole.integral == pytest.approx(a.integral + b.integral, rel=1e-9, abs=1e-9)
    assert whole.G >= 0


def test_recompute_from_events_bit_identical():
    body = Superellipse2D(4)
    ev = gauge_events(body, 10, 30)
    a = msd_from_events(ev, body.volume(), 2, 10, 20, True)
    b = msd_from_events(ev, body.volume(), 2, 10, 20, True)
    c = window_msd(body, 10, 20, True)
    assert a == b == c
    # a wider event list gives the same window
    wide = gauge_events(body, 5, 40)
    assert msd_from_events(wide, body.volume(), 2, 10, 20, True).G == pytest.approx(a.G, rel=1e-14)


def test_window_preconditions():
    with pytest.raises(ValueError):
        window_msd(Ball(2), -1, 1)
    with pytest.raises(ValueError):
        window_msd(Ball(2), 1, 0)
    with pytest.raises(ValueError):
        window_msd(Ball(2), 0, 1, relative=True)


def test_window_rules():
    assert window_length("full", 64.0) == 64
    assert window_length("short", 64.0) == math.ceil(math.log(64))
    assert window_length(2.5, 64.0) == 2.5
    with pytest.raises(ValueError):
        window_length(-1.0, 3)


def test_constant_table_has_zero_slope():
    R = [2.0**k for k in range(4, 10)]
    t = make_table("synthetic", 2, R, R, [0.7] * len(R), [0] * len(R))
    assert t.fit.slope == pytest.approx(0, abs=1e-12)
    assert not t.fit.unstable


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_bound_table_has_unit_statistic(d):
    R = np.array([2.0**k for k in range(3, 9)])
    t = make_table("synthetic", d, R, R, bound(d, R), [0] * len(R))
    assert normalized_stat(t, d) == pytest.approx(1, rel=1e-14)


def test_power_law_fit_recovers_exponent():
    R = np.geomspace(10, 1e4, 12)
    f = fit_loglog(R, 3 * R**-1.5)
    assert f.slope == pytest.approx(-1.5, abs=1e-12)
    assert f.ci[0] - 1e-12 <= -1.5 <= f.ci[1] + 1e-12
    noisy = fit_loglog(R, 3 * R**-1.5 * np.exp(np.sin(np.arange(12)) * 2))
    assert noisy.unstable


def test_sweep_preconditions():
    with pytest.raises(ValueError):
        sweep_and_fit(Ball(2), [4, 8, 16])
    with pytest.raises(ValueError):
        sweep_and_fit(Ball(2), [4, 8, 8, 16])
    with pytest.raises(ValueError):
        make_table("x", 2, [], [], [], [])
    with pytest.raises(ValueError):
        make_table("x", 2, [2.0, 1.0], [1, 1], [1, 1], [0, 0])


def test_small_sweep_and_exports(tmp_path):
    tab = sweep_and_fit(Ball(3), [4, 8, 16, 32], "full")
    assert tab.fit_deflated is not None and tab.relative
    assert np.all(tab.G > 0)
    assert np.allclose(tab.normalized, tab.G / bound(3, tab.R))
    tab.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[1] == "R,h,G,normalized,events_used"
    first = lines[2].split(",")
    assert float(first[0]) == 4.0 and float(first[2]) == tab.G[0]
    tab.to_json(tmp_path / "s.json")
    rep = json.loads((tmp_path / "s.json").read_text())
    assert rep["slope"] == tab.fit.slope and "slope_deflated" in rep


def test_short_window_sweep():
    tab = sweep_and_fit(Ellipsoid((2.0, 1.0)), [64, 128, 256, 512], "short")
    assert list(tab.h) == [5, 5, 6, 7]


def test_polar_pair_finite():
    for body in (Superellipse2D(4), polar(Superellipse2D(4))):
        a = sweep_and_fit(body, [2.0**k for k in range(4, 9)])
        b = sweep_and_fit(body, [2.0**k for k in range(4, 10)])
        sa, sb = normalized_stat(a), normalized_stat(b)
        assert math.isfinite(sa) and math.isfinite(sb) and sb <= 2 * sa


def test_rest_ratio_profile_against_scan():
    body = Ellipsoid((2.0, 1.0))
    prof = rest_ratio_profile(body, 1, 20, 2 / 3, [10, 20])
    V = body.volume()
    g = brute_gauges(body, 20)
    g = np.unique(g[(g > 1) & (g <= 20)])
    # the sup over a step is reached at an end of the step
    best = {10: 0.0, 20: 0.0}
    edges = np.concatenate([[1.0], g, [20.0]])
    for a, b in zip(edges, edges[1:]):
        N = count_points(body, 0.5 * (a + b))
        for c in best:
            if a < c:
                for s in (a, min(b, c)):
                    best[c] = max(best[c], abs(N - V * s * s) / s ** (2 / 3))
    best[10] = max(best[10], abs(count_points(body, 10) - V * 100) / 10 ** (2 / 3))
    assert prof[0] == pytest.approx(best[10], rel=1e-9)
    assert prof[1] == pytest.approx(best[20], rel=1e-9)
