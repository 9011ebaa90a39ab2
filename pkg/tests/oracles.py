"""Independent reference computations shared by the tests.

Nothing here calls the enumeration or quadrature code under test: counts come
from a plain box scan, gauges from textbook formulas.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from latticemsd.bodies import Ball, Ellipsoid, Rotated2D, Superellipse2D


def _box(halfwidths):
    axes = [np.arange(-h, h + 1, dtype=np.int64) for h in halfwidths]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _exact_power_count(k, coeffs, power, t):
    """#{k : sum c_i |k_i|^p <= t^p} with rational c_i, exactly."""
    coeffs = [Fraction(c) for c in coeffs]
    D = math.lcm(*(c.denominator for c in coeffs))
    ints = [int(c * D) for c in coeffs]
    lhs = sum(ci * np.abs(k[:, i]) ** power for i, ci in enumerate(ints))
    thr = math.floor(Fraction(t) ** power * D)
    return int(np.sum(lhs <= thr))


def semiaxes(body):
    if isinstance(body, Ball):
        return [body.r] * body.d
    if isinstance(body, Ellipsoid):
        return list(body.axes)
    if isinstance(body, Superellipse2D):
        return [body.a, body.b]
    a = semiaxes(body.inner)
    R = math.hypot(*a)
    return [R, R]


def oracle_gauge(body, x):
    """Gauge from the defining formula of each variant."""
    x = np.asarray(x, dtype=float)
    if isinstance(body, Ball):
        return np.sqrt(np.sum(x * x, axis=-1)) / body.r
    if isinstance(body, Ellipsoid):
        return np.sqrt(np.sum((x / np.array(body.axes)) ** 2, axis=-1))
    if isinstance(body, Superellipse2D):
        p = body.m / (body.m - 1) if body.dual else body.m
        s = np.abs(x[..., 0] / body.a) ** p + np.abs(x[..., 1] / body.b) ** p
        return s ** (1 / p)
    c, s = math.cos(body.theta), math.sin(body.theta)
    y0 = c * x[..., 0] + s * x[..., 1]
    y1 = -s * x[..., 0] + c * x[..., 1]
    return oracle_gauge(body.inner, np.stack([y0, y1], axis=-1))


def brute_count(body, t) -> int:
    """Box scan of #{k : rho(k) <= t}; exact rational arithmetic where the gauge allows it."""
    half = [int(math.ceil(t * a)) + 1 for a in semiaxes(body)]
    k = _box(half)
    if isinstance(body, Ball):
        return _exact_power_count(k, [1 / Fraction(body.r) ** 2] * body.d, 2, t)
    if isinstance(body, Ellipsoid):
        return _exact_power_count(k, [1 / Fraction(a) ** 2 for a in body.axes], 2, t)
    if isinstance(body, Superellipse2D) and not body.dual:
        m = body.m
        return _exact_power_count(k, [1 / Fraction(body.a) ** m, 1 / Fraction(body.b) ** m], m, t)
    if isinstance(body, Rotated2D) and body.inner.power_form() is not None:
        return _rotated_power_count(body, k, t)
    return int(np.sum(oracle_gauge(body, k) <= t))


def _rotated_power_count(body, k, t) -> int:
    # floats decide clear cases; near-ties are settled in rationals against the
    # float rotation, allowing 1e-14 relative for the rounding of theta itself
    g = oracle_gauge(body, k)
    near = np.abs(g / t - 1) <= 1e-9
    n = int(np.sum((g <= t) & ~near))
    p, ws = body.inner.power_form()
    c, s = Fraction(math.cos(body.theta)), Fraction(math.sin(body.theta))
    lim = (Fraction(t) * (1 + Fraction(1, 10**14))) ** p
    for x0, x1 in k[near].tolist():
        y = (c * x0 + s * x1, -s * x0 + c * x1)
        n += sum(w * abs(v) ** p for w, v in zip(ws, y)) <= lim
    return n


def brute_gauges(body, t):
    """Gauge values of all lattice points with rho <= t, sorted."""
    half = [int(math.ceil(t * a)) + 1 for a in semiaxes(body)]
    g = np.sort(oracle_gauge(body, _box(half)))
    return g[g <= t * (1 + 1e-12)]


def disk_ft(s):
    from scipy.special import j1
    return 2 * math.pi * j1(s) / s


def bump_profile_mass(d):
    """Mass of exp(-1/(1-r^2)) on the unit ball, by an independent substitution."""
    from scipy.integrate import quad
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    # r = sin(u) removes the endpoint layer
    def f(u):
        c = math.cos(u)
        return math.exp(-1 / (c * c)) * math.sin(u) ** (d - 1) * c if c > 0 else 0.0

    return area * quad(f, 0, math.pi / 2, epsabs=0, epsrel=1e-13, limit=200)[0]


def disk_point_contribution(eps, t, dist):
    """Mass of the 2-d bump of radius eps centered at distance ``dist`` from the origin
    that lies inside the disk of radius t (polar integral in the bump frame)."""
    from scipy.integrate import quad
    c = 1 / bump_profile_mass(2)

    def zeta(r):
        return 0.0 if r >= eps else c * math.exp(-1 / (1 - (r / eps) ** 2)) / eps**2

    def arc(r):
        # angular measure of the circle of radius r about the center inside the disk
        if r == 0:
            return 2 * math.pi if dist < t else 0.0
        cosv = (t * t - dist * dist - r * r) / (2 * dist * r)
        if cosv >= 1:
            return 2 * math.pi
        if cosv <= -1:
            return 0.0
        return 2 * math.acos(-cosv)

    return quad(lambda r: zeta(r) * arc(r) * r, 0, eps, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
