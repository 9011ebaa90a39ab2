"""Convex bodies with closed-form gauge and support functions.

Every body contains the origin in its interior.  The family is closed under
polarity: ``polar(polar(B))`` reproduces ``B`` up to float rounding of the
reciprocal semiaxes.

Gauges accept arrays of shape ``(..., d)`` and return arrays of shape ``(...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np
from scipy import optimize, special

FLAT_TOL = 1e-8


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# --------------------------------------------------------------------------
# body variants


@dataclass(frozen=True)
class Ball:
    d: int = 2
    r: float = 1.0

    def __post_init__(self):
        if self.d < 2 or self.r <= 0:
            raise ValueError(f"invalid ball d={self.d}, r={self.r}")

    @property
    def dim(self) -> int:
        return self.d

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1) / self.r

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        return x / (self.r * np.linalg.norm(x, axis=-1, keepdims=True))

    def support(self, xi):
        return self.r * np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)

    def support_grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.r * xi / np.linalg.norm(xi, axis=-1, keepdims=True)

    def polar(self) -> "Ball":
        return Ball(self.d, 1.0 / self.r)

    def volume(self) -> float:
        return _unit_ball_volume(self.d) * self.r ** self.d

    def inradius(self) -> float:
        return self.r

    def power_form(self):
        w = 1 / Fraction(self.r) ** 2
        return 2, (w,) * self.d

    def row_extent(self, rest, t):
        rest = np.asarray(rest, dtype=float)
        rem = (self.r * t) ** 2 - np.sum(rest * rest, axis=-1)
        return _sym_extent(rem, (self.r * t) ** 2, lambda v: np.sqrt(v))

    def curvature_at(self, p):
        return np.full(np.shape(p)[:-1], self.r ** (1.0 - self.d))

    def descriptor(self) -> str:
        return f"ball:d={self.d},r={self.r!r}"


@dataclass(frozen=True)
class Ellipsoid:
    axes: tuple = (2.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(float(a) for a in self.axes))
        if len(self.axes) < 2 or min(self.axes) <= 0:
            raise ValueError(f"invalid ellipsoid axes {self.axes}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def _a(self):
        return np.array(self.axes)

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x / self._a, axis=-1)

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        a = self._a
        return (x / a**2) / self.gauge(x)[..., None]

    def support(self, xi):
        return np.linalg.norm(np.asarray(xi, dtype=float) * self._a, axis=-1)

    def support_grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        a = self._a
        return a**2 * xi / self.support(xi)[..., None]

    def polar(self) -> "Ellipsoid":
        return Ellipsoid(tuple(1.0 / a for a in self.axes))

    def volume(self) -> float:
        return _unit_ball_volume(self.dim) * math.prod(self.axes)

    def inradius(self) -> float:
        return min(self.axes)

    def power_form(self):
        return 2, tuple(1 / Fraction(a) ** 2 for a in self.axes)

    def row_extent(self, rest, t):
        rest = np.asarray(rest, dtype=float)
        a = self._a
        rem = t * t - np.sum((rest / a[1:]) ** 2, axis=-1)
        return _sym_extent(rem, t * t, lambda v: a[0] * np.sqrt(v))

    def curvature_at(self, p):
        # Gaussian curvature of sum x_i^2/a_i^2 = 1
        p = np.asarray(p, dtype=float)
        a = self._a
        s = np.sum(p * p / a**4, axis=-1)
        return 1.0 / (np.prod(a**2) * s ** ((self.dim + 1) / 2))

    def descriptor(self) -> str:
        if self.dim == 2:
            return f"ellipsoid:a={self.axes[0]!r},b={self.axes[1]!r}"
        return "ellipsoid:" + ",".join(f"a{i + 1}={a!r}" for i, a in enumerate(self.axes))


@dataclass(frozen=True)
class Superellipse2D:
    """Planar body ``|x/a|^p + |y/b|^p <= 1``.

    ``p = m`` for the primal body (``m`` even) and ``p = m/(m-1)`` when
    ``dual`` is set; the dual variant is the exact polar of the primal one
    with reciprocal semiaxes.
    """

    m: int = 4
    a: float = 1.0
    b: float = 1.0
    dual: bool = False

    def __post_init__(self):
        if self.m < 2 or self.m % 2 or self.a <= 0 or self.b <= 0:
            raise ValueError(f"invalid superellipse m={self.m}, a={self.a}, b={self.b}")

    dim = 2

    @property
    def exponent(self) -> Fraction:
        return Fraction(self.m, self.m - 1) if self.dual else Fraction(self.m)

    @property
    def _p(self) -> float:
        return float(self.exponent)

    @property
    def _q(self) -> float:
        p = self.exponent
        return float(p / (p - 1))

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        p = self._p
        u = np.abs(x[..., 0]) / self.a
        v = np.abs(x[..., 1]) / self.b
        # scale out the max to keep |.|^p in range
        s = np.maximum(u, v)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = s * ((u / s) ** p + (v / s) ** p) ** (1 / p)
        return np.where(s > 0, out, 0.0)

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        p = self._p
        rho = self.gauge(x)[..., None]
        ab = np.array([self.a, self.b])
        z = x / ab
        return np.sign(z) * (np.abs(z) / rho) ** (p - 1) / ab

    def support(self, xi):
        xi = np.asarray(xi, dtype=float)
        q = self._q
        u = np.abs(xi[..., 0]) * self.a
        v = np.abs(xi[..., 1]) * self.b
        s = np.maximum(u, v)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = s * ((u / s) ** q + (v / s) ** q) ** (1 / q)
        return np.where(s > 0, out, 0.0)

    def support_grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        q = self._q
        ab = np.array([self.a, self.b])
        z = xi * ab
        h = self.support(xi)[..., None]
        return ab * np.sign(z) * (np.abs(z) / h) ** (q - 1)

    def polar(self) -> "Superellipse2D":
        return Superellipse2D(self.m, 1.0 / self.a, 1.0 / self.b, not self.dual)

    def volume(self) -> float:
        p = self._p
        return 4 * self.a * self.b * math.gamma(1 + 1 / p) ** 2 / math.gamma(1 + 2 / p)

    def inradius(self) -> float:
        if not self.dual:
            return min(self.a, self.b)
        return _numeric_inradius(self)

    def power_form(self):
        if self.dual:
            return None
        m = self.m
        return m, (1 / Fraction(self.a) ** m, 1 / Fraction(self.b) ** m)

    def row_extent(self, rest, t):
        p = self._p
        y = np.abs(np.asarray(rest, dtype=float)[..., 0]) / self.b
        rem = t**p - y**p
        return _sym_extent(rem, t**p, lambda v: self.a * v ** (1 / p))

    def curvature_at(self, pt):
        pt = np.asarray(pt, dtype=float)
        p = self._p
        x = np.abs(pt[..., 0]) / self.a
        y = np.abs(pt[..., 1]) / self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            fx = p * x ** (p - 1) / self.a
            fy = p * y ** (p - 1) / self.b
            fxx = p * (p - 1) * x ** (p - 2) / self.a**2
            fyy = p * (p - 1) * y ** (p - 2) / self.b**2
            num = np.where(fy == 0, 0.0, fxx * fy * fy) + np.where(fx == 0, 0.0, fyy * fx * fx)
            # an axis point of a body with p < 2 has infinite curvature
            if p < 2:
                num = np.where((x == 0) | (y == 0), np.inf, num)
            return np.abs(num) / (fx * fx + fy * fy) ** 1.5

    def descriptor(self) -> str:
        s = f"superellipse:m={self.m},a={self.a!r},b={self.b!r}"
        return s + ",dual=1" if self.dual else s


@dataclass(frozen=True)
class Rotated2D:
    """The rotated body ``A(theta) inner``; ``A`` rotates counterclockwise."""

    inner: "Body"
    theta: float = 0.0
    _A: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.inner.dim != 2:
            raise ValueError("rotations are planar only")
        object.__setattr__(self, "_A", _rot(self.theta))

    dim = 2

    def _to_inner(self, x):
        # A^T x, row-vector convention
        return np.asarray(x, dtype=float) @ self._A

    def _from_inner(self, y):
        return np.asarray(y, dtype=float) @ self._A.T

    def gauge(self, x):
        return self.inner.gauge(self._to_inner(x))

    def gauge_grad(self, x):
        return self._from_inner(self.inner.gauge_grad(self._to_inner(x)))

    def support(self, xi):
        return self.inner.support(self._to_inner(xi))

    def support_grad(self, xi):
        return self._from_inner(self.inner.support_grad(self._to_inner(xi)))

    def polar(self) -> "Rotated2D":
        return Rotated2D(polar(self.inner), self.theta)

    def volume(self) -> float:
        return self.inner.volume()

    def inradius(self) -> float:
        return self.inner.inradius()

    def power_form(self):
        return None

    @property
    def tie_band(self) -> float:
        # a closed-form inner gauge is accurate to a few ulp after the rotation
        return 1e-14 if self.inner.power_form() is not None else 1e-12

    def row_extent(self, rest, t):
        return _numeric_row_extent(self, rest, t)

    def curvature_at(self, p):
        return self.inner.curvature_at(self._to_inner(p))

    def descriptor(self) -> str:
        return f"{self.inner.descriptor()},theta={self.theta!r}"


Body = Union[Ball, Ellipsoid, Superellipse2D, Rotated2D]


@dataclass(frozen=True)
class FlatPoint:
    P: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    m: int
    param: float = 0.0

    def rotated(self, theta: float) -> "FlatPoint":
        A = _rot(theta)
        return FlatPoint(A @ self.P, A @ self.normal, A @ self.tangent, self.m, self.param + theta)


# --------------------------------------------------------------------------
# helpers


def _sym_extent(rem, scale, root):
    """Extent ``[-w, w]`` of a symmetric row; NaN when the row misses the body.

    A slightly negative remainder (rounding) is treated as a tangent row so
    the integer correction step can still decide it exactly.
    """
    rem = np.asarray(rem, dtype=float)
    ok = rem >= -1e-9 * max(scale, 1.0)
    w = np.where(ok, root(np.maximum(rem, 0.0)), np.nan)
    return -w, w


def _numeric_row_extent(body, rest, t, iters: int = 80):
    """Row extent by golden-section minimisation plus bisection (convex gauge)."""
    rest = np.asarray(rest, dtype=float)
    y = rest[..., 0]
    B = t * max(float(body.support(np.array([1.0, 0.0]))), float(body.support(np.array([-1.0, 0.0])))) + 1.0

    def g(x):
        return body.gauge(np.stack([x, np.broadcast_to(y, np.shape(x))], axis=-1)) - t

    lo = np.full(y.shape, -B)
    hi = np.full(y.shape, B)
    gr = (math.sqrt(5) - 1) / 2
    for _ in range(iters):
        c = hi - gr * (hi - lo)
        d = lo + gr * (hi - lo)
        left = g(c) < g(d)
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    xm = 0.5 * (lo + hi)
    inside = g(xm) <= 1e-9 * max(t, 1.0)

    def bisect(a, b):
        # g(a) > 0 >= g(b) orientation is handled by sign tests
        for _ in range(iters):
            mid = 0.5 * (a + b)
            gm = g(mid) <= 0
            a, b = np.where(gm, a, mid), np.where(gm, mid, b)
        return b

    left = bisect(np.full(y.shape, -B), xm)
    right = bisect(np.full(y.shape, B), xm)
    return np.where(inside, left, np.nan), np.where(inside, right, np.nan)


def _numeric_inradius(body) -> float:
    phi = np.linspace(0, 2 * np.pi, 4097)
    u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    h = body.support(u)
    i = int(np.argmin(h))
    res = optimize.minimize_scalar(
        lambda f: float(body.support(np.array([math.cos(f), math.sin(f)]))),
        bounds=(phi[max(i - 1, 0)], phi[min(i + 1, len(phi) - 1)]),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return min(float(res.fun), float(h[i]))


# --------------------------------------------------------------------------
# operations


def gauge(body: Body, x) -> np.ndarray:
    return body.gauge(x)


def support(body: Body, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if np.any(np.all(xi == 0, axis=-1)):
        raise ValueError("support function needs a nonzero direction")
    return body.support(xi)


def polar(body: Body) -> Body:
    return body.polar()


def rotate(body: Body, theta: float) -> Rotated2D:
    if body.dim != 2:
        raise ValueError("rotations are planar only")
    return Rotated2D(body, float(theta))


def normal_point(body: Body, xi) -> np.ndarray:
    """Boundary point whose outward normal is parallel to ``xi``.

    This is the gradient of the support function; ``normal_point(body, -xi)``
    gives the point where ``xi`` is an inner normal.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(np.all(xi == 0, axis=-1)):
        raise ValueError("normal_point needs a nonzero direction")
    return body.support_grad(xi)


def outward_normal(body: Body, x) -> np.ndarray:
    g = body.gauge_grad(x)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def volume(body: Body) -> float:
    return body.volume()


def inradius(body: Body) -> float:
    return body.inradius()


class BoundaryParam:
    """Radial-angle parametrization ``x(t) = u(t) / rho(u(t))`` of a planar boundary."""

    def __init__(self, body: Body):
        if body.dim != 2:
            raise ValueError("boundary parametrization is planar only")
        self.body = body

    def point(self, t):
        t = np.asarray(t, dtype=float)
        u = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return u / self.body.gauge(u)[..., None]

    def tangent(self, t):
        """Analytic ``x'(t)``."""
        t = np.asarray(t, dtype=float)
        u = np.stack([np.cos(t), np.sin(t)], axis=-1)
        du = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        r = self.body.gauge(u)[..., None]
        g = self.body.gauge_grad(u)
        return du / r - u * np.sum(g * du, axis=-1, keepdims=True) / r**2

    def derivative(self, t, k: int = 1, h: float = 1e-3):
        """k-th derivative (k <= 4) by an 8th-order central stencil."""
        if k == 0:
            return self.point(t)
        if k == 1:
            return self.tangent(t)
        if k > 4:
            raise ValueError("derivatives available up to order 4")
        return _central_diff(self.point, t, k, h)


_STENCILS = {
    # offsets -4..4
    2: np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560]),
    3: np.array([-7 / 240, 3 / 10, -169 / 120, 61 / 30, 0.0, -61 / 30, 169 / 120, -3 / 10, 7 / 240]),
    4: np.array([7 / 240, -2 / 5, 169 / 60, -122 / 15, 91 / 8, -122 / 15, 169 / 60, -2 / 5, 7 / 240]),
}


def _central_diff(f, t, k, h):
    t = np.asarray(t, dtype=float)
    w = _STENCILS[k]
    acc = sum(wi * f(t + o * h) for wi, o in zip(w, range(-4, 5)) if wi != 0.0)
    return acc / h**k


def curve_curvature(f, t, h: float = 1e-3):
    """Planar curvature of an arbitrary parametrized curve by finite differences."""
    d1 = _central_diff_first(f, t, h)
    d2 = _central_diff(f, t, 2, h)
    cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    return np.abs(cross) / np.linalg.norm(d1, axis=-1) ** 3


def _central_diff_first(f, t, h):
    w = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    t = np.asarray(t, dtype=float)
    acc = sum(wi * f(t + o * h) for wi, o in zip(w, range(-4, 5)) if wi != 0.0)
    return acc / h


def curvature(body: Body, t) -> np.ndarray:
    """Curvature at the boundary point with parameter ``t``.

    Planar bodies use the radial angle ``t``; for balls and ellipsoids in
    d >= 3, ``t`` is a direction vector and the Gaussian curvature is returned.
    """
    if body.dim == 2:
        p = BoundaryParam(body).point(t)
    else:
        u = np.asarray(t, dtype=float)
        p = u / body.gauge(u)[..., None]
    return body.curvature_at(p)


def polar_point(body: Body, x) -> np.ndarray:
    """``x* = n / <x, n>`` for a boundary point ``x`` with outward normal ``n``."""
    n = outward_normal(body, x)
    return n / np.sum(np.asarray(x) * n, axis=-1, keepdims=True)


def flat_points(body: Body, flat_tol: float = FLAT_TOL, grid: int = 4096) -> list:
    """Boundary points of vanishing curvature, each with its fitted type."""
    if body.dim != 2:
        raise ValueError("flat point detection is planar only")
    bp = BoundaryParam(body)
    phi = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    with np.errstate(all="ignore"):
        k = np.nan_to_num(body.curvature_at(bp.point(phi)), nan=np.inf)
    step = phi[1] - phi[0]
    cands = [i for i in range(grid) if k[i] <= k[i - 1] and k[i] <= k[(i + 1) % grid]]

    def kap(f):
        with np.errstate(all="ignore"):
            return float(body.curvature_at(bp.point(np.array(f))))

    found = []
    for i in cands:
        res = optimize.minimize_scalar(
            kap, bounds=(phi[i] - step, phi[i] + step), method="bounded", options={"xatol": 1e-13}
        )
        if res.fun >= flat_tol:
            continue
        f0 = float(res.x) % (2 * np.pi)
        if any(abs(math.remainder(f0 - fp.param, 2 * np.pi)) < 2 * step for fp in found):
            continue
        m = _fit_type(body, bp, f0)
        P = bp.point(np.array(f0))
        n = outward_normal(body, P)
        v = np.array([-n[1], n[0]])
        found.append(FlatPoint(P, n, v, m, f0))
    found.sort(key=lambda fp: fp.param)
    return found


def _fit_type(body, bp, f0) -> int:
    s = np.logspace(-4, -2, 9)
    speed = float(np.linalg.norm(bp.tangent(np.array(f0))))
    dphi = s / speed
    with np.errstate(all="ignore"):
        kp = body.curvature_at(bp.point(f0 + dphi))
        km = body.curvature_at(bp.point(f0 - dphi))
    kk = 0.5 * (kp + km)
    slope = np.polyfit(np.log(s), np.log(kk), 1)[0]
    m_est = slope + 2
    m = int(round(m_est / 2) * 2)
    if abs(m_est - m) > 0.1 or m < 4:
        raise RuntimeError(f"flat point type fit did not stabilize (estimate {m_est:.3f})")
    return m


# --------------------------------------------------------------------------
# text form


def parse_body(text: str) -> Body:
    """Parse ``ball:d=3,r=1``, ``ellipsoid:a=2,b=1``,
    ``superellipse:m=4,a=1,b=1,theta=0.5,dual=1`` or ``polar:<body>``."""
    text = text.strip()
    if text.startswith("polar:"):
        return polar(parse_body(text[len("polar:"):]))
    kind, _, rest = text.partition(":")
    kv = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad body field {item!r} in {text!r}")
        kv[key.strip()] = val.strip()
    theta = float(kv.pop("theta")) if "theta" in kv else None
    try:
        if kind == "ball":
            body = Ball(int(kv.pop("d", 2)), float(kv.pop("r", 1.0)))
        elif kind == "ellipsoid":
            if "a1" in kv:
                axes = [float(kv.pop(f"a{i}")) for i in range(1, len(kv) + 1)]
            else:
                axes = [float(kv.pop(k)) for k in ("a", "b", "c") if k in kv]
            body = Ellipsoid(tuple(axes))
        elif kind == "superellipse":
            body = Superellipse2D(
                int(kv.pop("m", 4)), float(kv.pop("a", 1.0)), float(kv.pop("b", 1.0)),
                bool(int(kv.pop("dual", 0))),
            )
        else:
            raise ValueError(f"unknown body kind {kind!r}")
    except KeyError as e:
        raise ValueError(f"missing field {e} in {text!r}") from None
    if kv:
        raise ValueError(f"unknown fields {sorted(kv)} in {text!r}")
    if theta is not None:
        body = rotate(body, theta)
    return body


def format_body(body: Body) -> str:
    return body.descriptor()


def cap_depth_root(f, lo, hi):
    return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def sphere_cap_area(d: int, r: float, depth: float) -> float:
    """Surface measure of the cap of depth ``depth`` on a sphere of radius r in R^d."""
    if depth >= 2 * r:
        return 2 * math.pi ** (d / 2) / math.gamma(d / 2) * r ** (d - 1)
    th0 = math.acos(1 - depth / r)
    if d == 2:
        return 2 * r * th0
    s = 2 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2)
    # integral of sin^(d-2) via the regularized incomplete beta function
    x = math.sin(th0) ** 2
    half = 0.5 * special.beta((d - 1) / 2, 0.5) * special.betainc((d - 1) / 2, 0.5, x)
    integral = half if th0 <= math.pi / 2 else special.beta((d - 1) / 2, 0.5) - half
    return s * r ** (d - 1) * integral
