"""Fourier transforms of indicator functions, cap measures, decay scans, Poisson sums.

Convention: ``f^(xi) = int f(y) exp(-i <y, xi>) dy``.  With it the Poisson
formula reads ``sum_k f(k) = sum_k f^(2 pi k)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .bodies import (Ball, Body, BoundaryParam, Ellipsoid, Rotated2D, Superellipse2D,
                     cap_depth_root, normal_point, sphere_cap_area)
from .mollifier import bump_ft, support_radius

CONV_RTOL = 1e-6
CONV_ATOL = 1e-12
_GL16 = np.polynomial.legendre.leggauss(16)
_BATCH = 64


class FourierConvergenceError(RuntimeError):
    """Two-resolution disagreement of the boundary quadrature is too large."""


class TailError(RuntimeError):
    """Certified truncation tail of the Poisson sum exceeds the tolerance."""


@dataclass(frozen=True)
class FourierSample:
    xi: tuple
    value: complex
    method: str
    error: float

    @property
    def converged(self) -> bool:
        return self.error <= CONV_RTOL * abs(self.value) + CONV_ATOL


# --------------------------------------------------------------------------
# closed forms


def _ball_ft_unit(d: int, s: np.ndarray) -> np.ndarray:
    """``chi^_{B_1}`` at radius ``s`` in R^d."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s < 1e-8
    ss = s[~small]
    out[~small] = (2 * np.pi) ** (d / 2) * ss ** (-d / 2) * special.jv(d / 2, ss)
    out[small] = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return out


def _closed_form(body: Body, xi: np.ndarray) -> np.ndarray:
    if isinstance(body, Ball):
        return body.r**body.dim * _ball_ft_unit(body.dim, body.r * np.linalg.norm(xi, axis=-1))
    a = np.asarray(body.axes, dtype=float)
    return float(np.prod(a)) * _ball_ft_unit(body.dim, np.linalg.norm(xi * a, axis=-1))


# --------------------------------------------------------------------------
# boundary quadrature for superellipses


def _panels(c: float, hmax: float, graded: bool, halve: bool) -> np.ndarray:
    """Panel breakpoints on [0, c]; geometric grading toward 0 when ``graded``."""
    n = max(1, math.ceil(c / hmax))
    br = list(np.linspace(0.0, c, n + 1))
    if graded:
        first = br[1]
        geo = [first * 0.15**j for j in range(1, 22)]
        br = sorted(set([0.0] + geo + br[1:]))
    br = np.array(br)
    if halve:
        mid = 0.5 * (br[:-1] + br[1:])
        br = np.sort(np.concatenate([br, mid]))
    return br


def _nodes(c: float, hmax: float, graded: bool, halve: bool):
    """Symmetric Gauss nodes and weights on [-c, c]."""
    br = _panels(c, hmax, graded, halve)
    x, w = _GL16
    lo, hi = br[:-1, None], br[1:, None]
    nodes = (0.5 * (hi - lo) * (x + 1) + lo).ravel()
    wts = (0.5 * (hi - lo) * w).ravel()
    return np.concatenate([-nodes[::-1], nodes]), np.concatenate([wts[::-1], wts])


def _graph(p: float, a: float, b: float, tau: np.ndarray):
    """``X(tau) = a (1 - |tau/b|^p)^{1/p}`` and its derivative."""
    z = np.abs(tau) / b
    base = 1 - z**p
    X = a * base ** (1 / p)
    dX = -a / b * np.sign(tau) * z ** (p - 1) * base ** (1 / p - 1)
    return X, dX


def _superellipse_ft(body: Superellipse2D, xi: np.ndarray, halve: bool) -> np.ndarray:
    p, a, b = body._p, body.a, body.b
    g = 2 ** (-1 / p)
    xs, ys = a * g, b * g
    r = max(a / b, b / a)
    smax = float(np.max(np.linalg.norm(xi, axis=-1)))
    hmax = 1.6 * 2 * np.pi / (max(smax, 1.0) * math.sqrt(1 + r * r))
    graded = not (float(p).is_integer() and int(p) % 2 == 0)
    ty, wy = _nodes(ys, hmax, graded, halve)
    tx, wx = _nodes(xs, hmax, graded, halve)
    X, dX = _graph(p, a, b, ty)
    Y, dY = _graph(p, b, a, tx)
    x1, x2 = xi[:, :1], xi[:, 1:]
    e = np.exp
    right = (x1 - x2 * dX) * e(-1j * (x1 * X + x2 * ty))
    left = -(x1 + x2 * dX) * e(-1j * (-x1 * X + x2 * ty))
    top = -(x1 * dY - x2) * e(-1j * (x1 * tx + x2 * Y))
    bottom = (-x1 * dY - x2) * e(-1j * (x1 * tx - x2 * Y))
    total = (right + left) @ wy + (top + bottom) @ wx
    return 1j * total / np.sum(xi * xi, axis=-1)


def indicator_ft_many(body: Body, xi) -> tuple:
    """Values, error estimates and method for an array of frequencies (rows)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[-1] != body.dim:
        raise ValueError("frequency dimension does not match the body")
    if isinstance(body, Rotated2D):
        return indicator_ft_many(body.inner, xi @ body._A)
    zero = np.linalg.norm(xi, axis=-1) < 1e-12
    vals = np.empty(len(xi), dtype=complex)
    errs = np.zeros(len(xi))
    if isinstance(body, (Ball, Ellipsoid)):
        vals[:] = _closed_form(body, xi)
        method = "closed_form"
    else:
        method = "boundary_quadrature"
        idx = np.nonzero(~zero)[0]
        # batch by magnitude so panel sizes fit each batch
        order = idx[np.argsort(np.linalg.norm(xi[idx], axis=-1), kind="stable")]
        for i in range(0, len(order), _BATCH):
            sel = order[i:i + _BATCH]
            v1 = _superellipse_ft(body, xi[sel], False)
            v2 = _superellipse_ft(body, xi[sel], True)
            vals[sel] = v2
            errs[sel] = np.abs(v2 - v1)
    vals[zero] = body.volume()
    errs[zero] = 0.0
    return vals, errs, method


def indicator_ft(body: Body, xi, strict: bool = True) -> FourierSample:
    """``chi_Omega^(xi)`` with an error estimate."""
    xi = np.asarray(xi, dtype=float)
    v, e, method = indicator_ft_many(body, xi[None, :])
    s = FourierSample(tuple(float(c) for c in xi), complex(v[0]), method, float(e[0]))
    if strict and not s.converged:
        raise FourierConvergenceError(f"boundary quadrature did not converge at xi={s.xi}: err={s.error:.3g}")
    return s


# --------------------------------------------------------------------------
# cap measure


@dataclass(frozen=True)
class CapMeasure:
    xi: tuple
    gamma_plus: float
    gamma_minus: float


def perimeter(body: Body) -> float:
    if isinstance(body, Ball) and body.dim == 2:
        return 2 * math.pi * body.r
    bp = BoundaryParam(body)
    f = lambda t: float(np.linalg.norm(bp.tangent(t)))
    return integrate.quad(f, 0, 2 * math.pi, limit=400, epsabs=1e-12, points=[math.pi / 2, math.pi, 1.5 * math.pi])[0]


def _cap_2d(body: Body, xi: np.ndarray) -> float:
    bp = BoundaryParam(body)
    nrm = float(np.linalg.norm(xi))
    u = xi / nrm
    hval = float(body.support(u))
    depth = 1.0 / nrm
    P = normal_point(body, u)
    phi0 = math.atan2(P[1], P[0])

    def g(phi):
        return hval - float(bp.point(phi) @ u) - depth

    edges = []
    for sgn in (1, -1):
        step = 1e-6
        while step < math.pi and g(phi0 + sgn * step) < 0:
            step *= 2
        if step >= math.pi:
            return perimeter(body)
        inner_end = phi0 + sgn * step / 2 if step > 1e-6 else phi0
        a, b = sorted((inner_end, phi0 + sgn * step))
        edges.append(cap_depth_root(g, a, b))
    lo, hi = edges[1], edges[0]
    f = lambda t: float(np.linalg.norm(bp.tangent(t)))
    return integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200, points=[phi0])[0]


def cap_measure(body: Body, xi) -> CapMeasure:
    """Surface measure of the two boundary caps of depth ``1/|xi|``."""
    xi = np.asarray(xi, dtype=float)
    nrm = float(np.linalg.norm(xi))
    if nrm < 1:
        raise ValueError("cap measure needs |xi| >= 1")
    if isinstance(body, Ball):
        g = sphere_cap_area(body.dim, body.r, 1.0 / nrm)
        return CapMeasure(tuple(xi.tolist()), g, g)
    if body.dim != 2:
        raise NotImplementedError("cap measure for d >= 3 is available for balls only")
    return CapMeasure(tuple(xi.tolist()), _cap_2d(body, xi), _cap_2d(body, -xi))


# --------------------------------------------------------------------------
# decay scans


def envelope(s: np.ndarray, v: np.ndarray, width: float):
    """Window maxima of ``v`` over consecutive windows of length ``width`` in ``s``."""
    s, v = np.asarray(s), np.asarray(v)
    bins = np.floor((s - s[0]) / width).astype(int)
    centers, peaks = [], []
    for b in np.unique(bins):
        m = bins == b
        if m.sum() < 2:
            continue
        j = np.argmax(v[m])
        centers.append(s[m][j])
        peaks.append(v[m][j])
    return np.array(centers), np.array(peaks)


@dataclass
class DecayScan:
    xi_norms: np.ndarray
    directions: np.ndarray
    abs_ft: np.ndarray                 # (n_dir, n_xi)
    errors: np.ndarray
    scaled: np.ndarray = field(init=False)

    def __post_init__(self):
        self.scaled = (1 + self.xi_norms) ** 1.5 * self.abs_ft

    @property
    def sup(self) -> float:
        return float(self.scaled.max())

    def profile(self) -> np.ndarray:
        """Per-direction sup of the scaled statistic."""
        return self.scaled.max(axis=1)

    def sup_upto(self, s_max: float) -> float:
        return float(self.scaled[:, self.xi_norms <= s_max].max())

    def to_csv(self, path, body_desc: str = "") -> None:
        with open(path, "w") as f:
            f.write(f"# body={body_desc}, directions={self.directions.tolist()}\n")
            f.write("xi_norm,direction_index,abs_ft,scaled\n")
            for j in range(len(self.directions)):
                for i, s in enumerate(self.xi_norms):
                    f.write(f"{float(s)!r},{j},{self.abs_ft[j, i]:.17g},{self.scaled[j, i]:.17g}\n")


def decay_scan(body: Body, xi_norms: Sequence[float], directions, strict: bool = True) -> DecayScan:
    s = np.asarray(xi_norms, dtype=float)
    if len(s) < 2 or s.max() / max(s.min(), 1e-300) < 100:
        raise ValueError("decay scan grid must cover at least two decades")
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    D = D / np.linalg.norm(D, axis=1, keepdims=True)
    A = np.empty((len(D), len(s)))
    E = np.empty_like(A)
    for j, u in enumerate(D):
        v, e, _ = indicator_ft_many(body, s[:, None] * u[None, :])
        A[j], E[j] = np.abs(v), e
    bad = E > CONV_RTOL * A + CONV_ATOL
    if strict and bad.any():
        raise FourierConvergenceError(f"{int(bad.sum())} samples did not converge")
    return DecayScan(s, D, A, E)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    centers: np.ndarray
    peaks: np.ndarray


def flat_decay_exponent(body: Body, direction, s_lo: float = 50.0, s_hi: float = 5000.0,
                        per_window: int = 48) -> DecayFit:
    """Fitted exponent of the envelope of ``|chi^(s u)|`` along one direction."""
    from .discrepancy import fit_loglog

    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    width = 2 * math.pi / float(body.support(u) + body.support(-u)) * 2
    n_win = 24
    starts = np.geomspace(s_lo, s_hi, n_win)
    s = np.concatenate([np.linspace(c, c + width, per_window) for c in starts])
    v, e, _ = indicator_ft_many(body, s[:, None] * u[None, :])
    a = np.abs(v).reshape(n_win, per_window)
    j = np.argmax(a, axis=1)
    centers = s.reshape(n_win, per_window)[np.arange(n_win), j]
    peaks = a[np.arange(n_win), j]
    fit = fit_loglog(centers, peaks)
    return DecayFit(fit.slope, centers, peaks)


# --------------------------------------------------------------------------
# Poisson summation


@lru_cache(maxsize=None)
def _zeta_table(d: int, step: float = 0.25, floor: float = 1e-15, s_cap: float = 4000.0):
    """Upper envelope of ``|zeta^|`` for the unit bump: table plus fitted tail.

    Returns ``(grid, env, a, b)`` with ``env`` a nonincreasing upper envelope
    on ``grid`` and ``exp(a - b sqrt(s))`` an upper bound beyond the grid.
    """
    chunks, grids = [], []
    s0 = 0.0
    while s0 < s_cap:
        g = np.arange(s0, s0 + 200.0, step)
        v = np.abs(bump_ft(d, g))
        grids.append(g)
        chunks.append(v)
        s0 += 200.0
        if v.max() < floor:
            break
    grid = np.concatenate(grids)
    vals = np.concatenate(chunks)
    # sampling at step 0.25 sees each oscillation peak to within ~1%; pad by 25%
    env = 1.25 * np.maximum.accumulate(vals[::-1])[::-1]
    # fit log env = a - b sqrt(s) over the upper half of the informative range
    useful = env > 10 * floor
    hi_s = grid[useful][-1]
    m = useful & (grid > 0.5 * hi_s)
    X = np.sqrt(grid[m])
    b, a = np.polyfit(X, np.log(env[m]), 1)
    b = -b
    a = float(np.max(np.log(env[m]) + b * X))
    return grid, env, a, float(b)


def zeta_envelope(d: int, s) -> np.ndarray:
    grid, env, a, b = _zeta_table(d)
    s = np.asarray(s, dtype=float)
    inside = s <= grid[-1]
    idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 1)
    out = np.where(inside, env[idx], np.exp(a - b * np.sqrt(np.maximum(s, 0))))
    return out


def _ft_bound(body: Body, s: np.ndarray) -> np.ndarray:
    """Upper bound for ``|chi^(xi)|`` valid for all ``|xi| >= s`` (nonincreasing in ``s``)."""
    s = np.asarray(s, dtype=float)
    if isinstance(body, (Ball, Ellipsoid)):
        d = body.dim
        if isinstance(body, Ball):
            scale, pre = body.r, body.r**d
        else:
            scale, pre = min(body.axes), float(np.prod(body.axes))
        x = scale * s
        nu = d / 2
        x0 = float(x.min())
        # x (J^2 + Y^2) is nonincreasing in x for nu > 1/2
        M = x0 * (special.jv(nu, x0) ** 2 + special.yv(nu, x0) ** 2)
        return pre * (2 * np.pi) ** (d / 2) * x ** (-d / 2) * np.sqrt(M / x)
    return perimeter(body) / s


@dataclass(frozen=True)
class PoissonResult:
    t: float
    eps: float
    K: int
    value: float
    imag: float
    tail_bound: float
    terms: int
    direct: Optional[float] = None

    def to_json(self, path) -> None:
        rec = {"t": self.t, "eps": self.eps, "K": self.K, "poisson": self.value,
               "direct": self.direct, "tail_bound": self.tail_bound, "imag": self.imag}
        with open(path, "w") as f:
            json.dump(rec, f, indent=2, sort_keys=True)
            f.write("\n")


def lattice_ball(d: int, K: int) -> np.ndarray:
    """Nonzero integer points with ``|k| <= K``, ordered by ``|k|^2`` then lexicographically."""
    r = np.arange(-K, K + 1)
    g = np.stack(np.meshgrid(*([r] * d), indexing="ij"), axis=-1).reshape(-1, d)
    n2 = np.sum(g * g, axis=1)
    keep = (n2 > 0) & (n2 <= K * K)
    g, n2 = g[keep], n2[keep]
    order = np.lexsort(tuple(g[:, i] for i in range(d - 1, -1, -1)) + (n2,))
    return g[order]


def poisson_tail(body: Body, t: float, eps: float, K: int) -> float:
    """Certified bound for the terms with ``|k| > K``."""
    d = body.dim
    rad = support_radius(body, eps)
    _, _, a, b = _zeta_table(d)
    # stop where the bump envelope is below 1e-60
    s_end = ((a + 140.0) / b) ** 2
    n_end = int(min(max(K + 10, s_end / (2 * np.pi * rad) + 2), K + 10_000_000))
    n = np.arange(K, n_end + 1, dtype=float)
    wd = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    c = math.sqrt(d) / 2
    count = wd * ((n + 1 + c) ** d - np.maximum(n - c, 0) ** d)
    terms = count * t**d * _ft_bound(body, 2 * np.pi * t * n) * zeta_envelope(d, 2 * np.pi * rad * n)
    return float(math.fsum(terms))


def poisson_rest(body: Body, t: float, eps: float, K: int, tail_tol: float = 1e-4,
                 strict: bool = True) -> PoissonResult:
    """Truncated Poisson sum for ``E_eps(t)`` over ``0 < |k| <= K``."""
    if not (t > 0 and eps > 0 and K >= 1):
        raise ValueError("need t > 0, eps > 0 and K >= 1")
    d = body.dim
    tail = poisson_tail(body, t, eps, K)
    if tail > tail_tol:
        # suggest a K whose certified tail fits
        K2 = K
        while poisson_tail(body, t, eps, K2) > tail_tol and K2 < 64 * K:
            K2 *= 2
        raise TailError(f"certified tail {tail:.3g} exceeds {tail_tol:.3g}; try K >= {K2}")
    k = lattice_ball(d, K)
    rad = support_radius(body, eps)
    n2 = np.sum(k * k, axis=1)
    un, inv = np.unique(n2, return_inverse=True)
    zh = bump_ft(d, 2 * np.pi * rad * np.sqrt(un))[inv]
    vals, errs, _ = indicator_ft_many(body, 2 * np.pi * t * k)
    if strict and np.any(errs > CONV_RTOL * np.abs(vals) + CONV_ATOL):
        raise FourierConvergenceError("indicator transform did not converge in Poisson sum")
    terms = t**d * vals * zh
    re = math.fsum(terms.real)
    im = math.fsum(terms.imag)
    return PoissonResult(float(t), float(eps), int(K), re, im, tail, len(k))
