"""Smooth bump, mollified counts ``N_eps`` and the sandwich / shell diagnostics.

The bump ``zeta_eps`` is supported in the ball of radius ``eps * min(1, r_in)``
where ``r_in`` is the inradius of the body; for bodies containing the unit ball
this is the plain radius ``eps``.  The scaling makes ``rho(y) <= eps`` on the
support, which is what the sandwich ``N_eps(t-eps) <= N(t) <= N_eps(t+eps)``
needs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .bodies import Body
from .lattice import DEFAULT_BUDGET, Enumerator, shell_count

QUAD_TOL = 1e-9
_LEVELS_2D = (24, 48, 96, 192)
_LEVELS_3D = (12, 24, 48, 96)
_BATCH_CELLS = 1 << 22


class QuadratureError(RuntimeError):
    """Per-point quadrature did not reach the requested tolerance."""


def _profile(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    m = r < 1
    out[m] = np.exp(-1.0 / (1.0 - r[m] ** 2))
    return out


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@lru_cache(maxsize=None)
def bump_norm(d: int) -> float:
    """``c_d`` with ``c_d * int exp(-1/(1-|x|^2)) dx = 1`` over the unit ball."""
    val, _ = integrate.quad(lambda r: math.exp(-1 / (1 - r * r)) * r ** (d - 1), 0, 1,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return 1.0 / (sphere_area(d) * val)


@dataclass(frozen=True)
class Bump:
    eps: float
    d: int = 2

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("bump radius must be positive")
        if self.d < 1:
            raise ValueError("dimension must be positive")

    def radial(self, r) -> np.ndarray:
        return bump_norm(self.d) * self.eps ** (-self.d) * _profile(np.asarray(r) / self.eps)

    def ft(self, s, n: Optional[int] = None) -> np.ndarray:
        """Radial Fourier transform ``zeta_eps^(xi)`` at ``|xi| = s``."""
        return bump_ft(self.d, self.eps * np.asarray(s, dtype=float), n)


def bump_value(bump: Bump, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return bump.radial(np.linalg.norm(x, axis=-1))


def bump_ft(d: int, s, n: Optional[int] = None) -> np.ndarray:
    """Fourier transform of the unit bump at radius ``s`` by Gauss-Legendre in ``r``.

    ``zeta^(s) = c_d (2 pi)^{d/2} s^{1-d/2} int_0^1 zeta0(r) J_{d/2-1}(r s) r^{d/2} dr``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    smax = float(np.max(np.abs(s))) if s.size else 0.0
    n = n or max(400, int(1.5 * smax) + 400)
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * (x + 1)
    w = 0.5 * w
    prof = _profile(r)
    nu = d / 2 - 1
    c = bump_norm(d) * (2 * np.pi) ** (d / 2)
    out = np.empty_like(s)
    small = s < 1e-8
    ss = s[~small]
    J = special.jv(nu, np.outer(ss, r))
    out[~small] = c * ss ** (-nu) * (J @ (prof * r ** (d / 2) * w))
    out[small] = 1.0
    return out


def support_radius(body: Body, eps: float) -> float:
    return eps * min(1.0, body.inradius())


# --------------------------------------------------------------------------
# per-point quadrature


def _frame(k: np.ndarray):
    """Unit vector ``u = k/|k|`` and an orthonormal complement, per row."""
    n = np.linalg.norm(k, axis=1)
    u = np.where(n[:, None] > 0, k / np.where(n > 0, n, 1)[:, None], np.eye(k.shape[1])[0])
    if k.shape[1] == 2:
        return u, [np.stack([-u[:, 1], u[:, 0]], axis=1)]
    # d = 3: complete with Gram-Schmidt against the least aligned axis
    ax = np.eye(3)[np.argmin(np.abs(u), axis=1)]
    t1 = ax - np.sum(ax * u, axis=1)[:, None] * u
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(u, t1)
    return u, [t1, t2]


def _chord(body: Body, base: np.ndarray, u: np.ndarray, W: np.ndarray, t: float):
    """``[alpha, beta]`` with ``rho(base - w u) <= t`` for ``|w| <= W`` (empty -> alpha > beta)."""
    def f(w):
        return body.gauge(base - w[..., None] * u) - t

    # f is convex in w: golden-section search for the minimizer
    gr = (math.sqrt(5) - 1) / 2
    a, b = -W, W.copy()
    for _ in range(64):
        c, dd = b - gr * (b - a), a + gr * (b - a)
        left = f(c) < f(dd)
        a, b = np.where(left, a, c), np.where(left, dd, b)
    wm = 0.5 * (a + b)
    fm = f(wm)
    hit = fm <= 0

    def root(lo, hi, sign_lo_pos):
        for _ in range(56):
            mid = 0.5 * (lo + hi)
            pos = f(mid) > 0
            move_lo = pos if sign_lo_pos else ~pos
            lo = np.where(move_lo, mid, lo)
            hi = np.where(move_lo, hi, mid)
        return 0.5 * (lo + hi)

    fa, fb = f(-W), f(W)
    alpha = np.where(fa <= 0, -W, root(-W, wm, True))
    beta = np.where(fb <= 0, W, root(wm, W, False))
    alpha = np.where(hit, alpha, 1.0)
    beta = np.where(hit, beta, 0.0)
    return alpha, beta


def _contrib_2d(body, k, t, bump, rad, n):
    x, wgt = np.polynomial.legendre.leggauss(n)
    u, (tau,) = _frame(k)
    s = rad * x                                      # outer nodes, shared by all points
    W = np.sqrt(np.maximum(rad**2 - s**2, 0.0))
    P, S = len(k), len(s)
    base = k[:, None, :] - s[None, :, None] * tau[:, None, :]
    Wg = np.broadcast_to(W, (P, S))
    uu = np.broadcast_to(u[:, None, :], (P, S, 2))
    al, be = _chord(body, base, uu, Wg, t)
    L = np.maximum(be - al, 0.0)
    w = al[..., None] + 0.5 * L[..., None] * (x + 1)
    r = np.sqrt(s[None, :, None] ** 2 + w**2)
    inner = 0.5 * L * (bump.radial(r) @ wgt)
    return rad * (inner @ wgt)


def _contrib_3d(body, k, t, bump, rad, n):
    x, wgt = np.polynomial.legendre.leggauss(n)
    u, (t1, t2) = _frame(k)
    rr = 0.5 * rad * (x + 1)
    wr = 0.5 * rad * wgt * rr
    phi = 2 * np.pi * np.arange(n) / n
    R, PH = np.meshgrid(rr, phi, indexing="ij")
    WR = np.repeat(wr, n) * (2 * np.pi / n)
    s1, s2 = (R * np.cos(PH)).ravel(), (R * np.sin(PH)).ravel()
    W = np.sqrt(np.maximum(rad**2 - s1**2 - s2**2, 0.0))
    P, S = len(k), len(s1)
    base = k[:, None, :] - s1[None, :, None] * t1[:, None, :] - s2[None, :, None] * t2[:, None, :]
    uu = np.broadcast_to(u[:, None, :], (P, S, 3))
    al, be = _chord(body, base, uu, np.broadcast_to(W, (P, S)), t)
    L = np.maximum(be - al, 0.0)
    w = al[..., None] + 0.5 * L[..., None] * (x + 1)
    r = np.sqrt((s1**2 + s2**2)[None, :, None] + w**2)
    inner = 0.5 * L * (bump.radial(r) @ wgt)
    return inner @ WR


def point_contributions(body: Body, k, t: float, eps: float, tol: float = QUAD_TOL):
    """``(chi_{t Omega} * zeta_eps)(k)`` for each row of ``k``, with refinement to ``tol``."""
    k = np.atleast_2d(np.asarray(k, dtype=float))
    d = body.dim
    if d not in (2, 3):
        raise NotImplementedError("mollified quadrature is implemented for d = 2, 3")
    rad = support_radius(body, eps)
    bump = Bump(rad, d)
    fn, levels = (_contrib_2d, _LEVELS_2D) if d == 2 else (_contrib_3d, _LEVELS_3D)
    out = np.empty(len(k))
    todo = np.arange(len(k))
    prev = None
    for n in levels:
        if len(todo) == 0:
            break
        cells = n ** (d) if d == 3 else n * n
        step = max(1, _BATCH_CELLS // cells)
        cur = np.concatenate([fn(body, k[todo[i:i + step]], float(t), bump, rad, n)
                              for i in range(0, len(todo), step)])
        if prev is not None:
            ok = np.abs(cur - prev) < tol
            out[todo[ok]] = cur[ok]
            todo, cur = todo[~ok], cur[~ok]
        prev = cur
    if len(todo):
        raise QuadratureError(f"quadrature did not converge at points {k[todo].tolist()}")
    return np.clip(out, 0.0, 1.0)


def mollified_count(body: Body, t: float, eps: float, tol: float = QUAD_TOL,
                    budget: int = DEFAULT_BUDGET) -> float:
    """``N_eps(t) = sum_k (chi_{t Omega} * zeta_eps)(k)``."""
    if t < 0 or not eps > 0:
        raise ValueError(f"need t >= 0 and eps > 0, got t={t}, eps={eps}")
    if eps >= t:
        raise ValueError(f"need eps < t, got eps={eps}, t={t}")
    rad = support_radius(body, eps)
    margin = Fraction(rad) / Fraction(body.inradius())
    en = Enumerator(body, budget)
    lo, hi = Fraction(t) - margin, Fraction(t) + margin
    inside = en.count(lo)
    band = [p for p, _, _ in en.annulus(lo, hi)]
    if not band:
        return float(inside)
    pts = np.concatenate(band)
    c = point_contributions(body, pts, float(t), eps, tol)
    return inside + math.fsum(c)


def mollified_rest(body: Body, t: float, eps: float, tol: float = QUAD_TOL,
                   budget: int = DEFAULT_BUDGET) -> float:
    return mollified_count(body, t, eps, tol, budget) - body.volume() * float(t) ** body.dim


# --------------------------------------------------------------------------
# diagnostics


@dataclass
class SandwichReport:
    checked: int
    violations: list
    C: float
    rows: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def sandwich_check(body: Body, grid: Sequence[tuple], tol: float = QUAD_TOL) -> SandwichReport:
    """Check ``N_eps(t-eps) <= N(t) <= N_eps(t+eps)`` on ``(t, eps)`` pairs."""
    from .lattice import count_points

    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    V, d = body.volume(), body.dim
    bad, C, rows = [], 0.0, []
    for t, eps in grid:
        if not (0 < eps < t - eps):
            raise ValueError(f"need 0 < eps < t - eps, got t={t}, eps={eps}")
        # exact rational t -/+ eps so the inner threshold lands on t itself
        tq, eq = Fraction(t), Fraction(eps)
        lo = mollified_count(body, tq - eq, eps, tol)
        hi = mollified_count(body, tq + eq, eps, tol)
        n = count_points(body, t)
        if not (lo <= n <= hi):
            bad.append((t, eps, lo, n, hi))
        E = n - V * t**d
        Elo = lo - V * (t - eps) ** d
        Ehi = hi - V * (t + eps) ** d
        scale = t ** (d - 1) * eps
        C = max(C, (abs(Elo) - abs(E)) / scale, (abs(E) - abs(Ehi)) / scale)
        rows.append((t, eps, lo, n, hi))
    return SandwichReport(len(grid), bad, max(C, 0.0), rows)


@dataclass
class ShellDiag:
    tau: float
    eps: float
    eps_check: float
    delta0: float
    S: int
    c0_hat: Optional[float]
    min_deriv: float
    lemma16_lhs: int
    lemma16_rhs_parts: tuple
    vacuous: bool

    def to_json(self, path) -> None:
        rec = {
            "tau": self.tau, "eps": self.eps, "S": self.S, "c0_hat": self.c0_hat,
            "lemma16_lhs": self.lemma16_lhs, "lemma16_rhs_parts": list(self.lemma16_rhs_parts),
            "eps_check": self.eps_check, "delta0": self.delta0, "vacuous": self.vacuous,
        }
        with open(path, "w") as f:
            json.dump(rec, f, indent=2, sort_keys=True)
            f.write("\n")


def shell_bound_diag(body: Body, tau: float, eps: float, n_grid: int = 9, n_gauss: int = 8,
                     tol: float = QUAD_TOL) -> ShellDiag:
    """Empirical constants for the shell-count bound at one ``(tau, eps)``."""
    if tau < 1 or not (0 < eps < 1):
        raise ValueError(f"need tau >= 1 and 0 < eps < 1, got tau={tau}, eps={eps}")
    delta0 = body.inradius() / 2
    ec = 4 * eps / delta0
    S = shell_count(body, tau, eps).count
    fd = eps / 16

    def deriv(t):
        return (mollified_count(body, t + fd, ec, tol) - mollified_count(body, t - fd, ec, tol)) / (2 * fd)

    ts = tau + eps * np.linspace(-1, 1, n_grid)
    der = np.array([deriv(t) for t in ts])
    mn = float(der.min())
    c0 = mn * eps / S if S > 0 else None
    # integral over [tau - eps/2, tau + eps/2] of E^2 N'
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    tq = tau + 0.5 * eps * x
    V, d = body.volume(), body.dim
    vals = []
    for t in tq:
        E = mollified_count(body, t, ec, tol) - V * t**d
        vals.append(E * E * deriv(t))
    integral = 0.5 * eps * float(np.dot(w, vals))
    parts = (tau ** (d - 1) * eps, max(integral, 0.0) ** (1 / 3))
    return ShellDiag(float(tau), float(eps), ec, delta0, S, c0, mn, S, parts, S == 0)
