"""Lattice rest, exact windowed mean-square discrepancy, sweeps and exponent fits."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .bodies import Body, format_body
from .lattice import DEFAULT_BUDGET, GaugeEventList, count_points, gauge_events

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_REL_SPLIT = 1.0 / 8.0


def lattice_rest(body: Body, t: float, budget: int = DEFAULT_BUDGET) -> float:
    """``E(t) = N(t) - t^d vol``."""
    return count_points(body, t, budget) - body.volume() * float(t) ** body.dim


@dataclass(frozen=True)
class WindowStat:
    R: float
    h: float
    G: float
    events_used: int
    relative: bool
    integral: float


def _pieces(ev: GaugeEventList, R: float, h: float):
    """Piece starts, lengths and counts of the step function N on [R, R+h)."""
    end = R + h
    keep = ev.values < end
    vals = ev.values[keep]
    mult = ev.mult[keep]
    starts = np.concatenate([[R], vals])
    stops = np.concatenate([vals, [end]])
    counts = ev.base_count + np.concatenate([[0], np.cumsum(mult)])
    return starts, stops - starts, counts.astype(float), int(mult.sum())


def _shifted_coeffs(a: np.ndarray, N: np.ndarray, V: float, d: int) -> np.ndarray:
    """Coefficients of ``q(s) = N - V (a+s)^d`` in powers of ``s``; shape (n, d+1)."""
    q = np.empty((len(a), d + 1))
    q[:, 0] = N - V * a**d
    for i in range(1, d + 1):
        q[:, i] = -V * math.comb(d, i) * a ** (d - i)
    return q


def _abs_integrals(a, L, N, V, d):
    q = _shifted_coeffs(a, N, V, d)
    out = np.zeros(len(a))
    for i in range(d + 1):
        for j in range(d + 1):
            k = i + j + 1
            out += q[:, i] * q[:, j] * L**k / k
    return out


def _rel_integrals(a, L, N, V, d):
    if np.any(a <= 0):
        raise ValueError("relative form needs R > 0")
    # split long pieces so the rational weight is resolved by 8-point Gauss
    nsub = np.maximum(1, np.ceil(L / (a * _REL_SPLIT))).astype(np.int64)
    idx = np.repeat(np.arange(len(a)), nsub)
    j = np.arange(len(idx)) - np.repeat(np.cumsum(nsub) - nsub, nsub)
    sl = L[idx] / nsub[idx]
    sa = a[idx] + j * sl
    q = _shifted_coeffs(sa, N[idx], V, d)
    s = 0.5 * sl[:, None] * (_GL_X[None, :] + 1.0)
    poly = np.zeros_like(s)
    for i in range(d, -1, -1):
        poly = poly * s + q[:, i : i + 1]
    f = poly**2 / (V**2 * (sa[:, None] + s) ** (2 * d))
    sub = 0.5 * sl * (f @ _GL_W)
    return np.bincount(idx, weights=sub, minlength=len(a))


def msd_from_events(ev: GaugeEventList, V: float, d: int, R: float, h: float, relative: bool = False) -> WindowStat:
    """Mean square of ``E`` (or ``Delta``) over ``[R, R+h)`` from a precomputed event list."""
    if not (ev.lo <= R and R + h <= ev.hi):
        raise ValueError("event list does not cover the window")
    if ev.lo < R:
        # rebase: fold the events below R into the base count
        below = ev.values <= R
        base = ev.base_count + int(ev.mult[below].sum())
        ev = GaugeEventList(R, ev.hi, ev.values[~below], ev.mult[~below], base)
    a, L, N, used = _pieces(ev, R, h)
    parts = (_rel_integrals if relative else _abs_integrals)(a, L, N, V, d)
    total = math.fsum(parts)
    return WindowStat(float(R), float(h), math.sqrt(max(total, 0.0) / h), used, relative, total)


def window_msd(body: Body, R: float, h: float, relative: bool = False,
               budget: int = DEFAULT_BUDGET, threads: int = 1) -> WindowStat:
    """Exact ``(h^-1 int_R^{R+h} E^2)^{1/2}`` (or with ``Delta`` when ``relative``)."""
    if R < 0 or not h > 0:
        raise ValueError(f"need R >= 0 and h > 0, got R={R}, h={h}")
    if relative and R <= 0:
        raise ValueError("relative form needs R > 0")
    ev = gauge_events(body, R, R + h, budget, threads)
    return msd_from_events(ev, body.volume(), body.dim, R, h, relative)


# --------------------------------------------------------------------------
# sweeps


def bound(d: int, R):
    R = np.asarray(R, dtype=float)
    if d == 2:
        return R**-1.5
    if d == 3:
        return R**-2.0 * np.log(R)
    return R**-2.0


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    stderr: float
    ci: tuple
    residual_spread: float
    unstable: bool


def fit_loglog(x, y, unstable_tol: float = 0.25) -> Fit:
    """OLS of ``log y`` on ``log x`` with a 95% t-interval on the slope."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    n = len(lx)
    if n < 3:
        raise ValueError("need at least 3 points to fit")
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    tq = stats.t.ppf(0.975, n - 2)
    spread = float(np.max(np.abs(resid)))
    return Fit(float(res.slope), float(res.intercept), float(res.stderr),
               (float(res.slope - tq * res.stderr), float(res.slope + tq * res.stderr)),
               spread, spread > unstable_tol)


WindowRule = Union[str, float]


def window_length(rule: WindowRule, R: float) -> float:
    if rule == "full":
        return float(R)
    if rule == "short":
        return float(math.ceil(math.log(R)))
    h = float(rule)
    if not h > 0:
        raise ValueError("fixed window length must be positive")
    return h


@dataclass
class SweepTable:
    body: str
    d: int
    window_rule: str
    relative: bool
    R: np.ndarray
    h: np.ndarray
    G: np.ndarray
    normalized: np.ndarray
    events_used: np.ndarray
    fit: Optional[Fit] = None
    fit_deflated: Optional[Fit] = None

    def __post_init__(self):
        if len(self.R) == 0:
            raise ValueError("empty sweep table")
        if np.any(np.diff(self.R) <= 0):
            raise ValueError("R must be strictly increasing")

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(f"# body={self.body}, d={self.d}, window={self.window_rule}, relative={self.relative}\n")
            f.write("R,h,G,normalized,events_used\n")
            for r in zip(self.R, self.h, self.G, self.normalized, self.events_used):
                f.write(f"{float(r[0])!r},{float(r[1])!r},{r[2]:.17g},{r[3]:.17g},{int(r[4])}\n")

    def report(self) -> dict:
        out = {
            "body": self.body, "d": self.d, "window": self.window_rule, "relative": self.relative,
            "grid": [float(r) for r in self.R],
            "normalized_stat": normalized_stat(self, self.d),
        }
        if self.fit is not None:
            out.update(slope=self.fit.slope, ci=list(self.fit.ci), unstable=self.fit.unstable)
        if self.fit_deflated is not None:
            out.update(slope_deflated=self.fit_deflated.slope, ci_deflated=list(self.fit_deflated.ci))
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.report(), f, indent=2, sort_keys=True)
            f.write("\n")


def make_table(body_desc: str, d: int, R, h, G, events_used, window_rule="full", relative=True,
               unstable_tol: float = 0.25) -> SweepTable:
    R, G = np.asarray(R, float), np.asarray(G, float)
    t = SweepTable(body_desc, d, str(window_rule), relative, R, np.asarray(h, float), G,
                   G / bound(d, R), np.asarray(events_used, dtype=np.int64))
    if len(R) >= 3:
        t.fit = fit_loglog(R, G, unstable_tol)
        if d == 3:
            t.fit_deflated = fit_loglog(R, G / np.log(R), unstable_tol)
    return t


def sweep_and_fit(body: Body, R_grid: Sequence[float], window_rule: WindowRule = "full",
                  relative: bool = True, budget: int = DEFAULT_BUDGET, threads: int = 1,
                  unstable_tol: float = 0.25) -> SweepTable:
    R_grid = [float(r) for r in R_grid]
    if len(R_grid) < 4:
        raise ValueError("R grid needs at least 4 points")
    if any(b <= a for a, b in zip(R_grid, R_grid[1:])):
        raise ValueError("R grid must be increasing")
    rows = []
    for R in R_grid:
        h = window_length(window_rule, R)
        rows.append(window_msd(body, R, h, relative, budget, threads))
    return make_table(format_body(body), body.dim, R_grid, [w.h for w in rows], [w.G for w in rows],
                      [w.events_used for w in rows], window_rule, relative, unstable_tol)


def normalized_stat(table: SweepTable, d: Optional[int] = None) -> float:
    d = table.d if d is None else d
    if len(table.R) == 0:
        raise ValueError("empty table")
    return float(np.max(table.G / bound(d, table.R)))


# --------------------------------------------------------------------------
# sup statistics


def rest_ratio_profile(body: Body, lo: float, hi: float, alpha: float,
                       checkpoints: Sequence[float], budget: int = DEFAULT_BUDGET) -> list:
    """Cumulative ``sup_{lo <= t <= c} |E(t)| / t^alpha`` for each checkpoint ``c``.

    On each step of ``N`` the ratio is monotone in ``t``, so the sup is attained
    at piece endpoints (as a one-sided limit on the right).
    """
    ev = gauge_events(body, lo, hi, budget)
    V, d = body.volume(), body.dim
    a, L, N, _ = _pieces(ev, lo, hi - lo)
    b = a + L
    left = np.abs(N - V * a**d) / a**alpha
    out = []
    for c in checkpoints:
        m = a < c
        bb = np.minimum(b[m], c)
        r = np.abs(N[m] - V * bb**d) / bb**alpha
        # value at c itself, after any jump located exactly at c
        Nc = ev.base_count + int(ev.mult[ev.values <= c].sum())
        at_c = abs(Nc - V * c**d) / c**alpha
        out.append(max(float(np.max(left[m])), float(np.max(r)), at_c))
    return out
