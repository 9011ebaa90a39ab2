"""Rotation experiments for planar finite-type bodies.

``A`` is the counterclockwise rotation by ``theta`` and ``A*`` the rotation by
``-theta``.  The weights and Diophantine suprema are evaluated in the rotated
frame ``(A* n_P, A* v_P)`` applied to unrotated lattice points ``k``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bodies import Ball, Body, Ellipsoid, FlatPoint, _rot, flat_points, rotate
from .discrepancy import msd_from_events, window_length
from .lattice import DEFAULT_BUDGET, gauge_events

ZERO_TOL = 1e-12


def _type_exponent(m: int) -> float:
    return (m - 2) / (2 * (m - 1))


def theta_weight(flat: FlatPoint, xi, normal=None, tangent=None) -> float:
    """``|<v,xi>/<n,xi>|^{-(m-2)/(2(m-1))}``; ``inf`` when ``<v,xi> = 0``."""
    xi = np.asarray(xi, dtype=float)
    n = flat.normal if normal is None else normal
    v = flat.tangent if tangent is None else tangent
    dn, dv = float(np.dot(n, xi)), float(np.dot(v, xi))
    if dn == 0:
        raise ValueError("theta weight undefined for xi orthogonal to the normal")
    if dv == 0:
        return math.inf
    return abs(dv / dn) ** (-_type_exponent(flat.m))


def _strip(w: np.ndarray, K: int, ordered: bool = True) -> np.ndarray:
    """Integer points ``0 < |k| <= K`` with ``dist(k, R w) < 1``, ordered by ``|k|^2`` then lexicographically."""
    w = np.asarray(w, dtype=float) / np.linalg.norm(w)
    perp = np.array([-w[1], w[0]])
    swap = abs(w[0]) < abs(w[1])
    a, b = (w[1], w[0]) if swap else (w[0], w[1])
    x = np.arange(-K, K + 1)
    c = np.round(x * b / a).astype(np.int64)
    cand = np.concatenate([np.stack([x, c + o], axis=1) for o in (-2, -1, 0, 1, 2)])
    if swap:
        cand = cand[:, ::-1]
    n2 = np.sum(cand * cand, axis=1)
    dist = np.abs(cand @ perp)
    keep = (n2 > 0) & (n2 <= K * K) & (dist < 1)
    pts = cand[keep]
    if not ordered:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0], np.sum(pts * pts, axis=1)))
    return pts[order]


def near_normal_set(theta: float, flat: FlatPoint, K: int) -> np.ndarray:
    """``S_P(A)``: lattice points within distance 1 of the line ``R A* n_P``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    return _strip(_rot(-theta) @ flat.normal, int(K))


@dataclass(frozen=True)
class DiophantineSup:
    M_hat: float
    octaves: np.ndarray        # j with |k| in [2^j, 2^{j+1})
    profile: np.ndarray        # cumulative sup up to the end of octave j
    points: int


def _weights(k: np.ndarray, n: np.ndarray, v: np.ndarray, m: int, eps: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    r = np.linalg.norm(k, axis=1)
    dn, dv = k @ n, k @ v
    zero = np.abs(dv) <= ZERO_TOL * r
    with np.errstate(divide="ignore"):
        th = np.abs(dv / dn) ** (-_type_exponent(m))
    th = np.where(zero, np.inf, th)
    return r ** (-1 + eps) * th


def diophantine_sup(theta: float, flat: FlatPoint, eps: float, K: int) -> DiophantineSup:
    """Finite-``K`` value of ``sup |k|^{-1+eps} Theta_P(k)`` over ``S_P(A)`` with per-octave profile."""
    if not (0 < eps <= 0.5):
        raise ValueError("need 0 < eps <= 1/2")
    if K < 1:
        raise ValueError("K must be at least 1")
    A_ = _rot(-theta)
    n, v = A_ @ flat.normal, A_ @ flat.tangent
    k = _strip(n, int(K), ordered=False)
    vals = _weights(k, n, v, flat.m, eps)
    jmax = int(math.floor(math.log2(K)))
    octaves = np.arange(jmax + 1)
    oct_of = np.floor(np.log2(np.linalg.norm(k, axis=1))).astype(int)
    per = np.zeros(jmax + 1)
    np.maximum.at(per, np.minimum(oct_of, jmax), vals)
    prof = np.maximum.accumulate(per)
    M = float(vals.max()) if len(vals) else 0.0
    return DiophantineSup(M, octaves, prof, len(k))


def diophantine_condition(body: Body, theta: float, eps: float, K: int, strip: str = "normal",
                          mode: str = "sup", flats: Optional[list] = None) -> tuple:
    """Per-flat-point statistic ``|k|^{m/(m-2)-eps} |<k, A* v_P>|`` over the strip, and the max over P.

    ``strip='normal'`` takes the strip around ``R n_P``; ``'rotated'`` around ``R A* n_P``.
    ``mode='sup'`` reduces by the supremum; ``'inf'`` by the infimum (then min over P).
    """
    if strip not in ("normal", "rotated") or mode not in ("sup", "inf"):
        raise ValueError("strip must be 'normal' or 'rotated' and mode 'sup' or 'inf'")
    flats = flats if flats is not None else _flats(body)
    A_ = _rot(-theta)
    per = []
    for fp in flats:
        w = fp.normal if strip == "normal" else A_ @ fp.normal
        k = _strip(w, int(K), ordered=False).astype(float)
        r = np.linalg.norm(k, axis=1)
        s = r ** (fp.m / (fp.m - 2) - eps) * np.abs(k @ (A_ @ fp.tangent))
        s = np.where(np.abs(k @ (A_ @ fp.tangent)) <= ZERO_TOL * r, 0.0, s)
        if len(s) == 0:
            per.append(0.0)
        else:
            per.append(float(s.max() if mode == "sup" else s.min()))
    total = max(per) if mode == "sup" else min(per)
    return per, total


def _flats(body: Body) -> list:
    if isinstance(body, (Ball, Ellipsoid)) or body.dim != 2:
        raise ValueError("no flat points")
    f = flat_points(body)
    if not f:
        raise ValueError("no flat points")
    return f


@dataclass
class FlatRecord:
    m: int
    P: list
    K: int
    M_hat: float
    profile: list
    cond_stat: float


@dataclass
class RotationReport:
    theta: float
    flats: list
    cond_max: float
    G_scaled: Optional[float] = None
    max_abs_delta: Optional[float] = None
    R: Optional[float] = None

    def as_dict(self) -> dict:
        def num(x):
            return x if x is None or math.isfinite(x) else ("inf" if x > 0 else "-inf")
        return {
            "theta": self.theta, "cond_max": num(self.cond_max), "G_scaled": num(self.G_scaled),
            "max_abs_delta": self.max_abs_delta, "R": self.R,
            "flats": [{"m": f.m, "P": f.P, "K": f.K, "M_hat": num(f.M_hat),
                       "profile": [num(x) for x in f.profile], "cond_stat": num(f.cond_stat)} for f in self.flats],
        }


def short_window_summary(body: Body, R: float, rule="short", budget: int = DEFAULT_BUDGET):
    """``R^{3/2}`` times the short-window relative G, and ``max |Delta|`` over the window."""
    h = window_length(rule, R)
    ev = gauge_events(body, R, R + h, budget)
    V = body.volume()
    w = msd_from_events(ev, V, 2, R, h, relative=True)
    keep = ev.values < R + h
    t = np.concatenate([[R], ev.values[keep]])
    N = ev.base_count + np.concatenate([[0], np.cumsum(ev.mult[keep])])
    stop = np.concatenate([ev.values[keep], [R + h]])
    d1 = np.abs(N / (V * t**2) - 1)
    d2 = np.abs(N / (V * stop**2) - 1)
    return w.G * R**1.5, float(max(d1.max(), d2.max()))


def rotation_scan(body: Body, angles: Sequence[float], R: Optional[float], K: int, eps: float = 0.1,
                  strip: str = "normal", mode: str = "sup", budget: int = DEFAULT_BUDGET) -> list:
    """Per-angle Diophantine statistics and (when ``R`` is given) short-window discrepancy."""
    flats = _flats(body)
    reports = []
    for th in sorted(float(a) for a in angles):
        per, total = diophantine_condition(body, th, eps, K, strip, mode, flats)
        recs = []
        for fp, c in zip(flats, per):
            ds = diophantine_sup(th, fp, eps, K)
            recs.append(FlatRecord(fp.m, [float(x) for x in fp.P], int(K), ds.M_hat,
                                   [float(x) for x in ds.profile], c))
        rep = RotationReport(th, recs, total)
        if R is not None:
            G, md = short_window_summary(rotate(body, th), R, budget=budget)
            rep.G_scaled, rep.max_abs_delta, rep.R = G, md, float(R)
        reports.append(rep)
    return reports


def reports_to_json(reports: list, path) -> None:
    with open(path, "w") as f:
        json.dump([r.as_dict() for r in reports], f, indent=2, sort_keys=True)
        f.write("\n")


def reports_to_csv(reports: list, path, body_desc: str = "") -> None:
    with open(path, "w") as f:
        f.write(f"# body={body_desc}\n")
        f.write("theta,mP,K,M_hat,cond_stat,G_scaled\n")
        for r in reports:
            for fr in r.flats:
                g = "" if r.G_scaled is None else f"{r.G_scaled:.17g}"
                f.write(f"{r.theta!r},{fr.m},{fr.K},{fr.M_hat:.17g},{fr.cond_stat:.17g},{g}\n")


GOLDEN_ANGLE = math.atan((math.sqrt(5) - 1) / 2)
RATIONAL_ANGLE = math.atan(3 / 7)
