"""Exact lattice-point enumeration for dilated bodies.

Points are enumerated row by row: all coordinates but the first are fixed and
the first coordinate ranges over the integer interval cut out by the body.
Row endpoints come from a float extent and are then corrected by one integer
step with the exact membership test, so every count is decided by the exact
predicate only.

Membership ``rho(k) <= t`` is exact for bodies whose gauge is a power sum
with rational coefficients (balls, ellipsoids, axis-aligned superellipses):
``rho(k)^p * D`` is an integer key compared against ``floor(t^p * D)``.
Other bodies use doubles with a relative tie band, ``body.tie_band`` when the
body defines one and ``TIE_BAND`` otherwise.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

import numpy as np

from .bodies import Body

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 2**28
TIE_BAND = 1e-12
_ROWS_PER_CHUNK = 1 << 18
_POINTS_PER_CHUNK = 1 << 22
_BINCOUNT_MAX = 1 << 25

Level = Union[float, int, Fraction]


class BudgetError(RuntimeError):
    """Raised when an enumeration would exceed the configured budget."""


@dataclass(frozen=True)
class GaugeEventList:
    """Jumps of ``N(t)`` on ``(lo, hi]``: sorted gauge values with multiplicities."""

    lo: float
    hi: float
    values: np.ndarray
    mult: np.ndarray
    base_count: int
    keys: Optional[np.ndarray] = None
    key_power: Optional[int] = None
    key_denom: Optional[int] = None
    ties: int = 0

    @property
    def total(self) -> int:
        return int(self.mult.sum())

    @property
    def top_count(self) -> int:
        return self.base_count + self.total

    def __len__(self) -> int:
        return len(self.values)

    def to_csv(self, path, body_desc: str = "") -> None:
        with open(path, "w") as f:
            f.write(f"# body={body_desc}, lo={self.lo!r}, hi={self.hi!r}, base_count={self.base_count}\n")
            f.write("rho,multiplicity\n")
            for v, m in zip(self.values, self.mult):
                f.write(f"{v:.17g},{int(m)}\n")


@dataclass(frozen=True)
class ShellCount:
    tau: float
    eps: float
    count: int


class Enumerator:
    """Row enumeration of lattice points for one body."""

    def __init__(self, body: Body, budget: int = DEFAULT_BUDGET, threads: int = 1):
        self.body = body
        self.d = body.dim
        self.budget = budget
        self.threads = max(1, int(threads))
        self.power = None
        self.denom = None
        self.coeffs = None
        self.band = float(getattr(body, "tie_band", TIE_BAND))
        pf = body.power_form()
        if pf is not None:
            p, ws = pf
            D = math.lcm(*(w.denominator for w in ws))
            self.power, self.denom = p, D
            self.coeffs = np.array([int(w * D) for w in ws], dtype=object)

    # ---- thresholds

    def _fits(self, t: float) -> bool:
        if self.power is None:
            return False
        K = self._box_half(t).max() + 2
        return sum(int(c) for c in self.coeffs) * K ** self.power < 2**62

    def exact_for(self, t: float) -> bool:
        return self._fits(t)

    def threshold(self, t: Level, strict: bool = False, exact: bool = True):
        if exact:
            x = Fraction(t) ** self.power * self.denom
            return (math.ceil(x) - 1) if strict else math.floor(x)
        t = float(t)
        return t * (1 - self.band) if strict else t * (1 + self.band)

    def key(self, pts: np.ndarray, exact: bool):
        if exact:
            c = self.coeffs.astype(np.int64)
            a = np.abs(pts)
            return np.sum(c * a**self.power, axis=-1)
        return self.body.gauge(pts)

    def key_to_gauge(self, keys: np.ndarray) -> np.ndarray:
        """Smallest doubles ``v`` with ``v^p D >= key``, so that ``N(v)`` includes the event."""
        x = keys.astype(float) / self.denom
        v = np.sqrt(x) if self.power == 2 else x ** (1.0 / self.power)
        ok = self._covers(v, keys)
        # a correctly rounded sqrt of an exact quotient is within half an ulp,
        # so a value that already covers its key cannot step down
        rounded = self.power == 2 and self.denom & (self.denom - 1) == 0 and (len(keys) == 0 or keys.max() < 2**53)
        lower = np.zeros(len(v), dtype=bool) if rounded else ok.copy()
        while not ok.all():
            v[~ok] = np.nextafter(v[~ok], np.inf)
            ok[~ok] = self._covers(v[~ok], keys[~ok])
        while lower.any():
            prev = np.nextafter(v[lower], -np.inf)
            down = self._covers(prev, keys[lower])
            idx = np.nonzero(lower)[0]
            v[idx[down]] = prev[down]
            lower[idx[~down]] = False
        return v

    def _covers(self, v: np.ndarray, keys: np.ndarray) -> np.ndarray:
        # exact test v^p * D >= key with v = M 2^e
        p, D = self.power, self.denom
        m, e = np.frexp(v)
        M = (m * 2.0**53).astype(np.int64).tolist()
        E = (e - 53).tolist()
        return np.array([(Mi**p * D << (p * ei)) >= ki if ei >= 0 else Mi**p * D >= (ki << (-p * ei))
                         for Mi, ei, ki in zip(M, E, keys.tolist())], dtype=bool)

    # ---- rows

    def _box_half(self, t: float) -> np.ndarray:
        e = np.eye(self.d)
        hp = self.body.support(e)
        hm = self.body.support(-e)
        return np.floor(float(t) * np.maximum(hp, hm)).astype(np.int64) + 1

    def row_count(self, t: float) -> int:
        half = self._box_half(t)
        return int(np.prod(2 * half[1:] + 1))

    def row_chunks(self, t: float) -> Iterator[np.ndarray]:
        """Arrays of rest coordinates (coordinates 1..d-1), last coordinate outermost."""
        half = self._box_half(t)
        if self.d == 2:
            ys = np.arange(-half[1], half[1] + 1, dtype=np.int64)
            for i in range(0, len(ys), _ROWS_PER_CHUNK):
                yield ys[i:i + _ROWS_PER_CHUNK, None]
            return
        inner = [np.arange(-h, h + 1, dtype=np.int64) for h in half[1:-1]]
        grid = np.stack(np.meshgrid(*inner, indexing="ij"), axis=-1).reshape(-1, self.d - 2)
        last = np.arange(-half[-1], half[-1] + 1, dtype=np.int64)
        per = max(1, _ROWS_PER_CHUNK // len(grid))
        for i in range(0, len(last), per):
            zs = last[i:i + per]
            rest = np.concatenate(
                [grid[None, :, :].repeat(len(zs), axis=0), np.broadcast_to(zs[:, None, None], (len(zs), len(grid), 1))],
                axis=-1,
            ).reshape(-1, self.d - 1)
            yield rest

    def row_bounds(self, rest: np.ndarray, t: Level, thr, exact: bool):
        """Integer ``[L, R]`` per row with exact endpoints (``L > R`` means empty)."""
        xl, xr = self.body.row_extent(rest, float(t))
        empty = np.isnan(xl)
        L = np.where(empty, 1, np.ceil(np.nan_to_num(xl))).astype(np.int64)
        R = np.where(empty, 0, np.floor(np.nan_to_num(xr))).astype(np.int64)

        def ins(x):
            pts = np.concatenate([x[:, None], rest], axis=1)
            return self.key(pts, exact) <= thr

        live = ~empty
        for _ in range(2):
            m = live & ins(L - 1)
            L = np.where(m, L - 1, L)
            m = live & (L <= R) & ~ins(L)
            L = np.where(m, L + 1, L)
            m = live & ins(R + 1)
            R = np.where(m, R + 1, R)
            m = live & (R >= L) & ~ins(R)
            R = np.where(m, R - 1, R)
        return L, R

    # ---- parallel map

    def _map(self, fn, chunks):
        if self.threads == 1:
            return [fn(c) for c in chunks]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, chunks))

    # ---- counting

    def count(self, t: Level, strict: bool = False) -> int:
        if t < 0:
            raise ValueError("dilation must be nonnegative")
        rows = self.row_count(float(t))
        if rows > self.budget:
            raise BudgetError(f"row count {rows} exceeds budget {self.budget}")
        exact = self.exact_for(float(t))
        thr = self.threshold(t, strict, exact)

        def work(rest):
            L, R = self.row_bounds(rest, t, thr, exact)
            return int(np.maximum(R - L + 1, 0).sum())

        return sum(self._map(work, self.row_chunks(float(t))))

    def annulus(self, lo: Level, hi: Level, lo_strict: bool = False) -> Iterator[tuple]:
        """Yield ``(points, keys, exact)`` for lattice points with lo < rho <= hi.

        With ``lo_strict`` the lower bound is inclusive (``lo <= rho``).
        Also yields nothing but accumulates ``self.last_base`` = count below.
        """
        exact = self.exact_for(float(hi))
        thr_hi = self.threshold(hi, False, exact)
        thr_lo = self.threshold(lo, lo_strict, exact) if lo >= 0 else None
        self.last_base = 0
        self.last_exact = exact
        for rest in self.row_chunks(float(hi)):
            Lh, Rh = self.row_bounds(rest, hi, thr_hi, exact)
            if thr_lo is not None and (lo > 0 or not lo_strict):
                Ll, Rl = self.row_bounds(rest, max(float(lo), 0.0), thr_lo, exact)
            else:
                Ll, Rl = np.ones_like(Lh), np.zeros_like(Rh)
            has_lo = Ll <= Rl
            self.last_base += int(np.where(has_lo, Rl - Ll + 1, 0).sum())
            # left piece [Lh, Ll-1] and right piece [Rl+1, Rh]; whole row when lo-part empty
            s1 = Lh
            e1 = np.where(has_lo, Ll - 1, Rh)
            s2 = np.where(has_lo, Rl + 1, 1)
            e2 = np.where(has_lo, Rh, 0)
            for s, e in ((s1, e1), (s2, e2)):
                n = np.maximum(e - s + 1, 0)
                tot = int(n.sum())
                if tot == 0:
                    continue
                for pts in _expand(rest, s, n):
                    yield pts, self.key(pts, exact), exact


def _expand(rest, starts, counts) -> Iterator[np.ndarray]:
    """Materialize the integer ranges row by row, in bounded chunks."""
    keep = counts > 0
    rest, starts, counts = rest[keep], starts[keep], counts[keep]
    cum = np.cumsum(counts)
    i0 = 0
    while i0 < len(counts):
        base = cum[i0 - 1] if i0 else 0
        i1 = int(np.searchsorted(cum, base + _POINTS_PER_CHUNK, side="right"))
        i1 = max(i1, i0 + 1)
        c = counts[i0:i1]
        tot = int(c.sum())
        row = np.repeat(np.arange(i0, i1), c)
        offs = np.arange(tot) - np.repeat(np.cumsum(c) - c, c)
        x = starts[row] + offs
        yield np.concatenate([x[:, None], rest[row]], axis=1)
        i0 = i1


# --------------------------------------------------------------------------
# operations


def count_points(body: Body, t: Level, budget: int = DEFAULT_BUDGET, threads: int = 1) -> int:
    """Exact ``N(t) = #{k : rho(k) <= t}`` (closed dilate)."""
    return Enumerator(body, budget, threads).count(t)


def count_points_below(body: Body, t: Level, budget: int = DEFAULT_BUDGET) -> int:
    """``#{k : rho(k) < t}``."""
    return Enumerator(body, budget).count(t, strict=True)


def estimate_points(body: Body, lo: float, hi: float) -> float:
    d = body.dim
    v = body.volume()
    # volume of the annulus plus a boundary layer of unit width
    return v * (hi**d - lo**d) + v * d * (hi + 1) ** (d - 1) * 2 * math.sqrt(d)


def gauge_events(body: Body, lo: Level, hi: Level, budget: int = DEFAULT_BUDGET, threads: int = 1) -> GaugeEventList:
    """Sorted gauge values of the lattice points with ``lo < rho <= hi``."""
    if not (0 <= lo < hi):
        raise ValueError(f"need 0 <= lo < hi, got lo={lo}, hi={hi}")
    en = Enumerator(body, budget, threads)
    exact = en.exact_for(float(hi))
    est = estimate_points(body, float(lo), float(hi))
    if exact:
        span = en.threshold(hi, False, True) - en.threshold(lo, False, True)
        est_events = min(est, span)
    else:
        est_events = est
    if est_events > budget:
        raise BudgetError(f"estimated {int(est_events)} events exceeds budget {budget}")

    if exact:
        klo = en.threshold(lo, False, True)
        khi = en.threshold(hi, False, True)
        span = khi - klo
        if span <= _BINCOUNT_MAX:
            hist = np.zeros(span, dtype=np.int64)
            for _, keys, _ in en.annulus(lo, hi):
                hist += np.bincount(keys - klo - 1, minlength=span)
            idx = np.nonzero(hist)[0]
            keys = idx.astype(np.int64) + klo + 1
            mult = hist[idx]
        else:
            parts = [np.unique(k, return_counts=True) for _, k, _ in en.annulus(lo, hi)]
            keys, mult = _merge_counts(parts)
        values = en.key_to_gauge(keys)
        # rounding of the float image must not leave the window
        values = np.clip(values, float(lo), float(hi))
        return GaugeEventList(float(lo), float(hi), values, mult, en.last_base, keys, en.power, en.denom, 0)

    vals = [k for _, k, _ in en.annulus(lo, hi)]
    allv = np.concatenate(vals) if vals else np.zeros(0)
    ties = int(np.sum(np.abs(allv - float(hi)) <= en.band * float(hi)))
    ties += int(np.sum(np.abs(allv - float(lo)) <= en.band * float(lo)))
    values, mult = np.unique(allv, return_counts=True)
    values = np.clip(values, float(lo), float(hi))
    return GaugeEventList(float(lo), float(hi), values, mult.astype(np.int64), en.last_base, None, None, None, ties)


def _merge_counts(parts):
    if not parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    k = np.concatenate([p[0] for p in parts])
    c = np.concatenate([p[1] for p in parts])
    order = np.argsort(k, kind="stable")
    k, c = k[order], c[order]
    uk, start = np.unique(k, return_index=True)
    return uk, np.add.reduceat(c, start)


def annulus_points(body: Body, lo: Level, hi: Level, budget: int = DEFAULT_BUDGET):
    """All lattice points with ``lo < rho <= hi`` as ``(points, gauges)``, in row order."""
    en = Enumerator(body, budget)
    pts = [p for p, _, _ in en.annulus(lo, hi)]
    if not pts:
        return np.zeros((0, body.dim), dtype=np.int64), np.zeros(0)
    P = np.concatenate(pts)
    return P, body.gauge(P)


def shell_count(body: Body, tau: float, eps: float, budget: int = DEFAULT_BUDGET) -> ShellCount:
    """``#{k : tau - eps <= rho(k) <= tau + eps}`` with both endpoints exact."""
    if not (eps > 0 and tau >= eps):
        raise ValueError(f"need tau >= eps > 0, got tau={tau}, eps={eps}")
    en = Enumerator(body, budget)
    hi = Fraction(tau) + Fraction(eps)
    lo = Fraction(tau) - Fraction(eps)
    n = en.count(hi) - en.count(lo, strict=True)
    return ShellCount(float(tau), float(eps), n)
