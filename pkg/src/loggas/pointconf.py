"""Finite point configurations on a line, windows, gaps and discrepancies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import CarrierMismatch, MultiplePoint, NoPointRight


@dataclass(frozen=True)
class Window:
    """Closed interval ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi < self.lo:
            raise ValueError(f"invalid window [{self.lo}, {self.hi}]")

    @classmethod
    def centered(cls, R: float) -> "Window":
        return cls(-float(R), float(R))

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        return (x >= self.lo) & (x <= self.hi)

    def shift(self, u: float) -> "Window":
        return Window(self.lo + u, self.hi + u)

    def as_list(self) -> list[float]:
        return [self.lo, self.hi]


class PointConfiguration:
    """Sorted finite point set carried by a window.

    Points are stored as a read-only sorted float array. Repeated points are
    allowed at construction time; operations that need a strict ordering raise
    :class:`MultiplePoint`.
    """

    __slots__ = ("points", "carrier")

    def __init__(self, points: Sequence[float] | np.ndarray, carrier: Window):
        pts = np.sort(np.asarray(points, dtype=float).ravel())
        if pts.size and (pts[0] < carrier.lo or pts[-1] > carrier.hi):
            raise CarrierMismatch(
                f"points outside carrier [{carrier.lo}, {carrier.hi}]"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point")
        pts.setflags(write=False)
        self.points = pts
        self.carrier = carrier

    def __len__(self) -> int:
        return int(self.points.size)

    def __repr__(self) -> str:
        return f"PointConfiguration(n={len(self)}, carrier=[{self.carrier.lo}, {self.carrier.hi}])"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointConfiguration):
            return NotImplemented
        return self.carrier == other.carrier and np.array_equal(self.points, other.points)

    def count(self, w: Window) -> int:
        lo = np.searchsorted(self.points, w.lo, side="left")
        hi = np.searchsorted(self.points, w.hi, side="right")
        return int(hi - lo)

    def has_multiple_points(self) -> bool:
        return bool(np.any(np.diff(self.points) == 0.0))


def restrict(c: PointConfiguration, w: Window) -> PointConfiguration:
    """Points of ``c`` inside ``w``; the result is carried by ``w``."""
    mask = w.contains(c.points)
    return PointConfiguration(c.points[mask], w)


def translate(c: PointConfiguration, u: float) -> PointConfiguration:
    """The configuration ``c - u``: every point and the carrier move by ``-u``."""
    return PointConfiguration(c.points - u, c.carrier.shift(-u))


def discrepancy(c: PointConfiguration, w: Window) -> float:
    """Number of points in ``w`` minus the length of ``w``."""
    return c.count(w) - w.length


class GapView:
    """Gaps of a configuration, indexed from the origin or from the left.

    ``origin_index`` is the array position of the first point ``>= 0``; point
    ``x_k`` in origin indexing sits at array position ``origin_index + k``.
    """

    def __init__(self, c: PointConfiguration):
        if c.has_multiple_points():
            raise MultiplePoint("configuration has a repeated point")
        self.points = c.points
        self.origin_index = int(np.searchsorted(c.points, 0.0, side="left"))

    def x(self, k: int) -> float:
        j = self.origin_index + k
        if 0 <= j < self.points.size:
            return float(self.points[j])
        return math.inf if k >= 0 else -math.inf

    def gamma(self, k: int) -> float:
        """Origin-indexed gap ``x_{k+1} - x_k``; infinite when a point is missing."""
        j = self.origin_index + k
        if j < 0 or j + 1 >= self.points.size:
            return math.inf
        return float(self.points[j + 1] - self.points[j])

    def gammas(self, ks) -> np.ndarray:
        return np.array([self.gamma(int(k)) for k in ks])

    def left_gap(self, i: int) -> float:
        """Left-indexed gap ``z_{i+1} - z_i`` with ``z_1`` the leftmost point."""
        if not 1 <= i < self.points.size:
            raise IndexError(f"left gap index {i} out of range")
        return float(self.points[i] - self.points[i - 1])

    @property
    def left_gaps(self) -> np.ndarray:
        return np.diff(self.points)


def gaps(c: PointConfiguration) -> GapView:
    return GapView(c)


def position_after_translation(c: PointConfiguration, u: float) -> int:
    """Index ``m`` such that the first point of ``c - u`` at or right of 0 is ``x_m(c) - u``."""
    view = GapView(c)
    j = int(np.searchsorted(c.points, u, side="left"))
    if j >= c.points.size:
        raise NoPointRight(f"no point at or right of {u}")
    return j - view.origin_index


def shift_index(c: PointConfiguration) -> int:
    """Offset ``S`` with ``x_0 = z_{R+S}``, ``z`` numbered ``z_0 < z_1 < ...`` from the left.

    ``R`` is half the carrier length, so a configuration with ``R`` points on
    each side of the origin has ``S = 0``.
    """
    R = c.carrier.length / 2
    if abs(R - round(R)) > 1e-12:
        raise ValueError("carrier length must be an even integer")
    view = GapView(c)
    if view.origin_index >= c.points.size:
        raise NoPointRight("no point at or right of the origin")
    return view.origin_index - int(round(R))


def tile(R: float, i: int) -> Window:
    """Tile ``K_i = Lambda_R - 2 R i``."""
    return Window(-R - 2 * R * i, R - 2 * R * i)


def tile_index(x, R: float) -> np.ndarray:
    """Tile containing ``x``; shared endpoints go to the lower-indexed tile."""
    u = (R - np.asarray(x, dtype=float)) / (2 * R)
    i = np.ceil(u).astype(int) - 1
    return np.where(u == 0, 0, i)


def paste(copies: Sequence[PointConfiguration], R: float) -> PointConfiguration:
    """Copy ``i`` is translated onto tile ``K_i`` and the copies are merged."""
    if not copies:
        raise ValueError("need at least one copy")
    base = Window.centered(R)
    parts = []
    for i, c in enumerate(copies):
        if c.carrier != base:
            raise CarrierMismatch(f"copy {i} is not carried by Lambda_{R}")
        parts.append(c.points - 2 * R * i)
    n = len(copies)
    return PointConfiguration(np.concatenate(parts), Window(-R - 2 * R * (n - 1), R))


def average_translate_sample(c: PointConfiguration, rng: np.random.Generator) -> PointConfiguration:
    """Draw ``t`` uniform on ``[-R, R]`` and return ``c - t``.

    ``R`` is half the carrier length. The carrier is translated along with
    the points, which is the averaging step used to build stationary laws.
    """
    R = c.carrier.length / 2
    t = rng.uniform(-R, R)
    return translate(c, t)


@dataclass
class FluctuationBound:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return abs(self.lhs) <= self.rhs


def fluctuation_bound(
    g: Callable[[np.ndarray], np.ndarray],
    c: PointConfiguration,
    w: Window,
    g_sup: float | None = None,
    gprime_sup: float | None = None,
    grid: int = 4001,
) -> FluctuationBound:
    """Compare ``int g d(C - dx)`` on ``w`` with the unit-interval discrepancy bound.

    ``g`` must be vectorised. When the sup norms are not given they are read
    off a uniform grid (derivative by central differences).
    """
    a, b = w.lo, w.hi
    if g_sup is None or gprime_sup is None:
        xs = np.linspace(a, b, grid)
        vals = np.asarray(g(xs), dtype=float)
        if g_sup is None:
            g_sup = float(np.max(np.abs(vals)))
        if gprime_sup is None:
            gprime_sup = float(np.max(np.abs(np.gradient(vals, xs))))
    inside = c.points[w.contains(c.points)]
    lebesgue, _ = integrate.quad(lambda t: float(g(np.array([t]))[0]), a, b, limit=200)
    lhs = math.fsum(np.asarray(g(inside), dtype=float)) - lebesgue

    rhs = g_sup * abs(discrepancy(c, w))
    k = a
    while k < b:
        k1 = min(k + 1.0, b)
        rhs += gprime_sup * (
            abs(discrepancy(c, Window(a, k))) + abs(discrepancy(c, Window(k, k1))) + 1.0
        )
        k = k1
    return FluctuationBound(lhs=float(lhs), rhs=float(rhs))
