"""Local electric field of a configuration and its truncation.

A configuration on a window ``[lo, hi]`` of the real axis generates, in the
plane, the field of unit point charges at its points minus a uniform
neutralising background on the window::

    E(X) = sum_p -(X - p)/|X - p|^2  +  int_lo^hi (X - u)/|X - u|^2 du

so that ``-div E = 2 pi (C - dx)``. With truncation radius ``eta`` the
contribution of a charge is removed inside the disc of radius ``eta`` around
it, which is the same as smearing the charge uniformly on that circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pointconf import PointConfiguration
from .quadrature import QuadResult, integrate_1d, integrate_2d

DEFAULT_MAX_EVALS = 1_000_000
_CHUNK = 1 << 21


def truncation_kernel(r, eta: float):
    """``f_eta(r) = max(-log(r / eta), 0)``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(-np.log(r / eta), 0.0)


def background_field(x, y, lo: float, hi: float):
    """Field of a uniform negative charge on ``[lo, hi]``; zero vertical part on the axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        ex = 0.5 * (np.log((x - lo) ** 2 + y * y) - np.log((x - hi) ** 2 + y * y))
    ey = np.arctan2(y, x - hi) - np.arctan2(y, x - lo)
    ey = np.where(y == 0, 0.0, ey)
    return ex, ey


class LocalField:
    """Callable field ``(x, y) -> (Ex, Ey)`` of a configuration, optionally truncated."""

    def __init__(self, c: PointConfiguration, eta: float | None = None):
        if eta is not None and eta <= 0:
            raise ValueError("eta must be positive")
        self.config = c
        self.points = np.asarray(c.points, dtype=float)
        self.lo, self.hi = c.carrier.lo, c.carrier.hi
        self.eta = eta

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        ex, ey = background_field(x, y, self.lo, self.hi)
        n = self.points.size
        if n:
            step = max(1, _CHUNK // n)
            for s in range(0, x.size, step):
                xs, ys = x[s:s + step, None], y[s:s + step, None]
                dx = xs - self.points[None, :]
                r2 = dx * dx + ys * ys
                with np.errstate(divide="ignore", invalid="ignore"):
                    inv = 1.0 / r2
                if self.eta is not None:
                    inv = np.where(r2 < self.eta * self.eta, 0.0, inv)
                ex[s:s + step] -= np.sum(dx * inv, axis=1)
                ey[s:s + step] -= np.sum(ys * inv, axis=1)
        return ex.reshape(shape), ey.reshape(shape)

    def density(self, x, y):
        ex, ey = self(x, y)
        return ex * ex + ey * ey


def local_field(c: PointConfiguration, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    ex, ey = LocalField(c)(X[..., 0], X[..., 1])
    return np.stack([ex, ey], axis=-1)


def truncated_field(c: PointConfiguration, eta: float, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    ex, ey = LocalField(c, eta)(X[..., 0], X[..., 1])
    return np.stack([ex, ey], axis=-1)


def _segment_breaks(f: LocalField, A, B) -> list[float]:
    """Parameters in (0, 1) where the integrand along ``A -> B`` is kinked or peaked."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = B - A
    L2 = float(d @ d)
    ts = []
    centers = [(p, 0.0) for p in f.points] + [(f.lo, 0.0), (f.hi, 0.0)]
    for cx, cy in centers:
        w = np.array([cx, cy]) - A
        t0 = float(w @ d) / L2
        ts.append(t0)
        if f.eta is not None:
            dist2 = float(w @ w) - t0 * t0 * L2
            rad2 = f.eta * f.eta - dist2
            if rad2 > 0:
                h = math.sqrt(rad2 / L2)
                ts += [t0 - h, t0 + h]
    if d[1] != 0:
        ts.append(-A[1] / d[1])
    return sorted({t for t in ts if 0.0 < t < 1.0})


def flux(
    f: LocalField, A, B, tol: float = 1e-9, max_evals: int = DEFAULT_MAX_EVALS
) -> QuadResult:
    """``int E . nu ds`` along the segment ``A -> B`` with ``nu`` its right-hand normal.

    Walking a closed curve counter-clockwise, the right-hand normal is the
    outward one.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = B - A

    def integrand(t):
        ex, ey = f(A[0] + t * d[0], A[1] + t * d[1])
        return ex * d[1] - ey * d[0]

    return integrate_1d(integrand, 0.0, 1.0, _segment_breaks(f, A, B), tol=tol, max_evals=max_evals)


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def corners(self):
        return [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]


def box_flux(f: LocalField, rect: Rect, tol: float = 1e-9, max_evals: int = DEFAULT_MAX_EVALS) -> QuadResult:
    """Outward flux through the boundary of ``rect``."""
    cs = rect.corners()
    parts = [flux(f, cs[i], cs[(i + 1) % 4], tol=tol / 4, max_evals=max_evals) for i in range(4)]
    return QuadResult(
        math.fsum(p.value for p in parts),
        math.fsum(p.error for p in parts),
        sum(p.evaluations for p in parts),
    )


def line_energy(f: LocalField, A, B, tol: float = 1e-9, max_evals: int = DEFAULT_MAX_EVALS) -> QuadResult:
    """``int |E|^2 ds`` along the segment ``A -> B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = B - A
    length = float(np.hypot(*d))

    def integrand(t):
        return f.density(A[0] + t * d[0], A[1] + t * d[1]) * length

    return integrate_1d(integrand, 0.0, 1.0, _segment_breaks(f, A, B), tol=tol, max_evals=max_evals)


# --- two-dimensional energy -------------------------------------------------

def _half_line(start: float, scale: float, direction: float):
    def m(s):
        s = np.minimum(s, 1.0 - 1e-300)
        return start + direction * scale * s / (1.0 - s), scale / (1.0 - s) ** 2
    return m


def _interval(a: float, b: float):
    def m(s):
        return a + (b - a) * s, np.full_like(s, b - a)
    return m


def _axis_map(a: float, b: float, scale: float):
    if math.isinf(a) and math.isinf(b):
        raise ValueError("split doubly infinite ranges first")
    if math.isinf(b):
        return _half_line(a, scale, 1.0)
    if math.isinf(a):
        return _half_line(b, scale, -1.0)
    return _interval(a, b)


def _tensor_region(f: LocalField, xs, ys, scale: float):
    mx = _axis_map(xs[0], xs[1], scale)
    my = _axis_map(ys[0], ys[1], scale)

    def g(u, v):
        x, jx = mx(u)
        y, jy = my(v)
        return f.density(x, y) * jx * jy

    return g


def _polar_regions(f: LocalField, p: float, a: float, b: float, h: float):
    """Regions covering ``[a, b] x [0, h]`` in polar coordinates about ``(p, 0)``."""
    eta = f.eta
    regions = []
    th_r = math.atan2(h, b - p)
    th_l = math.atan2(h, a - p)
    pieces = []
    if b > p:
        pieces.append((0.0, th_r, lambda th: (b - p) / np.cos(th)))
    pieces.append((th_r, th_l, lambda th: h / np.sin(th)))
    if a < p:
        pieces.append((th_l, math.pi, lambda th: (a - p) / np.cos(th)))
    for t0, t1, rmax in pieces:
        if t1 <= t0:
            continue
        for outer in (False, True):
            def g(u, v, t0=t0, t1=t1, rmax=rmax, outer=outer):
                th = t0 + (t1 - t0) * u
                rm = rmax(th)
                rin = np.minimum(eta, rm)
                if outer:
                    r = rin + (rm - rin) * v
                    jac = (t1 - t0) * (rm - rin) * r
                else:
                    r = rin * v
                    jac = (t1 - t0) * rin * r
                return f.density(p + r * np.cos(th), r * np.sin(th)) * jac
            regions.append(g)
    return regions


def _upper_strip_regions(f: LocalField, x0: float, x1: float, y1: float, cell_height: float):
    """Regions for ``[x0, x1] x [0, y1]``; charges on the axis get polar cells."""
    pts = f.points[(f.points >= x0) & (f.points <= x1)]
    if pts.size and f.eta is None:
        raise ValueError("untruncated field energy diverges at the charges")
    scale = max(1.0, 0.5 * (x1 - x0)) if all(map(math.isfinite, (x0, x1))) else 1.0
    if not pts.size:
        return [_tensor_region(f, (x0, x1), (0.0, y1), scale)]
    h = min(y1, cell_height)
    bounds = np.concatenate([[x0], 0.5 * (pts[1:] + pts[:-1]), [x1]])
    regions = []
    for i, p in enumerate(pts):
        regions += _polar_regions(f, float(p), float(bounds[i]), float(bounds[i + 1]), h)
    if y1 > h:
        regions.append(_tensor_region(f, (x0, x1), (h, y1), scale))
    return regions


def _half_plane_regions(f: LocalField, x0: float, x1: float, y0: float, y1: float, cell_height: float):
    """Regions covering ``[x0, x1] x [y0, y1]`` with ``y0 >= 0``."""
    fin = [v for v in (x0, x1) if math.isfinite(v)]
    scale = max(1.0, 0.5 * (max(fin) - min(fin))) if len(fin) == 2 else max(1.0, f.hi - f.lo)
    if y0 > 0:
        return [_tensor_region(f, (x0, x1), (y0, y1), scale)]
    return _upper_strip_regions(f, x0, x1, y1, cell_height)


def energy_rectangle(
    f: LocalField,
    rect: Rect,
    tol: float = 1e-6,
    rtol: float = 1e-8,
    max_evals: int = DEFAULT_MAX_EVALS,
    cell_height: float = 1.0,
) -> QuadResult:
    """``int_rect |E|^2`` by adaptive cubature, using the mirror symmetry in ``y``.

    ``rect`` may have infinite vertical extent. The horizontal extent must be
    finite; use :func:`plane_energy` for the whole plane.
    """
    if not (math.isfinite(rect.x0) and math.isfinite(rect.x1)):
        raise ValueError("horizontal extent must be finite")
    # |E|^2 is even in y, so each half is an integral over the upper half-plane
    halves = []
    if rect.y1 > 0:
        halves.append((max(rect.y0, 0.0), rect.y1))
    if rect.y0 < 0:
        halves.append((max(-rect.y1, 0.0), -rect.y0))
    if not halves:
        return QuadResult(0.0, 0.0, 0)
    if len(halves) == 2 and halves[0] == halves[1]:
        r = integrate_2d(_half_plane_regions(f, rect.x0, rect.x1, *halves[0], cell_height),
                         tol=tol / 2, rtol=rtol, max_evals=max_evals)
        return QuadResult(2.0 * r.value, 2.0 * r.error, r.evaluations)
    parts = [
        integrate_2d(_half_plane_regions(f, rect.x0, rect.x1, a, b, cell_height),
                     tol=tol / len(halves), rtol=rtol, max_evals=max_evals)
        for a, b in halves
    ]
    return QuadResult(math.fsum(p.value for p in parts), math.fsum(p.error for p in parts),
                      sum(p.evaluations for p in parts))


def plane_energy(
    f: LocalField,
    tol: float = 1e-6,
    rtol: float = 1e-8,
    max_evals: int = DEFAULT_MAX_EVALS,
    cell_height: float = 1.0,
) -> QuadResult:
    """``int_{R^2} |E|^2``; infinite unless the configuration is neutral."""
    n = f.points.size
    if abs(n - (f.hi - f.lo)) > 1e-9:
        return QuadResult(math.inf, 0.0, 0)
    x0, x1 = f.lo - 1.0, f.hi + 1.0
    regions = _upper_strip_regions(f, x0, x1, math.inf, cell_height)
    regions.append(_tensor_region(f, (-math.inf, x0), (0.0, math.inf), max(1.0, f.hi - f.lo)))
    regions.append(_tensor_region(f, (x1, math.inf), (0.0, math.inf), max(1.0, f.hi - f.lo)))
    r = integrate_2d(regions, tol=tol / 2, rtol=rtol, max_evals=max_evals)
    return QuadResult(2.0 * r.value, 2.0 * r.error, r.evaluations)


def welec_eta(
    c: PointConfiguration,
    eta: float,
    tol: float = 1e-6,
    rtol: float = 1e-9,
    max_evals: int = DEFAULT_MAX_EVALS,
) -> float:
    """Electric energy of the truncated field, renormalised by ``|C| log eta``.

    The field energy is taken over the whole plane, where it is finite for
    neutral configurations (as many points as the window length).
    """
    r = plane_energy(LocalField(c, eta), tol=tol * 2 * math.pi, rtol=rtol, max_evals=max_evals)
    return r.value / (2 * math.pi) + len(c) * math.log(eta)
