"""Intrinsic energy of a configuration on a centered window.

For ``C`` carried by ``Lambda_R = [-R, R]`` the intrinsic energy is the
off-diagonal logarithmic energy of ``C - dx`` restricted to the window,
expanded into a pair sum, a one-body background term and a constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import CarrierMismatch
from .pointconf import PointConfiguration, Window


def _xlogx_minus_x(u):
    u = np.asarray(u, dtype=float)
    return xlogy(u, np.abs(u)) - u


def _half_sq_log(u):
    u = np.asarray(u, dtype=float)
    return 0.5 * xlogy(u * u, np.abs(u)) - 0.75 * u * u


def segment_log_integral(t, lo: float, hi: float):
    """``int_lo^hi log|t - s| ds``, vectorised in ``t``."""
    t = np.asarray(t, dtype=float)
    return _xlogx_minus_x(t - lo) - _xlogx_minus_x(t - hi)


def rectangle_log_integral(a: Window, b: Window) -> float:
    """``int_a int_b log|x - y| dy dx`` in closed form."""
    vals = (
        _half_sq_log(a.hi - b.lo),
        -_half_sq_log(a.lo - b.lo),
        -_half_sq_log(a.hi - b.hi),
        _half_sq_log(a.lo - b.hi),
    )
    return math.fsum(float(v) for v in vals)


def pair_interaction(points) -> float:
    """Sum over unordered pairs of ``-log|x_i - x_j|``.

    Uses compensated summation; a repeated point gives ``+inf``.
    """
    z = np.asarray(points, dtype=float)
    n = z.size
    if n < 2:
        return 0.0
    iu, ju = np.triu_indices(n, k=1)
    d = np.abs(z[ju] - z[iu])
    if np.any(d == 0):
        return math.inf
    return -math.fsum(np.log(d))


def background_potential(t, R: float):
    """``V_R(t) = int_{-R}^{R} log|t - s| ds`` for ``t`` in ``[-R, R]``."""
    t = np.asarray(t, dtype=float)
    out = _xlogx_minus_x(R + t) + _xlogx_minus_x(R - t)
    return out if out.ndim else float(out)


def background_potential_second_derivative(t, R: float):
    t = np.asarray(t, dtype=float)
    return 1.0 / (R + t) + 1.0 / (R - t)


def background_const(R: float) -> float:
    """``int int_{Lambda_R^2} -log|x - y| dx dy = L^2 (3/2 - log L)`` with ``L = 2R``."""
    L = 2.0 * R
    return L * L * (1.5 - math.log(L))


@dataclass(frozen=True)
class IntrinsicEnergy:
    interaction: float
    background: float
    const: float

    @property
    def total(self) -> float:
        return 2.0 * self.interaction + 2.0 * self.background + self.const

    def as_dict(self) -> dict:
        return {
            "interaction": self.interaction,
            "background": self.background,
            "const": self.const,
            "total": self.total,
        }


def _half_length(c: PointConfiguration) -> float:
    w = c.carrier
    if w.lo != -w.hi:
        raise CarrierMismatch(f"carrier [{w.lo}, {w.hi}] is not centered")
    return w.hi


def intrinsic_energy(c: PointConfiguration) -> IntrinsicEnergy:
    """Breakdown of the intrinsic energy; ``.total`` is the energy itself."""
    R = _half_length(c)
    inter = pair_interaction(c.points)
    bg = math.fsum(np.atleast_1d(background_potential(c.points, R)))
    return IntrinsicEnergy(interaction=inter, background=bg, const=background_const(R))


def truncation_error(c: PointConfiguration, eta: float, w: Window | None = None) -> float:
    """Sum over ordered pairs in ``w`` at distance in ``(0, 2 eta)`` of ``-log|x - y|``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    z = c.points if w is None else c.points[w.contains(c.points)]
    total = []
    for i in range(z.size):
        j = i + 1
        while j < z.size and z[j] - z[i] < 2 * eta:
            d = z[j] - z[i]
            if d > 0:
                total.append(-2.0 * math.log(d))
            j += 1
    return math.fsum(total)
