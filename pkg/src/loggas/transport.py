"""Labelled tuples, optimal couplings and displacement interpolation.

A configuration with ``2R`` points on ``Lambda_R`` is labelled by sorting.
Interpolating two labelled tuples coordinatewise stays sorted, and the
intrinsic energy of the midpoint beats the average of the endpoints by a
quantitative margin built from the change in consecutive gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln

from .energy import background_potential, intrinsic_energy
from .errors import CarrierMismatch, CouplingError
from .pointconf import PointConfiguration, Window, discrepancy


@dataclass(frozen=True)
class LabeledTuple:
    values: np.ndarray
    R: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if np.any(np.diff(v) < 0):
            raise ValueError("labelled tuple must be non-decreasing")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def label(c: PointConfiguration) -> LabeledTuple:
    R = c.carrier.hi
    if c.carrier.lo != -R:
        raise CarrierMismatch("carrier must be a centered window")
    if abs(len(c) - 2 * R) > 1e-9:
        raise CarrierMismatch(f"expected {2 * R:g} points, got {len(c)}")
    return LabeledTuple(np.array(c.points), R)


def unlabel(x: LabeledTuple) -> PointConfiguration:
    return PointConfiguration(x.values, Window.centered(x.R))


def assignment_coupling(batch0: np.ndarray, batch1: np.ndarray) -> np.ndarray:
    """Permutation ``perm`` minimising ``sum_i |batch0[i] - batch1[perm[i]]|^2``.

    Rows are labelled tuples of equal length.
    """
    a = np.asarray(batch0, dtype=float)
    b = np.asarray(batch1, dtype=float)
    if a.ndim != 2 or a.shape != b.shape:
        raise CouplingError(f"batches must share a (m, n) shape, got {a.shape} and {b.shape}")
    cost = (
        np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    )
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(a.shape[0], dtype=int)
    perm[rows] = cols
    return perm


def coupling_cost(batch0: np.ndarray, batch1: np.ndarray, perm: Sequence[int]) -> float:
    a = np.asarray(batch0, dtype=float)
    b = np.asarray(batch1, dtype=float)[np.asarray(perm)]
    return float(np.sum((a - b) ** 2))


def interpolate(x0: LabeledTuple, x1: LabeledTuple, t: float) -> LabeledTuple:
    """Coordinatewise ``(1 - t) x0 + t x1``; ``t = 1/2`` is evaluated as an exact midpoint."""
    if x0.R != x1.R or len(x0) != len(x1):
        raise CouplingError("tuples must live on the same window with equal length")
    if t == 0.5:
        v = 0.5 * (x0.values + x1.values)
    else:
        v = (1.0 - t) * x0.values + t * x1.values
    return LabeledTuple(v, x0.R)


def gain(x0: LabeledTuple, x1: LabeledTuple) -> float:
    """``sum_i (G0_i - G1_i)^2 / (G0_i^2 + G1_i^2)`` over consecutive gaps."""
    g0 = np.diff(x0.values)
    g1 = np.diff(x1.values)
    den = g0 * g0 + g1 * g1
    if np.any(den == 0):
        raise CouplingError("both tuples have a repeated point at the same label")
    return math.fsum((g0 - g1) ** 2 / den)


def boundary_term(x0: LabeledTuple, x1: LabeledTuple) -> float:
    """``2 sum_i (V_R(zh_i) - (V_R(z0_i) + V_R(z1_i)) / 2)``; never positive since ``V_R`` is convex."""
    R = x0.R
    zh = 0.5 * (x0.values + x1.values)
    d = background_potential(zh, R) - 0.5 * (background_potential(x0.values, R) + background_potential(x1.values, R))
    return 2.0 * math.fsum(np.atleast_1d(d))


def _pair_midpoint_excess(x0: LabeledTuple, x1: LabeledTuple) -> float:
    """``sum_{i<j} -log(dh) + (log d0 + log d1)/2``, each term ``-log(AM/GM) <= 0``."""
    n = len(x0)
    iu, ju = np.triu_indices(n, k=1)
    d0 = x0.values[ju] - x0.values[iu]
    d1 = x1.values[ju] - x1.values[iu]
    am = 0.5 * (d0 + d1)
    gm = np.sqrt(d0) * np.sqrt(d1)
    return -math.fsum(np.log(am / gm))


@dataclass
class ConvexityCertificate:
    lhs: float
    rhs_mean: float
    gain: float
    boundary: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.slack >= -1e-9

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs_mean": self.rhs_mean,
            "gain": self.gain,
            "boundary": self.boundary,
            "slack": self.slack,
            "holds": self.holds,
        }


def convexity_certificate(x0: LabeledTuple, x1: LabeledTuple) -> ConvexityCertificate:
    """Check ``W(x_half) <= (W(x0) + W(x1))/2 - gain/4``.

    ``slack`` is evaluated from the exact decomposition of the difference
    (pair terms plus the background term), which avoids cancelling the large
    constants carried by each energy.
    """
    xh = interpolate(x0, x1, 0.5)
    w0 = intrinsic_energy(unlabel(x0)).total
    w1 = intrinsic_energy(unlabel(x1)).total
    wh = intrinsic_energy(unlabel(xh)).total
    g = gain(x0, x1)
    bf = boundary_term(x0, x1)
    slack = -2.0 * _pair_midpoint_excess(x0, x1) - bf - 0.25 * g
    return ConvexityCertificate(lhs=wh, rhs_mean=0.5 * (w0 + w1), gain=g, boundary=bf, slack=slack)


def scalar_convexity_margin(x, y):
    """``(-log x - log y)/2 - (x-y)^2/(8(x^2+y^2)) + log((x+y)/2)``; non-negative for ``x, y > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * (-np.log(x) - np.log(y)) - (x - y) ** 2 / (8.0 * (x * x + y * y)) + np.log(0.5 * (x + y))


def interpolation_sandwich(x0: LabeledTuple, x1: LabeledTuple, t: float = 0.5) -> float:
    """Largest ``|Discr_[-R,r](x_t)| - max(|Discr(x0)|, |Discr(x1)|)`` over integers ``r``.

    Non-positive whenever the sandwich holds.
    """
    R = x0.R
    c0, c1 = unlabel(x0), unlabel(x1)
    ch = unlabel(interpolate(x0, x1, t))
    worst = -math.inf
    for r in range(int(math.ceil(-R)), int(math.floor(R)) + 1):
        w = Window(-R, r)
        d0, d1, dh = (abs(discrepancy(c, w)) for c in (c0, c1, ch))
        worst = max(worst, dh - max(d0, d1))
    return worst


# --- entropy bookkeeping ----------------------------------------------------

def gaussian_neg_entropy(sigma):
    """Negative differential entropy of a centered Gaussian of scale ``sigma``."""
    return -np.log(sigma) - 0.5 * math.log(2 * math.pi * math.e)


def gaussian_entropy_toy(sigma0: float, sigma1: float, ts) -> list[tuple[float, float]]:
    """Negative entropy along the displacement interpolation ``sigma_t = (1-t) sigma0 + t sigma1``."""
    ts = np.asarray(ts, dtype=float)
    sig = (1.0 - ts) * sigma0 + ts * sigma1
    return list(zip(ts.tolist(), np.atleast_1d(gaussian_neg_entropy(sig)).tolist()))


def poisson_orthant_offset(R: float) -> float:
    """``-log P(Poisson(2R) = 2R)``: entropy relative to Poisson minus entropy of the labelled law."""
    n = 2.0 * R
    return n + gammaln(n + 1) - n * math.log(n)


def _multiplicity_log_factor(cell: Sequence[int]) -> float:
    _, counts = np.unique(np.asarray(cell), return_counts=True)
    return float(np.sum(gammaln(counts + 1)))


def histogram_entropies(probs: Mapping[tuple, float], R: float, bins: int) -> tuple[float, float]:
    """Relative entropies of a histogram law on ``2R``-point configurations.

    ``probs`` maps sorted bin-index tuples to probabilities. Returns the
    entropy relative to the Poisson process and the entropy of the sorted law
    relative to normalised Lebesgue measure on the orthant.
    """
    n = int(round(2 * R))
    L = 2.0 * R
    a = L / bins
    log_pn = -poisson_orthant_offset(R)
    ent_poisson, ent_orthant = [], []
    for cell, p in probs.items():
        if p <= 0:
            continue
        if len(cell) != n:
            raise ValueError("cells must list 2R bin indices")
        lm = _multiplicity_log_factor(cell)
        # sorted-tuple volume of the cell is a^n / prod m_b!
        log_orthant = n * math.log(a) - lm - (n * math.log(L) - gammaln(n + 1))
        log_poisson = log_pn + gammaln(n + 1) - lm + n * math.log(a / L)
        ent_poisson.append(p * (math.log(p) - log_poisson))
        ent_orthant.append(p * (math.log(p) - log_orthant))
    return math.fsum(ent_poisson), math.fsum(ent_orthant)
