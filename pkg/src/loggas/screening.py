"""Screening: rebuild a configuration near the window boundary.

Points in the inner window ``Old = Lambda_{R(1-s)}`` are kept. The layer
``New = Lambda_R \\ Old`` is refilled with almost evenly spaced points whose
local densities are chosen from the electric flux leaving
``Old x [-l, l]``, so that the result has exactly ``2R`` points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .errors import DegenerateInterval, PreconditionViolated
from .field import LocalField, Rect, energy_rectangle, flux, line_energy, plane_energy
from .pointconf import PointConfiguration, Window


@dataclass(frozen=True)
class ScreeningParams:
    R: float
    s: float
    eta: float = constants.SCREENING_ETA
    M: float = math.inf
    e_max: float = 1.0

    def __post_init__(self):
        if not 0 < self.s < 0.25:
            raise ValueError("s must lie in (0, 1/4)")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.R <= 0:
            raise ValueError("R must be positive")

    @property
    def inner(self) -> float:
        return self.R * (1.0 - self.s)

    @property
    def layer(self) -> float:
        return self.R * self.s


@dataclass
class PreconditionReport:
    m_scr: float
    e_scr: float
    clearance: float
    energy_ok: bool
    decay_ok: bool
    clearance_ok: bool

    @property
    def passes(self) -> bool:
        return self.energy_ok and self.decay_ok and self.clearance_ok

    def as_dict(self) -> dict:
        return {
            "m_scr": self.m_scr,
            "e_scr": self.e_scr,
            "clearance": self.clearance,
            "energy_ok": self.energy_ok,
            "decay_ok": self.decay_ok,
            "clearance_ok": self.clearance_ok,
            "passes": self.passes,
        }


def _check_carrier(c: PointConfiguration, R: float):
    if c.carrier != Window.centered(R):
        raise PreconditionViolated(f"configuration must be carried by Lambda_{R:g}")


def boundary_energy(c: PointConfiguration, R: float, s: float, eta: float, tol: float = 1e-7) -> float:
    """Energy of the truncated field on the two vertical segments ``{+-R(1-s)} x [-R, R]``."""
    f = LocalField(c, eta)
    Rp = R * (1.0 - s)
    return math.fsum(
        line_energy(f, (x, -R), (x, R), tol=tol).value for x in (-Rp, Rp)
    )


def vertical_decay(c: PointConfiguration, R: float, s: float, tol: float = 1e-7) -> float:
    """``(s^4 R)^{-1} int |E|^2`` over ``Lambda_R`` away from the strip ``|y| < s^2 R / 2``."""
    f = LocalField(c)
    h = 0.5 * s * s * R
    r = energy_rectangle(f, Rect(-R, R, h, math.inf), tol=tol, rtol=1e-6)
    return 2.0 * r.value / (s ** 4 * R)


def clearance(c: PointConfiguration, R: float, s: float) -> float:
    Rp = R * (1.0 - s)
    if not len(c):
        return math.inf
    return float(min(np.min(np.abs(c.points - Rp)), np.min(np.abs(c.points + Rp))))


def check_preconditions(c: PointConfiguration, p: ScreeningParams, tol: float = 1e-7) -> PreconditionReport:
    _check_carrier(c, p.R)
    m = boundary_energy(c, p.R, p.s, p.eta, tol)
    e = vertical_decay(c, p.R, p.s, tol)
    cl = clearance(c, p.R, p.s)
    return PreconditionReport(
        m_scr=m,
        e_scr=e,
        clearance=cl,
        energy_ok=m <= p.M,
        decay_ok=e <= p.e_max,
        clearance_ok=cl >= 2 * p.eta,
    )


def line_energy_at(c: PointConfiguration, R: float, ell: float, tol: float = 1e-7) -> float:
    """``int |E|^2`` over ``[-R, R] x {-ell, ell}``."""
    return 2.0 * line_energy(LocalField(c), (-R, ell), (R, ell), tol=tol).value


def choose_ell(c: PointConfiguration, p: ScreeningParams, tol: float = 1e-7, grid: int = constants.ELL_GRID):
    """Cut height in ``[s^2 R, 2 s^2 R]`` with the least line energy on a uniform grid."""
    a = p.s * p.s * p.R
    ells = np.linspace(a, 2 * a, grid)
    energies = np.array([line_energy_at(c, p.R, float(e), tol) for e in ells])
    j = int(np.argmin(energies))
    return float(ells[j]), float(energies[j])


@dataclass
class Layer:
    """Split of the boundary layer into intervals with their densities."""

    ell: float
    u0: float
    flux_left: float
    flux_right: float
    left: np.ndarray          # interval edges from -R to -R'
    right: np.ndarray         # interval edges from R' to R
    m_left: np.ndarray
    m_right: np.ndarray
    n_inner: int

    @property
    def mass_left(self) -> float:
        return float(np.sum(self.m_left * np.diff(self.left)))

    @property
    def mass_right(self) -> float:
        return float(np.sum(self.m_right * np.diff(self.right)))


def compute_densities(c: PointConfiguration, p: ScreeningParams, ell: float, tol: float = 1e-9) -> Layer:
    """Densities ``m_i`` of the layer intervals from the flux out of ``Old x [-ell, ell]``.

    Gauss' law applied to each interval column gives
    ``2 pi (m_i - 1)|H_i| = Phi_i + 2 U0 |H_i|``, where ``Phi_i`` is the outward
    flux through the side shared with the inner box (zero for intervals not
    touching it) and ``U0`` is the outward flux through the top and bottom
    of the inner box per unit of layer length on each face. Summing over
    intervals, the layer receives exactly ``2R - |C cap Old|`` points.
    """
    R, Rp = p.R, p.inner
    f = LocalField(c, p.eta)
    top = flux(f, (Rp, ell), (-Rp, ell), tol=tol).value
    phi_top = 2.0 * top
    u0 = phi_top / (2.0 * 2.0 * (R - Rp))
    phi_left = flux(f, (-Rp, ell), (-Rp, -ell), tol=tol).value
    phi_right = flux(f, (Rp, -ell), (Rp, ell), tol=tol).value

    # longest admissible intervals (|H| <= 2 ell) spread the side flux the most
    n_side = max(1, int(math.ceil(p.layer / (2.0 * ell) - 1e-12)))
    left = np.linspace(-R, -Rp, n_side + 1)
    right = np.linspace(Rp, R, n_side + 1)
    h = np.diff(left)
    base = 1.0 + u0 / math.pi
    m_left = np.full(n_side, base)
    m_right = np.full(n_side, base)
    m_left[-1] += phi_left / (2 * math.pi * h[-1])
    m_right[0] += phi_right / (2 * math.pi * h[0])
    n_inner = c.count(Window(-Rp, Rp))
    return Layer(ell, u0, phi_left, phi_right, left, right, m_left, m_right, n_inner)


def _inverse_mass(edges: np.ndarray, dens: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Positions where the cumulative mass from ``edges[0]`` reaches ``targets``."""
    cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(edges))])
    j = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, dens.size - 1)
    return edges[j] + (targets - cum[j]) / dens[j]


def layer_centres(layer: Layer, p: ScreeningParams) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic positions of the new points on each side.

    The layer must receive ``n = 2R - |C cap Old|`` points; the left side gets
    the rounded left mass. On each side the ``k``-th point counted from the
    outer edge sits where the mass measured from that edge reaches
    ``(k - 1/2)`` times the side's mass per point.
    """
    R, Rp, eta = p.R, p.inner, p.eta
    n_new = int(round(2 * R)) - layer.n_inner
    if n_new < 0:
        raise DegenerateInterval("inner window already holds more than 2R points")
    ml, mr = layer.mass_left, layer.mass_right
    n_left = int(min(max(round(ml), 0), n_new))
    n_right = n_new - n_left

    def side(edges, dens, n, mass):
        if n == 0:
            return np.empty(0)
        targets = (np.arange(1, n + 1) - 0.5) * (mass / n)
        return _inverse_mass(edges, dens, targets)

    lc = side(layer.left, layer.m_left, n_left, ml)
    # right side measured from +R inwards
    rc = R - side(R - layer.right[::-1], layer.m_right[::-1], n_right, mr)
    rc = np.sort(rc)
    outer = 0.1 + eta / 4
    inner_gap = eta / 4 + 1e-9 * max(1.0, R)
    lc = np.clip(lc, -R + outer, -Rp - inner_gap)
    rc = np.clip(rc, Rp + inner_gap, R - outer)
    return lc, rc


@dataclass
class ScreenResult:
    config: PointConfiguration
    report: dict = field(default_factory=dict)


def _claim_deviations(points: np.ndarray, p: ScreeningParams, M: float) -> dict:
    """Deviation of the new points from the ideal lattice ``-R + k - 1/2`` (and its mirror)."""
    R, s = p.R, p.s
    Rp = p.inner
    left = np.sort(points[points < -Rp])
    right = np.sort(points[points > Rp])[::-1]
    out = {"k": 0.0, "far": 0.0, "near": 0.0}
    sqM = math.sqrt(max(M, 1e-300)) if math.isfinite(M) else math.inf
    near_scale = sqM * s * math.sqrt(R)
    for pts, sign in ((left, 1.0), (right, -1.0)):
        kmax = pts.size
        out["k"] = max(out["k"], abs(kmax - s * R) / near_scale if near_scale > 0 else math.inf)
        for k in range(1, kmax + 1):
            ideal = sign * (-R + k - 0.5)
            dev = abs(pts[k - 1] - ideal)
            if abs(s * R - k) >= s * s * R:
                out["far"] = max(out["far"], dev / (k / math.sqrt(R)))
            else:
                out["near"] = max(out["near"], dev / near_scale if near_scale > 0 else math.inf)
    return out


def screen(
    c: PointConfiguration,
    p: ScreeningParams,
    rng: np.random.Generator,
    tol: float = 1e-9,
    report: PreconditionReport | None = None,
) -> ScreenResult:
    """Screen ``c``: keep ``Old``, refill the layer, return exactly ``2R`` points.

    Raises :class:`PreconditionViolated` when the clearance, boundary-energy or
    vertical-decay conditions fail (thresholds ``2 eta``, ``p.M``, ``p.e_max``)
    and :class:`DegenerateInterval` when some density leaves ``(1/2, 3/2)``.
    """
    _check_carrier(c, p.R)
    if report is None:
        report = check_preconditions(c, p)
    if not report.passes:
        raise PreconditionViolated(f"preconditions fail: {report.as_dict()}")
    ell, ell_energy = choose_ell(c, p)
    layer = compute_densities(c, p, ell, tol)
    m_all = np.concatenate([layer.m_left, layer.m_right])
    if np.any(np.abs(m_all - 1.0) >= 0.5):
        raise DegenerateInterval(f"density {m_all[np.argmax(np.abs(m_all - 1))]:.3f} too far from 1")
    lc, rc = layer_centres(layer, p)
    centres = np.concatenate([lc, rc])
    jitter = rng.uniform(-0.25, 0.25, centres.size) * p.eta
    new = centres + jitter
    old = c.points[np.abs(c.points) <= p.inner]
    out = PointConfiguration(np.concatenate([old, new]), c.carrier)
    dev = _claim_deviations(out.points, p, p.M)
    rep = {
        "preconditions": report.as_dict(),
        "ell": ell,
        "line_energy": ell_energy,
        "U0": layer.u0,
        "flux_left": layer.flux_left,
        "flux_right": layer.flux_right,
        "m_left": layer.m_left.tolist(),
        "m_right": layer.m_right.tolist(),
        "intervals_left": layer.left.tolist(),
        "intervals_right": layer.right.tolist(),
        "layer_mass": layer.mass_left + layer.mass_right,
        "n_inner": layer.n_inner,
        "k_max_left": int(lc.size),
        "k_max_right": int(rc.size),
        "centres": centres.tolist(),
        "normalised_deviations": dev,
        "claims": {
            "k_max": dev["k"] <= constants.SCREEN_K_CONST,
            "far": dev["far"] <= constants.SCREEN_FAR_CONST,
            "near": dev["near"] <= constants.SCREEN_NEAR_CONST,
        },
    }
    return ScreenResult(out, rep)


def screening_energy_check(
    c: PointConfiguration,
    screened: PointConfiguration,
    p: ScreeningParams,
    C: float = constants.SCREEN_ENERGY_CONST,
    tol: float = 1e-5,
) -> dict:
    """Compare the plane energy of the screened field with the original budget.

    ``lhs`` is ``int_{R^2} |E_eta(screened)|^2`` and ``rhs`` is
    ``int_{Lambda_R x [-R, R]} |E_eta(c)|^2 + C |log eta| M s R``.
    """
    lhs = plane_energy(LocalField(screened, p.eta), tol=tol, rtol=1e-6).value
    box = energy_rectangle(LocalField(c, p.eta), Rect(-p.R, p.R, -p.R, p.R), tol=tol, rtol=1e-6).value
    rhs = box + C * abs(math.log(p.eta)) * p.M * p.s * p.R
    return {"lhs": lhs, "rhs": rhs, "box_energy": box, "holds": lhs <= rhs}
