"""Estimators over ensembles of windows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import constants
from .energy import intrinsic_energy, rectangle_log_integral, segment_log_integral
from .errors import InsufficientPoints
from .pointconf import GapView, PointConfiguration, Window, discrepancy, shift_index


def variance_stderr(x: np.ndarray) -> tuple[float, float]:
    """Sample variance and its large-sample standard error ``sqrt((m4 - s^4)/n)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    v = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    return v, math.sqrt(max(m4 - v * v, 0.0) / n)


def discrepancy_variance_curve(configs: Sequence[PointConfiguration], Rs: Iterable[float]) -> list[dict]:
    """``Var(Discr_{Lambda_R}) / |Lambda_R|`` with standard errors, one row per ``R``."""
    rows = []
    for R in Rs:
        w = Window.centered(R)
        d = np.array([discrepancy(c, w) for c in configs], dtype=float)
        v, se = variance_stderr(d)
        rows.append({"estimator": "discrepancy_variance", "R": R, "value": v / w.length,
                     "stderr": se / w.length, "n": int(d.size)})
    return rows


def strictly_decreasing(rows: Sequence[dict], z: float = 1.96) -> bool:
    """Each consecutive drop exceeds ``z`` combined standard errors."""
    for a, b in zip(rows[:-1], rows[1:]):
        if a["value"] - b["value"] <= z * math.hypot(a["stderr"], b["stderr"]):
            return False
    return True


@dataclass
class GainEstimate:
    value: float
    stderr: float
    shift_used: int
    n: int
    clipped: int
    skipped: int = 0

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr

    def as_dict(self) -> dict:
        lo, hi = self.ci
        return {"value": self.value, "stderr": self.stderr, "ci_lo": lo, "ci_hi": hi,
                "shift_used": self.shift_used, "n": self.n, "clipped": self.clipped,
                "skipped": self.skipped}


def pair_gain(c0: PointConfiguration, c1: PointConfiguration, R: float, S: int) -> float:
    """``sum_{|i| <= R/2} |G_i(c0) - G_{i+S}(c1)|^2 / (G_i(c0)^2 + G_{i+S}(c1)^2)``."""
    v0, v1 = GapView(c0), GapView(c1)
    half = int(math.floor(R / 2))
    ks = np.arange(-half, half + 1)
    g0 = v0.gammas(ks)
    g1 = v1.gammas(ks + S)
    if not (np.all(np.isfinite(g0)) and np.all(np.isfinite(g1))):
        raise InsufficientPoints("not enough points around the origin for the gap window")
    return math.fsum((g0 - g1) ** 2 / (g0 * g0 + g1 * g1))


def gain_estimator(
    pairs: Sequence[tuple[PointConfiguration, PointConfiguration]],
    R: float,
    shift: int | None = 0,
    flip_sign: bool = False,
    skip_insufficient: bool = False,
) -> GainEstimate:
    """Mean of ``pair_gain / R`` over coupled pairs, with its standard error.

    With ``shift=None`` each pair uses ``S = S(c0) - S(c1)`` from the origin
    enumeration, which lines up gaps carrying the same label; it is clipped to
    ``|S| <= sqrt(R)``. Otherwise the given fixed shift is used.
    ``flip_sign`` negates every term (fault injection for the verifier).
    Pairs without enough points raise unless ``skip_insufficient``.
    """
    bound = int(math.floor(math.sqrt(R)))
    vals, used, clipped, skipped = [], 0, 0, 0
    for c0, c1 in pairs:
        if shift is None:
            S = shift_index(c0) - shift_index(c1)
            if abs(S) > bound:
                clipped += 1
                S = max(-bound, min(bound, S))
        else:
            S = int(shift)
            if abs(S) > bound:
                raise ValueError(f"|S| must not exceed sqrt(R) = {math.sqrt(R):.3f}")
        try:
            g = pair_gain(c0, c1, R, S) / R
        except InsufficientPoints:
            if not skip_insufficient:
                raise
            skipped += 1
            continue
        used = max(used, abs(S))
        vals.append(-g if flip_sign else g)
    if not vals:
        raise InsufficientPoints("no usable pair")
    arr = np.asarray(vals)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return GainEstimate(float(arr.mean()), se, used if shift is None else int(shift),
                        int(arr.size), clipped, skipped)


# --- gap laws -----------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """``max(0, w - |a_j - c| - sum_{k != j} (a_k - cap)_+)`` on the gap vector ``a``.

    Bounded by ``w <= 1``, 1-Lipschitz for the l1 norm and compactly supported.
    For ``j = None`` the tent acts on the sum of two neighbouring gaps.
    """

    j: int | None
    c: float
    w: float
    cap: float = 5.0
    pair: int = 0

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        excess = np.clip(a - self.cap, 0.0, None)
        if self.j is not None:
            core = a[:, self.j]
            rest = excess.sum(axis=1) - excess[:, self.j]
        else:
            core = a[:, self.pair] + a[:, self.pair + 1]
            rest = excess.sum(axis=1) - excess[:, self.pair] - excess[:, self.pair + 1]
        return np.clip(self.w - np.abs(core - self.c) - rest, 0.0, None)


def test_dictionary(r: int) -> list[TestFunction]:
    dim = 2 * r + 1
    out = []
    for w in (0.25, 0.5, 1.0):
        for c in np.arange(0.1, 3.01, 0.1):
            for j in range(dim):
                out.append(TestFunction(j, float(c), w))
    for w in (0.5, 1.0):
        for c in np.arange(0.2, 5.01, 0.2):
            for pair in range(dim - 1):
                out.append(TestFunction(None, float(c), w, pair=pair))
    return out


def gap_vectors(configs: Sequence[PointConfiguration], r: int) -> np.ndarray:
    ks = np.arange(-r, r + 1)
    rows = []
    for c in configs:
        g = GapView(c).gammas(ks)
        if not np.all(np.isfinite(g)):
            raise InsufficientPoints("configuration too short for the gap vector")
        rows.append(g)
    return np.array(rows)


def gap_distribution_distance(
    configs0: Sequence[PointConfiguration],
    configs1: Sequence[PointConfiguration],
    r: int,
    split: bool = False,
    rng: np.random.Generator | None = None,
) -> dict:
    """Largest mean difference of a dictionary test function on ``(G_{-r}, ..., G_r)``.

    With ``split=True`` the best function is chosen on one half of each
    sample and evaluated on the other, which gives an unbiased value with a
    standard error.
    """
    a0 = gap_vectors(configs0, r)
    a1 = gap_vectors(configs1, r)
    funcs = test_dictionary(r)
    if not split:
        diffs = np.array([abs(h(a0).mean() - h(a1).mean()) for h in funcs])
        j = int(np.argmax(diffs))
        return {"value": float(diffs[j]), "stderr": math.nan, "function": funcs[j]}
    rng = rng or np.random.default_rng(0)
    i0 = rng.permutation(a0.shape[0])
    i1 = rng.permutation(a1.shape[0])
    s0, t0 = a0[i0[: a0.shape[0] // 2]], a0[i0[a0.shape[0] // 2:]]
    s1, t1 = a1[i1[: a1.shape[0] // 2]], a1[i1[a1.shape[0] // 2:]]
    diffs = np.array([h(s0).mean() - h(s1).mean() for h in funcs])
    j = int(np.argmax(np.abs(diffs)))
    h, sign = funcs[j], np.sign(diffs[j]) or 1.0
    v0, v1 = h(t0), h(t1)
    value = float(sign * (v0.mean() - v1.mean()))
    se = math.sqrt(v0.var(ddof=1) / v0.size + v1.var(ddof=1) / v1.size)
    return {"value": value, "stderr": se, "function": h}


def gap_l2_diagnostic(c: PointConfiguration, field_energy: float) -> tuple[float, float]:
    """``sum_{|i| <= R/2} G_i^2`` against ``R + field_energy``."""
    R = c.carrier.hi
    half = int(math.floor(R / 2))
    g = GapView(c).gammas(np.arange(-half, half + 1))
    if not np.all(np.isfinite(g)):
        raise InsufficientPoints("not enough points on one side of the origin")
    return float(np.sum(g * g)), R + field_energy


# --- interactions between tiles -------------------------------------------------

def tile_interaction(ca: PointConfiguration, cb: PointConfiguration, a: int, b: int, R: float) -> float:
    """``int int -log|x - y| d(C^a - dx)(x) d(C^b - dy)(y)`` between tiles ``K_a`` and ``K_b``.

    ``ca`` and ``cb`` live on ``Lambda_R`` and are moved onto their tiles.
    The background parts are integrated in closed form.
    """
    if a == b:
        raise ValueError("tiles must differ")
    pa = ca.points - 2 * R * a
    pb = cb.points - 2 * R * b
    Ka = Window(-R - 2 * R * a, R - 2 * R * a)
    Kb = Window(-R - 2 * R * b, R - 2 * R * b)
    terms = [-float(np.sum(np.log(np.abs(pa[:, None] - pb[None, :])))) if pa.size and pb.size else 0.0]
    terms.append(float(np.sum(segment_log_integral(pa, Kb.lo, Kb.hi))))
    terms.append(float(np.sum(segment_log_integral(pb, Ka.lo, Ka.hi))))
    terms.append(-rectangle_log_integral(Ka, Kb))
    return math.fsum(terms)


def _dtilde(c: PointConfiguration, R: float) -> np.ndarray:
    ks = np.arange(int(math.ceil(-R)), int(math.floor(R)))
    return np.array([
        abs(discrepancy(c, Window(-R, k))) + abs(discrepancy(c, Window(k, k + 1))) + 1.0 for k in ks
    ])


def tile_interaction_bound(
    ca: PointConfiguration,
    cb: PointConfiguration,
    a: int,
    b: int,
    R: float,
    K: float = constants.TILE_INTERACTION_CONST,
) -> dict:
    """Interaction and its bound ``K / (|a-b|^2 R^2) sum_k sum_j D_k(C^a) D_j(C^b)``."""
    value = tile_interaction(ca, cb, a, b, R)
    bound = K / ((a - b) ** 2 * R * R) * float(_dtilde(ca, R).sum() * _dtilde(cb, R).sum())
    return {"value": value, "bound": bound, "holds": abs(value) <= bound}


def loglog_slope(xs, ys) -> float:
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.abs(np.asarray(ys, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


# --- free energy ----------------------------------------------------------------

def free_energy_report(
    windows: dict[float, Sequence[PointConfiguration]],
    beta: float | None,
    poisson: bool = False,
) -> list[dict]:
    """Per-volume intrinsic energy by window size, with the free energy when available.

    The specific relative entropy is only known in closed form for the
    Poisson process, where it vanishes; otherwise it is reported as missing.
    """
    rows = []
    for R, configs in sorted(windows.items()):
        w = np.array([intrinsic_energy(c).total / (2 * R) for c in configs])
        mean = float(w.mean())
        se = float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else math.nan
        sre = 0.0 if poisson else None
        f = beta * mean + sre if (beta is not None and sre is not None) else None
        rows.append({"estimator": "free_energy", "R": R, "per_volume_wint": mean,
                     "stderr": se, "sre": sre, "f_beta": f, "n": int(w.size)})
    return rows
