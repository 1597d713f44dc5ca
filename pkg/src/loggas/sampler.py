"""Samplers for the log-gas on the line and the microscopic window map.

The Gibbs measure has density proportional to
``exp(-beta * (sum_{i<j} -log|x_i - x_j| + N sum_i x_i^2 / 2))``. It is sampled
exactly through the tridiagonal beta-Hermite model, whose eigenvalues
``lam`` have density ``prod|lam_i - lam_j|^beta exp(-sum lam^2 / 2)``, rescaled
by ``1 / sqrt(beta N)``. A Metropolis sampler serves as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EdgeWindow, EigensolverFailure
from .pointconf import PointConfiguration, Window

EIG_TOL = 1e-12


@dataclass(frozen=True)
class EnsembleSpec:
    beta: float
    N: int
    seed: int = 0
    confinement: str = "quadratic"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.confinement != "quadratic":
            raise ValueError("only quadratic confinement is supported")


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream keyed by ``(seed, index)``, independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


# --- tridiagonal model ------------------------------------------------------

def hermite_tridiagonal(beta: float, N: int, rng: np.random.Generator, size: int | None = None):
    """Diagonal and off-diagonal of the scaled beta-Hermite matrix."""
    shape = (N,) if size is None else (size, N)
    diag = rng.standard_normal(shape)
    dof = beta * np.arange(N - 1, 0, -1)
    oshape = (N - 1,) if size is None else (size, N - 1)
    off = np.sqrt(rng.chisquare(np.broadcast_to(dof, oshape))) / math.sqrt(2.0)
    return diag, off


def sturm_count(diag: np.ndarray, off: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Number of eigenvalues below each ``x`` (batched over leading axes).

    ``diag`` has shape ``(..., N)``, ``off`` ``(..., N-1)`` and ``x`` ``(..., M)``.
    """
    diag = np.asarray(diag, dtype=float)
    off2 = np.asarray(off, dtype=float) ** 2
    N = diag.shape[-1]
    tiny = np.finfo(float).tiny * 1e10
    q = diag[..., 0:1] - x
    count = (q < 0).astype(np.int64)
    for i in range(1, N):
        q[q == 0] = -tiny
        np.divide(off2[..., i - 1:i], q, out=q)
        np.subtract(diag[..., i:i + 1] - x, q, out=q)
        count += q < 0
    return count


def tridiagonal_eigenvalues(diag: np.ndarray, off: np.ndarray, tol: float = EIG_TOL) -> np.ndarray:
    """All eigenvalues, ascending, by bisection on the Sturm count.

    Brackets are shrunk until their width is below ``tol`` times the spectral
    scale; the trace is checked as a residual.
    """
    diag = np.atleast_2d(np.asarray(diag, dtype=float))
    off = np.asarray(off, dtype=float).reshape(diag.shape[0], -1)
    B, N = diag.shape
    absoff = np.abs(off)
    rad = np.zeros_like(diag)
    rad[:, :-1] += absoff
    rad[:, 1:] += absoff
    lo = np.min(diag - rad, axis=1, keepdims=True) * np.ones((1, N)) - 1e-12
    hi = np.max(diag + rad, axis=1, keepdims=True) * np.ones((1, N)) + 1e-12
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    k = np.arange(N)[None, :]
    for _ in range(200):
        # converged brackets are frozen so each eigenvalue is independent of batching
        active = (hi - lo) > tol * scale
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        above = sturm_count(diag, off, mid) > k
        hi = np.where(active & above, mid, hi)
        lo = np.where(active & ~above, mid, lo)
    if np.any(hi - lo > tol * scale):
        raise EigensolverFailure("bisection did not converge")
    lam = 0.5 * (lo + hi)
    resid = np.abs(lam.sum(axis=1) - diag.sum(axis=1))
    if np.any(resid > 1e-8 * scale[:, 0] * N):
        raise EigensolverFailure(f"trace residual {resid.max():.3e}")
    return lam


def sample_indexed(spec: EnsembleSpec, indices: Sequence[int]) -> np.ndarray:
    """Draws ``indices`` of the ensemble, each from its own ``(seed, index)`` stream.

    The result for a given index does not depend on which other indices are
    solved in the same batch.
    """
    diags, offs = [], []
    for i in indices:
        d, o = hermite_tridiagonal(spec.beta, spec.N, sample_rng(spec.seed, int(i)))
        diags.append(d)
        offs.append(o)
    if not diags:
        return np.empty((0, spec.N))
    lam = tridiagonal_eigenvalues(np.array(diags), np.array(offs))
    return lam / math.sqrt(spec.beta * spec.N)


def sample_tridiagonal(spec: EnsembleSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact draws, sorted, on the macroscopic scale (support near ``[-sqrt 2, sqrt 2]``)."""
    diag, off = hermite_tridiagonal(spec.beta, spec.N, rng, size)
    lam = tridiagonal_eigenvalues(diag, off)
    lam = lam / math.sqrt(spec.beta * spec.N)
    return lam[0] if size is None else lam


# --- Metropolis -------------------------------------------------------------

def metropolis_accept(log_ratio: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Accept when ``log u < log_ratio``."""
    return np.log(u) < log_ratio


def metropolis_transition_matrix(log_weights: np.ndarray, proposal: np.ndarray) -> np.ndarray:
    """Transition matrix of the Metropolis rule for a symmetric proposal on a finite space."""
    w = np.asarray(log_weights, dtype=float)
    Q = np.asarray(proposal, dtype=float)
    ratio = np.exp(np.minimum(0.0, w[None, :] - w[:, None]))
    P = Q * ratio
    np.fill_diagonal(P, 0.0)
    P[np.diag_indices_from(P)] = 1.0 - P.sum(axis=1)
    return P


def semicircle_quantiles(N: int) -> np.ndarray:
    """Quantiles ``(k + 1/2)/N`` of the semicircle law on ``[-sqrt 2, sqrt 2]``."""
    from scipy.optimize import brentq

    def cdf(x):
        t = x / math.sqrt(2.0)
        return 0.5 + (t * math.sqrt(max(0.0, 1 - t * t)) + math.asin(t)) / math.pi

    qs = (np.arange(N) + 0.5) / N
    r = math.sqrt(2.0)
    return np.array([brentq(lambda x: cdf(x) - q, -r, r) for q in qs])


@dataclass
class MCMCResult:
    samples: np.ndarray
    step: float
    acceptance: float
    diagnostics: dict = field(default_factory=dict)


def sample_mcmc(
    spec: EnsembleSpec,
    steps: int,
    rng: np.random.Generator,
    chains: int = 1,
    interaction: bool = True,
    target_acceptance: tuple[float, float] = (0.2, 0.4),
) -> MCMCResult:
    """Run ``chains`` independent single-site Gaussian Metropolis chains for ``steps`` sweeps.

    The first quarter of the sweeps is burn-in, during which the proposal
    width is adapted towards the middle of ``target_acceptance``. Returns the
    sorted final states, one row per chain. ``interaction=False`` switches off
    the pair repulsion, leaving independent Gaussians of variance ``1/(beta N)``.
    """
    beta, N = spec.beta, spec.N
    x = np.tile(semicircle_quantiles(N), (chains, 1))
    x += 1e-3 * rng.standard_normal(x.shape) / N
    step = 1.0 / N
    burn = max(1, steps // 4)
    goal = 0.5 * sum(target_acceptance)
    accepted = tried = 0
    for sweep in range(steps):
        acc_sweep = 0
        for i in range(N):
            xi = x[:, i]
            prop = xi + step * rng.standard_normal(chains)
            log_ratio = -beta * 0.5 * N * (prop * prop - xi * xi)
            if interaction and N > 1:
                with np.errstate(divide="ignore"):
                    ratio = np.abs(prop[:, None] - x) / np.abs(xi[:, None] - x)
                ratio[:, i] = 1.0
                log_ratio += beta * np.sum(np.log(ratio), axis=1)
            acc = metropolis_accept(log_ratio, rng.random(chains))
            x[:, i] = np.where(acc, prop, xi)
            acc_sweep += int(acc.sum())
        if sweep < burn:
            step *= math.exp(acc_sweep / (N * chains) - goal)
        else:
            accepted += acc_sweep
            tried += N * chains
    acceptance = accepted / tried if tried else float("nan")
    return MCMCResult(
        samples=np.sort(x, axis=1),
        step=step,
        acceptance=acceptance,
        diagnostics={"burn_in": burn, "sweeps": steps, "chains": chains},
    )


def sample_poisson(R: float, rng: np.random.Generator, intensity: float = 1.0) -> PointConfiguration:
    w = Window.centered(R)
    n = rng.poisson(intensity * w.length)
    return PointConfiguration(rng.uniform(-R, R, n), w)


def sample_bernoulli(R: float, n: int, rng: np.random.Generator) -> PointConfiguration:
    """``n`` independent uniform points on ``Lambda_R`` (Poisson conditioned on ``n`` points)."""
    return PointConfiguration(rng.uniform(-R, R, n), Window.centered(R))


# --- microscopic windows ----------------------------------------------------

def local_density(sample: np.ndarray, x: float, width: float | None = None) -> float:
    """Epanechnikov estimate of the normalised macroscopic density at ``x``.

    ``sample`` may be one draw or a stack of draws (one per row); stacking
    pools the empirical measures, which removes the per-draw noise of the
    estimate. The default kernel width is ``N^{-1/3}``.
    """
    s = np.atleast_2d(np.asarray(sample, dtype=float))
    N = s.shape[1]
    h = 0.5 * (N ** (-1.0 / 3.0) if width is None else width)
    u = (s - x) / h
    k = 0.75 * np.clip(1.0 - u * u, 0.0, None) / h
    return float(k.sum() / s.size)


@dataclass(frozen=True)
class Support:
    lo: float
    hi: float
    q_lo: float
    q_hi: float

    def as_dict(self) -> dict:
        return {"min": self.lo, "max": self.hi, "q005": self.q_lo, "q995": self.q_hi}


def measured_support(sample: np.ndarray) -> Support:
    s = np.asarray(sample, dtype=float)
    return Support(float(s.min()), float(s.max()), float(np.quantile(s, 0.005)), float(np.quantile(s, 0.995)))


def microscopic_window(
    sample: np.ndarray,
    x: float,
    R: float,
    width: float | None = None,
    margin: float = 10.0,
    density: float | None = None,
) -> PointConfiguration:
    """Blow up ``sample`` around ``x`` to unit intensity and restrict to ``Lambda_R``.

    Each point maps to ``rho N (p - x)`` with ``rho`` the local density:
    ``density`` when given (typically pooled over an ensemble with
    :func:`local_density`), otherwise estimated from ``sample`` alone. Windows
    closer than ``margin`` mean spacings to the empirical 0.5%/99.5% quantiles
    raise :class:`EdgeWindow`.
    """
    s = np.asarray(sample, dtype=float)
    N = s.size
    sup = measured_support(s)
    rho = local_density(s, x, width) if density is None else float(density)
    if rho <= 0:
        raise EdgeWindow(f"no mass near {x}")
    reach = (R + margin) / (rho * N)
    if x - reach < sup.q_lo or x + reach > sup.q_hi:
        raise EdgeWindow(f"window at {x} with R={R} reaches the edge region")
    y = rho * N * (s - x)
    y = y[np.abs(y) <= R]
    return PointConfiguration(y, Window.centered(R))


def ensemble_windows(
    samples: np.ndarray, R: float, centres: Sequence[float], width: float | None = None
) -> list[PointConfiguration]:
    """Windows at each centre of each draw, rescaled by the pooled ensemble density."""
    samples = np.atleast_2d(samples)
    dens = {x: local_density(samples, x, width) for x in centres}
    out = []
    for row in samples:
        for x in centres:
            try:
                out.append(microscopic_window(row, x, R, width=width, density=dens[x]))
            except EdgeWindow:
                continue
    return out
