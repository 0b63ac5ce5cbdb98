"""Blend-parameter calibration by expected Kolmogorov-Smirnov distance.

For each channel, candidate transition pairs (a0, a1) are scored by the
KS distance between the empirical CDF of the true noise model (easy to
sample) and the CDF of the blended surrogate (closed form in the pure
regimes, quadrature in the transition), averaged over a KDE estimate of the
distribution of log forward values z. Grid search with common random
numbers across cells picks the minimizer.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import gaussian_kde

from .errors import ConfigurationError, NumericalError
from .likelihood import LikelihoodBlend, NoiseModel, additive_moments, blend_weight, multiplicative_moments
from .priors import sample_smooth_uniform_box
from .targets.base import ForwardModel

MAX_QUADRATURE_POINTS = 2**16


def worker_count() -> int:
    """Worker cap from MIXNOISE_THREADS, defaulting to the CPU count."""
    env = os.environ.get("MIXNOISE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigurationError(f"MIXNOISE_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


@dataclass
class CalibrationConfig:
    """Monte-Carlo size, z integration grid with KDE weights, and the (a0, a1) grid."""

    m_samples: int
    z_grid: np.ndarray
    z_density: np.ndarray
    a_grid: np.ndarray  # (C, 2)

    def __post_init__(self):
        self.z_grid = np.asarray(self.z_grid, dtype=float)
        self.z_density = np.asarray(self.z_density, dtype=float)
        self.a_grid = np.atleast_2d(np.asarray(self.a_grid, dtype=float))
        if self.m_samples < 1000:
            raise ConfigurationError("need at least 1000 Monte-Carlo samples per z bin")
        if self.z_grid.size < 10:
            raise ConfigurationError("need at least 10 z bins")
        if self.z_grid.shape != self.z_density.shape:
            raise ConfigurationError("z grid and density must align")
        if np.any(self.z_density < 0):
            raise ConfigurationError("density weights must be nonnegative")
        total = self.z_density.sum()
        if not np.isclose(total, 1.0, atol=1e-8):
            raise ConfigurationError("density weights must sum to one")
        if self.a_grid.size == 0:
            raise ConfigurationError("empty candidate grid")
        if not np.all(self.a_grid[:, 0] < self.a_grid[:, 1]):
            raise ConfigurationError("every grid pair requires a0 < a1")

    @property
    def s_bins(self) -> int:
        return self.z_grid.size


class EmpiricalCdf:
    """Right-continuous step function of a sample."""

    def __init__(self, samples: np.ndarray):
        self.sorted = np.sort(np.asarray(samples, dtype=float).ravel())
        self.n = self.sorted.size

    def __call__(self, y):
        return np.searchsorted(self.sorted, np.asarray(y, dtype=float), side="right") / self.n


def empirical_cdf(samples: np.ndarray) -> EmpiricalCdf:
    return EmpiricalCdf(samples)


class SurrogateCdf:
    """CDF of the blended surrogate at fixed z.

    Pure regimes use the Gaussian / lognormal closed forms; the transition
    regime integrates the geometric blend on the union of Gaussian-scale and
    lognormal-scale grids, doubling resolution until the normalizer is
    stable to 1e-4.
    """

    def __init__(self, z: float, a_pair, noise: NoiseModel, n_points: int = 2048):
        self.z = float(z)
        self.a0, self.a1 = float(a_pair[0]), float(a_pair[1])
        self.noise = noise
        self.lam = float(blend_weight(self.z, self.a0, self.a1)[0])
        self.f = float(np.exp(self.z))
        _, self.s_a2 = additive_moments(self.f, noise)
        self.m_m, self.s_m2 = multiplicative_moments(self.f, noise)
        self.mu = self.z + self.m_m
        self._grid = None
        self._cum = None
        if 0.0 < self.lam < 1.0:
            self._build_quadrature(n_points)

    def _log_density(self, y: np.ndarray) -> np.ndarray:
        sd2 = self.s_a2
        la = -0.5 * np.log(2.0 * np.pi * sd2) - (y - self.f) ** 2 / (2.0 * sd2)
        ly = np.log(y)
        lm = -ly - 0.5 * np.log(2.0 * np.pi * self.s_m2) - (ly - self.mu) ** 2 / (2.0 * self.s_m2)
        return (1.0 - self.lam) * la + self.lam * lm

    def _make_grid(self, n: int) -> np.ndarray:
        half = n // 2
        sd = float(np.sqrt(self.s_a2))
        ga = self.f + np.linspace(-8.0, 8.0, half) * sd
        sq = float(np.sqrt(self.s_m2))
        gm = np.exp(self.mu + np.linspace(-8.0, 8.0, half) * sq)
        grid = np.union1d(ga, gm)
        floor = max(grid.max() * 1e-15, 1e-300)
        return np.unique(np.maximum(grid, floor))

    def _normalizer(self, grid: np.ndarray):
        lp = self._log_density(grid)
        shift = lp.max()
        dens = np.exp(lp - shift)
        z = np.trapezoid(dens, grid)
        return z, shift, dens

    def _build_quadrature(self, n_points: int) -> None:
        n = n_points
        grid = self._make_grid(n)
        z_prev, shift, dens = self._normalizer(grid)
        while True:
            n2 = n * 2
            grid2 = self._make_grid(n2)
            z_new, shift2, dens2 = self._normalizer(grid2)
            # compare log integrals so extreme density scales cannot overflow
            rel = abs(np.expm1(np.log(z_new) + shift2 - np.log(z_prev) - shift))
            if rel <= 1e-4:
                grid, dens = grid2, dens2
                break
            if n2 >= MAX_QUADRATURE_POINTS:
                raise NumericalError("surrogate CDF quadrature failed to converge")
            n, grid, z_prev, shift, dens = n2, grid2, z_new, shift2, dens2
        dy = np.diff(grid)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * dy)])
        self._grid = grid
        self._cum = cum / cum[-1]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.lam <= 0.0:
            return ndtr((y - self.f) / np.sqrt(self.s_a2))
        if self.lam >= 1.0:
            out = np.zeros_like(y)
            pos = y > 0
            with np.errstate(divide="ignore"):
                out[pos] = ndtr((np.log(y[pos]) - self.mu) / np.sqrt(self.s_m2))
            return out
        return np.interp(y, self._grid, self._cum, left=0.0, right=1.0)


def surrogate_cdf(y, z: float, a_pair, noise: NoiseModel):
    """Convenience wrapper: build the fixed-z CDF and evaluate it."""
    return SurrogateCdf(z, a_pair, noise)(y)


def sample_true_model(z: float, noise: NoiseModel, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uncensored draws y = e_m e^z + e_a from the exact noise model."""
    f = np.exp(z)
    sm = noise.sigma_m
    eps_m = rng.lognormal(-0.5 * sm * sm, sm, size=m) if sm > 0 else np.ones(m)
    eps_a = rng.normal(0.0, noise.sigma_a, size=m) if noise.sigma_a > 0 else np.zeros(m)
    return eps_m * f + eps_a


def _ks_sorted(sorted_samples: np.ndarray, cdf) -> float:
    m = sorted_samples.size
    vals = cdf(sorted_samples)
    upper = np.arange(1, m + 1) / m
    lower = np.arange(0, m) / m
    return float(max(np.max(upper - vals), np.max(vals - lower)))


def ks_distance_at_z(z: float, a_pair, noise: NoiseModel, m: int, rng: np.random.Generator) -> float:
    """Sup distance between the empirical true-model CDF and the surrogate CDF."""
    samples = np.sort(sample_true_model(z, noise, m, rng))
    return _ks_sorted(samples, SurrogateCdf(z, a_pair, noise))


def expected_ks(a_pair, cfg: CalibrationConfig, noise: NoiseModel, rng: np.random.Generator | None = None,
                sorted_samples: np.ndarray | None = None) -> float:
    """Density-weighted KS distance over the z grid.

    ``sorted_samples`` (S, M) reuses common random numbers across candidate
    pairs; otherwise fresh draws come from ``rng``.
    """
    if sorted_samples is None:
        if rng is None:
            raise ConfigurationError("expected_ks needs either samples or an rng")
        sorted_samples = np.sort(
            np.stack([sample_true_model(z, noise, cfg.m_samples, rng) for z in cfg.z_grid]), axis=1
        )
    total = 0.0
    for s, z in enumerate(cfg.z_grid):
        w = cfg.z_density[s]
        if w == 0.0:
            continue
        total += w * _ks_sorted(sorted_samples[s], SurrogateCdf(z, a_pair, noise))
    return float(total)


@dataclass
class CalibrationResult:
    a0: float
    a1: float
    phi: float
    phis: np.ndarray  # per grid cell
    a_grid: np.ndarray
    se_bound: float

    def surface_dict(self) -> dict:
        return {"a0": self.a_grid[:, 0].tolist(), "a1": self.a_grid[:, 1].tolist(),
                "phi": self.phis.tolist()}


def calibrate_channel(cfg: CalibrationConfig, noise: NoiseModel, rng: np.random.Generator) -> CalibrationResult:
    """Grid-search the expected KS distance; ties break toward narrower, then
    lexicographically smaller pairs."""
    sorted_samples = np.sort(
        np.stack([sample_true_model(z, noise, cfg.m_samples, rng) for z in cfg.z_grid]), axis=1
    )
    phis = np.array(
        [expected_ks(pair, cfg, noise, sorted_samples=sorted_samples) for pair in cfg.a_grid]
    )
    widths = cfg.a_grid[:, 1] - cfg.a_grid[:, 0]
    order = np.lexsort((cfg.a_grid[:, 1], cfg.a_grid[:, 0], widths, phis))
    best = order[0]
    se_bound = 0.5 / np.sqrt(cfg.m_samples) * float(np.sqrt(np.sum(cfg.z_density**2)))
    return CalibrationResult(
        a0=float(cfg.a_grid[best, 0]), a1=float(cfg.a_grid[best, 1]), phi=float(phis[best]),
        phis=phis, a_grid=cfg.a_grid, se_bound=se_bound,
    )


# -- configuration builders -------------------------------------------------------


def kde_z_density(z_samples: np.ndarray, s_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE with Silverman bandwidth, evaluated and normalized on a grid."""
    z = np.asarray(z_samples, dtype=float).ravel()
    grid = np.linspace(z.min(), z.max(), s_bins)
    if np.ptp(z) == 0.0:
        weights = np.full(s_bins, 1.0 / s_bins)
        return grid, weights
    kde = gaussian_kde(z, bw_method="silverman")
    weights = np.maximum(kde(grid), 0.0)
    weights /= weights.sum()
    return grid, weights


def default_a_grid(z_lo: float, z_hi: float, n_values: int = 20, pad: float = 1.0) -> np.ndarray:
    """Upper-triangle pairs over padded z range, plus the two pure-regime corners."""
    values = np.linspace(z_lo - pad, z_hi + pad, n_values)
    pairs = [(a0, a1) for i, a0 in enumerate(values) for a1 in values[i + 1 :]]
    pairs.append((z_hi + pad + 1.0, z_hi + pad + 2.0))  # pure additive: a0 above all z
    pairs.insert(0, (z_lo - pad - 2.0, z_lo - pad - 1.0))  # pure multiplicative: a1 below all z
    return np.asarray(pairs)


def config_for_channel(
    fm: ForwardModel, channel: int, m_samples: int, s_bins: int, n_grid: int,
    kde_samples: int, delta: float, rng: np.random.Generator,
) -> CalibrationConfig:
    """Build the calibration inputs for one channel of a forward model."""
    theta = sample_smooth_uniform_box(fm.box, delta, rng, size=kde_samples)
    z = fm.log_values(theta)[:, channel]
    z_grid, z_density = kde_z_density(z, s_bins)
    a_grid = default_a_grid(float(z.min()), float(z.max()), n_values=n_grid)
    return CalibrationConfig(m_samples=m_samples, z_grid=z_grid, z_density=z_density, a_grid=a_grid)


def calibrate_blend(
    fm: ForwardModel, noise: NoiseModel, seed: int, m_samples: int = 20000, s_bins: int = 50,
    n_grid: int = 20, kde_samples: int = 20000, delta: float = 1e4,
) -> tuple[LikelihoodBlend, list[CalibrationResult]]:
    """Calibrate every channel; channels run on a small thread pool."""
    root = np.random.SeedSequence(seed)
    seeds = root.spawn(fm.n_channels)

    def one(ell: int) -> CalibrationResult:
        rng = np.random.default_rng(seeds[ell])
        cfg = config_for_channel(fm, ell, m_samples, s_bins, n_grid, kde_samples, delta, rng)
        return calibrate_channel(cfg, noise, rng)

    workers = min(worker_count(), fm.n_channels)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(fm.n_channels)))
    else:
        results = [one(ell) for ell in range(fm.n_channels)]
    blend = LikelihoodBlend(np.array([[r.a0, r.a1] for r in results]))
    return blend, results


def save_calibration_json(path, results: list[CalibrationResult], meta: dict) -> None:
    payload = {
        "channels": [
            {
                "a0": r.a0, "a1": r.a1, "phi": r.phi,
                "grid_resolution": int(r.a_grid.shape[0]),
                "M": meta.get("m_samples"), "S": meta.get("s_bins"), "seed": meta.get("seed"),
                "se_bound": r.se_bound,
                "surface": r.surface_dict(),
            }
            for r in results
        ],
        "meta": meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_blend_json(path) -> LikelihoodBlend:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    pairs = [[ch["a0"], ch["a1"]] for ch in payload["channels"]]
    return LikelihoodBlend(np.asarray(pairs))
