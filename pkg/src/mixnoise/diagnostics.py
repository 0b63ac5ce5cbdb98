"""Chain statistics: effective sample size, reconstruction metrics, credibility
intervals, mode occupancy, and the experiment summary tables."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .priors import ValidityBox
from .records import ChainRecord


def _autocorrelations(x: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation function via FFT."""
    n = x.size
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def ess(chain_coord: np.ndarray) -> float:
    """Effective sample size with Geyer's initial-positive-sequence truncation.

    T / (1 + 2 sum rho_k), with adjacent-pair sums of the autocorrelation kept
    while they stay positive. A constant chain reports 1.
    """
    x = np.asarray(chain_coord, dtype=float).ravel()
    t = x.size
    if t < 4 or np.ptp(x) == 0.0:
        return 1.0
    rho = _autocorrelations(x)
    n_pairs = (t - 1) // 2
    tau = 0.0
    for m in range(n_pairs):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += pair
    tau = max(2.0 * tau - 1.0, 1.0)
    return float(min(t / tau, t))


@dataclass
class ChainStats:
    """Per-coordinate summaries plus scalar reconstruction metrics."""

    mean: np.ndarray  # (N, D)
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    ci_rel_width: np.ndarray | None  # percent of the validity interval
    ess: np.ndarray  # (N, D)
    bias: float | None
    mse: float | None
    rsnr_db: float | None
    per_dim: dict = field(default_factory=dict)
    mode_occupancy: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "mean": self.mean.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
            "ess": self.ess.tolist(),
            "bias": self.bias,
            "mse": self.mse,
            "rsnr_db": self.rsnr_db,
            "per_dim": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.per_dim.items()},
        }
        if self.ci_rel_width is not None:
            out["ci_rel_width"] = self.ci_rel_width.tolist()
        if self.mode_occupancy is not None:
            out["mode_occupancy"] = self.mode_occupancy.tolist()
        return out


def _rsnr(truth: np.ndarray, err: np.ndarray) -> float | None:
    t = float(np.linalg.norm(truth))
    e = float(np.linalg.norm(err))
    if t == 0.0:
        return None
    if e == 0.0:
        return float("inf")
    return 20.0 * float(np.log10(t / e))


def summarize(
    chain: ChainRecord | np.ndarray,
    truth: np.ndarray | None = None,
    box: ValidityBox | None = None,
    burn_in: int | None = None,
) -> ChainStats:
    """Posterior-mean estimate, central 95% intervals, ESS, and error metrics.

    ``chain`` is a ChainRecord or a raw (T, N, D) sample array; ``burn_in``
    overrides the record's own value when given.
    """
    if isinstance(chain, ChainRecord):
        if burn_in is None:
            samples = chain.samples()
        else:
            samples = chain.thetas[burn_in + 1 :]
    else:
        samples = np.asarray(chain, dtype=float)
        if burn_in:
            samples = samples[burn_in:]
    t, n, d = samples.shape
    mean = samples.mean(axis=0)
    ci_lower = np.quantile(samples, 0.025, axis=0)
    ci_upper = np.quantile(samples, 0.975, axis=0)
    ci_rel = None
    if box is not None:
        ci_rel = (ci_upper - ci_lower) / box.widths * 100.0
    ess_arr = np.empty((n, d))
    for i in range(n):
        for k in range(d):
            ess_arr[i, k] = ess(samples[:, i, k])
    bias = mse = rsnr = None
    per_dim: dict = {"ess_min": float(ess_arr.min()), "ess_mean": float(ess_arr.mean()),
                     "ess_max": float(ess_arr.max())}
    if truth is not None:
        truth = np.asarray(truth, dtype=float).reshape(n, d)
        err = mean - truth
        bias = float(np.linalg.norm(err))
        mse = bias**2
        rsnr = _rsnr(truth, err)
        per_dim["mse"] = np.array([float(np.sum(err[:, k] ** 2)) for k in range(d)])
        per_dim["rsnr_db"] = np.array(
            [r if (r := _rsnr(truth[:, k], err[:, k])) is not None else np.nan for k in range(d)]
        )
    if ci_rel is not None:
        per_dim["ci_rel_width_mean"] = ci_rel.mean(axis=0)
    return ChainStats(
        mean=mean, ci_lower=ci_lower, ci_upper=ci_upper, ci_rel_width=ci_rel,
        ess=ess_arr, bias=bias, mse=mse, rsnr_db=rsnr, per_dim=per_dim,
    )


def mode_occupancy(chain: ChainRecord | np.ndarray, mode_centers: np.ndarray, radius: float,
                   burn_in: int | None = None) -> np.ndarray:
    """Fraction of post-burn samples within ``radius`` of each center; the last
    entry is the unassigned remainder."""
    if isinstance(chain, ChainRecord):
        samples = chain.samples() if burn_in is None else chain.thetas[burn_in + 1 :]
    else:
        samples = np.asarray(chain, dtype=float)
        if burn_in:
            samples = samples[burn_in:]
    pts = samples.reshape(-1, samples.shape[-1])
    centers = np.atleast_2d(np.asarray(mode_centers, dtype=float))
    d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=-1)
    nearest = np.argmin(d2, axis=1)
    within = d2[np.arange(pts.shape[0]), nearest] <= radius * radius
    counts = np.bincount(nearest[within], minlength=centers.shape[0]).astype(float)
    frac = counts / pts.shape[0]
    return np.append(frac, 1.0 - frac.sum())


def count_marginal_modes(samples_2d: np.ndarray, box: ValidityBox, bins: int = 50,
                         smooth: float = 1.2, rel_threshold: float = 0.05,
                         min_mass: float = 0.02) -> int:
    """Separated high-density islands of a 2-D marginal.

    Histogram over the box, Gaussian smoothing, connected components of the
    region above ``rel_threshold`` of the peak; only islands holding at least
    ``min_mass`` of the total count.
    """
    from scipy import ndimage

    hist, _, _ = np.histogram2d(
        samples_2d[:, 0], samples_2d[:, 1], bins=bins,
        range=[[box.lower[0], box.upper[0]], [box.lower[1], box.upper[1]]],
    )
    smoothed = ndimage.gaussian_filter(hist, smooth)
    labels, count = ndimage.label(smoothed > rel_threshold * smoothed.max())
    total = smoothed.sum()
    return int(sum(smoothed[labels == i].sum() >= min_mass * total for i in range(1, count + 1)))


def censorship_split(stats: ChainStats, truth: np.ndarray, censor_frac: np.ndarray,
                     threshold: float = 0.5) -> dict:
    """Reconstruction and CI-width metrics split by per-pixel censored fraction."""
    truth = np.asarray(truth, dtype=float)
    low = np.asarray(censor_frac) <= threshold
    high = ~low
    d = truth.shape[1]
    out = {"n_low": int(low.sum()), "n_high": int(high.sum()), "threshold": threshold}
    err = stats.mean - truth
    rsnr_low, rsnr_high, ci_low, ci_high = [], [], [], []
    for k in range(d):
        rsnr_low.append(_rsnr(truth[low, k], err[low, k]) if low.any() else None)
        rsnr_high.append(_rsnr(truth[high, k], err[high, k]) if high.any() else None)
        if stats.ci_rel_width is not None:
            ci_low.append(float(stats.ci_rel_width[low, k].mean()) if low.any() else None)
            ci_high.append(float(stats.ci_rel_width[high, k].mean()) if high.any() else None)
    out["rsnr_db_low"] = rsnr_low
    out["rsnr_db_high"] = rsnr_high
    if ci_low:
        out["ci_rel_width_low"] = ci_low
        out["ci_rel_width_high"] = ci_high
    return out


# -- persistence ----------------------------------------------------------------


def save_stats_json(path, stats: ChainStats, extra: dict | None = None) -> None:
    payload = stats.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def write_gmm_table(path, stats: ChainStats, occupancy: np.ndarray) -> None:
    """Bias/ESS table in the shape of the GMM comparison."""
    frame = pd.DataFrame(
        {
            "sampler": ["hybrid"],
            "bias": [stats.bias],
            "ess_d1": [stats.ess[0, 0]],
            "ess_d2": [stats.ess[0, 1]],
            "modes_occupied": [int(np.sum(occupancy[:-1] >= 0.02))],
            "min_mode_fraction": [float(occupancy[:-1].min())],
        }
    )
    frame.to_csv(path, index=False)


def write_sensor_table(path, stats: ChainStats) -> None:
    frame = pd.DataFrame(
        {
            "sampler": ["hybrid"],
            "ess_min": [stats.per_dim["ess_min"]],
            "ess_mean": [stats.per_dim["ess_mean"]],
            "ess_max": [stats.per_dim["ess_max"]],
        }
    )
    frame.to_csv(path, index=False)


def write_astro_table(path, stats: ChainStats, split: dict) -> None:
    d = stats.mean.shape[1]
    rows = []
    for k in range(d):
        rows.append(
            {
                "map": f"theta_{k + 1}",
                "mse": stats.per_dim["mse"][k],
                "rsnr_db": stats.per_dim["rsnr_db"][k],
                "ci_rel_low_censor": split["ci_rel_width_low"][k],
                "ci_rel_high_censor": split["ci_rel_width_high"][k],
                "ci_rel_overall": stats.per_dim["ci_rel_width_mean"][k],
            }
        )
    pd.DataFrame(rows).to_csv(path, index=False)
