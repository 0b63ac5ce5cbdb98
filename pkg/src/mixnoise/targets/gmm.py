"""2-D Gaussian mixture benchmark target restricted to a box.

Fifteen equally weighted modes inside [-15, 15]^2 with a smooth box prior;
the classic stress test for mode-jumping kernels.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import ConfigurationError
from ..likelihood import LOG_2PI
from ..priors import ValidityBox, quartic_penalty
from .base import PosteriorModel

DEFAULT_GMM_SEED = 14


@dataclass
class GmmTarget:
    """Mode means and covariances of an equal-weight mixture, plus the box prior."""

    means: np.ndarray
    covs: np.ndarray
    box: ValidityBox = field(default_factory=lambda: ValidityBox([-15.0, -15.0], [15.0, 15.0]))
    delta: float = 1e4

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covs = np.asarray(self.covs, dtype=float)
        k, d = self.means.shape
        if self.covs.shape != (k, d, d):
            raise ConfigurationError("covariance stack must be (K, D, D)")
        eig = np.linalg.eigvalsh(self.covs)
        if np.any(eig <= 0):
            raise ConfigurationError("mode covariances must be SPD")
        self._precisions = np.linalg.inv(self.covs)
        sign, logdet = np.linalg.slogdet(self.covs)
        self._log_norms = -0.5 * (d * LOG_2PI + logdet)

    @property
    def n_modes(self) -> int:
        return self.means.shape[0]

    def mixture_mean(self) -> np.ndarray:
        return self.means.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
            "box_lower": self.box.lower.tolist(),
            "box_upper": self.box.upper.tolist(),
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmTarget":
        return cls(
            means=np.asarray(d["means"]),
            covs=np.asarray(d["covs"]),
            box=ValidityBox(np.asarray(d["box_lower"]), np.asarray(d["box_upper"])),
            delta=float(d["delta"]),
        )


def make_gmm_target(
    n_modes: int = 15,
    seed: int = DEFAULT_GMM_SEED,
    mean_range: float = 12.0,
    min_separation: float = 4.0,
    eig_range: tuple[float, float] = (0.1, 1.0),
) -> GmmTarget:
    """Random mode layout with minimum pairwise separation, fixed by seed."""
    rng = np.random.default_rng(seed)
    means: list[np.ndarray] = []
    while len(means) < n_modes:
        cand = rng.uniform(-mean_range, mean_range, size=2)
        if all(np.linalg.norm(cand - m) >= min_separation for m in means):
            means.append(cand)
    covs = []
    for _ in range(n_modes):
        angle = rng.uniform(0.0, np.pi)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        eig = rng.uniform(*eig_range, size=2)
        covs.append(rot @ np.diag(eig) @ rot.T)
    return GmmTarget(means=np.array(means), covs=np.array(covs))


def gmm_log_density(theta: np.ndarray, target: GmmTarget):
    """Log mixture density plus the smooth box term, with grad and Hessian diagonal."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    diffs = theta[None, :] - target.means  # (K, D)
    mahal = np.einsum("kd,kde,ke->k", diffs, target._precisions, diffs)
    comp_log = target._log_norms - 0.5 * mahal - np.log(target.n_modes)
    total = float(logsumexp(comp_log))
    resp = np.exp(comp_log - total)  # (K,)
    comp_grad = -np.einsum("kde,ke->kd", target._precisions, diffs)  # (K, D)
    grad = resp @ comp_grad
    comp_hess = -np.diagonal(target._precisions, axis1=1, axis2=2) + comp_grad**2
    hess = resp @ comp_hess - grad**2
    qv, qg, qh = quartic_penalty(theta, target.box)
    value = total - target.delta * qv
    return value, grad - target.delta * qg, hess - target.delta * qh


class GmmPosterior(PosteriorModel):
    """PosteriorModel adapter: one component of dimension 2."""

    def __init__(self, target: GmmTarget):
        self.target = target
        self.n_components = 1
        self.dim = target.means.shape[1]
        self.box = target.box

    def potential(self, theta):
        value, _, _ = gmm_log_density(np.asarray(theta).reshape(-1), self.target)
        return -value

    def potential_with_derivatives(self, theta):
        theta = np.asarray(theta, dtype=float)
        value, grad, hess = gmm_log_density(theta.reshape(-1), self.target)
        return -value, -grad.reshape(theta.shape), -hess.reshape(theta.shape)

    def conditional_log_density(self, pixels, points, theta):
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, self.dim)
        t = self.target
        diffs = flat[:, None, :] - t.means[None, :, :]
        mahal = np.einsum("pkd,kde,pke->pk", diffs, t._precisions, diffs)
        comp_log = t._log_norms - 0.5 * mahal - np.log(t.n_modes)
        mix = logsumexp(comp_log, axis=1)
        e = np.maximum(flat - t.box.upper, 0.0) + np.maximum(t.box.lower - flat, 0.0)
        out = mix - t.delta * np.sum(e**4, axis=1)
        return out.reshape(pts.shape[:-1])


def save_gmm_target(path, target: GmmTarget) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(target.to_dict(), fh, indent=2)
        fh.write("\n")


def load_gmm_target(path) -> GmmTarget:
    with open(path, encoding="utf-8") as fh:
        return GmmTarget.from_dict(json.load(fh))
