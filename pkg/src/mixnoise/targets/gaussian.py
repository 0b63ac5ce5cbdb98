"""Diagonal Gaussian target with known moments, for sampler exactness checks."""
from __future__ import annotations

import numpy as np

from ..priors import ValidityBox
from .base import PosteriorModel


class GaussianTarget(PosteriorModel):
    """Independent N(mean, var) coordinates arranged as an (N, D) array."""

    def __init__(self, mean: np.ndarray, var: np.ndarray, box: ValidityBox | None = None):
        self.mean = np.atleast_2d(np.asarray(mean, dtype=float))
        self.var = np.broadcast_to(np.asarray(var, dtype=float), self.mean.shape).copy()
        self.n_components, self.dim = self.mean.shape
        if box is None:
            half = 8.0 * np.sqrt(self.var.max())
            box = ValidityBox(self.mean.min(axis=0) - half, self.mean.max(axis=0) + half)
        self.box = box

    def potential(self, theta: np.ndarray) -> float:
        r = np.asarray(theta, dtype=float) - self.mean
        return float(np.sum(r * r / (2.0 * self.var)))

    def potential_with_derivatives(self, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        r = theta - self.mean
        g = float(np.sum(r * r / (2.0 * self.var)))
        grad = r / self.var
        hess = np.broadcast_to(1.0 / self.var, theta.shape).copy()
        return g, grad, hess

    def conditional_log_density(self, pixels, points, theta):
        pixels = np.asarray(pixels, dtype=np.intp)
        pts = np.asarray(points, dtype=float)
        r = pts - self.mean[pixels][:, None, :]
        return -np.sum(r * r / (2.0 * self.var[pixels][:, None, :]), axis=-1)
