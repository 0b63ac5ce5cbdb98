"""Abstract interfaces shared by all experiment posteriors.

A PosteriorModel wraps the negative log posterior ``g`` of an N-component
latent array (components are "pixels" in the imaging experiments). Kernels
need three things from it: ``g`` with derivatives for the Langevin kernel,
cheap per-component conditional log-densities for the multiple-try kernel,
and the conditional-dependence graph for the chromatic schedule.
"""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..graphs import NeighborGraph, complete_graph, empty_graph
from ..priors import ValidityBox


class ForwardModel(ABC):
    """Per-channel log forward values with first and diagonal second derivatives."""

    n_channels: int
    box: ValidityBox

    @abstractmethod
    def log_values(self, points: np.ndarray) -> np.ndarray:
        """(P, D) points -> (P, L) log forward values."""

    @abstractmethod
    def log_values_and_derivatives(self, points: np.ndarray):
        """(P, D) points -> ((P, L) values, (P, L, D) grads, (P, L, D) second diag)."""


class FiniteDifferenceHessian(ForwardModel):
    """Wraps a forward model whose second derivatives are unavailable.

    The Hessian diagonal is filled by central differences of the gradient
    with step 1e-5 * (1 + |theta_d|) per coordinate.
    """

    def __init__(self, inner: ForwardModel):
        self.inner = inner
        self.n_channels = inner.n_channels
        self.box = inner.box

    def log_values(self, points):
        return self.inner.log_values(points)

    def log_values_and_derivatives(self, points):
        points = np.asarray(points, dtype=float)
        vals, grads, _ = self.inner.log_values_and_derivatives(points)
        hess = np.empty_like(grads)
        for d in range(points.shape[1]):
            h = 1e-5 * (1.0 + np.abs(points[:, d]))
            up = points.copy()
            up[:, d] += h
            dn = points.copy()
            dn[:, d] -= h
            _, gu, _ = self.inner.log_values_and_derivatives(up)
            _, gd, _ = self.inner.log_values_and_derivatives(dn)
            hess[:, :, d] = (gu[:, :, d] - gd[:, :, d]) / (2.0 * h)[:, None]
        return vals, grads, hess


class PosteriorModel(ABC):
    """Negative log posterior over an (N, D) latent array."""

    n_components: int
    dim: int
    box: ValidityBox | None = None
    graph: NeighborGraph | None = None

    @abstractmethod
    def potential(self, theta: np.ndarray) -> float:
        """g(theta), the negative log posterior up to an additive constant."""

    @abstractmethod
    def potential_with_derivatives(self, theta: np.ndarray):
        """-> (g, grad (N, D), hess_diag (N, D))."""

    @abstractmethod
    def conditional_log_density(self, pixels: np.ndarray, points: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Unnormalized log conditional of each listed component.

        ``pixels`` is (P,) indices, ``points`` is (P, K, D) trial values, and
        ``theta`` the full current state; returns (P, K). Constant offsets
        (in theta_{\\ n}) are allowed; multiple-try weights cancel them.
        """

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.potential_with_derivatives(theta)[1]

    def dependence_graph(self) -> NeighborGraph:
        if self.graph is not None:
            return self.graph
        if self.n_components == 1:
            return empty_graph(1)
        return complete_graph(self.n_components)
