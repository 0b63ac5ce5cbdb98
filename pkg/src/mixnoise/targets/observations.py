"""Synthetic observation generation under the censored mixed-noise model."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..likelihood import NoiseModel
from .base import ForwardModel


@dataclass
class ObservationSet:
    """(N, L) observations with censor mask and the noise model that made them."""

    y: np.ndarray
    c: np.ndarray
    noise: NoiseModel

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=bool))
        if self.y.shape != self.c.shape:
            raise ConfigurationError("observations and censor mask must share a shape")

    @property
    def n_components(self) -> int:
        return self.y.shape[0]

    @property
    def n_channels(self) -> int:
        return self.y.shape[1]

    def censored_fraction(self) -> np.ndarray:
        """Per-component fraction of censored channels."""
        return self.c.mean(axis=1)


def generate_observations(
    theta_true: np.ndarray, fm: ForwardModel, noise: NoiseModel, rng: np.random.Generator
) -> ObservationSet:
    """Draw y = max(omega, e_m * f + e_a) with the censor flag set where the max binds."""
    theta_true = np.atleast_2d(np.asarray(theta_true, dtype=float))
    f = np.exp(fm.log_values(theta_true))
    sm = noise.sigma_m
    eps_m = rng.lognormal(mean=-0.5 * sm * sm, sigma=sm, size=f.shape) if sm > 0 else np.ones_like(f)
    eps_a = rng.normal(0.0, noise.sigma_a, size=f.shape) if noise.sigma_a > 0 else np.zeros_like(f)
    raw = eps_m * f + eps_a
    c = noise.omega >= raw
    y = np.where(c, noise.omega, raw)
    return ObservationSet(y=y, c=c, noise=noise)


def save_observations(directory, obs: ObservationSet, extra_meta: dict | None = None) -> None:
    """observations.csv rows (n, l, y, c) plus a metadata JSON alongside."""
    directory = Path(directory)
    with open(directory / "observations.csv", "w", encoding="utf-8") as fh:
        fh.write("n,l,y,c\n")
        for n in range(obs.n_components):
            for ell in range(obs.n_channels):
                fh.write(f"{n},{ell},{format(obs.y[n, ell], '.17g')},{int(obs.c[n, ell])}\n")
    meta = {
        "sigma_a": obs.noise.sigma_a,
        "sigma_m": obs.noise.sigma_m,
        "omega": obs.noise.omega,
        "n_components": obs.n_components,
        "n_channels": obs.n_channels,
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(directory / "observations_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_observations(directory) -> tuple[ObservationSet, dict]:
    directory = Path(directory)
    with open(directory / "observations_meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    data = np.genfromtxt(directory / "observations.csv", delimiter=",", names=True)
    n, l = int(meta["n_components"]), int(meta["n_channels"])
    y = np.zeros((n, l))
    c = np.zeros((n, l), dtype=bool)
    y[np.asarray(data["n"], dtype=int), np.asarray(data["l"], dtype=int)] = data["y"]
    c[np.asarray(data["n"], dtype=int), np.asarray(data["l"], dtype=int)] = data["c"] > 0.5
    noise = NoiseModel(sigma_a=meta["sigma_a"], sigma_m=meta["sigma_m"], omega=meta["omega"])
    return ObservationSet(y=y, c=c, noise=noise), meta
