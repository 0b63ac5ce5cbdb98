"""Sensor network localization: multimodal benchmark with censored distances.

Eight unknown positions and three anchors; channel l of component n is the
distance to sensor l. A pair communicates (and yields a noisy distance) with
probability exp(-d^2 / 2R^2); silence is informative and enters the
likelihood through -log(1 - exp(-d^2 / 2R^2)), penalizing proximity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..priors import ValidityBox, quartic_penalty
from .base import PosteriorModel

DEFAULT_SENSOR_SEED = 41
DIST_FLOOR = 1e-12


@dataclass
class SensorScene:
    """Ground truth, anchors, and the (N, N+3) observation matrix."""

    positions_true: np.ndarray  # (N, 2)
    anchors: np.ndarray  # (3, 2)
    y: np.ndarray  # (N, L)
    c: np.ndarray  # (N, L) bool
    comm_radius: float = 0.3
    sigma_eps: float = 0.02
    box: ValidityBox = field(default_factory=lambda: ValidityBox([-0.35, -0.35], [1.2, 1.2]))
    delta: float = 1e4

    def __post_init__(self):
        self.positions_true = np.atleast_2d(np.asarray(self.positions_true, dtype=float))
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=bool))
        n = self.positions_true.shape[0]
        l = n + self.anchors.shape[0]
        if self.y.shape != (n, l) or self.c.shape != (n, l):
            raise ConfigurationError("observation matrix must be (N, N + anchors)")

    @property
    def n_unknown(self) -> int:
        return self.positions_true.shape[0]

    @property
    def n_channels(self) -> int:
        return self.y.shape[1]

    def observed_pairs(self) -> list[tuple[int, int]]:
        """(n, l) channels with an uncensored observation, self channels excluded."""
        out = []
        for n in range(self.n_unknown):
            for ell in range(self.n_channels):
                if ell != n and not self.c[n, ell]:
                    out.append((n, ell))
        return out

    def to_dict(self) -> dict:
        return {
            "positions_true": self.positions_true.tolist(),
            "anchors": self.anchors.tolist(),
            "y": self.y.tolist(),
            "c": self.c.astype(int).tolist(),
            "comm_radius": self.comm_radius,
            "sigma_eps": self.sigma_eps,
            "box_lower": self.box.lower.tolist(),
            "box_upper": self.box.upper.tolist(),
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorScene":
        return cls(
            positions_true=np.asarray(d["positions_true"]),
            anchors=np.asarray(d["anchors"]),
            y=np.asarray(d["y"]),
            c=np.asarray(d["c"]) > 0,
            comm_radius=float(d["comm_radius"]),
            sigma_eps=float(d["sigma_eps"]),
            box=ValidityBox(np.asarray(d["box_lower"]), np.asarray(d["box_upper"])),
            delta=float(d["delta"]),
        )


def make_sensor_scene(
    n_unknown: int = 8,
    seed: int = DEFAULT_SENSOR_SEED,
    anchors: np.ndarray | None = None,
    comm_radius: float = 0.3,
    sigma_eps: float = 0.02,
    spread: float = 1.15,
) -> SensorScene:
    """Draw true positions over the working area and simulate the communication round."""
    rng = np.random.default_rng(seed)
    if anchors is None:
        anchors = np.array([[0.15, 0.10], [0.85, 0.20], [0.50, 0.90]])
    truth = rng.uniform(0.0, spread, size=(n_unknown, 2))
    pos = np.vstack([truth, anchors])
    l = pos.shape[0]
    y = np.zeros((n_unknown, l))
    c = np.ones((n_unknown, l), dtype=bool)
    for n in range(n_unknown):
        for ell in range(l):
            if ell == n:
                continue
            d = float(np.linalg.norm(truth[n] - pos[ell]))
            if rng.random() < np.exp(-(d * d) / (2.0 * comm_radius**2)):
                y[n, ell] = d + rng.normal(0.0, sigma_eps)
                c[n, ell] = False
    return SensorScene(
        positions_true=truth, anchors=anchors, y=y, c=c, comm_radius=comm_radius, sigma_eps=sigma_eps
    )


def _term_and_derivs(f: np.ndarray, y: np.ndarray, c: np.ndarray, scene: SensorScene, order: int = 1):
    """Per-channel negative log-likelihood terms T(f) with dT/df and d2T/df2."""
    r2 = scene.comm_radius**2
    se2 = scene.sigma_eps**2
    x = f * f / (2.0 * r2)
    with np.errstate(all="ignore"):
        one_minus_s = -np.expm1(-x)  # 1 - exp(-x), accurate near 0
        t_cens = -np.log(one_minus_s)
        t_obs = (f - y) ** 2 / (2.0 * se2) + x
        value = np.where(c, t_cens, t_obs)
        if order == 0:
            return value, None, None
        ratio = np.exp(-x) / one_minus_s  # s / (1 - s)
        d_cens = -(f / r2) * ratio
        d_obs = (f - y) / se2 + f / r2
        d1 = np.where(c, d_cens, d_obs)
        d2_cens = -ratio / r2 + (f * f / (r2 * r2)) * ratio * (1.0 + ratio)
        d2_obs = 1.0 / se2 + 1.0 / r2
        d2 = np.where(c, d2_cens, np.broadcast_to(d2_obs, f.shape))
    return value, d1, d2


def sensor_neg_log_posterior(theta: np.ndarray, scene: SensorScene):
    """Negative log posterior and its exact gradient for an (N, 2) position array."""
    value, grad, _ = _sensor_eval(theta, scene, order=1)
    return value, grad


def _sensor_eval(theta: np.ndarray, scene: SensorScene, order: int = 2):
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    n, l = scene.y.shape
    pos = np.vstack([theta, scene.anchors])  # (L, 2)
    diff = theta[:, None, :] - pos[None, :, :]  # (N, L, 2)
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    dist = np.maximum(dist, DIST_FLOOR)
    valid = ~np.eye(n, l, dtype=bool)

    t_val, t_d1, t_d2 = _term_and_derivs(dist, scene.y, scene.c, scene, order=order)
    qv, qg, qh = quartic_penalty(theta, scene.box)
    value = float(np.sum(np.where(valid, t_val, 0.0))) + scene.delta * qv
    if order == 0:
        return value, None, None

    unit = diff / dist[:, :, None]
    w1 = np.where(valid, t_d1, 0.0)
    grad = np.einsum("nl,nld->nd", w1, unit)
    # channels l < N touch the other endpoint with the opposite unit vector
    grad -= np.einsum("ml,mld->ld", w1[:, :n], unit[:, :n])
    grad += scene.delta * qg
    if order == 1:
        return value, grad, None

    w2 = np.where(valid, t_d2, 0.0)
    u2 = unit * unit
    curve = (1.0 - u2) / dist[:, :, None]  # d2 f / d theta_d^2, same at both endpoints
    hess = np.einsum("nl,nld->nd", w2, u2) + np.einsum("nl,nld->nd", w1, curve)
    hess += np.einsum("ml,mld->ld", w2[:, :n], u2[:, :n]) + np.einsum("ml,mld->ld", w1[:, :n], curve[:, :n])
    hess += scene.delta * qh
    return value, grad, hess


class SensorPosterior(PosteriorModel):
    """PosteriorModel adapter over a SensorScene; all sensors interact."""

    def __init__(self, scene: SensorScene):
        self.scene = scene
        self.n_components = scene.n_unknown
        self.dim = 2
        self.box = scene.box

    def potential(self, theta):
        return _sensor_eval(theta, self.scene, order=0)[0]

    def potential_with_derivatives(self, theta):
        return _sensor_eval(theta, self.scene, order=2)

    def conditional_log_density(self, pixels, points, theta):
        pixels = np.asarray(pixels, dtype=np.intp)
        pts = np.asarray(points, dtype=float)
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        scene = self.scene
        n = scene.n_unknown
        pos = np.vstack([theta, scene.anchors])
        out = np.empty(pts.shape[:-1])
        for row, pix in enumerate(pixels.tolist()):
            p = pts[row]  # (K, 2)
            diff = p[:, None, :] - pos[None, :, :]
            dist = np.maximum(np.sqrt(np.sum(diff * diff, axis=-1)), DIST_FLOOR)
            keep = np.ones(scene.n_channels, dtype=bool)
            keep[pix] = False
            # channels of this component
            tv, _, _ = _term_and_derivs(dist, scene.y[pix], scene.c[pix], scene, order=0)
            total = np.sum(tv[:, keep], axis=1)
            # this component seen as a channel of the other unknowns
            others = np.arange(n) != pix
            tv2, _, _ = _term_and_derivs(
                dist[:, :n][:, others], scene.y[others, pix], scene.c[others, pix], scene, order=0
            )
            total += np.sum(tv2, axis=1)
            e = np.maximum(p - scene.box.upper, 0.0) + np.maximum(scene.box.lower - p, 0.0)
            total += scene.delta * np.sum(e**4, axis=1)
            out[row] = -total
        return out


def save_sensor_scene(path, scene: SensorScene) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene.to_dict(), fh, indent=2)
        fh.write("\n")


def load_sensor_scene(path) -> SensorScene:
    with open(path, encoding="utf-8") as fh:
        return SensorScene.from_dict(json.load(fh))
