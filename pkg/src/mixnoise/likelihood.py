"""Blended surrogate log-likelihood for censored, mixed-noise observations.

An observation is ``y = max(omega, e_m * f + e_a)`` with additive Gaussian
noise e_a and unit-mean lognormal multiplicative noise e_m. The exact
density is intractable, so two moment-matched surrogates are blended: a
Gaussian ("additive regime", dominant at small f) and a lognormal
("multiplicative regime", dominant at large f), combined geometrically with
a C^2 weight ``lam(z)`` of the log forward value z = log f. Censored
entries contribute the matching CDF evaluated at the sensitivity limit.

Everything here is an elementwise function of z; gradients with respect to
the latent parameters follow by the chain rule through the forward model.
All branch values and their first two z-derivatives are exact and
vectorized over arbitrary broadcastable shapes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import ConfigurationError, NumericalError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NoiseModel:
    """Known noise levels: additive std, lognormal log-scale std, censor level."""

    sigma_a: float
    sigma_m: float
    omega: float

    def __post_init__(self):
        if not (self.sigma_a >= 0 and np.isfinite(self.sigma_a)):
            raise ConfigurationError("sigma_a must be finite and nonnegative")
        if not (self.sigma_m >= 0 and np.isfinite(self.sigma_m)):
            raise ConfigurationError("sigma_m must be finite and nonnegative")
        if np.isnan(self.omega):
            raise ConfigurationError("omega must not be NaN")


@dataclass(frozen=True)
class LikelihoodBlend:
    """Per-channel regime-transition thresholds (a0, a1) in log-forward-model space."""

    a: np.ndarray  # (L, 2)

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.a, dtype=float))
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ConfigurationError("blend parameters must be (L, 2) pairs")
        if not np.all(arr[:, 0] < arr[:, 1]):
            raise ConfigurationError("each blend pair requires a0 < a1")
        object.__setattr__(self, "a", arr)

    @property
    def n_channels(self) -> int:
        return self.a.shape[0]

    @classmethod
    def uniform(cls, a0: float, a1: float, n_channels: int) -> "LikelihoodBlend":
        return cls(np.tile([a0, a1], (n_channels, 1)))


@dataclass(frozen=True)
class RegimeMoments:
    """Moment-matched surrogate parameters for one forward value."""

    m_a: float
    s_a2: float
    m_m: float
    s_m2: float


def additive_moments(f_val, noise: NoiseModel):
    """Gaussian-regime moments: mean shift 0, variance f^2(e^{sm^2}-1) + sa^2."""
    f = np.asarray(f_val, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("forward value must be finite")
    kappa = np.expm1(noise.sigma_m**2)
    s_a2 = f * f * kappa + noise.sigma_a**2
    return np.zeros_like(f) if f.ndim else 0.0, s_a2


def multiplicative_moments(f_val, noise: NoiseModel):
    """Lognormal-regime moments; s_m2 = -2 m_m keeps the error factor unit-mean."""
    f = np.asarray(f_val, dtype=float)
    if not np.all(np.isfinite(f) & (f > 0)):
        raise ValueError("forward value must be positive and finite")
    sm2 = noise.sigma_m**2
    m_m = -0.5 * (sm2 + np.log1p(noise.sigma_a**2 / (f * f * np.exp(sm2))))
    return m_m, -2.0 * m_m


def regime_moments(f_val: float, noise: NoiseModel) -> RegimeMoments:
    m_a, s_a2 = additive_moments(f_val, noise)
    m_m, s_m2 = multiplicative_moments(f_val, noise)
    return RegimeMoments(float(m_a), float(s_a2), float(m_m), float(s_m2))


# -- C^2 transition weight ----------------------------------------------------


def smoothstep_Q(u):
    """Quintic smoothstep u^3 (6u^2 - 15u + 10); defined on [0, 1] only."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("smoothstep argument outside [0, 1]")
    return u**3 * (6.0 * u * u - 15.0 * u + 10.0)


def blend_weight(z, a0, a1):
    """Transition weight lam(z) with its first two z-derivatives.

    lam = 0 for z <= a0, 1 for z >= a1, and the quintic smoothstep of
    (z - a0)/(a1 - a0) between; all three outputs are continuous.
    """
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    if not np.all(a0 < a1):
        raise ConfigurationError("blend weight requires a0 < a1")
    z = np.asarray(z, dtype=float)
    width = a1 - a0
    u = np.clip((z - a0) / width, 0.0, 1.0)
    lam = u**3 * (6.0 * u * u - 15.0 * u + 10.0)
    du = 30.0 * u * u * (u - 1.0) ** 2
    d2u = 60.0 * u * (2.0 * u - 1.0) * (u - 1.0)
    return lam, du / width, d2u / (width * width)


# -- branch values and z-derivatives ------------------------------------------


def _log_normal_terms(r, dr, d2r, s, ds, d2s, order: int = 2):
    """(value, d/dz, d2/dz2) of -(log(2 pi s))/2 - r^2/(2 s) for z-dependent r, s."""
    inv_s = 1.0 / s
    val = -0.5 * (LOG_2PI + np.log(s)) - r * r * (0.5 * inv_s)
    if order == 0:
        return val, None, None
    d1 = -ds * (0.5 * inv_s) - r * dr * inv_s + r * r * ds * (0.5 * inv_s * inv_s)
    d2 = (
        -(d2s * s - ds * ds) * (0.5 * inv_s * inv_s)
        - (dr * dr + r * d2r) * inv_s
        + r * dr * ds * (inv_s * inv_s)
        + (2.0 * r * dr * ds + r * r * d2s) * (0.5 * inv_s * inv_s)
        - r * r * ds * ds * (inv_s**3)
    )
    return val, d1, d2


def _log_cdf_terms(h, dh, d2h, order: int = 2):
    """(value, d/dz, d2/dz2) of log Phi(h(z)), stable far into the lower tail."""
    val = log_ndtr(h)
    if order == 0:
        return val, None, None
    # phi(h)/Phi(h), via logs so the ratio stays finite when Phi underflows
    ratio = np.exp(-0.5 * h * h - 0.5 * LOG_2PI - val)
    dratio = -h * ratio - ratio * ratio
    return val, ratio * dh, dratio * dh * dh + ratio * d2h


@dataclass(frozen=True)
class ChannelTerms:
    """Per-entry blended log-likelihood and its first two z-derivatives."""

    value: np.ndarray
    dz: np.ndarray
    d2z: np.ndarray
    lam: np.ndarray


def blended_channel_terms(y, c, z, noise: NoiseModel, a0, a1, order: int = 2) -> ChannelTerms:
    """Blended censored log-likelihood of broadcastable (y, c, z) arrays.

    ``order`` 0 skips derivative work (candidate scoring); 2 returns exact
    first and second z-derivatives for the Langevin kernel.
    Entries with zero density (lognormal branch at y <= 0, or a censored
    multiplicative branch with omega <= 0) come back as -inf with zero
    derivatives.
    """
    y = np.asarray(y, dtype=float)
    c = np.asarray(c)
    z = np.asarray(z, dtype=float)
    censored = c.astype(bool)

    lam, dlam, d2lam = blend_weight(z, a0, a1)
    sa2 = noise.sigma_a**2
    sm2 = noise.sigma_m**2
    kappa = np.expm1(sm2)

    with np.errstate(all="ignore"):
        f = np.exp(z)
        # additive-regime variance and its derivatives
        kf2 = kappa * f * f
        s = kf2 + sa2
        ds = 2.0 * kf2
        d2s = 4.0 * kf2
        # multiplicative-regime log-moments
        t = sa2 * np.exp(-sm2 - 2.0 * z)
        w = t / (1.0 + t)
        q = sm2 + np.log1p(t)
        dq = -2.0 * w
        d2q = 4.0 * w * (1.0 - w)
        m_m = -0.5 * q
        mu = z + m_m  # lognormal log-mean; dmu = 1 + w, d2mu = -2 w (1 - w)
        dmu = 1.0 + w
        d2mu = -2.0 * w * (1.0 - w)

        if np.any((s <= 0) | (q <= 0)):
            raise NumericalError("degenerate surrogate variance; need sigma_a or sigma_m > 0")

        # additive branch: Gaussian in y
        A, dA, d2A = _log_normal_terms(y - f, -f, -f, s, ds, d2s, order)

        # multiplicative branch: lognormal in y (guard y <= 0)
        y_ok = y > 0
        y_safe = np.where(y_ok, y, 1.0)
        log_y = np.log(y_safe)
        M, dM, d2M = _log_normal_terms(log_y - mu, -dmu, -d2mu, q, dq, d2q, order)
        M = M - log_y

        # censored branches: log CDFs at the sensitivity limit
        sqrt_s = np.sqrt(s)
        rw = noise.omega - f
        h = rw / sqrt_s
        if order:
            dh = -f / sqrt_s - 0.5 * rw * ds / (s * sqrt_s)
            d2h = (
                -f / sqrt_s
                + f * ds / (s * sqrt_s)
                + rw * (0.75 * ds * ds / (s * s * sqrt_s) - 0.5 * d2s / (s * sqrt_s))
            )
        else:
            dh = d2h = None
        CA, dCA, d2CA = _log_cdf_terms(h, dh, d2h, order)

        omega_ok = noise.omega > 0
        log_omega = np.log(noise.omega) if omega_ok else 0.0
        sqrt_q = np.sqrt(q)
        rq = log_omega - mu
        k = rq / sqrt_q
        if order:
            dk = -dmu / sqrt_q - 0.5 * rq * dq / (q * sqrt_q)
            d2k = (
                -d2mu / sqrt_q
                + dmu * dq / (q * sqrt_q)
                + rq * (0.75 * dq * dq / (q * q * sqrt_q) - 0.5 * d2q / (q * sqrt_q))
            )
        else:
            dk = d2k = None
        CM, dCM, d2CM = _log_cdf_terms(k, dk, d2k, order)
        if not omega_ok:
            CM = np.full_like(CM, -np.inf)
            if order:
                dCM = np.zeros_like(dCM)
                d2CM = np.zeros_like(d2CM)

        low = lam <= 0.0
        high = lam >= 1.0

        def combine(base, alt, dbase, dalt, d2base, d2alt):
            mid_v = (1.0 - lam) * base + lam * alt
            v = np.where(low, base, np.where(high, alt, mid_v))
            if order == 0:
                zero = np.zeros_like(v)
                return v, zero, zero
            mid_d = (1.0 - lam) * dbase + lam * dalt + dlam * (alt - base)
            d = np.where(low, dbase, np.where(high, dalt, mid_d))
            mid_d2 = (
                (1.0 - lam) * d2base
                + lam * d2alt
                + 2.0 * dlam * (dalt - dbase)
                + d2lam * (alt - base)
            )
            d2 = np.where(low, d2base, np.where(high, d2alt, mid_d2))
            return v, d, d2

        vu, du, d2u = combine(A, M, dA, dM, d2A, d2M)
        vc, dc, d2c = combine(CA, CM, dCA, dCM, d2CA, d2CM)

        value = np.where(censored, vc, vu)
        dz_out = np.where(censored, dc, du)
        d2z_out = np.where(censored, d2c, d2u)

        # zero-density and non-finite entries: value -inf, flat derivatives
        dead = (~censored) & (~y_ok) & (lam > 0.0)
        value = np.where(dead, -np.inf, value)
        bad = ~np.isfinite(value)
        value = np.where(bad & ~(value == -np.inf), -np.inf, value)
        flat = dead | ~np.isfinite(value) | ~np.isfinite(dz_out) | ~np.isfinite(d2z_out)
        dz_out = np.where(flat, 0.0, dz_out)
        d2z_out = np.where(flat, 0.0, d2z_out)

    return ChannelTerms(value=value, dz=dz_out, d2z=d2z_out, lam=lam)


def log_likelihood_channel(y, c, log_f, dlog_f, d2log_f_diag, noise: NoiseModel, a_pair):
    """Single-channel blended log-likelihood with exact theta-derivatives.

    ``dlog_f`` and ``d2log_f_diag`` are the forward model's d log f / d theta
    and its diagonal second derivatives (D-vectors); the chain rule maps the
    z-derivatives onto them.
    """
    a0, a1 = float(a_pair[0]), float(a_pair[1])
    if not np.isfinite(log_f):
        raise ValueError("log forward value must be finite")
    terms = blended_channel_terms(y, c, log_f, noise, a0, a1)
    dlog_f = np.asarray(dlog_f, dtype=float)
    d2log_f_diag = np.asarray(d2log_f_diag, dtype=float)
    value = float(terms.value)
    grad = terms.dz * dlog_f
    hess_diag = terms.d2z * dlog_f * dlog_f + terms.dz * d2log_f_diag
    return value, grad, hess_diag


def log_likelihood_total(theta_n, y_n, c_n, fm, noise: NoiseModel, blend: LikelihoodBlend):
    """Sum of channel log-likelihoods for one component vector theta_n.

    ``fm`` is a ForwardModel handle exposing per-channel log values with
    first and diagonal second derivatives.
    """
    theta_n = np.asarray(theta_n, dtype=float)
    z, dz, d2z = fm.log_values_and_derivatives(theta_n[None, :])
    z, dz, d2z = z[0], dz[0], d2z[0]  # (L,), (L,D), (L,D)
    y_n = np.asarray(y_n, dtype=float)
    c_n = np.asarray(c_n)
    if y_n.shape != z.shape or c_n.shape != z.shape:
        raise ConfigurationError("observation vector length does not match channel count")
    terms = blended_channel_terms(y_n, c_n, z, noise, blend.a[:, 0], blend.a[:, 1])
    value = float(np.sum(terms.value))
    grad = terms.dz @ dz
    hess_diag = terms.d2z @ (dz * dz) + terms.dz @ d2z
    return value, grad, hess_diag
