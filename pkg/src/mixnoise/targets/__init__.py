from .base import FiniteDifferenceHessian, ForwardModel, PosteriorModel
from .surrogate import (
    PolynomialSurrogate,
    load_surrogate_csv,
    make_synthetic_surrogate,
    monomial_exponents,
    save_surrogate_csv,
)
from .observations import ObservationSet, generate_observations, load_observations, save_observations
from .gaussian import GaussianTarget
from .gmm import GmmPosterior, GmmTarget, gmm_log_density, load_gmm_target, make_gmm_target, save_gmm_target
from .sensors import (
    SensorPosterior,
    SensorScene,
    load_sensor_scene,
    make_sensor_scene,
    save_sensor_scene,
    sensor_neg_log_posterior,
)
from .astro import AstroPosterior, AstroScene, astro_posterior, default_blend_for_noise, make_astro_scene

__all__ = [
    "AstroPosterior",
    "AstroScene",
    "FiniteDifferenceHessian",
    "ForwardModel",
    "GaussianTarget",
    "GmmPosterior",
    "GmmTarget",
    "ObservationSet",
    "PolynomialSurrogate",
    "PosteriorModel",
    "SensorPosterior",
    "SensorScene",
    "astro_posterior",
    "default_blend_for_noise",
    "generate_observations",
    "gmm_log_density",
    "load_gmm_target",
    "load_observations",
    "load_sensor_scene",
    "load_surrogate_csv",
    "make_astro_scene",
    "make_gmm_target",
    "make_sensor_scene",
    "make_synthetic_surrogate",
    "monomial_exponents",
    "save_gmm_target",
    "save_observations",
    "save_sensor_scene",
    "save_surrogate_csv",
    "sensor_neg_log_posterior",
]
