"""Experiment configuration: nested sections, YAML round trip, presets,
dotted-path command-line overrides."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError
from .kernels import HybridConfig, MtmConfig, PmalaConfig

EXPERIMENTS = ("gmm", "sensors", "astro", "custom")
SCALES = ("desk", "paper")

CHAIN_SEED_SALT = 0x00C4A17
CALIB_SEED_SALT = 0x0CA11B5


@dataclass
class GmmSettings:
    n_modes: int = 15
    layout_seed: int = 14
    delta: float = 1e4
    mode_radius: float = 2.0  # occupancy assignment radius


@dataclass
class SensorSettings:
    n_unknown: int = 8
    scene_seed: int = 41
    comm_radius: float = 0.3
    sigma_eps: float = 0.02


@dataclass
class AstroSettings:
    height: int = 16
    width: int = 16
    dim: int = 4
    channels: int = 10
    decade_lo: float = -18.0
    decade_hi: float = -2.0
    sigma_m: float = float(np.log(1.1))
    sigma_a: float | None = None  # None: set from censor_quantile
    censor_quantile: float = 0.40
    tau: list = field(default_factory=lambda: [10.0, 2.0, 3.0, 4.0])
    delta: float = 1e4
    truth_span: float = 0.75
    scene_seed: int = 90210


@dataclass
class CalibrationSettings:
    m_samples: int = 20000
    s_bins: int = 50
    n_grid: int = 20
    kde_samples: int = 20000


@dataclass
class ExperimentConfig:
    experiment: str = "gmm"
    scale: str = "desk"
    seed: int = 20240613
    out: str = "runs/latest"
    pmala: PmalaConfig = field(default_factory=lambda: PmalaConfig(epsilon=0.5))
    mtm: MtmConfig = field(default_factory=lambda: MtmConfig(n_candidates=50))
    hybrid: HybridConfig | None = None
    gmm: GmmSettings = field(default_factory=GmmSettings)
    sensors: SensorSettings = field(default_factory=SensorSettings)
    astro: AstroSettings = field(default_factory=AstroSettings)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    p_mtm: float = 0.9
    iterations: int = 10000
    burn_in: int = 100
    checkpoint_every: int = 1000
    parallel: bool = True
    record_layout: str = "flat"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}")
        if self.scale not in SCALES:
            raise ConfigurationError(f"scale must be one of {SCALES}")
        int(self.seed)

    def hybrid_config(self) -> HybridConfig:
        return HybridConfig(
            p_mtm=self.p_mtm, pmala=self.pmala, mtm=self.mtm, iterations=self.iterations,
            burn_in=self.burn_in, checkpoint_every=self.checkpoint_every, parallel=self.parallel,
            record_layout=self.record_layout,
        )

    def chain_seed(self) -> int:
        return int(self.seed) ^ CHAIN_SEED_SALT

    def calibration_seed(self) -> int:
        return int(self.seed) ^ CALIB_SEED_SALT

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("hybrid", None)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("hybrid", None)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        for key, sub in (
            ("pmala", PmalaConfig), ("mtm", MtmConfig), ("gmm", GmmSettings),
            ("sensors", SensorSettings), ("astro", AstroSettings), ("calibration", CalibrationSettings),
        ):
            if key in d and isinstance(d[key], dict):
                d[key] = sub(**d[key])
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        if not Path(path).exists():
            raise ConfigurationError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply repeatable --set key=value entries as dotted paths into the config."""
    d = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override must look like key=value, got {item!r}")
        path, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = d
        parts = path.strip().split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigurationError(f"unknown config section {part!r} in {path!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigurationError(f"unknown config key {path!r}")
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(d)


def preset(experiment: str, scale: str = "desk") -> ExperimentConfig:
    """Named experiment presets with the published sampler settings."""
    if experiment == "gmm":
        return ExperimentConfig(
            experiment="gmm", scale=scale,
            pmala=PmalaConfig(epsilon=0.5, alpha=0.99, eta=1e-5),
            mtm=MtmConfig(n_candidates=50, proposal="smooth-uniform-box", proposal_delta=1e4),
            p_mtm=0.9, iterations=10000, burn_in=100,
        )
    if experiment == "sensors":
        return ExperimentConfig(
            experiment="sensors", scale=scale,
            pmala=PmalaConfig(epsilon=3e-3, alpha=0.99, eta=1e-5),
            mtm=MtmConfig(n_candidates=1000, proposal="smooth-uniform-box", proposal_delta=1e4),
            p_mtm=0.9, iterations=30000, burn_in=5000,
        )
    if experiment == "astro":
        cfg = ExperimentConfig(
            experiment="astro", scale=scale,
            pmala=PmalaConfig(epsilon=1e-3, alpha=0.99, eta=1e-5),
            mtm=MtmConfig(n_candidates=50, proposal="neighbor-subset-mixture"),
            p_mtm=0.5, iterations=10000, burn_in=1500,
            calibration=CalibrationSettings(m_samples=8000, s_bins=30, n_grid=12, kde_samples=8000),
        )
        if scale == "paper":
            cfg.astro.height = cfg.astro.width = 64
            cfg.pmala = PmalaConfig(epsilon=1e-6, alpha=0.99, eta=1e-5, tune_step_size=False)
            cfg.calibration = CalibrationSettings(
                m_samples=250000, s_bins=100, n_grid=20, kde_samples=810000
            )
        return cfg
    if experiment == "custom":
        return ExperimentConfig(experiment="custom", scale=scale)
    raise ConfigurationError(f"unknown experiment {experiment!r}")
