"""Experiment command line: generate, calibrate, sample, diagnose, reproduce.

Each command reads and writes plain files in the output directory so stages
compose: reproduce <experiment> simply chains the four stages with a preset.
Exit codes: 0 ok, 1 configuration error, 2 numerical failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import calibration as calib
from . import diagnostics as diag
from .config import ExperimentConfig, apply_overrides, preset
from .errors import ConfigurationError, NumericalError
from .kernels import hybrid_sampler
from .likelihood import LikelihoodBlend
from .priors import sample_smooth_uniform_box
from .records import ChainRecord
from .targets import (
    GmmPosterior,
    SensorPosterior,
    astro_posterior,
    default_blend_for_noise,
    load_gmm_target,
    load_observations,
    load_sensor_scene,
    load_surrogate_csv,
    make_astro_scene,
    make_gmm_target,
    make_sensor_scene,
    save_gmm_target,
    save_observations,
    save_sensor_scene,
    save_surrogate_csv,
)
from .targets.astro import AstroScene
from .priors import PriorConfig, ValidityBox
from .graphs import grid_graph


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_astro_scene(cfg: ExperimentConfig) -> AstroScene:
    a = cfg.astro
    return make_astro_scene(
        height=a.height, width=a.width, dim=a.dim, n_channels=a.channels,
        decade_span=(a.decade_lo, a.decade_hi), sigma_m=a.sigma_m, sigma_a=a.sigma_a,
        censor_quantile=a.censor_quantile, tau=tuple(a.tau), delta=a.delta,
        seed=a.scene_seed, truth_span=a.truth_span,
    )


def cmd_generate(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    cfg.save(out / "run_config.yaml")
    if cfg.experiment == "gmm":
        target = make_gmm_target(n_modes=cfg.gmm.n_modes, seed=cfg.gmm.layout_seed)
        save_gmm_target(out / "gmm_target.json", target)
        print(f"generate: density-only target, no observations ({cfg.gmm.n_modes} modes)")
        return 0
    if cfg.experiment == "sensors":
        scene = make_sensor_scene(
            n_unknown=cfg.sensors.n_unknown, seed=cfg.sensors.scene_seed,
            comm_radius=cfg.sensors.comm_radius, sigma_eps=cfg.sensors.sigma_eps,
        )
        save_sensor_scene(out / "sensor_scene.json", scene)
        n_obs = len(scene.observed_pairs())
        print(f"generate: sensor scene with {n_obs} observed pairs")
        return 0
    if cfg.experiment == "astro":
        scene = _build_astro_scene(cfg)
        save_surrogate_csv(out / "surrogate.csv", scene.surrogate)
        np.savetxt(out / "truth.csv", scene.theta_true, delimiter=",", fmt="%.17g")
        save_observations(
            out, scene.obs,
            extra_meta={
                "box_lower": scene.box.lower.tolist(), "box_upper": scene.box.upper.tolist(),
                "grid_height": scene.grid_shape[0], "grid_width": scene.grid_shape[1],
                "tau": scene.prior.tau.tolist(), "delta": scene.prior.delta,
                "scene_seed": scene.seed, "surrogate_file": "surrogate.csv",
            },
        )
        frac = scene.censored_fraction()
        print(f"generate: {scene.obs.y.shape} observations, censored fraction "
              f"{scene.obs.c.mean():.2f} (pixels >50%: {(frac > 0.5).sum()})")
        return 0
    raise ConfigurationError("generate supports gmm, sensors, astro")


def cmd_calibrate(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    if cfg.experiment in ("gmm", "sensors"):
        print(f"calibrate: skipped for {cfg.experiment} (no noise-blend likelihood)")
        return 0
    obs, meta = load_observations(out)
    box = ValidityBox(np.asarray(meta["box_lower"]), np.asarray(meta["box_upper"]))
    fm = load_surrogate_csv(out / meta["surrogate_file"], box)
    c = cfg.calibration
    t0 = time.perf_counter()
    blend, results = calib.calibrate_blend(
        fm, obs.noise, seed=cfg.calibration_seed(), m_samples=c.m_samples, s_bins=c.s_bins,
        n_grid=c.n_grid, kde_samples=c.kde_samples, delta=meta["delta"],
    )
    calib.save_calibration_json(
        out / "blend.json", results,
        meta={"m_samples": c.m_samples, "s_bins": c.s_bins, "seed": cfg.calibration_seed()},
    )
    print(f"calibrate: {fm.n_channels} channels in {time.perf_counter() - t0:.1f}s; "
          f"phi range [{min(r.phi for r in results):.4f}, {max(r.phi for r in results):.4f}]")
    return 0


def _load_posterior(cfg: ExperimentConfig, out: Path):
    """Posterior model plus context (truth, extras) from generated artifacts."""
    if cfg.experiment == "gmm":
        target = load_gmm_target(out / "gmm_target.json")
        model = GmmPosterior(target)
        truth = target.mixture_mean().reshape(1, -1)
        return model, truth, {"target": target}
    if cfg.experiment == "sensors":
        scene = load_sensor_scene(out / "sensor_scene.json")
        model = SensorPosterior(scene)
        return model, scene.positions_true.copy(), {"scene": scene}
    if cfg.experiment == "astro":
        obs, meta = load_observations(out)
        box = ValidityBox(np.asarray(meta["box_lower"]), np.asarray(meta["box_upper"]))
        fm = load_surrogate_csv(out / meta["surrogate_file"], box)
        blend_path = out / "blend.json"
        if blend_path.exists():
            blend = calib.load_blend_json(blend_path)
            blend_source = "calibrated"
        else:
            blend = default_blend_for_noise(obs.noise, fm.n_channels)
            blend_source = "equal-variance-default"
        prior = PriorConfig(
            delta=float(meta["delta"]), tau=np.asarray(meta["tau"], dtype=float),
            graph=grid_graph(int(meta["grid_height"]), int(meta["grid_width"])),
        )
        model = astro_posterior(obs, fm, blend, prior)
        truth = np.loadtxt(out / "truth.csv", delimiter=",").reshape(model.n_components, model.dim)
        return model, truth, {"meta": meta, "blend_source": blend_source, "obs": obs}
    raise ConfigurationError("sample supports gmm, sensors, astro")


def _initial_point(cfg: ExperimentConfig, model) -> np.ndarray:
    if cfg.experiment == "astro":
        return np.tile(model.box.center(), (model.n_components, 1))
    rng = np.random.default_rng(cfg.chain_seed() ^ 0x1A17)
    return sample_smooth_uniform_box(model.box, 1e4, rng, size=model.n_components)


def cmd_sample(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    model, truth, extras = _load_posterior(cfg, out)
    theta0 = _initial_point(cfg, model)
    t0 = time.perf_counter()
    record = hybrid_sampler(
        model, cfg.hybrid_config(), theta0, seed=cfg.chain_seed(),
        checkpoint_path=out / "checkpoint.npz",
        meta={
            "experiment": cfg.experiment, "scale": cfg.scale, "config": cfg.to_dict(),
            "blend_source": extras.get("blend_source"), "initial_point": "box-center"
            if cfg.experiment == "astro" else "smooth-uniform-prior-draw",
        },
    )
    record.meta["elapsed_s"] = time.perf_counter() - t0
    record.save(out, layout=cfg.record_layout)
    print(
        f"sample: {record.iterations} iterations in {record.meta['elapsed_s']:.1f}s; "
        f"kernels mtm={record.kernel_fraction('mtm'):.3f}; "
        f"acceptance pmala={record.acceptance_rate('pmala'):.3f} "
        f"mtm={record.acceptance_rate('mtm'):.3f}"
    )
    return 0


def cmd_diagnose(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    model, truth, extras = _load_posterior(cfg, out)
    record = ChainRecord.load(out)
    stats = diag.summarize(record, truth=truth, box=model.box)
    extra_payload: dict = {"experiment": cfg.experiment}
    if cfg.experiment == "gmm":
        target = extras["target"]
        occ = diag.mode_occupancy(record, target.means, radius=cfg.gmm.mode_radius)
        stats.mode_occupancy = occ
        diag.write_gmm_table(out / "table_gmm.csv", stats, occ)
    elif cfg.experiment == "sensors":
        diag.write_sensor_table(out / "table_sensors.csv", stats)
    elif cfg.experiment == "astro":
        censor_frac = extras["obs"].censored_fraction()
        split = diag.censorship_split(stats, truth, censor_frac)
        extra_payload["censorship_split"] = split
        extra_payload["censored_fraction"] = censor_frac.tolist()
        extra_payload["grid_height"] = extras["meta"]["grid_height"]
        extra_payload["grid_width"] = extras["meta"]["grid_width"]
        extra_payload["truth"] = truth.tolist()
        diag.write_astro_table(out / "table_astro.csv", stats, split)
    extra_payload["acceptance"] = {
        "pmala": record.acceptance_rate("pmala"), "mtm": record.acceptance_rate("mtm"),
        "mtm_fraction": record.kernel_fraction("mtm"),
    }
    diag.save_stats_json(out / "stats.json", stats, extra=extra_payload)
    ess_min = stats.per_dim["ess_min"]
    print(f"diagnose: ess_min={ess_min:.0f} ess_mean={stats.per_dim['ess_mean']:.0f}"
          + (f" bias={stats.bias:.4f}" if stats.bias is not None else ""))
    return 0


def cmd_reproduce(cfg: ExperimentConfig) -> int:
    for step in (cmd_generate, cmd_calibrate, cmd_sample, cmd_diagnose):
        code = step(cfg)
        if code != 0:
            return code
    return 0


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="mixnoise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "calibrate", "sample", "diagnose"):
        p = sub.add_parser(name)
        _common_flags(p)
    p = sub.add_parser("reproduce")
    p.add_argument("experiment", choices=("gmm", "sensors", "astro"))
    _common_flags(p)
    return parser.parse_args(argv)


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--experiment", default=None, dest="experiment_flag",
                   choices=("gmm", "sensors", "astro", "custom"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--scale", choices=("desk", "paper"), default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override any config field by dotted path")


def _resolve_config(args) -> ExperimentConfig:
    experiment = getattr(args, "experiment", None) or getattr(args, "experiment_flag", None)
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if experiment and experiment != cfg.experiment:
            raise ConfigurationError("experiment in config file conflicts with the command line")
    else:
        cfg = preset(experiment or "gmm", getattr(args, "scale", None) or "desk")
    if args.scale:
        cfg.scale = args.scale
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    return cfg


def main(argv=None) -> int:
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        cfg = _resolve_config(args)
        command = {
            "generate": cmd_generate, "calibrate": cmd_calibrate, "sample": cmd_sample,
            "diagnose": cmd_diagnose, "reproduce": cmd_reproduce,
        }[args.command]
        return command(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
