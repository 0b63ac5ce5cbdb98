"""Full-scale astro pilot: calibrate, sample, summarize, report criteria margins."""
import time

import numpy as np

from mixnoise.calibration import calibrate_blend
from mixnoise.diagnostics import censorship_split, summarize
from mixnoise.kernels import HybridConfig, MtmConfig, PmalaConfig, hybrid_sampler
from mixnoise.targets import astro_posterior, make_astro_scene

t0 = time.perf_counter()
scene = make_astro_scene()
print(f"scene: censored {scene.obs.c.mean():.3f}", flush=True)

blend, results = calibrate_blend(
    scene.surrogate, scene.obs.noise, seed=123, m_samples=8000, s_bins=30, n_grid=12, kde_samples=8000
)
print(f"calibration done in {time.perf_counter() - t0:.1f}s", flush=True)
for r in results[:3]:
    print(f"  a=({r.a0:.2f},{r.a1:.2f}) phi={r.phi:.4f}")

model = astro_posterior(scene.obs, scene.surrogate, blend, scene.prior)
theta0 = np.tile(model.box.center(), (scene.obs.n_components, 1))
cfg = HybridConfig(
    p_mtm=0.5,
    pmala=PmalaConfig(epsilon=1e-4, tune_step_size=True),
    mtm=MtmConfig(n_candidates=50, proposal="neighbor-subset-mixture"),
    iterations=10000,
    burn_in=1500,
)
t1 = time.perf_counter()
rec = hybrid_sampler(model, cfg, theta0, seed=77)
print(f"sampling done in {time.perf_counter() - t1:.1f}s; eps={rec.meta['pmala']['epsilon_final']:.3g}", flush=True)
print(f"acc pmala={rec.acceptance_rate('pmala'):.3f} mtm={rec.acceptance_rate('mtm'):.3f}")
post = rec.kernels[cfg.burn_in:] == 0
print(f"post-burn pmala acc={rec.accepted[cfg.burn_in:][post].mean():.3f}")

stats = summarize(rec, truth=scene.theta_true, box=model.box)
split = censorship_split(stats, scene.theta_true, scene.censored_fraction())
print("per-dim rsnr:", np.round(stats.per_dim["rsnr_db"], 2))
print("rsnr low-censor:", [None if v is None else round(v, 2) for v in split["rsnr_db_low"]])
print("ci rel low:", [round(v, 2) for v in split["ci_rel_width_low"]])
print("ci rel high:", [round(v, 2) for v in split["ci_rel_width_high"]])
print("ess min/mean:", round(stats.per_dim["ess_min"]), round(stats.per_dim["ess_mean"]))
print(f"total {time.perf_counter() - t0:.1f}s")
