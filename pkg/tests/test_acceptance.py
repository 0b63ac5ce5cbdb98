"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Every tolerance is pinned here; the unit modules carry the full-strength
versions of the numerical invariants.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps

from mixnoise.calibration import CalibrationConfig, calibrate_channel, default_a_grid, expected_ks
from mixnoise.cli import main
from mixnoise.diagnostics import count_marginal_modes, ess, mode_occupancy, summarize
from mixnoise.kernels import (
    HybridConfig,
    MtmConfig,
    PmalaConfig,
    drift_candidate,
    hybrid_sampler,
    preconditioner,
    rmsprop_update,
)
from mixnoise.likelihood import LikelihoodBlend, NoiseModel, additive_moments, log_likelihood_total
from mixnoise.priors import (
    ValidityBox,
    sample_smooth_indicator_1d,
    smooth_indicator_logpdf,
    uniform_section_weight,
)
from mixnoise.targets import (
    GaussianTarget,
    GmmPosterior,
    SensorPosterior,
    make_gmm_target,
    make_sensor_scene,
    make_synthetic_surrogate,
)

from conftest import central_diff


def report(name: str, ok: bool, detail: str = "") -> bool:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def thinned_ks_pvalue(x: np.ndarray, cdf) -> float:
    n_eff = ess(x)
    stride = max(1, int(np.ceil(x.size / n_eff)))
    return sps.kstest(x[::stride], cdf).pvalue


class TestExactSampler:
    def test_hybrid_exact_on_gaussians(self):
        t0 = time.perf_counter()
        results = []
        for dim, seed in ((1, 101), (2, 202)):
            model = GaussianTarget(mean=[np.zeros(dim)], var=1.0,
                                   box=ValidityBox(-8 * np.ones(dim), 8 * np.ones(dim)))
            cfg = HybridConfig(p_mtm=0.5, pmala=PmalaConfig(epsilon=1.0),
                               mtm=MtmConfig(n_candidates=6, proposal_delta=1e4),
                               iterations=100000, burn_in=1000)
            rec = hybrid_sampler(model, cfg, np.zeros((1, dim)), seed=seed)
            samples = rec.samples()
            for d in range(dim):
                x = samples[:, 0, d]
                n_eff = ess(x)
                mean_ok = abs(x.mean()) < 3.0 * x.std() / np.sqrt(n_eff)
                var_ok = abs(x.var() - 1.0) < 0.05
                p = thinned_ks_pvalue(x, "norm")
                results.append((dim, d, mean_ok, var_ok, p))
        elapsed = time.perf_counter() - t0
        ok = all(m and v and p > 0.01 for _, _, m, v, p in results) and elapsed < 120
        detail = "; ".join(f"{dim}D[{d}] ks_p={p:.3f}" for dim, d, _, _, p in results)
        assert report("exact-sampler (hybrid p=0.5 on Gaussians)", ok,
                      f"{detail}; runtime {elapsed:.0f}s < 120s")


class TestGmmReproduction:
    def test_gmm_desk(self):
        t0 = time.perf_counter()
        target = make_gmm_target()
        model = GmmPosterior(target)
        truth = target.mixture_mean().reshape(1, 2)
        theta0 = np.random.default_rng(5).uniform(-12, 12, (1, 2))

        cfg_hi = HybridConfig(p_mtm=0.9, pmala=PmalaConfig(epsilon=0.5),
                              mtm=MtmConfig(n_candidates=50, proposal_delta=1e4),
                              iterations=10000, burn_in=100)
        rec = hybrid_sampler(model, cfg_hi, theta0, seed=303)
        occ = mode_occupancy(rec, target.means, radius=2.0)
        stats = summarize(rec, truth=truth, box=target.box)
        acc = rec.acceptance_rate("mtm")

        cfg_lo = HybridConfig(p_mtm=0.1, pmala=PmalaConfig(epsilon=0.5),
                              mtm=MtmConfig(n_candidates=50, proposal_delta=1e4),
                              iterations=10000, burn_in=100)
        rec_lo = hybrid_sampler(model, cfg_lo, theta0, seed=303)
        stats_lo = summarize(rec_lo, box=target.box)
        elapsed = time.perf_counter() - t0

        modes_ok = np.all(occ[:-1] >= 0.02)
        bias_ok = stats.bias <= 0.2
        ess_ok = np.all(stats.ess >= 2000)
        acc_ok = abs(acc - 0.85) <= 0.05
        order_ok = stats_lo.ess.max() < stats.ess.min()
        ok = modes_ok and bias_ok and ess_ok and acc_ok and order_ok and elapsed < 300
        assert report(
            "gmm-desk (Table I analogue)", ok,
            f"min occupancy {occ[:-1].min():.3f} (>=0.02); bias {stats.bias:.3f} (<=0.2); "
            f"ESS {stats.ess.min():.0f} (>=2000); mtm acc {acc:.3f} (0.85±0.05); "
            f"p=0.1 ESS {stats_lo.ess.max():.0f} < p=0.9 ESS; runtime {elapsed:.0f}s < 300s",
        )


class TestSensorReproduction:
    def test_sensors_desk(self):
        t0 = time.perf_counter()
        scene = make_sensor_scene()
        model = SensorPosterior(scene)
        cfg = HybridConfig(p_mtm=0.9, pmala=PmalaConfig(epsilon=3e-3),
                           mtm=MtmConfig(n_candidates=1000, proposal_delta=1e4),
                           iterations=30000, burn_in=5000)
        rng = np.random.default_rng(999)
        from mixnoise.priors import sample_smooth_uniform_box

        theta0 = sample_smooth_uniform_box(model.box, 1e4, rng, size=8)
        rec = hybrid_sampler(model, cfg, theta0, seed=606)
        stats = summarize(rec, truth=scene.positions_true, box=model.box)
        samples = rec.samples()
        modes = [count_marginal_modes(samples[:, n, :], model.box) for n in range(8)]
        multimodal = sum(m >= 2 for m in modes)
        elapsed = time.perf_counter() - t0
        ess_min = stats.per_dim["ess_min"]
        ess_mean = stats.per_dim["ess_mean"]
        ok = multimodal >= 3 and ess_min >= 100 and ess_mean >= 1000 and elapsed < 1200
        assert report(
            "sensors-desk (Table II analogue)", ok,
            f"multimodal sensors {multimodal} (>=3, counts {modes}); min ESS {ess_min:.0f} (>=100); "
            f"mean ESS {ess_mean:.0f} (>=1000); runtime {elapsed:.0f}s < 1200s",
        )


class TestAstroExperiment:
    def test_astro_desk(self, tmp_path):
        t0 = time.perf_counter()
        out = str(tmp_path / "astro")
        assert main(["reproduce", "astro", "--out", out]) == 0
        stats = json.loads((Path(out) / "stats.json").read_text())
        split = stats["censorship_split"]
        rsnr_low = [v for v in split["rsnr_db_low"] if v is not None]
        ci_low = np.array(split["ci_rel_width_low"], dtype=float)
        ci_high = np.array(split["ci_rel_width_high"], dtype=float)
        elapsed = time.perf_counter() - t0

        rsnr_ok = len(rsnr_low) == 3 and all(v >= 10.0 for v in rsnr_low)
        ci_ok = float(ci_low.mean()) <= 25.0
        direction_ok = float(ci_high.mean()) > float(ci_low.mean())
        censor_frac = np.array(stats["censored_fraction"])
        populated = (censor_frac > 0.5).sum() >= 10 and (censor_frac <= 0.5).sum() >= 10
        ok = rsnr_ok and ci_ok and direction_ok and populated and elapsed < 1800
        assert report(
            "astro-desk (Table III analogue, property-based)", ok,
            f"low-censor R-SNR {[round(v, 1) for v in rsnr_low]} dB (all >=10); "
            f"mean CI width low {ci_low.mean():.1f}% (<=25%); high {ci_high.mean():.1f}% (> low); "
            f"runtime {elapsed:.0f}s < 1800s",
        )


class TestCalibrationCriterion:
    def test_three_synthetic_channels(self):
        t0 = time.perf_counter()
        channels = [
            NoiseModel(sigma_a=0.3, sigma_m=np.log(1.2), omega=-np.inf),
            NoiseModel(sigma_a=0.05, sigma_m=np.log(1.35), omega=-np.inf),
            NoiseModel(sigma_a=1.5, sigma_m=np.log(1.1), omega=-np.inf),
        ]
        margins = []
        for i, noise in enumerate(channels):
            z_star = float(np.log(noise.sigma_a) - 0.5 * np.log(np.expm1(noise.sigma_m**2)))
            z_grid = np.linspace(z_star - 2.5, z_star + 2.5, 12)
            grid = default_a_grid(z_grid[0], z_grid[-1], n_values=9)
            cfg = CalibrationConfig(m_samples=6000, z_grid=z_grid,
                                    z_density=np.full(12, 1 / 12), a_grid=grid)
            res = calibrate_channel(cfg, noise, np.random.default_rng(40 + i))
            corner_rng = np.random.default_rng(900 + i)
            add_corner = grid[np.argmax(grid[:, 0])]
            mult_corner = grid[np.argmin(grid[:, 1])]
            phi_add = expected_ks(add_corner, cfg, noise, rng=corner_rng)
            phi_mult = expected_ks(mult_corner, cfg, noise, rng=np.random.default_rng(901 + i))
            slack = 2 * res.se_bound
            margins.append((res.phi, phi_add, phi_mult, slack))
        elapsed = time.perf_counter() - t0
        ok = all(phi <= pa + s and phi <= pm + s for phi, pa, pm, s in margins) and elapsed < 600
        detail = "; ".join(
            f"ch{i}: phi*={phi:.4f} vs add {pa:.4f} / mult {pm:.4f}"
            for i, (phi, pa, pm, _) in enumerate(margins)
        )
        assert report("calibration (Appendix A analogue)", ok,
                      f"{detail}; runtime {elapsed:.0f}s < 600s")


class TestNumericalInvariants:
    def test_invariant_suites(self, rng):
        t0 = time.perf_counter()
        noise = NoiseModel(sigma_a=0.5, sigma_m=np.log(1.15), omega=0.8)
        fm = make_synthetic_surrogate(3, 4, (-2.0, 1.0), rng,
                                      box=ValidityBox(-np.ones(3), np.ones(3)), degree=3)
        blend = LikelihoodBlend(np.array([[-2.0, 0.0], [-1.0, 1.5], [0.0, 0.5], [-3.0, 3.0]]))
        grad_ok = True
        for _ in range(25):
            theta = rng.uniform(-0.7, 0.7, 3)
            c = (rng.random(4) < 0.4).astype(int)
            f = np.exp(fm.log_values(theta[None, :])[0])
            y = np.where(c, 0.0, f * rng.lognormal(0, 0.2, 4) + np.abs(rng.normal(0, 0.3, 4)) + 1e-6)
            val, grad, hess = log_likelihood_total(theta, y, c, fm, noise, blend)
            fd = central_diff(lambda th: log_likelihood_total(th, y, c, fm, noise, blend)[0], theta, 1e-6)
            grad_ok &= np.allclose(grad, fd, rtol=1e-4, atol=1e-6)
            for i in range(3):
                h = 2e-4 * (1 + abs(theta[i]))
                up, dn = theta.copy(), theta.copy()
                up[i] += h
                dn[i] -= h
                fd2 = (log_likelihood_total(up, y, c, fm, noise, blend)[0] - 2 * val
                       + log_likelihood_total(dn, y, c, fm, noise, blend)[0]) / h**2
                grad_ok &= np.isclose(hess[i], fd2, rtol=1e-3, atol=5e-4)

        # drift oracle: gamma equals half the preconditioner derivative
        model = GmmPosterior(make_gmm_target())
        drift_ok = True
        v_prev = rng.uniform(0.5, 5.0, (1, 2))
        for _ in range(10):
            theta = rng.uniform(-11, 11, (1, 2))
            _, grad, hess = model.potential_with_derivatives(theta)
            v_new = rmsprop_update(v_prev, grad, 0.93)
            gamma = drift_candidate(grad, hess, v_new, 0.93, 1e-5)
            for i in range(2):
                h = 1e-6 * (1 + abs(theta[0, i]))
                vals = []
                for sign in (1, -1):
                    t2 = theta.copy()
                    t2[0, i] += sign * h
                    _, g2, _ = model.potential_with_derivatives(t2)
                    vals.append(preconditioner(rmsprop_update(v_prev, g2, 0.93), 1e-5)[0, i])
                fd = 0.5 * (vals[0] - vals[1]) / (2 * h)
                drift_ok &= np.isclose(gamma[0, i], fd, rtol=1e-3, atol=1e-10)

        # moment-matching Monte Carlo oracle at 3 standard errors
        moment_ok = True
        for f, sa, sm in ((0.01, 0.3, 0.25), (1.0, 0.5, 0.3), (100.0, 1.0, 0.15)):
            n = 10**7
            y = (rng.lognormal(-0.5 * sm**2, sm, n) * f + rng.normal(0, sa, n))
            _, s_a2 = additive_moments(f, NoiseModel(sa, sm, 0.0))
            m4 = np.mean((y - y.mean()) ** 4)
            se_var = np.sqrt(max(m4 - y.var() ** 2, 0.0) / n)
            se_mean = y.std() / np.sqrt(n)
            moment_ok &= abs(y.mean() - f) < 3 * se_mean
            moment_ok &= abs(y.var() - s_a2) < 3 * se_var

        # smooth-indicator sampler total variation < 0.01
        delta, lo, hi = 500.0, -1.0, 1.0
        draws = sample_smooth_indicator_1d(delta, lo, hi, rng, size=10**6)
        edges = np.linspace(lo - 1.0, hi + 1.0, 101)
        counts, _ = np.histogram(draws, bins=edges)
        fine = np.linspace(edges[0], edges[-1], 40001)
        dens = np.exp(smooth_indicator_logpdf(fine, delta, lo, hi))
        dens /= np.trapezoid(dens, fine)
        probs = np.array([
            np.trapezoid(dens[(fine >= a) & (fine <= b)], fine[(fine >= a) & (fine <= b)])
            for a, b in zip(edges[:-1], edges[1:])
        ])
        tv = 0.5 * np.abs(counts / counts.sum() - probs / probs.sum()).sum()
        tv_ok = tv < 0.01

        # AR(1) effective-sample-size consistency within 15%
        ess_ok = True
        for phi in (0.0, 0.3, 0.6, 0.9):
            gen = np.random.default_rng(100 + int(10 * phi))
            x = np.empty(100000)
            x[0] = gen.normal()
            innov = gen.normal(size=100000) * np.sqrt(1 - phi * phi)
            for i in range(1, 100000):
                x[i] = phi * x[i - 1] + innov[i]
            expected = 100000 * (1 - phi) / (1 + phi)
            ess_ok &= abs(ess(x) - expected) / expected < 0.15

        elapsed = time.perf_counter() - t0
        ok = grad_ok and drift_ok and moment_ok and tv_ok and ess_ok and elapsed < 300
        assert report(
            "numerical-invariants", ok,
            f"gradients {grad_ok}; drift oracle {drift_ok}; moments {moment_ok}; "
            f"smooth-indicator TV {tv:.4f} (<0.01); AR(1) ESS {ess_ok}; runtime {elapsed:.0f}s < 300s",
        )


class TestDeterminism:
    def test_pipeline_and_parallel_determinism(self, tmp_path):
        fast = [
            "--seed", "321",
            "--set", "astro.height=3", "--set", "astro.width=3",
            "--set", "iterations=150", "--set", "burn_in=30",
            "--set", "mtm.n_candidates=6",
            "--set", "calibration.m_samples=1500", "--set", "calibration.s_bins=10",
            "--set", "calibration.n_grid=4", "--set", "calibration.kde_samples=1500",
        ]
        outs = [str(tmp_path / x) for x in ("a", "b")]
        for out in outs:
            assert main(["reproduce", "astro", "--out", out, *fast]) == 0
        files = ["observations.csv", "truth.csv", "blend.json", "chain.csv", "events.csv", "stats.json"]
        bitwise = all(
            (Path(outs[0]) / f).read_bytes() == (Path(outs[1]) / f).read_bytes() for f in files
        )

        from mixnoise.targets import astro_posterior, make_astro_scene
        from mixnoise.targets.astro import default_blend_for_noise

        scene = make_astro_scene(height=3, width=4, seed=6)
        blend = default_blend_for_noise(scene.obs.noise, 10)
        model = astro_posterior(scene.obs, scene.surrogate, blend, scene.prior)
        theta0 = np.tile(model.box.center(), (12, 1))
        base = dict(p_mtm=1.0, pmala=PmalaConfig(epsilon=1e-3),
                    mtm=MtmConfig(n_candidates=7, proposal="neighbor-subset-mixture"),
                    iterations=50, burn_in=5)
        rec_par = hybrid_sampler(model, HybridConfig(parallel=True, **base), theta0, seed=31)
        rec_seq = hybrid_sampler(model, HybridConfig(parallel=False, **base), theta0, seed=31)
        chromatic = np.array_equal(rec_par.thetas, rec_seq.thetas)

        ok = bitwise and chromatic
        assert report("determinism", ok,
                      f"pipeline bitwise {bitwise}; chromatic-parallel == sequential {chromatic}")
