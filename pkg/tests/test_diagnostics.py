"""ESS estimator, chain summaries, and mode occupancy."""
import numpy as np
import pytest
from scipy import stats as sps

from mixnoise.diagnostics import censorship_split, ess, mode_occupancy, summarize
from mixnoise.priors import ValidityBox
from mixnoise.records import ChainRecord


def ar1(phi, t, rng):
    x = np.empty(t)
    x[0] = rng.normal()
    innov = rng.normal(size=t) * np.sqrt(1 - phi * phi)
    for i in range(1, t):
        x[i] = phi * x[i - 1] + innov[i]
    return x


class TestEss:
    def test_iid_white_noise(self, rng):
        t = 100000
        x = rng.normal(size=t)
        assert ess(x) == pytest.approx(t, rel=0.10)

    def test_constant_chain(self):
        assert ess(np.full(5000, 1.7)) == 1.0

    def test_ar1_half(self):
        t = 100000
        x = ar1(0.5, t, np.random.default_rng(105))
        assert ess(x) == pytest.approx(t / 3.0, rel=0.10)

    @pytest.mark.parametrize("phi", [0.0, 0.3, 0.6, 0.9])
    def test_ar1_consistency(self, phi):
        t = 100000
        x = ar1(phi, t, np.random.default_rng(100 + int(10 * phi)))
        expected = t * (1 - phi) / (1 + phi)
        assert ess(x) == pytest.approx(expected, rel=0.15)

    def test_bounded_by_length(self, rng):
        x = -ar1(0.9, 2000, rng)  # strong negative autocorrelation after flip?
        assert 0 < ess(x) <= 2000


def make_record(samples, burn_in=0, seed=0):
    t, n, d = samples.shape
    thetas = np.concatenate([samples[:1], samples])
    return ChainRecord(
        thetas=thetas, kernels=np.zeros(t, dtype=np.int8),
        accepted=np.ones((t, n), dtype=bool), burn_in=burn_in, seed=seed,
    )


class TestSummarize:
    def test_constant_chain_at_truth(self):
        truth = np.array([[0.3, -1.0]])
        samples = np.tile(truth, (500, 1, 1))
        rec = make_record(samples)
        stats = summarize(rec, truth=truth, box=ValidityBox([-2.0, -2.0], [2.0, 2.0]))
        # the mean of 500 identical floats can differ from them by an ulp
        assert stats.mse == pytest.approx(0.0, abs=1e-28)
        assert stats.bias == pytest.approx(0.0, abs=1e-14)
        assert np.all(stats.ci_upper - stats.ci_lower == 0.0)

    def test_gaussian_quantile_oracle(self, rng):
        t = 40000
        samples = rng.normal(size=(t, 1, 1))
        stats = summarize(make_record(samples), box=ValidityBox([-6.0], [6.0]))
        for q, got in ((0.025, stats.ci_lower[0, 0]), (0.975, stats.ci_upper[0, 0])):
            target = sps.norm.ppf(q)
            se = np.sqrt(q * (1 - q) / t) / sps.norm.pdf(target)
            assert abs(got - target) < 3 * se

    def test_rsnr_definition(self, rng):
        truth = rng.normal(size=(4, 2))
        est = truth + 0.1
        samples = np.tile(est, (100, 1, 1))
        stats = summarize(make_record(samples), truth=truth)
        expected = 20 * np.log10(np.linalg.norm(truth) / np.linalg.norm(est - truth))
        assert stats.rsnr_db == pytest.approx(expected, rel=1e-12)
        assert stats.mse == pytest.approx(np.linalg.norm(est - truth) ** 2, rel=1e-12)

    def test_zero_truth_rsnr_undefined(self):
        truth = np.zeros((3, 1))
        samples = np.random.default_rng(0).normal(size=(50, 3, 1))
        stats = summarize(make_record(samples), truth=truth)
        assert stats.rsnr_db is None

    def test_no_truth_omits_metrics(self, rng):
        stats = summarize(make_record(rng.normal(size=(100, 2, 2))))
        assert stats.bias is None and stats.mse is None and stats.rsnr_db is None

    def test_layout_invariance(self, rng, tmp_path):
        samples = rng.normal(size=(60, 3, 2))
        rec = make_record(samples, burn_in=5)
        rec.save(tmp_path / "flat", layout="flat")
        rec.save(tmp_path / "long", layout="long")
        a = summarize(ChainRecord.load(tmp_path / "flat"))
        b = summarize(ChainRecord.load(tmp_path / "long"))
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.ess, b.ess)

    def test_burn_in_override(self, rng):
        samples = rng.normal(size=(100, 1, 1))
        samples[:50] += 100.0
        rec = make_record(samples, burn_in=0)
        full = summarize(rec)
        trimmed = summarize(rec, burn_in=50)
        assert abs(trimmed.mean[0, 0]) < 1.0 < abs(full.mean[0, 0])


class TestModeOccupancy:
    def test_all_in_one_mode(self):
        samples = np.zeros((200, 1, 2))
        centers = np.array([[0.0, 0.0], [5.0, 5.0]])
        occ = mode_occupancy(make_record(samples), centers, radius=1.0)
        assert occ[0] == 1.0 and occ[1] == 0.0 and occ[2] == 0.0

    def test_uniform_over_two(self, rng):
        a = np.tile([[0.0, 0.0]], (500, 1))
        b = np.tile([[5.0, 5.0]], (500, 1))
        samples = np.concatenate([a, b])[:, None, :]
        occ = mode_occupancy(make_record(samples), np.array([[0.0, 0.0], [5.0, 5.0]]), radius=1.0)
        assert occ[0] == 0.5 and occ[1] == 0.5

    def test_unassigned_fraction(self):
        samples = np.full((100, 1, 2), 50.0)
        occ = mode_occupancy(make_record(samples), np.array([[0.0, 0.0]]), radius=1.0)
        assert occ[-1] == 1.0


class TestCensorshipSplit:
    def test_groups_and_direction(self, rng):
        truth = rng.normal(size=(10, 2))
        t = 400
        samples = truth[None] + rng.normal(size=(t, 10, 2)) * 0.01
        samples[:, 5:] += rng.normal(size=(t, 5, 2)) * 0.5  # wider posteriors
        stats = summarize(make_record(samples), truth=truth, box=ValidityBox([-9.0, -9.0], [9.0, 9.0]))
        frac = np.array([0.1] * 5 + [0.9] * 5)
        split = censorship_split(stats, truth, frac)
        assert split["n_low"] == 5 and split["n_high"] == 5
        assert np.mean(split["ci_rel_width_high"]) > np.mean(split["ci_rel_width_low"])
