"""Chain persistence: layouts, round trips, event log."""
import numpy as np
import pytest

from mixnoise.errors import ConfigurationError
from mixnoise.records import ChainRecord


def make_record(rng, t=40, n=3, d=2, burn_in=7):
    return ChainRecord(
        thetas=rng.normal(size=(t + 1, n, d)),
        kernels=(rng.random(t) < 0.4).astype(np.int8),
        accepted=rng.random((t, n)) < 0.5,
        burn_in=burn_in,
        seed=1234,
        meta={"experiment": "unit"},
    )


class TestRoundTrip:
    @pytest.mark.parametrize("layout", ["flat", "long"])
    def test_bitwise(self, rng, tmp_path, layout):
        rec = make_record(rng)
        rec.save(tmp_path, layout=layout)
        back = ChainRecord.load(tmp_path)
        assert np.array_equal(rec.thetas, back.thetas)
        assert np.array_equal(rec.kernels, back.kernels)
        assert np.array_equal(rec.accepted, back.accepted)
        assert back.burn_in == rec.burn_in and back.seed == rec.seed

    def test_unknown_layout(self, rng, tmp_path):
        with pytest.raises(ConfigurationError):
            make_record(rng).save(tmp_path, layout="sideways")


class TestAccounting:
    def test_samples_respects_burn_in(self, rng):
        rec = make_record(rng, t=20, burn_in=5)
        assert rec.samples().shape[0] == 15
        assert rec.samples(post_burn=False).shape[0] == 20
        assert np.array_equal(rec.samples()[0], rec.thetas[6])

    def test_kernel_fraction_and_acceptance(self, rng):
        rec = make_record(rng)
        frac = rec.kernel_fraction("mtm")
        assert frac == pytest.approx(np.mean(rec.kernels == 1))
        acc = rec.acceptance_rate("pmala")
        mask = rec.kernels == 0
        assert acc == pytest.approx(rec.accepted[mask].mean())
        assert rec.acceptance_rate() == pytest.approx(rec.accepted.mean())
