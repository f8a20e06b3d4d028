import pytest

from hapslink.link import ValidationError
from hapslink.link.engine.sweep import SweepSpec
from hapslink.link.montecarlo import McConfig


def make_spec(**changes) -> SweepSpec:
    fields = dict(variable="avg_snr_per_hop_dB", start=0.0, stop=40.0, step=2.0, metrics=("op",))
    fields.update(changes)
    return SweepSpec(**fields)


def test_points_include_stop():
    points = make_spec().points()
    assert len(points) == 21
    assert points[0] == 0.0
    assert points[-1] == 40.0


def test_points_off_grid_stop():
    points = make_spec(start=0.0, stop=1.0, step=0.3).points()
    assert points == pytest.approx([0.0, 0.3, 0.6, 0.9])
    assert make_spec(start=0.0, stop=0.3, step=0.1).points()[-1] == pytest.approx(0.3)


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"variable": "rain_rate"}, "unknown sweep variable"),
        ({"start": 5.0, "stop": 5.0}, "must be below stop"),
        ({"step": 0.0}, "step must be positive"),
        ({"metrics": ()}, "at least one metric"),
        ({"metrics": ("op", "goodput")}, "unknown metrics"),
    ],
)
def test_validation(changes, message):
    with pytest.raises(ValidationError, match=message):
        make_spec(**changes)


def test_from_config(small_config):
    spec = SweepSpec.from_config(small_config.sweep)
    assert spec.variable == "avg_snr_per_hop_dB"
    assert spec.metrics == ("op", "capacity_ub")
    assert spec.mc == McConfig(samples=2000, master_seed=3)

    off = small_config.sweep.model_copy(update={"mc": False})
    assert SweepSpec.from_config(off).mc is None


def test_overrides():
    spec = make_spec(mc=McConfig(samples=5000, master_seed=1))
    assert spec.with_overrides() == spec
    assert spec.with_overrides(seed=9).mc == McConfig(samples=5000, master_seed=9)
    assert spec.with_overrides(samples=8000, workers=3).mc == McConfig(
        samples=8000, master_seed=1, workers=3
    )
    assert spec.with_overrides(metrics=["ber", "ee"]).metrics == ("ber", "ee")


def test_no_mc_wins():
    spec = make_spec(mc=McConfig(samples=5000))
    assert spec.with_overrides(seed=4, samples=9000, no_mc=True).mc is None


def test_seed_turns_mc_on():
    spec = make_spec().with_overrides(seed=12)
    assert spec.mc is not None
    assert spec.mc.master_seed == 12
    assert spec.mc.samples == McConfig().samples


def test_override_validation():
    with pytest.raises(ValidationError, match="samples must be"):
        make_spec().with_overrides(samples=10)
    with pytest.raises(ValidationError, match="unknown metrics"):
        make_spec().with_overrides(metrics=["throughput"])
