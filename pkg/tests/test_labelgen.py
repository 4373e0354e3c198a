import math

import numpy as np
import pytest

from defectsynth import (
    LabelGenConfig,
    MaskBuf,
    SeededRng,
    TrigBounds,
    TrigLabelGenerator,
    TrigParams,
    eval_curve,
    foreground_fraction,
    generate_label,
)
from defectsynth.exceptions import GenerationFailedError, InvalidInputError
from defectsynth.labelgen.base import union_masks
from defectsynth.labelgen.trig import rasterize_curve, sample_trig_params, stroke_offsets


def _params(**values) -> TrigParams:
    return TrigParams(**{f"a{i}": values.get(f"a{i}", 0.0) for i in range(1, 8)})


@pytest.fixture
def config():
    yield LabelGenConfig()


def test_eval_curve_matches_formula():
    rng = SeededRng(11)
    for _ in range(50):
        p = sample_trig_params(rng, TrigBounds())
        x = float(rng.uniform(0, 64))
        expected = (
            p.a1 * math.sin(p.a2 * x)
            + p.a3 * math.sin(x)
            + p.a4 * math.cos(p.a5 * x)
            + p.a6 * x
            + p.a7 * x * x
        )
        assert eval_curve(p, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_eval_curve_is_elementwise():
    p = _params(a6=1.0)
    assert np.array_equal(eval_curve(p, np.array([0.0, 2.0, 5.0])), [0.0, 2.0, 5.0])


def test_sampled_params_stay_in_bounds():
    bounds, rng = TrigBounds(), SeededRng(0)
    for _ in range(10_000):
        params = sample_trig_params(rng, bounds)
        for name, (low, high) in bounds.items():
            assert low <= getattr(params, name) <= high


STROKE_SIZES = [(1, 1), (2, 4), (3, 9)]


@pytest.mark.parametrize("thickness, count", STROKE_SIZES)
def test_stroke_offsets(thickness, count):
    offsets = stroke_offsets(thickness)
    assert len(offsets) == count
    assert [0, 0] in offsets.tolist()


def test_stroke_needs_positive_thickness():
    with pytest.raises(InvalidInputError):
        stroke_offsets(0)


def test_constant_curve_is_centre_row(config):
    mask = rasterize_curve(_params(), config, thickness=1, angle=0.0)
    assert mask.foreground_count() == 64
    assert mask.data[32].all()


def test_half_turn_maps_points(config):
    """A half turn sends (x, y) to (w - 1 - x, h - 1 - y)."""
    upright = rasterize_curve(_params(), config, thickness=1, angle=0.0)
    turned = rasterize_curve(_params(), config, thickness=1, angle=180.0)
    assert np.array_equal(turned.data, upright.data[::-1, ::-1])


def test_quarter_turn_is_vertical(config):
    mask = rasterize_curve(_params(), config, thickness=1, angle=90.0)
    assert mask.foreground_count() == 64
    assert mask.data[:, 32].all()


def test_linear_curve_pixel_count(config):
    """f(x) = x steps down one row at x = 32, visiting both rows in column 32."""
    mask = rasterize_curve(_params(a6=1.0), config, thickness=1, angle=0.0)
    assert mask.foreground_count() == 65
    assert mask.data[32, :33].all()
    assert mask.data[33, 32:].all()


def test_unit_amplitude_scale_plots_f_literally():
    """With one row per unit of f, f(x) = x runs diagonally until it leaves the frame."""
    config = LabelGenConfig(amplitude_scale=1.0)
    mask = rasterize_curve(_params(a6=1.0), config, thickness=1, angle=0.0)
    assert mask.foreground_count() == 32
    assert mask.data[32 + np.arange(32), np.arange(32)].all()


def test_thick_stroke_covers_rows(config):
    mask = rasterize_curve(_params(), config, thickness=3, angle=0.0)
    assert mask.data[31:34].all()
    assert mask.foreground_count() == 3 * 64


def test_single_curve_label_equals_rasterized_curve():
    config = LabelGenConfig(
        curves_max=1, thickness_max=1, rotation_min=0.0, rotation_max=0.0
    )
    record = TrigLabelGenerator(config).generate(SeededRng(4))
    assert len(record.curves) == 1
    draw = record.curves[0]
    assert record.mask == rasterize_curve(draw.params, config, 1, 0.0)


def test_union_of_disjoint_curves(config):
    top = rasterize_curve(_params(a4=-10 * 64.0), config, thickness=1, angle=0.0)
    bottom = rasterize_curve(_params(a4=10 * 64.0), config, thickness=1, angle=0.0)
    union = union_masks([top, bottom])
    assert union.foreground_count() == top.foreground_count() + bottom.foreground_count()


def test_generated_labels(config):
    generator = TrigLabelGenerator(config)
    for record in generator.records(50, SeededRng(1)):
        assert record.mask.shape == (64, 64)
        assert record.mask.foreground_count() > 0
        assert config.curves_min <= len(record.curves) <= config.curves_max
        for draw in record.curves:
            assert config.thickness_min <= draw.thickness <= config.thickness_max
            assert config.rotation_min <= draw.angle < config.rotation_max


def test_records_use_child_streams(config):
    rng = SeededRng(8)
    records = TrigLabelGenerator(config).records(3, rng)
    assert records[2].mask == generate_label(rng.derive(2), config)


def test_generation_is_deterministic(config):
    assert generate_label(SeededRng(3), config) == generate_label(SeededRng(3), config)


def test_empty_labels_fail():
    """Curves pushed far outside the frame never produce foreground."""
    bounds = TrigBounds.constant(0.0).model_copy(update={"a4": (1e6, 1e6)})
    config = LabelGenConfig(bounds=bounds, rotation_max=0.0, max_resamples=2)
    with pytest.raises(GenerationFailedError):
        generate_label(SeededRng(0), config)


def test_foreground_fraction_helper():
    full = MaskBuf.from_array(np.ones((2, 2)))
    empty = MaskBuf.zeros(2, 2)
    assert foreground_fraction([full, empty]) == pytest.approx(0.5)
    assert foreground_fraction([]) == 0.0


def test_sample_masks_of_zero_labels(config):
    assert TrigLabelGenerator(config).sample_masks(0, SeededRng(0)) == []
