import json

import numpy as np
import pandas as pd
import pytest
from PIL import Image
from pydantic import ValidationError

from defectsynth import (
    ImageBuf,
    MaskBuf,
    PairSample,
    Pix2PixTranslator,
    ProceduralRenderer,
    Provenance,
    RenderStyle,
    SeededRng,
    TranslatorConfig,
    TranslatorModel,
    ingest_external,
    load_pairs,
    procedural_render,
    train_translator,
    translate,
    write_pair,
)
from defectsynth.exceptions import (
    DimensionMismatchError,
    InsufficientDataError,
    ManifestResolutionError,
)
from defectsynth.pipeline.dataset import gen_corpus
from defectsynth.translate.pix2pix import mean_l1


@pytest.fixture
def line_mask():
    data = np.zeros((8, 8), dtype=np.uint8)
    data[4] = 1
    yield MaskBuf.from_array(data)


@pytest.fixture
def small_config():
    yield TranslatorConfig(image_size=16, base_channels=2, batch_size=4, epochs=2)


@pytest.fixture
def corpus():
    yield gen_corpus(8, 16, SeededRng(0))


def test_render_without_noise(line_mask):
    style = RenderStyle(noise_sigma=0.0, defect_blur_radius=0)
    image = procedural_render(line_mask, style, SeededRng(0))
    background = image.plane()[0]
    assert image.shape == (8, 8)
    assert np.allclose(image.plane()[[0, 1, 2, 3, 5, 6, 7]], background)
    assert np.allclose(image.plane()[4], background + style.defect_gain)


def test_render_stripes_follow_columns():
    style = RenderStyle(noise_sigma=0.0, stripe_period=4)
    image = procedural_render(MaskBuf.zeros(4, 8), style, SeededRng(0))
    row = image.plane()[0]
    assert np.allclose(row[:4], row[4:])
    assert row[1] == pytest.approx(style.base_intensity + style.stripe_amplitude)


def test_render_is_seeded(line_mask):
    style = RenderStyle()
    first = procedural_render(line_mask, style, SeededRng(3))
    second = procedural_render(line_mask, style, SeededRng(3))
    assert first == second
    assert 0.0 <= first.plane().min() and first.plane().max() <= 1.0


def test_render_style_budget():
    with pytest.raises(ValidationError):
        RenderStyle(base_intensity=0.6, stripe_amplitude=0.1, defect_gain=0.4)


def test_translate_many_uses_child_streams(line_mask):
    renderer, rng = ProceduralRenderer(RenderStyle()), SeededRng(6)
    images = renderer.translate_many([line_mask, line_mask], rng)
    assert images[1] == renderer.translate(line_mask, rng.derive(1))
    assert images[0] != images[1]


def test_untrained_translation(small_config):
    model = TranslatorModel(small_config, SeededRng(0))
    image = translate(model, MaskBuf.zeros(16, 16))
    assert image.shape == (16, 16) and image.channels == 1
    assert 0.0 <= image.plane().min() and image.plane().max() <= 1.0
    with pytest.raises(DimensionMismatchError):
        translate(model, MaskBuf.zeros(8, 8))


def test_training_log(corpus, small_config):
    _, log = train_translator(corpus, small_config, SeededRng(1))
    assert list(log.columns) == ["epoch", "adversarial_loss", "l1_loss", "critic_loss"]
    assert log["epoch"].tolist() == [0, 1]
    assert np.isfinite(log.drop(columns="epoch").to_numpy()).all()


def test_training_reduces_l1(corpus, small_config):
    config = small_config.model_copy(update={"epochs": 10, "learning_rate": 5e-3})
    rng = SeededRng(2)
    untrained = TranslatorModel(config, rng.derive(0))
    before = mean_l1(untrained, corpus)
    model, _ = train_translator(corpus, config, rng)
    assert mean_l1(model, corpus) < before


def test_training_is_deterministic(corpus, small_config):
    _, first = train_translator(corpus, small_config, SeededRng(1))
    _, second = train_translator(corpus, small_config, SeededRng(1))
    pd.testing.assert_frame_equal(first, second)


def test_training_needs_pairs(small_config):
    with pytest.raises(InsufficientDataError):
        train_translator([], small_config, SeededRng(0))


def test_training_checks_pair_size(small_config):
    pairs = gen_corpus(2, 8, SeededRng(0))
    with pytest.raises(DimensionMismatchError):
        train_translator(pairs, small_config, SeededRng(0))


def test_translator_checkpoint(tmp_path, small_config):
    model = TranslatorModel(small_config, SeededRng(4))
    model.save(tmp_path / "translator.ckpt")
    loaded = TranslatorModel.load(tmp_path / "translator.ckpt")
    mask = gen_corpus(1, 16, SeededRng(0))[0].mask
    assert translate(loaded, mask) == translate(model, mask)
    translator = Pix2PixTranslator(loaded)
    assert translator.translate(mask, SeededRng(1)) == translator.translate(mask, SeededRng(2))


def _pair(pair_id: str, size: int = 4) -> PairSample:
    mask = np.zeros((size, size), dtype=np.uint8)
    mask[1, :] = 1
    return PairSample(
        id=pair_id,
        image=ImageBuf.from_array(np.full((size, size), 0.2)),
        mask=MaskBuf.from_array(mask),
        provenance=Provenance.SYNTHETIC_TRIG,
    )


def test_ingest_clean_directory(tmp_path):
    write_pair(_pair("a"), tmp_path, seed=3)
    write_pair(_pair("b"), tmp_path)
    pairs = load_pairs(tmp_path)
    assert [p.id for p in pairs] == ["a", "b"]
    assert pairs[0].provenance == Provenance.SYNTHETIC_TRIG
    assert pairs[0].mask == _pair("a").mask
    assert json.loads((tmp_path / "a.json").read_text())["seed"] == 3


def test_ingest_reports_issues(tmp_path):
    write_pair(_pair("good"), tmp_path)
    write_pair(_pair("nosidecar"), tmp_path)
    (tmp_path / "nosidecar.json").unlink()
    write_pair(_pair("orphan"), tmp_path)
    (tmp_path / "orphan_mask.png").unlink()
    write_pair(_pair("gray"), tmp_path)
    Image.fromarray(np.full((4, 4), 128, dtype=np.uint8)).save(tmp_path / "gray_mask.png")
    write_pair(_pair("small"), tmp_path)
    Image.fromarray(np.zeros((3, 3), dtype=np.uint8)).save(tmp_path / "small_mask.png")
    write_pair(_pair("badjson"), tmp_path)
    (tmp_path / "badjson.json").write_text('{"id": "badjson", "provenance": "scanned"}')
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "stray.png")

    pairs, report = ingest_external(tmp_path)
    assert [p.id for p in pairs] == ["good", "nosidecar"]
    assert report.accepted == ["good", "nosidecar"]
    assert pairs[1].provenance == Provenance.REAL
    reasons = {issue.id: issue.reason for issue in report.issues}
    assert reasons["orphan"] == "orphan image"
    assert reasons["gray"] == "non-binary mask"
    assert reasons["small"].startswith("dimension mismatch")
    assert reasons["badjson"].startswith("invalid sidecar")
    assert reasons["stray"] == "unrecognized file name"
    with pytest.raises(ManifestResolutionError):
        load_pairs(tmp_path)
