import numpy as np
import pandas as pd
import pytest

from defectsynth import (
    LabelGenConfig,
    Provenance,
    SeededRng,
    TranslatorConfig,
    TranslatorModel,
    TrigLabelGenerator,
    WganConfig,
    WganLabelGenerator,
    WganModel,
    sample_labels,
    train_wgan,
)
from defectsynth.exceptions import (
    CheckpointFormatError,
    DimensionMismatchError,
    InsufficientDataError,
)
from defectsynth.labelgen.wgan import WGAN_LOG_COLUMNS


@pytest.fixture
def wgan_config():
    yield WganConfig(
        latent_dim=8,
        batch_size=4,
        total_steps=3,
        mask_size=16,
        base_channels=2,
        check_clipping=True,
    )


@pytest.fixture
def masks():
    config = LabelGenConfig(width=16, height=16)
    yield TrigLabelGenerator(config).sample_masks(12, SeededRng(0))


def test_training_log(masks, wgan_config):
    model, log = train_wgan(masks, wgan_config, SeededRng(1))
    assert list(log.columns) == WGAN_LOG_COLUMNS
    assert log["step"].tolist() == [0, 1, 2]
    assert np.isfinite(log[["gap", "critic_loss", "gen_loss"]].to_numpy()).all()
    assert log["fake_foreground"].between(0, 1).all()


def test_critic_weights_stay_clipped(masks, wgan_config):
    model, _ = train_wgan(masks, wgan_config, SeededRng(1))
    for param in model.critic.params():
        assert np.abs(param.value).max() <= wgan_config.clip_c


def test_zero_steps_keep_initial_weights(masks, wgan_config):
    config = wgan_config.model_copy(update={"total_steps": 0})
    rng = SeededRng(1)
    model, log = train_wgan(masks, config, rng)
    fresh = WganModel(config, rng.derive(0))
    fresh.prime_output(float(np.stack([m.data.astype(np.float64) for m in masks]).mean()))
    assert log.empty
    for trained, initial in zip(model.state(), fresh.state()):
        assert np.array_equal(trained, initial)


def test_primed_output_starts_at_label_density(wgan_config):
    model = WganModel(wgan_config, SeededRng(0))
    model.prime_output(0.05)
    outputs = model.generate(SeededRng(1).normal(size=(8, wgan_config.latent_dim)))
    assert outputs.mean() == pytest.approx(0.05, abs=0.01)


def test_training_is_deterministic(masks, wgan_config):
    first, first_log = train_wgan(masks, wgan_config, SeededRng(4))
    second, second_log = train_wgan(masks, wgan_config, SeededRng(4))
    pd.testing.assert_frame_equal(first_log, second_log)
    for a, b in zip(first.state(), second.state()):
        assert np.array_equal(a, b)


def test_needs_a_full_batch(masks, wgan_config):
    with pytest.raises(InsufficientDataError):
        train_wgan(masks[:3], wgan_config, SeededRng(0))


def test_mask_size_must_match(masks):
    config = WganConfig(batch_size=4, mask_size=32, base_channels=2)
    with pytest.raises(DimensionMismatchError):
        train_wgan(masks, config, SeededRng(0))


def test_sampled_labels_are_binary(wgan_config):
    model = WganModel(wgan_config, SeededRng(0))
    labels = sample_labels(model, 5, SeededRng(1))
    assert len(labels) == 5
    for mask in labels:
        assert mask.shape == (16, 16)
        assert set(np.unique(mask.data)) <= {0, 1}


def test_sampling_zero_labels(wgan_config):
    assert sample_labels(WganModel(wgan_config, SeededRng(0)), 0, SeededRng(1)) == []


def test_threshold_controls_density(wgan_config):
    model = WganModel(wgan_config, SeededRng(0))
    low = sample_labels(model, 4, SeededRng(2), threshold=0.01)
    high = sample_labels(model, 4, SeededRng(2), threshold=0.99)
    assert sum(m.foreground_count() for m in low) >= sum(m.foreground_count() for m in high)


def test_label_generator_interface(wgan_config):
    generator = WganLabelGenerator(WganModel(wgan_config, SeededRng(0)))
    assert generator.provenance == Provenance.SYNTHETIC_WGAN
    assert len(generator.sample_masks(3, SeededRng(5))) == 3


def test_checkpoint(tmp_path, wgan_config):
    model = WganModel(wgan_config, SeededRng(3))
    model.save(tmp_path / "wgan.ckpt")
    loaded = WganModel.load(tmp_path / "wgan.ckpt")
    assert loaded.config == wgan_config
    latents = SeededRng(9).normal(size=(2, wgan_config.latent_dim))
    assert np.array_equal(loaded.generate(latents), model.generate(latents))


def test_checkpoint_kind_is_checked(tmp_path):
    TranslatorModel(TranslatorConfig(image_size=16, base_channels=2), SeededRng(0)).save(
        tmp_path / "translator.ckpt"
    )
    with pytest.raises(CheckpointFormatError):
        WganModel.load(tmp_path / "translator.ckpt")
