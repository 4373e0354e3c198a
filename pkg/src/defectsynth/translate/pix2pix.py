from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from defectsynth.data_model import (
    ImageBuf,
    MaskBuf,
    PairSample,
    TranslatorConfig,
    TranslatorLogRow,
)
from defectsynth.exceptions import (
    CheckpointFormatError,
    DimensionMismatchError,
    InsufficientDataError,
    TrainingDivergenceError,
)
from defectsynth.nn.checkpoint import load_checkpoint, save_checkpoint
from defectsynth.nn.layers import Conv2d, LeakyReLU
from defectsynth.nn.losses import adversarial_loss, loss_l1
from defectsynth.nn.networks import Sequential, UNet
from defectsynth.nn.optim import Adam
from defectsynth.rng import SeededRng
from defectsynth.translate.base import BaseLabelTranslator

TRANSLATOR_DEPTH = 4


def build_patch_critic(config: TranslatorConfig, rng: SeededRng) -> Sequential:
    """Mask and image stacked on channels (N, 2, s, s) to a score map (N, 1, s/4, s/4)."""
    c = config.base_channels
    return Sequential(
        [
            Conv2d(2, c, 4, rng, 2, 1),
            LeakyReLU(0.2),
            Conv2d(c, 2 * c, 4, rng, 2, 1),
            LeakyReLU(0.2),
            Conv2d(2 * c, 1, 3, rng, 1, 1),
        ]
    )


class TranslatorModel:
    """Conditional generator (mask to image) and its patch critic.

    Parameters
    ----------

    config: TranslatorConfig
        Architecture and training configuration.
    rng: SeededRng
        Stream for weight initialization.
    """

    kind = "translator"

    def __init__(self, config: TranslatorConfig, rng: SeededRng):
        self.config = config
        self.generator = UNet(1, 1, config.base_channels, TRANSLATOR_DEPTH, rng.derive(0))
        self.critic = build_patch_critic(config, rng.derive(1))

    def state(self) -> list[np.ndarray]:
        return self.generator.state() + self.critic.state()

    def save(self, path: Path | str):
        metadata = {
            "kind": self.kind,
            "config": self.config.model_dump(mode="json"),
            "generator": self.generator.config(),
        }
        save_checkpoint(path, self.state(), metadata)

    @classmethod
    def load(cls, path: Path | str) -> "TranslatorModel":
        metadata, arrays = load_checkpoint(path)
        if metadata.get("kind") != cls.kind:
            msg = f"{path} holds a {metadata.get('kind')!r} checkpoint, expected {cls.kind!r}"
            raise CheckpointFormatError(msg)
        model = cls(TranslatorConfig.model_validate(metadata["config"]), SeededRng(0))
        split = len(model.generator.params())
        model.generator.load_state(arrays[:split])
        model.critic.load_state(arrays[split:])
        return model


def _check_mask(model: TranslatorModel, mask: MaskBuf):
    size = model.config.image_size
    if mask.shape != (size, size):
        msg = f"Translator expects {size}x{size} masks, got {mask.shape}"
        raise DimensionMismatchError(msg)


def translate(model: TranslatorModel, mask: MaskBuf) -> ImageBuf:
    """Deterministic forward pass of the generator."""
    _check_mask(model, mask)
    out = model.generator.forward(mask.data.astype(np.float64)[None, None])
    return ImageBuf.from_array(out[0, 0])


def _stack_pairs(pairs: list[PairSample], size: int) -> tuple[np.ndarray, np.ndarray]:
    wrong = [p.id for p in pairs if p.mask.shape != (size, size) or p.image.channels != 1]
    if wrong:
        msg = f"Pairs {wrong[:5]} are not single channel {size}x{size}"
        raise DimensionMismatchError(msg)
    masks = np.stack([p.mask.data.astype(np.float64) for p in pairs])[:, None]
    images = np.stack([p.image.plane() for p in pairs])[:, None]
    return masks, images


def mean_l1(model: TranslatorModel, pairs: list[PairSample]) -> float:
    """Mean absolute difference between translated masks and their paired images."""
    masks, images = _stack_pairs(pairs, model.config.image_size)
    return float(np.mean(np.abs(model.generator.forward(masks) - images)))


def _train_batch(
    model: TranslatorModel,
    masks: np.ndarray,
    images: np.ndarray,
    gen_opt: Adam,
    critic_opt: Adam,
) -> tuple[float, float, float]:
    """One critic and one generator update. Returns (adversarial, l1, critic) losses."""
    cfg = model.config
    generator, critic = model.generator, model.critic
    n = len(masks)

    fake = generator.forward(masks)
    critic_opt.zero_grad()
    scores = critic.forward(
        np.concatenate(
            [np.concatenate([masks, images], axis=1), np.concatenate([masks, fake], axis=1)]
        )
    )
    real_loss, real_grad = adversarial_loss(cfg.adversarial_mode, scores[:n], 1.0)
    fake_loss, fake_grad = adversarial_loss(cfg.adversarial_mode, scores[n:], 0.0)
    critic.backward(0.5 * np.concatenate([real_grad, fake_grad]))
    critic_opt.step()

    scores = critic.forward(np.concatenate([masks, fake], axis=1))
    adv_loss, adv_grad = adversarial_loss(cfg.adversarial_mode, scores, 1.0)
    grad_fake = critic.backward(adv_grad)[:, 1:]
    l1, l1_grad = loss_l1(fake, images)
    gen_opt.zero_grad()
    generator.backward(cfg.adversarial_weight * grad_fake + cfg.l1_weight * l1_grad)
    gen_opt.step()
    critic_opt.zero_grad()
    return adv_loss, l1, 0.5 * (real_loss + fake_loss)


def train_translator(
    pairs: list[PairSample], config: TranslatorConfig, rng: SeededRng
) -> tuple[TranslatorModel, pd.DataFrame]:
    """Trains the mask to image translator.

    Each minibatch runs one patch critic update followed by one generator
    update on adversarial_weight * adversarial + l1_weight * L1. Weights come
    from stream 0 of `rng` and the per epoch shuffles from stream 1.

    Returns
    -------

    tuple[TranslatorModel, pd.DataFrame]
        Trained model and one log row per epoch with mean adversarial, L1
        and critic losses.

    Raises
    ------

    InsufficientDataError
        If `pairs` is empty.
    DimensionMismatchError
        If pairs are not all single channel `image_size` squares.
    TrainingDivergenceError
        If a loss or gradient stops being finite.
    """
    if not pairs:
        msg = "Translator training needs at least one pair."
        raise InsufficientDataError(msg)
    masks, images = _stack_pairs(pairs, config.image_size)
    model = TranslatorModel(config, rng.derive(0))
    shuffle_rng = rng.derive(1)
    gen_opt = Adam(model.generator.params(), config.learning_rate)
    critic_opt = Adam(model.critic.params(), config.learning_rate)

    logger.info(f"Training translator on {len(pairs)} pairs for {config.epochs} epochs")
    rows = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(pairs))
        losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                losses.append(_train_batch(model, masks[idx], images[idx], gen_opt, critic_opt))
            except TrainingDivergenceError as err:
                raise TrainingDivergenceError(str(err), step=epoch) from err
            if not np.all(np.isfinite(losses[-1])):
                msg = f"Translator loss became {losses[-1]} in epoch {epoch}"
                raise TrainingDivergenceError(msg, step=epoch)
        adv, l1, critic_loss = np.mean(losses, axis=0)
        rows.append(
            TranslatorLogRow(
                epoch=epoch,
                adversarial_loss=float(adv),
                l1_loss=float(l1),
                critic_loss=float(critic_loss),
            ).model_dump()
        )
        logger.info(f"Translator epoch {epoch}: adversarial={adv:.5f} l1={l1:.5f}")
    return model, pd.DataFrame(rows, columns=list(TranslatorLogRow.model_fields))


class Pix2PixTranslator(BaseLabelTranslator):
    """Class interface for translating labels with a trained model.

    Parameters
    ----------

    model: TranslatorModel
        Trained translator.
    """

    def __init__(self, model: TranslatorModel):
        self.model = model

    def translate(self, mask: MaskBuf, rng: SeededRng) -> ImageBuf:
        return translate(self.model, mask)
