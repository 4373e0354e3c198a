from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from defectsynth.data_model import MaskBuf, Provenance, WganConfig, WganLogRow
from defectsynth.exceptions import (
    CheckpointFormatError,
    DimensionMismatchError,
    InsufficientDataError,
    TrainingDivergenceError,
)
from defectsynth.labelgen.base import BaseLabelGenerator
from defectsynth.nn.checkpoint import load_checkpoint, save_checkpoint
from defectsynth.nn.layers import (
    Conv2d,
    Dense,
    Flatten,
    LeakyReLU,
    ReLU,
    Rescale,
    Reshape,
    Tanh,
    TConv2d,
)
from defectsynth.nn.losses import critic_wasserstein_loss, generator_wasserstein_loss
from defectsynth.nn.networks import Sequential
from defectsynth.nn.optim import RMSProp, clip_params
from defectsynth.rng import SeededRng
from defectsynth.utils.binarize import binarize_array

WGAN_LOG_COLUMNS = list(WganLogRow.model_fields) + ["fake_foreground"]
# Index of the last transposed convolution in the generator, followed by Tanh and Rescale.
OUTPUT_CONV = -3
OUTPUT_PRIOR_FLOOR = 0.001


def build_generator(config: WganConfig, rng: SeededRng) -> Sequential:
    """Latent (N, latent_dim) to masks (N, 1, size, size) with values in [0, 1]."""
    c, side = config.base_channels, config.mask_size // 8
    return Sequential(
        [
            Dense(config.latent_dim, 4 * c * side * side, rng),
            LeakyReLU(0.2),
            Reshape((4 * c, side, side)),
            TConv2d(4 * c, 2 * c, 4, rng, 2, 1),
            ReLU(),
            TConv2d(2 * c, c, 4, rng, 2, 1),
            ReLU(),
            TConv2d(c, 1, 4, rng, 2, 1),
            Tanh(),
            Rescale(0.5, 0.5),
        ]
    )


def build_critic(config: WganConfig, rng: SeededRng) -> Sequential:
    """Masks (N, 1, size, size) to unbounded scores (N, 1)."""
    c, side = config.base_channels, config.mask_size // 8
    return Sequential(
        [
            Conv2d(1, c, 4, rng, 2, 1),
            LeakyReLU(0.2),
            Conv2d(c, 2 * c, 4, rng, 2, 1),
            LeakyReLU(0.2),
            Conv2d(2 * c, 4 * c, 4, rng, 2, 1),
            LeakyReLU(0.2),
            Flatten(),
            Dense(4 * c * side * side, 1, rng),
        ]
    )


class WganModel:
    """Generator and critic of the WGAN label model.

    Parameters
    ----------

    config: WganConfig
        Architecture and training configuration.
    rng: SeededRng
        Stream for weight initialization.
    """

    kind = "wgan"

    def __init__(self, config: WganConfig, rng: SeededRng):
        self.config = config
        self.generator = build_generator(config, rng.derive(0))
        self.critic = build_critic(config, rng.derive(1))

    def generate(self, latents: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Continuous generator output (N, 1, size, size) in [0, 1]."""
        side = self.config.mask_size
        if len(latents) == 0:
            return np.zeros((0, 1, side, side))
        return np.concatenate(
            [
                self.generator.forward(latents[start : start + batch_size])
                for start in range(0, len(latents), batch_size)
            ]
        )

    def prime_output(self, fraction: float):
        """Sets the output bias so a zero pre activation maps to `fraction` in [0, 1]."""
        fraction = float(np.clip(fraction, OUTPUT_PRIOR_FLOOR, 1.0 - OUTPUT_PRIOR_FLOOR))
        self.generator.layers[OUTPUT_CONV].bias.value[...] = np.arctanh(2.0 * fraction - 1.0)

    def state(self) -> list[np.ndarray]:
        return self.generator.state() + self.critic.state()

    def save(self, path: Path | str):
        metadata = {"kind": self.kind, "config": self.config.model_dump(mode="json")}
        save_checkpoint(path, self.state(), metadata)

    @classmethod
    def load(cls, path: Path | str) -> "WganModel":
        metadata, arrays = load_checkpoint(path)
        if metadata.get("kind") != cls.kind:
            msg = f"{path} holds a {metadata.get('kind')!r} checkpoint, expected {cls.kind!r}"
            raise CheckpointFormatError(msg)
        model = cls(WganConfig.model_validate(metadata["config"]), SeededRng(0))
        split = len(model.generator.params())
        model.generator.load_state(arrays[:split])
        model.critic.load_state(arrays[split:])
        return model


def _stack_masks(masks: list[MaskBuf], size: int) -> np.ndarray:
    wrong = [i for i, mask in enumerate(masks) if mask.shape != (size, size)]
    if wrong:
        msg = f"Masks {wrong[:5]} are not {size}x{size}"
        raise DimensionMismatchError(msg)
    return np.stack([mask.data.astype(np.float64) for mask in masks])[:, None]


def _ensure_finite(value: float, step: int, what: str):
    if not np.isfinite(value):
        msg = f"{what} became {value} at generator step {step}"
        raise TrainingDivergenceError(msg, step=step)


def _optimizer_step(optimizer: RMSProp, step: int):
    try:
        optimizer.step()
    except TrainingDivergenceError as err:
        raise TrainingDivergenceError(str(err), step=step) from err


def train_wgan(
    masks: list[MaskBuf], config: WganConfig, rng: SeededRng
) -> tuple[WganModel, pd.DataFrame]:
    """Trains the WGAN on real label masks.

    Every generator step runs `n_critic` critic updates, each followed by
    clipping all critic weights into [-clip_c, clip_c], then one generator
    update. The generator output bias is primed with the mean foreground
    fraction of `masks` before the first step. Weights come from stream 0 of `rng`, minibatches from stream 1 and
    latents from stream 2.

    Parameters
    ----------

    masks: list[MaskBuf]
        Training labels of size `config.mask_size`.
    config: WganConfig
        Training configuration.
    rng: SeededRng
        Random stream.

    Returns
    -------

    tuple[WganModel, pd.DataFrame]
        Trained model and one log row per generator step with columns
        step, gap, critic_loss, gen_loss and fake_foreground.

    Raises
    ------

    InsufficientDataError
        If fewer masks than `config.batch_size` are given.
    TrainingDivergenceError
        If a loss or gradient stops being finite.
    """
    if len(masks) < config.batch_size:
        msg = f"WGAN training needs at least {config.batch_size} masks, got {len(masks)}"
        raise InsufficientDataError(msg)
    data = _stack_masks(masks, config.mask_size)
    model = WganModel(config, rng.derive(0))
    model.prime_output(float(data.mean()))
    batch_rng, latent_rng = rng.derive(1), rng.derive(2)
    generator, critic = model.generator, model.critic
    critic_opt = RMSProp(critic.params(), config.learning_rate)
    gen_opt = RMSProp(generator.params(), config.learning_rate)
    batch = config.batch_size

    logger.info(f"Training WGAN on {len(masks)} masks for {config.total_steps} steps")
    rows = []
    for step in range(config.total_steps):
        for _ in range(config.n_critic):
            real = data[batch_rng.choice(len(data), batch)]
            fake = generator.forward(latent_rng.normal(size=(batch, config.latent_dim)))
            critic_opt.zero_grad()
            scores = critic.forward(np.concatenate([real, fake]))
            critic_loss, grad_real, grad_fake = critic_wasserstein_loss(
                scores[:batch], scores[batch:]
            )
            _ensure_finite(critic_loss, step, "Critic loss")
            critic.backward(np.concatenate([grad_real, grad_fake]))
            _optimizer_step(critic_opt, step)
            clip_params(critic.params(), config.clip_c)
            if config.check_clipping:
                bound = max(float(np.max(np.abs(p.value))) for p in critic.params())
                assert bound <= config.clip_c, f"Critic weight {bound} exceeds {config.clip_c}"

        fake = generator.forward(latent_rng.normal(size=(batch, config.latent_dim)))
        gen_loss, grad_scores = generator_wasserstein_loss(critic.forward(fake))
        _ensure_finite(gen_loss, step, "Generator loss")
        gen_opt.zero_grad()
        generator.backward(critic.backward(grad_scores))
        _optimizer_step(gen_opt, step)
        critic_opt.zero_grad()

        fake_foreground = float(np.mean(fake >= config.binarize_threshold))
        rows.append(
            {
                "step": step,
                "gap": -critic_loss,
                "critic_loss": critic_loss,
                "gen_loss": gen_loss,
                "fake_foreground": fake_foreground,
            }
        )
        logger.debug(f"WGAN step {step}: gap={-critic_loss:.5f} gen_loss={gen_loss:.5f}")
        if (step + 1) % 100 == 0:
            logger.info(f"WGAN step {step + 1}/{config.total_steps}, gap {-critic_loss:.5f}")
    return model, pd.DataFrame(rows, columns=WGAN_LOG_COLUMNS)


def sample_labels(
    model: WganModel, n: int, rng: SeededRng, threshold: float | None = None
) -> list[MaskBuf]:
    """Draws `n` latents from N(0, 1) and binarizes the generator output."""
    if n == 0:
        return []
    threshold = model.config.binarize_threshold if threshold is None else threshold
    outputs = model.generate(rng.normal(size=(n, model.config.latent_dim)))
    return [MaskBuf.from_array(binarize_array(output[0], threshold)) for output in outputs]


class WganLabelGenerator(BaseLabelGenerator):
    """Class interface for labels sampled from a trained WGAN.

    Parameters
    ----------

    model: WganModel
        Trained or freshly initialized model.
    threshold: float | None
        Binarization threshold, defaults to the model configuration.
    """

    provenance = Provenance.SYNTHETIC_WGAN

    def __init__(self, model: WganModel, threshold: float | None = None):
        self.model = model
        self.threshold = threshold

    def sample_masks(self, n: int, rng: SeededRng) -> list[MaskBuf]:
        return sample_labels(self.model, n, rng, self.threshold)
