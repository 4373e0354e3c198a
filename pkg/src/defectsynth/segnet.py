from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from defectsynth.augment.policy import augment_online
from defectsynth.data_model import (
    AugmentPolicy,
    Confusion,
    DatasetManifest,
    ImageBuf,
    MaskBuf,
    PairSample,
    SegConfig,
    SegLogRow,
)
from defectsynth.exceptions import (
    CheckpointFormatError,
    DimensionMismatchError,
    InsufficientDataError,
    TrainingDivergenceError,
)
from defectsynth.metrics import compute_metrics
from defectsynth.nn.checkpoint import load_checkpoint, save_checkpoint
from defectsynth.nn.losses import seg_loss
from defectsynth.nn.networks import UNet
from defectsynth.nn.optim import Adam
from defectsynth.pipeline.manifest import resolve_manifest
from defectsynth.rng import SeededRng
from defectsynth.utils.binarize import binarize, binarize_array

SEGMENTER_DEPTH = 3
SEG_LOG_COLUMNS = list(SegLogRow.model_fields)


class SegModel:
    """U-shaped segmenter with sigmoid output.

    Parameters
    ----------

    config: SegConfig
        Architecture and training configuration.
    rng: SeededRng
        Stream for weight initialization.
    """

    kind = "segnet"

    def __init__(self, config: SegConfig, rng: SeededRng):
        self.config = config
        self.network = UNet(1, 1, config.base_channels, SEGMENTER_DEPTH, rng)

    def probabilities(self, images: np.ndarray, batch_size: int = 32) -> np.ndarray:
        """Foreground probabilities (N, 1, H, W) for images (N, 1, H, W)."""
        return np.concatenate(
            [
                self.network.forward(images[start : start + batch_size])
                for start in range(0, len(images), batch_size)
            ]
        )

    def save(self, path: Path | str):
        metadata = {
            "kind": self.kind,
            "config": self.config.model_dump(mode="json"),
            "network": self.network.config(),
        }
        save_checkpoint(path, self.network.state(), metadata)

    @classmethod
    def load(cls, path: Path | str) -> "SegModel":
        metadata, arrays = load_checkpoint(path)
        if metadata.get("kind") != cls.kind:
            msg = f"{path} holds a {metadata.get('kind')!r} checkpoint, expected {cls.kind!r}"
            raise CheckpointFormatError(msg)
        model = cls(SegConfig.model_validate(metadata["config"]), SeededRng(0))
        model.network.load_state(arrays)
        return model


def standardize(plane: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance copy of `plane`; a flat plane only loses its mean."""
    std = float(plane.std())
    return (plane - plane.mean()) / (std if std > 0 else 1.0)


def _gray(image: ImageBuf) -> np.ndarray:
    """Standardized single channel network input."""
    plane = image.plane() if image.channels == 1 else image.data.mean(axis=2)
    return standardize(plane)


def _check_size(config: SegConfig, shape: tuple[int, int], what: str):
    size = config.input_size
    if shape != (size, size):
        msg = f"Segmenter expects {size}x{size} inputs, {what} has shape {shape}"
        raise DimensionMismatchError(msg)


def _stack(pairs: list[PairSample]) -> tuple[np.ndarray, np.ndarray]:
    images = np.stack([_gray(p.image) for p in pairs])[:, None]
    masks = np.stack([p.mask.data.astype(np.float64) for p in pairs])[:, None]
    return images, masks


def _batch_confusion(probs: np.ndarray, targets: np.ndarray, threshold: float) -> Confusion:
    pred = binarize_array(probs, threshold).astype(bool)
    gt = targets.astype(bool)
    return Confusion(
        tp=int(np.sum(pred & gt)),
        fp=int(np.sum(pred & ~gt)),
        fn=int(np.sum(~pred & gt)),
        tn=int(np.sum(~pred & ~gt)),
    )


def split_pairs(
    pairs: list[PairSample], fraction: float, rng: SeededRng
) -> tuple[list[PairSample], list[PairSample]]:
    """Seeded shuffle, then the first (1 - fraction) share trains and the rest validates.

    An empty validation share falls back to the training pairs.
    """
    order = rng.permutation(len(pairs))
    n_train = len(pairs) - int(len(pairs) * fraction)
    train = [pairs[i] for i in order[:n_train]]
    val = [pairs[i] for i in order[n_train:]]
    if not val:
        logger.warning("Validation split is empty, validating on the training pairs")
        val = train
    return train, val


def _evaluate(
    model: SegModel, images: np.ndarray, masks: np.ndarray
) -> tuple[float, float]:
    cfg = model.config
    probs = model.probabilities(images)
    loss, _ = seg_loss(probs, masks, cfg.bce_weight, cfg.dice_weight)
    return loss, compute_metrics(_batch_confusion(probs, masks, cfg.threshold)).iou


def train_segmenter_pairs(
    pairs: list[PairSample],
    config: SegConfig,
    rng: SeededRng,
    policy: AugmentPolicy | None = None,
) -> tuple[SegModel, pd.DataFrame]:
    """Trains the segmenter on in memory pairs.

    Stream 0 of `rng` splits train and validation pairs, stream 1 initializes
    weights and stream 2 drives per epoch shuffling and online augmentation.

    Parameters
    ----------

    pairs: list[PairSample]
        Training pairs of size `config.input_size`.
    config: SegConfig
        Training configuration.
    rng: SeededRng
        Random stream.
    policy: AugmentPolicy | None
        Online augmentation applied to every training pair in every epoch.

    Returns
    -------

    tuple[SegModel, pd.DataFrame]
        Trained model and one log row per epoch.
    """
    if len(pairs) < config.batch_size:
        msg = f"Segmenter needs at least {config.batch_size} pairs, got {len(pairs)}"
        raise InsufficientDataError(msg)
    for pair in pairs:
        _check_size(config, pair.mask.shape, pair.id)
    train, val = split_pairs(pairs, config.validation_fraction, rng.derive(0))
    model = SegModel(config, rng.derive(1))
    optimizer = Adam(model.network.params(), config.learning_rate)
    val_images, val_masks = _stack(val)
    epoch_streams = rng.derive(2)

    logger.info(
        f"Training segmenter on {len(train)} pairs, validating on {len(val)}, "
        f"{config.epochs} epochs, online augmentation {'on' if policy else 'off'}"
    )
    rows = []
    for epoch in range(config.epochs):
        epoch_rng = epoch_streams.derive(epoch)
        order = epoch_rng.derive(0).permutation(len(train))
        augment_rng = epoch_rng.derive(1)
        losses, weights, total = [], [], Confusion()
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start : start + config.batch_size]]
            if policy is not None:
                batch = [
                    augment_online(augment_rng.derive(int(i)), pair, policy)
                    for i, pair in zip(order[start : start + config.batch_size], batch)
                ]
            images, masks = _stack(batch)
            probs = model.network.forward(images)
            loss, grad = seg_loss(probs, masks, config.bce_weight, config.dice_weight)
            if not np.isfinite(loss):
                msg = f"Segmenter loss became {loss} in epoch {epoch}"
                raise TrainingDivergenceError(msg, step=epoch)
            optimizer.zero_grad()
            model.network.backward(grad)
            try:
                optimizer.step()
            except TrainingDivergenceError as err:
                raise TrainingDivergenceError(str(err), step=epoch) from err
            losses.append(loss)
            weights.append(len(batch))
            total = total + _batch_confusion(probs, masks, config.threshold)
        val_loss, val_iou = _evaluate(model, val_images, val_masks)
        row = SegLogRow(
            epoch=epoch,
            train_loss=float(np.average(losses, weights=weights)),
            train_iou=compute_metrics(total).iou,
            val_loss=val_loss,
            val_iou=val_iou,
        )
        rows.append(row.model_dump())
        logger.info(
            f"Segmenter epoch {epoch}: loss={row.train_loss:.5f} iou={row.train_iou:.4f} "
            f"val_loss={row.val_loss:.5f} val_iou={row.val_iou:.4f}"
        )
    return model, pd.DataFrame(rows, columns=SEG_LOG_COLUMNS)


def train_segmenter(
    manifest: DatasetManifest, config: SegConfig, rng: SeededRng, root: Path | str
) -> tuple[SegModel, pd.DataFrame]:
    """Trains the segmenter on the pairs listed in `manifest`, resolved below `root`.

    The manifest's online augmentation policy, when set, is applied per epoch.
    """
    pairs = resolve_manifest(manifest, root)
    return train_segmenter_pairs(pairs, config, rng, manifest.online_da)


def predict(model: SegModel, image: ImageBuf, threshold: float | None = None) -> MaskBuf:
    """Thresholded foreground map of one image."""
    _check_size(model.config, image.shape, "image")
    threshold = model.config.threshold if threshold is None else threshold
    probs = model.network.forward(_gray(image)[None, None])
    return binarize(ImageBuf.from_array(probs[0, 0]), threshold)


def predict_many(
    model: SegModel, images: list[ImageBuf], threshold: float | None = None
) -> list[MaskBuf]:
    """Batched `predict`."""
    if not images:
        return []
    for image in images:
        _check_size(model.config, image.shape, "image")
    threshold = model.config.threshold if threshold is None else threshold
    probs = model.probabilities(np.stack([_gray(image) for image in images])[:, None])
    return [MaskBuf.from_array(binarize_array(p[0], threshold)) for p in probs]
