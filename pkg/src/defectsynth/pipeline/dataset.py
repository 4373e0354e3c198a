"""Corpus generation and assembly of the six dataset variants.

Variant 1 holds real pairs only and variant 2 adds online augmentation.
Variants 3 and 4 mix in pairs translated from trigonometric labels, variants
5 and 6 pairs translated from WGAN labels. Even variants train with online
augmentation.
"""

from pathlib import Path
from typing import Annotated, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from defectsynth.data_model import (
    ONLINE_DA_VARIANTS,
    SYNTHETIC_PROVENANCE,
    BaseComponent,
    CurveDraw,
    DatasetManifest,
    ExperimentConfig,
    LabelGenConfig,
    LabelRecord,
    ManifestEntry,
    MaskBuf,
    PairSample,
    Provenance,
    RenderStyle,
)
from defectsynth.exceptions import (
    DimensionMismatchError,
    InsufficientDataError,
    InvalidInputError,
    ManifestResolutionError,
    MissingModelError,
)
from defectsynth.labelgen.trig import TrigLabelGenerator
from defectsynth.pipeline.manifest import entry_for
from defectsynth.rng import SeededRng
from defectsynth.translate.base import BaseLabelTranslator
from defectsynth.translate.ingest import MASK_SUFFIX, pair_paths, write_pair
from defectsynth.translate.procedural import ProceduralRenderer
from defectsynth.utils.image_io import read_mask, write_mask


def gen_corpus(
    n: int,
    size: int,
    rng: SeededRng,
    labelgen: LabelGenConfig | None = None,
    style: RenderStyle | None = None,
    prefix: str = "real",
) -> list[PairSample]:
    """Generates `n` procedural pairs standing in for the real corpus.

    Pair i takes its label from child stream 0 and its rendering noise from
    child stream 1 of `rng.derive(i)`.

    Parameters
    ----------

    n: int
        Number of pairs, at least one.
    size: int
        Side length of masks and images.
    rng: SeededRng
        Random stream.
    labelgen: LabelGenConfig | None
        Label generator configuration, defaults to a `size` square frame.
    style: RenderStyle | None
        Rendering style, defaults to `RenderStyle()`.
    prefix: str
        Pair ids are ``<prefix>_<index>``.

    Returns
    -------

    list[PairSample]
        Pairs of provenance real.

    Raises
    ------

    InvalidInputError
        If `n` is smaller than one.
    DimensionMismatchError
        If `labelgen` describes another frame size.
    """
    if n < 1:
        msg = f"Corpus needs at least one pair, got {n=}"
        raise InvalidInputError(msg)
    config = labelgen or LabelGenConfig(width=size, height=size)
    if (config.height, config.width) != (size, size):
        msg = f"Label frame {config.width}x{config.height} differs from corpus size {size}"
        raise DimensionMismatchError(msg)
    generator = TrigLabelGenerator(config)
    renderer = ProceduralRenderer(style or RenderStyle())
    pairs = []
    for index in range(n):
        stream = rng.derive(index)
        mask = generator.generate(stream.derive(0)).mask
        pairs.append(
            PairSample(
                id=f"{prefix}_{index:05d}",
                image=renderer.translate(mask, stream.derive(1)),
                mask=mask,
                provenance=Provenance.REAL,
            )
        )
    logger.info(f"Generated corpus of {n} {size}x{size} pairs with prefix {prefix!r}")
    return pairs


class LabelSidecar(BaseModel):
    """Interface for the JSON sidecar stored next to a generated label."""

    id: str
    provenance: Provenance
    seed: Annotated[Optional[int], Field(None, description="Seed of the producing stream.")]
    curves: Annotated[
        list[CurveDraw], Field(default_factory=list, description="Drawn trigonometric curves.")
    ]


def store_labels(
    masks: list[MaskBuf],
    directory: Path | str,
    provenance: Provenance,
    prefix: str,
    seed: int | None = None,
    records: list[LabelRecord] | None = None,
) -> list[str]:
    """Writes masks as ``<id>_mask.png`` with a sidecar and returns their ids."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ids = []
    for index, mask in enumerate(masks):
        label_id = f"{prefix}_{index:05d}"
        _, mask_path, sidecar_path = pair_paths(directory, label_id)
        write_mask(mask, mask_path)
        sidecar = LabelSidecar(
            id=label_id,
            provenance=provenance,
            seed=seed,
            curves=records[index].curves if records else [],
        )
        sidecar_path.write_text(sidecar.model_dump_json(indent=2))
        ids.append(label_id)
    return ids


def load_labels(directory: Path | str) -> tuple[list[str], list[MaskBuf], Provenance]:
    """Reads a label directory written by `store_labels`.

    Raises
    ------

    ManifestResolutionError
        If the directory holds no labels, a sidecar is missing or labels of
        different provenance are mixed.
    """
    directory = Path(directory)
    paths = sorted(directory.glob(f"*{MASK_SUFFIX}"))
    if not paths:
        msg = f"No labels found in {directory}"
        raise ManifestResolutionError(msg)
    ids, masks, provenances = [], [], set()
    for path in paths:
        label_id = path.name[: -len(MASK_SUFFIX)]
        sidecar_path = pair_paths(directory, label_id)[2]
        if not sidecar_path.exists():
            msg = f"Label {label_id} in {directory} has no sidecar"
            raise ManifestResolutionError(msg)
        provenances.add(LabelSidecar.model_validate_json(sidecar_path.read_text()).provenance)
        ids.append(label_id)
        masks.append(read_mask(path))
    if len(provenances) != 1:
        msg = f"Labels in {directory} mix provenances {sorted(p.value for p in provenances)}"
        raise ManifestResolutionError(msg)
    return ids, masks, provenances.pop()


def translate_labels(
    masks: list[MaskBuf],
    translator: BaseLabelTranslator,
    rng: SeededRng,
    provenance: Provenance,
    prefix: str,
) -> list[PairSample]:
    """Turns synthetic labels into pairs, label i translated with child stream i."""
    images = translator.translate_many(masks, rng)
    pairs = [
        PairSample(id=f"{prefix}_{index:05d}", image=image, mask=mask, provenance=provenance)
        for index, (image, mask) in enumerate(zip(images, masks))
    ]
    logger.info(f"Translated {len(pairs)} {provenance.value} labels into pairs")
    return pairs


def store_pairs(
    pairs: list[PairSample],
    directory: Path | str,
    root: Path | str,
    seed: int | None = None,
    generator: dict | None = None,
) -> list[ManifestEntry]:
    """Writes pairs into `directory` and returns their entries relative to `root`."""
    directory, root = Path(directory), Path(root)
    entries = []
    for pair in pairs:
        write_pair(pair, directory, seed=seed, generator=generator)
        entries.append(entry_for(pair, directory, root))
    return entries


class DatasetSources(BaseComponent):
    """Interface for the stored pairs a dataset variant draws from."""

    real: Annotated[list[ManifestEntry], Field(..., description="Real training pairs.")]
    trig: Annotated[
        Optional[list[ManifestEntry]],
        Field(None, description="Pairs translated from trigonometric labels."),
    ]
    wgan: Annotated[
        Optional[list[ManifestEntry]],
        Field(None, description="Pairs translated from WGAN labels."),
    ]


def _select(
    entries: list[ManifestEntry], count: int, rng: SeededRng, what: str
) -> list[ManifestEntry]:
    if len(entries) < count:
        msg = f"Need {count} {what} pairs, only {len(entries)} available"
        raise InsufficientDataError(msg)
    return [entries[i] for i in np.sort(rng.choice(len(entries), count))]


def assemble_dataset(
    variant: int, sources: DatasetSources, cfg: ExperimentConfig, rng: SeededRng
) -> DatasetManifest:
    """Builds the manifest of one dataset variant.

    Real pairs are selected with child stream 0 and synthetic pairs with
    child stream 1 of `rng`, both keeping source order.

    Parameters
    ----------

    variant: int
        Dataset variant in 1..6.
    sources: DatasetSources
        Stored pairs to draw from.
    cfg: ExperimentConfig
        Provides the real and synthetic counts and the online policy.
    rng: SeededRng
        Random stream.

    Raises
    ------

    InvalidInputError
        If `variant` is outside 1..6.
    MissingModelError
        If a synthetic variant is requested without its synthetic source.
    InsufficientDataError
        If a source holds fewer pairs than the configured count.
    """
    if variant not in range(1, 7):
        msg = f"Unknown dataset {variant=}"
        raise InvalidInputError(msg)
    entries = _select(sources.real, cfg.scale.real_count, rng.derive(0), "real")
    provenance = SYNTHETIC_PROVENANCE.get(variant)
    if provenance is not None:
        pool = sources.trig if provenance == Provenance.SYNTHETIC_TRIG else sources.wgan
        if pool is None:
            msg = (
                f"Dataset variant {variant} needs {provenance.value} pairs, "
                "train the label generator and translator first"
            )
            raise MissingModelError(msg)
        entries = entries + _select(
            pool, cfg.scale.synthetic_count, rng.derive(1), provenance.value
        )
    manifest = DatasetManifest(
        variant=variant,
        entries=entries,
        online_da=cfg.augment if variant in ONLINE_DA_VARIANTS else None,
        seed=rng.seed,
    )
    real, synthetic = manifest.counts
    logger.info(f"Assembled dataset {variant}: {real} real, {synthetic} synthetic pairs")
    return manifest
