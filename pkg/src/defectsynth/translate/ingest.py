"""Reading and writing image/label pair directories.

A pair with id ``<id>`` is stored as ``<id>_img.png``, ``<id>_mask.png`` and an
optional ``<id>.json`` sidecar describing its provenance.
"""

from pathlib import Path
from typing import Annotated, Any, Optional

from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from defectsynth.data_model import PairSample, Provenance
from defectsynth.exceptions import (
    InvalidInputError,
    ManifestResolutionError,
    NonBinaryMaskError,
)
from defectsynth.utils.image_io import read_image, read_mask, write_image, write_mask

IMAGE_SUFFIX = "_img.png"
MASK_SUFFIX = "_mask.png"


class PairSidecar(BaseModel):
    """Interface for the JSON sidecar stored next to a pair."""

    id: str
    provenance: Provenance
    seed: Annotated[Optional[int], Field(None, description="Seed of the producing stream.")]
    generator: Annotated[
        dict[str, Any], Field(default_factory=dict, description="Producing configuration.")
    ]


class IngestIssue(BaseModel):
    id: str
    reason: str
    path: str


class IngestReport(BaseModel):
    """Itemized outcome of reading a pair directory."""

    accepted: list[str] = []
    issues: list[IngestIssue] = []

    def add(self, pair_id: str, reason: str, path: Path):
        logger.warning(f"Skipping {pair_id}: {reason} ({path})")
        self.issues.append(IngestIssue(id=pair_id, reason=reason, path=str(path)))


def pair_paths(directory: Path, pair_id: str) -> tuple[Path, Path, Path]:
    """(image, mask, sidecar) paths of a pair."""
    return (
        directory / f"{pair_id}{IMAGE_SUFFIX}",
        directory / f"{pair_id}{MASK_SUFFIX}",
        directory / f"{pair_id}.json",
    )


def write_pair(
    pair: PairSample,
    directory: Path | str,
    seed: int | None = None,
    generator: dict | None = None,
):
    """Writes image, mask and sidecar of `pair` into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    image_path, mask_path, sidecar_path = pair_paths(directory, pair.id)
    write_image(pair.image, image_path)
    write_mask(pair.mask, mask_path)
    sidecar = PairSidecar(
        id=pair.id, provenance=pair.provenance, seed=seed, generator=generator or {}
    )
    sidecar_path.write_text(sidecar.model_dump_json(indent=2))


def _read_provenance(sidecar_path: Path, pair_id: str, report: IngestReport) -> Provenance | None:
    if not sidecar_path.exists():
        logger.warning(f"No sidecar for {pair_id}, tagging it as real")
        return Provenance.REAL
    try:
        return PairSidecar.model_validate_json(sidecar_path.read_text()).provenance
    except ValidationError as err:
        report.add(pair_id, f"invalid sidecar: {err.error_count()} errors", sidecar_path)
        return None


def ingest_external(directory: Path | str) -> tuple[list[PairSample], IngestReport]:
    """Reads and validates every pair in `directory`.

    Orphan files, unrecognized PNG names, dimension mismatches, non binary
    masks and invalid sidecars are recorded in the report and skipped.

    Parameters
    ----------

    directory: Path | str
        Directory following the pair naming scheme.

    Returns
    -------

    tuple[list[PairSample], IngestReport]
        Valid pairs sorted by id, and the ingestion report.
    """
    directory = Path(directory)
    report = IngestReport()
    images, masks, sidecars = {}, {}, {}
    for path in sorted(directory.iterdir()):
        name = path.name
        if name.endswith(IMAGE_SUFFIX):
            images[name[: -len(IMAGE_SUFFIX)]] = path
        elif name.endswith(MASK_SUFFIX):
            masks[name[: -len(MASK_SUFFIX)]] = path
        elif name.endswith(".json"):
            sidecars[path.stem] = path
        elif name.endswith(".png"):
            report.add(path.stem, "unrecognized file name", path)

    for pair_id in sorted(set(sidecars) - set(images) - set(masks)):
        report.add(pair_id, "orphan sidecar", sidecars[pair_id])
    for pair_id in sorted(set(images) - set(masks)):
        report.add(pair_id, "orphan image", images[pair_id])
    for pair_id in sorted(set(masks) - set(images)):
        report.add(pair_id, "orphan mask", masks[pair_id])

    pairs = []
    for pair_id in sorted(set(images) & set(masks)):
        image_path, mask_path, sidecar_path = pair_paths(directory, pair_id)
        try:
            mask = read_mask(mask_path)
        except NonBinaryMaskError:
            report.add(pair_id, "non-binary mask", mask_path)
            continue
        except InvalidInputError:
            report.add(pair_id, "mask is not single channel", mask_path)
            continue
        image = read_image(image_path)
        if image.shape != mask.shape:
            report.add(pair_id, f"dimension mismatch {image.shape} vs {mask.shape}", image_path)
            continue
        provenance = _read_provenance(sidecar_path, pair_id, report)
        if provenance is None:
            continue
        pairs.append(PairSample(id=pair_id, image=image, mask=mask, provenance=provenance))
        report.accepted.append(pair_id)
    logger.info(f"Ingested {len(pairs)} pairs from {directory}, skipped {len(report.issues)}")
    return pairs, report


def load_pairs(directory: Path | str) -> list[PairSample]:
    """Reads a pair directory written by this package, failing on any issue."""
    pairs, report = ingest_external(directory)
    if report.issues:
        issue = report.issues[0]
        msg = (
            f"{len(report.issues)} invalid pairs in {directory}, "
            f"first: {issue.id} {issue.reason}"
        )
        raise ManifestResolutionError(msg)
    return pairs
