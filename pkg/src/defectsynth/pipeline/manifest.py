from pathlib import Path

from loguru import logger

from defectsynth.data_model import DatasetManifest, ManifestEntry, PairSample
from defectsynth.exceptions import (
    InvalidInputError,
    ManifestResolutionError,
    NonBinaryMaskError,
)
from defectsynth.translate.ingest import pair_paths
from defectsynth.utils.image_io import read_image, read_mask


def entry_for(pair: PairSample, directory: Path, root: Path) -> ManifestEntry:
    """Manifest entry of a pair stored in `directory`, paths relative to `root`."""
    image_path, mask_path, _ = pair_paths(directory, pair.id)
    return ManifestEntry(
        id=pair.id,
        image=image_path.relative_to(root).as_posix(),
        mask=mask_path.relative_to(root).as_posix(),
        provenance=pair.provenance,
    )


def resolve_manifest(manifest: DatasetManifest, root: Path | str) -> list[PairSample]:
    """Loads every entry of `manifest` from files below `root`.

    Raises
    ------

    ManifestResolutionError
        If any listed file is missing, unreadable or invalid.
    """
    root = Path(root)
    missing = [
        path
        for entry in manifest.entries
        for path in (root / entry.image, root / entry.mask)
        if not path.exists()
    ]
    if missing:
        msg = f"{len(missing)} manifest files missing below {root}, first: {missing[0]}"
        raise ManifestResolutionError(msg)
    pairs = []
    for entry in manifest.entries:
        try:
            pairs.append(
                PairSample(
                    id=entry.id,
                    image=read_image(root / entry.image),
                    mask=read_mask(root / entry.mask),
                    provenance=entry.provenance,
                )
            )
        except (InvalidInputError, NonBinaryMaskError, ValueError) as err:
            msg = f"Manifest entry {entry.id} can not be loaded: {err}"
            raise ManifestResolutionError(msg) from err
    logger.info(f"Resolved {len(pairs)} pairs of dataset variant {manifest.variant}")
    return pairs


def write_manifest(manifest: DatasetManifest, path: Path | str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2))


def read_manifest(path: Path | str) -> DatasetManifest:
    return DatasetManifest.model_validate_json(Path(path).read_text())
