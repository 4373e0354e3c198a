import numpy as np

from defectsynth.data_model import ImageBuf, MaskBuf
from defectsynth.exceptions import InvalidInputError


def binarize(image: ImageBuf, threshold: float = 0.5) -> MaskBuf:
    """Function to threshold a single channel image into a binary mask.

    Parameters
    ----------

    image: ImageBuf
        Single channel image.
    threshold: float
        Threshold in (0, 1). Pixels at or above it become foreground.

    Examples
    --------

    >>> from defectsynth import ImageBuf, binarize
    >>> binarize(ImageBuf.from_array(np.full((2, 2), 0.5)), 0.5).foreground_count()
    4
    """
    if image.channels != 1:
        msg = f"binarize expects a single channel image, got {image.channels=}"
        raise InvalidInputError(msg)
    if not 0 < threshold < 1:
        msg = f"Threshold must lie in (0, 1), got {threshold=}"
        raise InvalidInputError(msg)
    return MaskBuf.from_array((image.plane() >= threshold).astype(np.uint8))


def binarize_array(values: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Thresholds a raw (H, W) array, returns uint8 zeros and ones."""
    return (np.asarray(values) >= threshold).astype(np.uint8)
