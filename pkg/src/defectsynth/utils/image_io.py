from pathlib import Path

import numpy as np
from PIL import Image

from defectsynth.data_model import ImageBuf, MaskBuf
from defectsynth.exceptions import InvalidInputError, NonBinaryMaskError


def read_image(path: Path | str) -> ImageBuf:
    """Reads an 8 bit grayscale or RGB PNG, mapping v to v/255."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB" if img.mode in ("RGBA", "P", "CMYK") else "L")
        data = np.asarray(img, dtype=np.float64) / 255.0
    return ImageBuf.from_array(data)


def write_image(image: ImageBuf, path: Path | str):
    """Writes an image as 8 bit PNG, mapping v to round(v * 255)."""
    values = np.round(image.data * 255.0).astype(np.uint8)
    if image.channels == 1:
        Image.fromarray(values[:, :, 0]).save(path)
    else:
        Image.fromarray(values).save(path)


def read_mask(path: Path | str) -> MaskBuf:
    """Reads a single channel mask stored with values {0, 255}.

    Raises
    ------

    NonBinaryMaskError
        If the file holds values other than 0 and 255.
    """
    with Image.open(path) as img:
        if img.mode != "L":
            msg = f"Mask {path} must be single channel 8 bit, got mode {img.mode}"
            raise InvalidInputError(msg)
        values = np.asarray(img, dtype=np.uint8)
    if not np.all((values == 0) | (values == 255)):
        msg = f"Mask {path} holds values other than 0 and 255: {np.unique(values)[:8]}"
        raise NonBinaryMaskError(msg)
    return MaskBuf.from_array((values == 255).astype(np.uint8))


def write_mask(mask: MaskBuf, path: Path | str):
    """Writes a mask as 8 bit single channel PNG with values {0, 255}."""
    Image.fromarray((mask.data * 255).astype(np.uint8)).save(path)
