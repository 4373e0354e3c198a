import numpy as np
from scipy import ndimage

from defectsynth.data_model import ImageBuf, MaskBuf, RenderStyle
from defectsynth.rng import SeededRng
from defectsynth.translate.base import BaseLabelTranslator


def stripe_profile(width: int, period: int) -> np.ndarray:
    """sin(2 pi (x mod period) / period) for every column x."""
    columns = np.arange(width)
    return np.sin(2 * np.pi * (columns % period) / period)


def defect_layer(mask: MaskBuf, blur_radius: int) -> np.ndarray:
    """Mask spread by a box blur; defect pixels keep full weight."""
    values = mask.data.astype(np.float64)
    if blur_radius == 0:
        return values
    blurred = ndimage.uniform_filter(values, size=2 * blur_radius + 1, mode="constant")
    return np.maximum(values, blurred)


def procedural_render(mask: MaskBuf, style: RenderStyle, rng: SeededRng) -> ImageBuf:
    """Renders a fiber carpet of vertical stripes with the mask as bright strands.

    Parameters
    ----------

    mask: MaskBuf
        Defect label.
    style: RenderStyle
        Intensities, stripe period, noise and defect spread.
    rng: SeededRng
        Noise stream, not drawn from when `noise_sigma` is zero.

    Returns
    -------

    ImageBuf
        Single channel image, clipped to [0, 1].

    Examples
    --------

    >>> image = procedural_render(MaskBuf.zeros(8, 8), RenderStyle(noise_sigma=0), SeededRng(0))
    """
    height, width = mask.shape
    stripes = style.stripe_amplitude * stripe_profile(width, style.stripe_period)
    background = np.broadcast_to(style.base_intensity + stripes, (height, width)).copy()
    if style.noise_sigma > 0:
        background += rng.normal(0.0, style.noise_sigma, size=(height, width))
    image = background + style.defect_gain * defect_layer(mask, style.defect_blur_radius)
    return ImageBuf.from_array(np.clip(image, 0.0, 1.0))


class ProceduralRenderer(BaseLabelTranslator):
    """Deterministic stand in for real defect photographs.

    Parameters
    ----------

    style: RenderStyle
        Rendering parameters.
    """

    def __init__(self, style: RenderStyle):
        self.style = style

    def translate(self, mask: MaskBuf, rng: SeededRng) -> ImageBuf:
        return procedural_render(mask, self.style, rng)
