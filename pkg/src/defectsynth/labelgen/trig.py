import math

import numpy as np
from loguru import logger
from scipy import ndimage

from defectsynth.data_model import (
    CurveDraw,
    LabelGenConfig,
    LabelRecord,
    MaskBuf,
    Provenance,
    TrigBounds,
    TrigParams,
)
from defectsynth.exceptions import GenerationFailedError, InvalidInputError
from defectsynth.labelgen.base import BaseLabelGenerator, union_masks
from defectsynth.rng import SeededRng


def sample_trig_params(rng: SeededRng, bounds: TrigBounds) -> TrigParams:
    """Draws each coefficient uniformly within its bounds."""
    values = {name: float(rng.uniform(low, high)) for name, (low, high) in bounds.items()}
    return TrigParams(**values)


def eval_curve(params: TrigParams, x: float | np.ndarray) -> float | np.ndarray:
    """Evaluates f(x) = a1 sin(a2 x) + a3 sin(x) + a4 cos(a5 x) + a6 x + a7 x^2.

    Works element wise on arrays.
    """
    p = params
    return (
        p.a1 * np.sin(p.a2 * x)
        + p.a3 * np.sin(x)
        + p.a4 * np.cos(p.a5 * x)
        + p.a6 * x
        + p.a7 * x**2
    )


def stroke_offsets(thickness: int) -> np.ndarray:
    """Pixel offsets of a disc shaped pen of diameter `thickness`, shape (k, 2)."""
    if thickness < 1:
        msg = f"Thickness must be at least 1, got {thickness=}"
        raise InvalidInputError(msg)
    centre = (thickness - 1) / 2
    rows, cols = np.mgrid[0:thickness, 0:thickness]
    inside = (rows - centre) ** 2 + (cols - centre) ** 2 <= (thickness / 2) ** 2
    shift = (thickness - 1) // 2
    return np.stack([rows[inside] - shift, cols[inside] - shift], axis=1)


def curve_points(params: TrigParams, config: LabelGenConfig) -> np.ndarray:
    """Unique (row, col) pixels visited by the curve, before thickening and rotation.

    Column x maps to row height / 2 + amplitude_scale * f(x), so f is not plotted
    one row per unit: with the default scale of 1/64 a curve must reach 64 in f
    to move one row, and f(x) = x climbs a single row across a 64 pixel frame.
    Rows may fall outside the frame. Sampling is dense enough that consecutive
    points are 8 connected.
    """
    width, height = config.width, config.height
    unit_rows = config.amplitude_scale * eval_curve(params, np.arange(width, dtype=np.float64))
    max_step = float(np.max(np.abs(np.diff(unit_rows)))) if width > 1 else 0.0
    n = config.oversample * max(1, math.ceil(max_step))
    xs = np.arange(0, (width - 1) * n + 1, dtype=np.float64) / n
    rows = np.floor(height / 2 + config.amplitude_scale * eval_curve(params, xs) + 0.5)
    cols = np.floor(xs + 0.5)
    return np.unique(np.stack([rows, cols], axis=1).astype(np.int64), axis=0)


def _rotate_nearest(canvas: np.ndarray, pad: int, height: int, width: int, angle: float):
    """Rotates the padded canvas about the frame centre and crops the frame.

    Positive angles turn counter clockwise as seen on screen.
    """
    theta = np.deg2rad(angle)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy, cx = (height - 1) / 2, (width - 1) / 2
    out_y, out_x = np.mgrid[0:height, 0:width].astype(np.float64)
    dy, dx = out_y - cy, out_x - cx
    src_x = cx + cos_t * dx - sin_t * dy + pad
    src_y = cy + sin_t * dx + cos_t * dy + pad
    return ndimage.map_coordinates(canvas, [src_y, src_x], order=0, mode="constant", cval=0)


def rasterize_curve(
    params: TrigParams, config: LabelGenConfig, thickness: int, angle: float
) -> MaskBuf:
    """Plots one curve into a mask.

    Parameters
    ----------

    params: TrigParams
        Curve coefficients.
    config: LabelGenConfig
        Provides width, height, amplitude scale and oversampling.
    thickness: int
        Pen diameter in pixels.
    angle: float
        Rotation about the frame centre in degrees.

    Returns
    -------

    MaskBuf
        Mask with the stroked, rotated and clipped curve.
    """
    height, width = config.height, config.width
    offsets = stroke_offsets(thickness)
    pad = math.ceil(math.hypot(height, width) / 2) + thickness
    canvas = np.zeros((height + 2 * pad, width + 2 * pad), dtype=np.uint8)

    points = curve_points(params, config) + pad
    stroked = (points[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    keep = (
        (stroked[:, 0] >= 0)
        & (stroked[:, 0] < canvas.shape[0])
        & (stroked[:, 1] >= 0)
        & (stroked[:, 1] < canvas.shape[1])
    )
    stroked = stroked[keep]
    canvas[stroked[:, 0], stroked[:, 1]] = 1

    if angle % 360 == 0:
        frame = canvas[pad : pad + height, pad : pad + width]
    else:
        frame = _rotate_nearest(canvas, pad, height, width, angle)
    return MaskBuf.from_array(frame)


class TrigLabelGenerator(BaseLabelGenerator):
    """Class interface for the trigonometric label generator.

    Every label overlays a random number of rotated and thickened curves
    y = f(x) with coefficients drawn from `config.bounds`.

    Parameters
    ----------

    config: LabelGenConfig
        Generator configuration.

    Examples
    --------

    >>> from defectsynth import TrigLabelGenerator, LabelGenConfig, SeededRng
    >>> generator = TrigLabelGenerator(LabelGenConfig())
    >>> record = generator.generate(SeededRng(3))
    >>> record.mask.foreground_count() > 0
    True
    """

    provenance = Provenance.SYNTHETIC_TRIG

    def __init__(self, config: LabelGenConfig):
        self.config = config

    def _draw(self, rng: SeededRng) -> list[CurveDraw]:
        cfg = self.config
        num_curves = int(rng.integers(cfg.curves_min, cfg.curves_max))
        draws = []
        for _ in range(num_curves):
            params = sample_trig_params(rng, cfg.bounds)
            thickness = int(rng.integers(cfg.thickness_min, cfg.thickness_max))
            angle = float(rng.uniform(cfg.rotation_min, cfg.rotation_max))
            draws.append(CurveDraw(params=params, thickness=thickness, angle=angle))
        return draws

    def generate(self, rng: SeededRng) -> LabelRecord:
        """Generates one non empty label.

        Raises
        ------

        GenerationFailedError
            If `max_resamples` draws in a row produce empty masks.
        """
        for attempt in range(1, self.config.max_resamples + 1):
            draws = self._draw(rng)
            mask = union_masks(
                [rasterize_curve(d.params, self.config, d.thickness, d.angle) for d in draws]
            )
            if mask.foreground_count() > 0:
                return LabelRecord(mask=mask, curves=draws, attempts=attempt)
            logger.warning(f"Empty label on attempt {attempt}, resampling with {rng}")
        msg = (
            f"No foreground after {self.config.max_resamples} attempts, "
            f"check bounds and frame size {self.config.width}x{self.config.height}"
        )
        raise GenerationFailedError(msg)

    def records(self, n: int, rng: SeededRng) -> list[LabelRecord]:
        """Generates `n` labels, label i drawing from child stream i of `rng`."""
        return [self.generate(rng.derive(index)) for index in range(n)]

    def sample_masks(self, n: int, rng: SeededRng) -> list[MaskBuf]:
        return [record.mask for record in self.records(n, rng)]


def generate_label(rng: SeededRng, config: LabelGenConfig) -> MaskBuf:
    """Generates one non empty trigonometric label mask."""
    return TrigLabelGenerator(config).generate(rng).mask
