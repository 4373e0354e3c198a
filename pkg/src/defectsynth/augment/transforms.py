"""Geometric transforms applied jointly to an image and its mask.

Images are resampled bilinearly unless `image_order=0` is passed, masks always
with nearest neighbour lookup so they stay binary.
"""

import numpy as np
from scipy import ndimage

from defectsynth.data_model import (
    AugmentPolicy,
    ElasticParams,
    GridParams,
    ImageBuf,
    MaskBuf,
    PairSample,
)
from defectsynth.exceptions import InvalidInputError
from defectsynth.rng import SeededRng

# scipy name of mirroring at the edge without repeating the edge pixel.
BORDER_MODES = {"reflect_101": "mirror"}


def flip_h(pair: PairSample) -> PairSample:
    """Mirrors columns."""
    return pair.with_data(
        ImageBuf.from_array(pair.image.data[:, ::-1]), MaskBuf.from_array(pair.mask.data[:, ::-1])
    )


def flip_v(pair: PairSample) -> PairSample:
    """Mirrors rows."""
    return pair.with_data(
        ImageBuf.from_array(pair.image.data[::-1]), MaskBuf.from_array(pair.mask.data[::-1])
    )


def rotate180(pair: PairSample) -> PairSample:
    return pair.with_data(
        ImageBuf.from_array(pair.image.data[::-1, ::-1]),
        MaskBuf.from_array(pair.mask.data[::-1, ::-1]),
    )


def remap(
    pair: PairSample,
    src_y: np.ndarray,
    src_x: np.ndarray,
    mode: str = "nearest",
    image_order: int = 1,
) -> PairSample:
    """Samples image and mask at source coordinates (src_y, src_x) of output shape."""
    coords = [src_y, src_x]
    planes = [
        ndimage.map_coordinates(pair.image.plane(c), coords, order=image_order, mode=mode)
        for c in range(pair.image.channels)
    ]
    image = np.clip(np.stack(planes, axis=-1), 0.0, 1.0)
    mask = ndimage.map_coordinates(pair.mask.data, coords, order=0, mode=mode)
    return pair.with_data(ImageBuf.from_array(image), MaskBuf.from_array(mask))


def crop_coordinates(
    shape: tuple[int, int], side: int, top: int, left: int
) -> tuple[np.ndarray, np.ndarray]:
    """Source coordinates resizing the square crop (top, left, side) back to `shape`."""
    height, width = shape
    ys = top + (np.arange(height) + 0.5) * side / height - 0.5
    xs = left + (np.arange(width) + 0.5) * side / width - 0.5
    ys = np.clip(ys, top, top + side - 1)
    xs = np.clip(xs, left, left + side - 1)
    return np.meshgrid(ys, xs, indexing="ij")


def random_sized_crop(
    rng: SeededRng,
    pair: PairSample,
    policy: AugmentPolicy,
    position: tuple[int, int] | None = None,
    image_order: int = 1,
) -> PairSample:
    """Crops a random square with side in `policy.crop_window` and resizes it back.

    Parameters
    ----------

    rng: SeededRng
        Stream for side length and position.
    pair: PairSample
        Pair to crop.
    policy: AugmentPolicy
        Provides the crop window.
    position: tuple[int, int] | None
        Fixed (top, left) corner instead of a random one.

    Raises
    ------

    InvalidInputError
        If the window exceeds the smaller image side.
    """
    height, width = pair.mask.shape
    low, high = policy.crop_window
    if high > min(height, width):
        msg = f"Crop window {policy.crop_window} exceeds image of shape {(height, width)}"
        raise InvalidInputError(msg)
    side = int(rng.integers(low, high))
    if position is None:
        top = int(rng.integers(0, height - side))
        left = int(rng.integers(0, width - side))
    else:
        top, left = position
    src_y, src_x = crop_coordinates((height, width), side, top, left)
    return remap(pair, src_y, src_x, image_order=image_order)


def _affine_from_points(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """2x3 matrix A with A @ [p, 1] = q for three (x, y) point pairs."""
    design = np.hstack([source, np.ones((3, 1))])
    return np.linalg.solve(design, target).T


def elastic_coordinates(
    rng: SeededRng, shape: tuple[int, int], params: ElasticParams
) -> tuple[np.ndarray, np.ndarray]:
    """Source coordinates of the elastic transform.

    Three anchor points around the centre are jittered by up to
    `alpha_affine` pixels to define an affine warp. A displacement field of
    uniform noise in [-1, 1], smoothed by a Gaussian of width `sigma` and
    scaled by `alpha`, is applied in output space before the inverse affine.
    """
    height, width = shape
    centre = np.array([width // 2, height // 2], dtype=np.float64)
    square = min(height, width) // 3
    anchors = np.array(
        [
            centre + square,
            [centre[0] + square, centre[1] - square],
            centre - square,
        ]
    )
    moved = anchors + rng.uniform(-params.alpha_affine, params.alpha_affine, size=anchors.shape)
    inverse = _affine_from_points(moved, anchors)

    dx = ndimage.gaussian_filter(rng.uniform(-1, 1, size=shape), params.sigma) * params.alpha
    dy = ndimage.gaussian_filter(rng.uniform(-1, 1, size=shape), params.sigma) * params.alpha
    out_y, out_x = np.mgrid[0:height, 0:width].astype(np.float64)
    px, py = out_x + dx, out_y + dy
    src_x = inverse[0, 0] * px + inverse[0, 1] * py + inverse[0, 2]
    src_y = inverse[1, 0] * px + inverse[1, 1] * py + inverse[1, 2]
    return src_y, src_x


def elastic_transform(
    rng: SeededRng, pair: PairSample, params: ElasticParams, image_order: int = 1
) -> PairSample:
    """Elastic deformation with an affine jitter, mirrored at the border."""
    if params.alpha == 0 and params.alpha_affine == 0:
        return pair
    src_y, src_x = elastic_coordinates(rng, pair.mask.shape, params)
    mode = BORDER_MODES[params.border_mode]
    return remap(pair, src_y, src_x, mode=mode, image_order=image_order)


def grid_knots(rng: SeededRng, size: int, params: GridParams) -> tuple[np.ndarray, np.ndarray]:
    """(output knots, source knots) of one axis.

    Steps between the `num_steps + 1` evenly spaced knots are scaled by
    factors in [1 - limit, 1 + limit] and renormalized so both ends stay put.
    """
    limit = params.distort_limit
    factors = 1.0 + rng.uniform(-limit, limit, size=params.num_steps)
    source = np.concatenate([[0.0], np.cumsum(factors)]) / np.sum(factors) * (size - 1)
    target = np.linspace(0.0, size - 1, params.num_steps + 1)
    return target, source


def grid_coordinates(
    rng: SeededRng, shape: tuple[int, int], params: GridParams
) -> tuple[np.ndarray, np.ndarray]:
    height, width = shape
    x_target, x_source = grid_knots(rng, width, params)
    y_target, y_source = grid_knots(rng, height, params)
    xs = np.interp(np.arange(width), x_target, x_source)
    ys = np.interp(np.arange(height), y_target, y_source)
    return np.meshgrid(ys, xs, indexing="ij")


def grid_distortion(
    rng: SeededRng, pair: PairSample, params: GridParams, image_order: int = 1
) -> PairSample:
    """Piecewise linear stretching of a num_steps x num_steps grid."""
    if params.distort_limit == 0:
        return pair
    src_y, src_x = grid_coordinates(rng, pair.mask.shape, params)
    return remap(pair, src_y, src_x, mode="mirror", image_order=image_order)
