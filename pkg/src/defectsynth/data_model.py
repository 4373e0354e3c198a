from typing import Annotated, Literal, Optional
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, ConfigDict, field_validator, model_validator

from defectsynth.constants import (
    REFERENCE_FRAME_SIZE,
    TRIG_BOUNDS,
    PIX2PIX_LEARNING_RATE,
    UNET_LEARNING_RATE,
    WGAN_LEARNING_RATE,
)


class BaseComponent(BaseModel):
    """Base component used for defectsynth value types."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class ImageBuf(BaseComponent):
    """Interface for an intensity image.

    Values are normalized to [0, 1]. `data` has shape (height, width, channels)
    and is read only once the buffer is built.
    """

    width: Annotated[int, Field(..., gt=0, description="Width of the image in pixels.")]
    height: Annotated[int, Field(..., gt=0, description="Height of the image in pixels.")]
    channels: Annotated[Literal[1, 3], Field(..., description="Number of channels.")]
    data: Annotated[np.ndarray, Field(..., description="Pixel intensities in [0, 1].")]

    @model_validator(mode="after")
    def validate_fields(self):
        expected = (self.height, self.width, self.channels)
        if self.data.shape != expected:
            msg = f"{self.data.shape=} does not match {expected=}"
            raise ValueError(msg)
        if not np.all(np.isfinite(self.data)):
            msg = "Image data contains non finite values."
            raise ValueError(msg)
        if self.data.size and (self.data.min() < 0 or self.data.max() > 1):
            msg = f"Image values must lie in [0, 1], got [{self.data.min()}, {self.data.max()}]"
            raise ValueError(msg)
        return self

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageBuf":
        """Builds an image from a (H, W) or (H, W, C) array."""
        data = np.array(array, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            msg = f"Expected 2 or 3 dimensional array, got {data.shape=}"
            raise ValueError(msg)
        data.setflags(write=False)
        return cls(width=data.shape[1], height=data.shape[0], channels=data.shape[2], data=data)

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width) of the image."""
        return (self.height, self.width)

    def plane(self, channel: int = 0) -> np.ndarray:
        """Returns one channel as a (H, W) array."""
        return self.data[:, :, channel]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuf):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


class MaskBuf(BaseComponent):
    """Interface for a binary label mask, 1 marks defect pixels."""

    width: Annotated[int, Field(..., gt=0, description="Width of the mask in pixels.")]
    height: Annotated[int, Field(..., gt=0, description="Height of the mask in pixels.")]
    data: Annotated[np.ndarray, Field(..., description="Row major values in {0, 1}.")]

    @model_validator(mode="after")
    def validate_fields(self):
        if self.data.shape != (self.height, self.width):
            msg = f"{self.data.shape=} does not match {(self.height, self.width)=}"
            raise ValueError(msg)
        if not np.all((self.data == 0) | (self.data == 1)):
            msg = "Mask values must be strictly binary."
            raise ValueError(msg)
        return self

    @classmethod
    def from_array(cls, array: np.ndarray) -> "MaskBuf":
        """Builds a mask from a (H, W) array of zeros and ones."""
        data = np.asarray(array)
        if data.ndim != 2:
            msg = f"Expected 2 dimensional array, got {data.shape=}"
            raise ValueError(msg)
        if not np.all((data == 0) | (data == 1)):
            msg = "Mask values must be strictly binary."
            raise ValueError(msg)
        data = data.astype(np.uint8)
        data.setflags(write=False)
        return cls(width=data.shape[1], height=data.shape[0], data=data)

    @classmethod
    def zeros(cls, height: int, width: int) -> "MaskBuf":
        return cls.from_array(np.zeros((height, width), dtype=np.uint8))

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width) of the mask."""
        return (self.height, self.width)

    def foreground_count(self) -> int:
        return int(self.data.sum())

    def foreground_fraction(self) -> float:
        return self.foreground_count() / self.data.size

    def to_image(self) -> ImageBuf:
        """Embeds the mask as a single channel intensity image."""
        return ImageBuf.from_array(self.data.astype(np.float64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskBuf):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


class Provenance(str, Enum):
    """Enumerator for the origin of a training pair."""

    REAL = "real"
    SYNTHETIC_TRIG = "synthetic_trig"
    SYNTHETIC_WGAN = "synthetic_wgan"


class PairSample(BaseComponent):
    """Interface for an image/label pair."""

    id: Annotated[str, Field(..., description="Identifier of the pair.")]
    image: Annotated[ImageBuf, Field(..., description="Defect image.")]
    mask: Annotated[MaskBuf, Field(..., description="Binary label mask.")]
    provenance: Annotated[Provenance, Field(Provenance.REAL, description="Origin of the pair.")]

    @model_validator(mode="after")
    def validate_fields(self):
        if self.image.shape != self.mask.shape:
            msg = f"{self.image.shape=} does not match {self.mask.shape=} for pair {self.id}"
            raise ValueError(msg)
        return self

    def with_data(self, image: ImageBuf, mask: MaskBuf) -> "PairSample":
        """Returns a pair with the same id and provenance but new pixel data."""
        return PairSample(id=self.id, image=image, mask=mask, provenance=self.provenance)


class TrigParams(BaseModel):
    """Coefficients a1 ... a7 of the defect curve model."""

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a7: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4, self.a5, self.a6, self.a7])


Interval = tuple[float, float]


class TrigBounds(BaseModel):
    """Interface for per coefficient sampling bounds of the defect curve model."""

    a1: Annotated[Interval, Field(TRIG_BOUNDS["a1"], description="Bounds of a1.")]
    a2: Annotated[Interval, Field(TRIG_BOUNDS["a2"], description="Bounds of a2.")]
    a3: Annotated[Interval, Field(TRIG_BOUNDS["a3"], description="Bounds of a3.")]
    a4: Annotated[Interval, Field(TRIG_BOUNDS["a4"], description="Bounds of a4.")]
    a5: Annotated[Interval, Field(TRIG_BOUNDS["a5"], description="Bounds of a5.")]
    a6: Annotated[Interval, Field(TRIG_BOUNDS["a6"], description="Bounds of a6.")]
    a7: Annotated[Interval, Field(TRIG_BOUNDS["a7"], description="Bounds of a7.")]

    @model_validator(mode="after")
    def validate_fields(self):
        for name, (lower, upper) in self.items():
            if lower > upper:
                msg = f"Lower bound exceeds upper bound for {name}: {lower=}, {upper=}"
                raise ValueError(msg)
        return self

    def items(self) -> list[tuple[str, Interval]]:
        return [(f"a{i}", getattr(self, f"a{i}")) for i in range(1, 8)]

    @classmethod
    def constant(cls, value: float) -> "TrigBounds":
        """Zero width bounds pinning every coefficient to `value`."""
        return cls(**{f"a{i}": (value, value) for i in range(1, 8)})


class LabelGenConfig(BaseModel):
    """Interface for the trigonometric label generator configuration."""

    width: Annotated[int, Field(64, ge=1, description="Mask width in pixels.")]
    height: Annotated[int, Field(64, ge=1, description="Mask height in pixels.")]
    curves_min: Annotated[int, Field(1, ge=1, description="Minimum curves per label.")]
    curves_max: Annotated[int, Field(4, ge=1, description="Maximum curves per label.")]
    thickness_min: Annotated[int, Field(1, ge=1, description="Minimum stroke thickness.")]
    thickness_max: Annotated[int, Field(3, ge=1, description="Maximum stroke thickness.")]
    rotation_min: Annotated[float, Field(0.0, description="Lower rotation bound in degrees.")]
    rotation_max: Annotated[
        float, Field(180.0, description="Upper rotation bound in degrees, exclusive.")
    ]
    bounds: Annotated[TrigBounds, Field(TrigBounds(), description="Coefficient bounds.")]
    max_resamples: Annotated[
        int, Field(16, ge=1, description="Attempts before giving up on empty labels.")
    ]
    amplitude_scale: Annotated[
        float,
        Field(1 / 64, gt=0, description="Mask rows per unit of f(x)."),
    ]
    oversample: Annotated[
        int, Field(4, ge=1, description="Curve samples per pixel step, at minimum.")
    ]

    @model_validator(mode="after")
    def validate_fields(self):
        if self.curves_min > self.curves_max:
            msg = f"{self.curves_min=} must not exceed {self.curves_max=}"
            raise ValueError(msg)
        if self.thickness_min > self.thickness_max:
            msg = f"{self.thickness_min=} must not exceed {self.thickness_max=}"
            raise ValueError(msg)
        if self.rotation_min > self.rotation_max:
            msg = f"{self.rotation_min=} must not exceed {self.rotation_max=}"
            raise ValueError(msg)
        return self


class CurveDraw(BaseModel):
    """Interface for one curve drawn into a synthetic label."""

    params: TrigParams
    thickness: Annotated[int, Field(..., ge=1)]
    angle: Annotated[float, Field(..., description="Rotation in degrees.")]


class LabelRecord(BaseComponent):
    """Synthetic label together with the draws that produced it."""

    mask: MaskBuf
    curves: list[CurveDraw]
    attempts: Annotated[int, Field(1, ge=1, description="Draws until a non empty mask.")]


class WganConfig(BaseModel):
    """Interface for the WGAN label generator configuration."""

    latent_dim: Annotated[int, Field(64, ge=1, description="Size of the latent vector.")]
    learning_rate: Annotated[float, Field(WGAN_LEARNING_RATE, gt=0)]
    batch_size: Annotated[int, Field(32, ge=1)]
    total_steps: Annotated[int, Field(2000, ge=0, description="Generator updates.")]
    clip_c: Annotated[float, Field(0.01, gt=0, description="Critic weight clipping bound.")]
    n_critic: Annotated[int, Field(5, ge=1, description="Critic updates per generator step.")]
    binarize_threshold: Annotated[float, Field(0.5, gt=0, lt=1)]
    mask_size: Annotated[int, Field(64, ge=8, description="Side length of the masks.")]
    base_channels: Annotated[int, Field(8, ge=1, description="Channels of the first layer.")]
    check_clipping: Annotated[
        bool, Field(False, description="Assert the clipping bound after every critic update.")
    ]

    @field_validator("mask_size")
    @classmethod
    def validate_mask_size(cls, value: int) -> int:
        if value % 8:
            msg = f"{value=} must be divisible by 8"
            raise ValueError(msg)
        return value


class RenderStyle(BaseModel):
    """Interface for the procedural fiber carpet renderer."""

    base_intensity: Annotated[float, Field(0.35, ge=0, le=1)]
    stripe_amplitude: Annotated[float, Field(0.08, ge=0, le=1)]
    stripe_period: Annotated[int, Field(4, ge=1, description="Stripe period in pixels.")]
    noise_sigma: Annotated[float, Field(0.02, ge=0)]
    defect_gain: Annotated[float, Field(0.4, ge=0, le=1)]
    defect_blur_radius: Annotated[int, Field(1, ge=0)]

    @model_validator(mode="after")
    def validate_fields(self):
        total = self.base_intensity + self.stripe_amplitude + self.defect_gain
        if total > 1:
            msg = f"base + amplitude + gain must not exceed 1, got {total=}"
            raise ValueError(msg)
        return self


class TranslatorConfig(BaseModel):
    """Interface for the label to image translator configuration."""

    learning_rate: Annotated[float, Field(PIX2PIX_LEARNING_RATE, gt=0)]
    batch_size: Annotated[int, Field(1, ge=1)]
    epochs: Annotated[int, Field(50, ge=0)]
    l1_weight: Annotated[float, Field(100.0, ge=0, description="Weight of the L1 term.")]
    adversarial_weight: Annotated[float, Field(1.0, ge=0)]
    adversarial_mode: Annotated[
        Literal["least_squares", "logistic"], Field("least_squares")
    ]
    image_size: Annotated[int, Field(64, ge=8)]
    base_channels: Annotated[int, Field(8, ge=1)]

    @model_validator(mode="after")
    def validate_fields(self):
        if self.l1_weight == 0 and self.adversarial_weight == 0:
            msg = "Both l1_weight and adversarial_weight are zero, nothing to optimize."
            raise ValueError(msg)
        if self.image_size % 8:
            msg = f"{self.image_size=} must be divisible by 8"
            raise ValueError(msg)
        return self


class SegConfig(BaseModel):
    """Interface for the segmenter configuration."""

    learning_rate: Annotated[float, Field(UNET_LEARNING_RATE, gt=0)]
    batch_size: Annotated[int, Field(10, ge=1)]
    epochs: Annotated[int, Field(60, ge=0)]
    bce_weight: Annotated[float, Field(0.5, ge=0)]
    dice_weight: Annotated[float, Field(0.5, ge=0)]
    threshold: Annotated[float, Field(0.5, gt=0, lt=1)]
    input_size: Annotated[int, Field(64, ge=4)]
    base_channels: Annotated[int, Field(8, ge=1)]
    validation_fraction: Annotated[float, Field(0.2, ge=0, lt=1)]

    @model_validator(mode="after")
    def validate_fields(self):
        if self.bce_weight == 0 and self.dice_weight == 0:
            msg = "bce_weight and dice_weight must not both be zero."
            raise ValueError(msg)
        if self.input_size % 4:
            msg = f"{self.input_size=} must be divisible by 4"
            raise ValueError(msg)
        return self


class ElasticParams(BaseModel):
    """Interface for elastic transform parameters."""

    alpha: Annotated[float, Field(10.0, ge=0, description="Displacement scale.")]
    sigma: Annotated[float, Field(10.0, gt=0, description="Gaussian smoothing.")]
    alpha_affine: Annotated[
        float,
        Field(REFERENCE_FRAME_SIZE * 0.05, ge=0, description="Affine jitter in pixels."),
    ]
    border_mode: Annotated[
        Literal["reflect_101"],
        Field("reflect_101", description="Mirror at the edge without repeating it."),
    ]


class GridParams(BaseModel):
    """Interface for grid distortion parameters."""

    num_steps: Annotated[int, Field(2, ge=1)]
    distort_limit: Annotated[float, Field(0.4, ge=0, lt=1)]


Probability = Annotated[float, Field(ge=0, le=1)]


class AugmentPolicy(BaseModel):
    """Interface for the online data augmentation policy.

    Pixel parameters default to the 512 pixel reference frame; use `scaled`
    to bring them to the working image size.
    """

    p_crop: Annotated[Probability, Field(0.25)]
    crop_window: Annotated[
        tuple[int, int], Field((400, 512), description="Side length interval of the crop.")
    ]
    p_flip_h: Annotated[Probability, Field(0.5)]
    p_flip_v: Annotated[Probability, Field(0.5)]
    p_rotate: Annotated[Probability, Field(0.5)]
    p_warp: Annotated[Probability, Field(0.5)]
    elastic: Annotated[ElasticParams, Field(ElasticParams())]
    grid: Annotated[GridParams, Field(GridParams())]

    @field_validator("crop_window")
    @classmethod
    def validate_crop_window(cls, value: tuple[int, int]) -> tuple[int, int]:
        if value[0] < 1 or value[0] > value[1]:
            msg = f"Invalid crop window {value=}"
            raise ValueError(msg)
        return value

    def scaled(self, size: int, reference: int = REFERENCE_FRAME_SIZE) -> "AugmentPolicy":
        """Returns the policy with pixel parameters scaled linearly to `size`."""
        factor = size / reference
        window = (
            max(1, int(round(self.crop_window[0] * factor))),
            max(1, int(round(self.crop_window[1] * factor))),
        )
        elastic = self.elastic.model_copy(
            update={"alpha_affine": self.elastic.alpha_affine * factor}
        )
        return self.model_copy(update={"crop_window": window, "elastic": elastic})

    @classmethod
    def disabled(cls) -> "AugmentPolicy":
        """Policy where no transform ever fires."""
        return cls(p_crop=0, p_flip_h=0, p_flip_v=0, p_rotate=0, p_warp=0)


class ManifestEntry(BaseModel):
    """Interface for one pair listed in a dataset manifest."""

    id: str
    image: Annotated[str, Field(..., description="Image path relative to the manifest root.")]
    mask: Annotated[str, Field(..., description="Mask path relative to the manifest root.")]
    provenance: Provenance


SYNTHETIC_PROVENANCE = {
    3: Provenance.SYNTHETIC_TRIG,
    4: Provenance.SYNTHETIC_TRIG,
    5: Provenance.SYNTHETIC_WGAN,
    6: Provenance.SYNTHETIC_WGAN,
}
ONLINE_DA_VARIANTS = {2, 4, 6}


class DatasetManifest(BaseModel):
    """Interface for a dataset variant listing.

    Variants 1 and 2 hold real pairs only; variants 3/4 add trigonometric
    synthetic pairs, 5/6 WGAN synthetic pairs. Even variants carry the
    online augmentation policy.
    """

    variant: Annotated[int, Field(..., ge=1, le=6)]
    entries: Annotated[list[ManifestEntry], Field(default_factory=list)]
    online_da: Annotated[Optional[AugmentPolicy], Field(None)]
    seed: Annotated[int, Field(0, ge=0)]

    @model_validator(mode="after")
    def validate_fields(self):
        if (self.online_da is not None) != (self.variant in ONLINE_DA_VARIANTS):
            msg = (
                f"online_da must be set exactly for variants {sorted(ONLINE_DA_VARIANTS)}, "
                f"got variant {self.variant}"
            )
            raise ValueError(msg)
        allowed = {Provenance.REAL, SYNTHETIC_PROVENANCE.get(self.variant, Provenance.REAL)}
        wrong = {e.provenance for e in self.entries} - allowed
        if wrong:
            msg = f"Variant {self.variant} can not hold entries of provenance {wrong}"
            raise ValueError(msg)
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            msg = f"Duplicate entry ids in manifest for variant {self.variant}"
            raise ValueError(msg)
        return self

    @property
    def counts(self) -> tuple[int, int]:
        """(real, synthetic) entry counts."""
        real = sum(1 for e in self.entries if e.provenance == Provenance.REAL)
        return real, len(self.entries) - real


class Confusion(BaseModel):
    """Pixelwise confusion counts."""

    tp: Annotated[int, Field(0, ge=0)]
    fp: Annotated[int, Field(0, ge=0)]
    fn: Annotated[int, Field(0, ge=0)]
    tn: Annotated[int, Field(0, ge=0)]

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


class MetricRow(BaseModel):
    """The seven reported segmentation metrics."""

    ppv: Annotated[float, Field(..., ge=0, le=1)]
    tpr: Annotated[float, Field(..., ge=0, le=1)]
    iou: Annotated[float, Field(..., ge=0, le=1)]
    acc: Annotated[float, Field(..., ge=0, le=1)]
    mcc: Annotated[float, Field(..., ge=-1, le=1)]
    f1: Annotated[float, Field(..., ge=0, le=1)]
    f2: Annotated[float, Field(..., ge=0, le=1)]

    def values(self) -> list[float]:
        return [self.ppv, self.tpr, self.iou, self.acc, self.mcc, self.f1, self.f2]


class WganLogRow(BaseModel):
    step: int
    gap: float
    critic_loss: float
    gen_loss: float


class TranslatorLogRow(BaseModel):
    epoch: int
    adversarial_loss: float
    l1_loss: float
    critic_loss: float


class SegLogRow(BaseModel):
    epoch: int
    train_loss: float
    train_iou: float
    val_loss: float
    val_iou: float


class ExperimentScale(BaseModel):
    """Interface for the sizes of an experiment."""

    image_size: Annotated[int, Field(64, ge=8)]
    real_count: Annotated[int, Field(30, ge=1, description="Real training pairs.")]
    synthetic_count: Annotated[int, Field(270, ge=0, description="Synthetic training pairs.")]
    test_count: Annotated[int, Field(25, ge=1, description="Shared real test pairs.")]


class ExperimentConfig(BaseModel):
    """Interface for the six dataset experiment."""

    scale: Annotated[ExperimentScale, Field(ExperimentScale())]
    seed: Annotated[int, Field(0, ge=0, description="Master seed.")]
    labelgen: Annotated[LabelGenConfig, Field(LabelGenConfig())]
    render: Annotated[RenderStyle, Field(RenderStyle())]
    wgan: Annotated[WganConfig, Field(WganConfig())]
    translator: Annotated[TranslatorConfig, Field(TranslatorConfig())]
    segmenter: Annotated[SegConfig, Field(SegConfig())]
    augment: Annotated[AugmentPolicy, Field(AugmentPolicy().scaled(64))]
    variants: Annotated[list[int], Field([1, 2, 3, 4, 5, 6])]
    eval_mode: Annotated[Literal["micro", "macro"], Field("micro")]

    @field_validator("variants")
    @classmethod
    def validate_variants(cls, value: list[int]) -> list[int]:
        if not value or any(v not in range(1, 7) for v in value):
            msg = f"Variants must be a non empty subset of 1..6, got {value=}"
            raise ValueError(msg)
        return sorted(set(value))

    @model_validator(mode="after")
    def validate_fields(self):
        size = self.scale.image_size
        sizes = {
            "labelgen.width": self.labelgen.width,
            "labelgen.height": self.labelgen.height,
            "wgan.mask_size": self.wgan.mask_size,
            "translator.image_size": self.translator.image_size,
            "segmenter.input_size": self.segmenter.input_size,
        }
        wrong = {k: v for k, v in sizes.items() if v != size}
        if wrong:
            msg = f"Stage sizes {wrong} differ from scale.image_size={size}"
            raise ValueError(msg)
        if self.augment.crop_window[1] > size:
            msg = f"{self.augment.crop_window=} exceeds image size {size}"
            raise ValueError(msg)
        return self

    @classmethod
    def desk(cls, image_size: int = 64, **kwargs) -> "ExperimentConfig":
        """Reference desk configuration at `image_size`."""
        return cls(
            scale=ExperimentScale(image_size=image_size),
            labelgen=LabelGenConfig(width=image_size, height=image_size),
            wgan=WganConfig(mask_size=image_size),
            translator=TranslatorConfig(image_size=image_size),
            segmenter=SegConfig(input_size=image_size),
            augment=AugmentPolicy().scaled(image_size),
            **kwargs,
        )
