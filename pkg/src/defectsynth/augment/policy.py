from typing import Literal, Optional

from pydantic import BaseModel

from defectsynth.augment.transforms import (
    elastic_transform,
    flip_h,
    flip_v,
    grid_distortion,
    random_sized_crop,
    rotate180,
)
from defectsynth.data_model import AugmentPolicy, PairSample
from defectsynth.rng import SeededRng

# Order in which gated transforms are applied.
TRANSFORM_ORDER = ("crop", "flip_h", "flip_v", "rotate", "warp")


class AugmentPlan(BaseModel):
    """Which transforms fire for one pair; `warp` names the single chosen warp."""

    crop: bool = False
    flip_h: bool = False
    flip_v: bool = False
    rotate: bool = False
    warp: Optional[Literal["elastic", "grid"]] = None

    def is_identity(self) -> bool:
        return not (self.crop or self.flip_h or self.flip_v or self.rotate or self.warp)


def draw_plan(rng: SeededRng, policy: AugmentPolicy) -> AugmentPlan:
    """Draws each probability gate in `TRANSFORM_ORDER`; a fired warp gate picks
    elastic or grid with equal odds."""
    plan = AugmentPlan(
        crop=rng.bernoulli(policy.p_crop),
        flip_h=rng.bernoulli(policy.p_flip_h),
        flip_v=rng.bernoulli(policy.p_flip_v),
        rotate=rng.bernoulli(policy.p_rotate),
    )
    if rng.bernoulli(policy.p_warp):
        plan.warp = "elastic" if rng.uniform() < 0.5 else "grid"
    return plan


def apply_plan(
    rng: SeededRng,
    pair: PairSample,
    plan: AugmentPlan,
    policy: AugmentPolicy,
    image_order: int = 1,
) -> PairSample:
    """Applies the fired transforms. The crop draws from child stream 1 of `rng`,
    the warp from child stream 2."""
    if plan.crop:
        pair = random_sized_crop(rng.derive(1), pair, policy, image_order=image_order)
    if plan.flip_h:
        pair = flip_h(pair)
    if plan.flip_v:
        pair = flip_v(pair)
    if plan.rotate:
        pair = rotate180(pair)
    if plan.warp == "elastic":
        pair = elastic_transform(rng.derive(2), pair, policy.elastic, image_order=image_order)
    elif plan.warp == "grid":
        pair = grid_distortion(rng.derive(2), pair, policy.grid, image_order=image_order)
    return pair


def augment_online(
    rng: SeededRng, pair: PairSample, policy: AugmentPolicy, image_order: int = 1
) -> PairSample:
    """Applies the online augmentation policy to one pair.

    The plan is drawn from child stream 0 of `rng`.

    Examples
    --------

    >>> policy = AugmentPolicy().scaled(64)
    >>> augmented = augment_online(SeededRng(5), pair, policy)
    """
    plan = draw_plan(rng.derive(0), policy)
    return apply_plan(rng, pair, plan, policy, image_order=image_order)


def augment_pairs(
    pairs: list[PairSample], policy: AugmentPolicy, rng: SeededRng
) -> list[PairSample]:
    """Augments pair i with child stream i of `rng`."""
    return [augment_online(rng.derive(index), pair, policy) for index, pair in enumerate(pairs)]
