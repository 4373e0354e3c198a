from abc import ABC, abstractmethod

import numpy as np

from defectsynth.data_model import MaskBuf, Provenance
from defectsynth.rng import SeededRng


def foreground_fraction(masks: list[MaskBuf]) -> float:
    """Mean fraction of foreground pixels over a list of masks, 0 for no masks."""
    if not masks:
        return 0.0
    return float(np.mean([mask.foreground_fraction() for mask in masks]))


def union_masks(masks: list[MaskBuf]) -> MaskBuf:
    """Pixelwise union of equally sized masks."""
    if not masks:
        msg = "Can not build the union of zero masks."
        raise ValueError(msg)
    data = np.zeros(masks[0].shape, dtype=np.uint8)
    for mask in masks:
        data |= mask.data
    return MaskBuf.from_array(data)


class BaseLabelGenerator(ABC):
    """Abstract class for synthetic label generators.

    Subclasses must implement following methods.
    * sample_masks

    Subclasses set `provenance` to the tag attached to pairs built from
    their labels.
    """

    provenance: Provenance

    @abstractmethod
    def sample_masks(self, n: int, rng: SeededRng) -> list[MaskBuf]:
        """Returns `n` binary label masks drawn from `rng`.

        Parameters
        ----------

        n: int
            Number of masks, zero returns an empty list.
        rng: SeededRng
            Random stream, the result is a pure function of its seed.

        Returns
        -------

        list[MaskBuf]
        """
