from abc import ABC, abstractmethod

from defectsynth.data_model import ImageBuf, MaskBuf
from defectsynth.rng import SeededRng


class BaseLabelTranslator(ABC):
    """Abstract class for turning label masks into defect images.

    Subclasses must implement following methods.
    * translate
    """

    @abstractmethod
    def translate(self, mask: MaskBuf, rng: SeededRng) -> ImageBuf:
        """Returns an image of the same size as `mask`.

        Parameters
        ----------

        mask: MaskBuf
            Label to translate.
        rng: SeededRng
            Random stream, ignored by deterministic translators.
        """

    def translate_many(self, masks: list[MaskBuf], rng: SeededRng) -> list[ImageBuf]:
        """Translates mask i with child stream i of `rng`."""
        return [self.translate(mask, rng.derive(index)) for index, mask in enumerate(masks)]
