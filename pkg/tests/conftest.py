import pytest

from defectsynth import (
    AugmentPolicy,
    ExperimentConfig,
    ExperimentScale,
    LabelGenConfig,
    SegConfig,
    TranslatorConfig,
    WganConfig,
)


def make_tiny_config(**kwargs) -> ExperimentConfig:
    """16 pixel experiment that runs every stage in seconds."""
    settings = {
        "scale": ExperimentScale(image_size=16, real_count=4, synthetic_count=4, test_count=3),
        "labelgen": LabelGenConfig(width=16, height=16),
        "wgan": WganConfig(
            mask_size=16, latent_dim=4, batch_size=4, total_steps=2, base_channels=2
        ),
        "translator": TranslatorConfig(image_size=16, base_channels=2, batch_size=4, epochs=1),
        "segmenter": SegConfig(input_size=16, base_channels=2, batch_size=2, epochs=1),
        "augment": AugmentPolicy().scaled(16),
        "variants": [1, 3, 5],
    }
    settings.update(kwargs)
    return ExperimentConfig(**settings)


@pytest.fixture
def tiny_config():
    yield make_tiny_config()
