import importlib.metadata

from defectsynth.version import version_summary


def test_defectsynth_version():
    """Prints defectsynth version."""
    print(importlib.metadata.version("defectsynth"))


def test_version_summary():
    summary = version_summary()
    assert "defectsynth version" in summary
    assert "numpy-" in summary
