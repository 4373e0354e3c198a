import numpy as np
import pandas as pd
import pytest

from defectsynth import (
    ImageBuf,
    MaskBuf,
    MetricRow,
    PlotManager,
    add_training_log_to_plot,
    overlay_prediction,
)
from defectsynth.exceptions import DimensionMismatchError, InvalidInputError
from defectsynth.plots import add_metric_rows_to_plot


@pytest.fixture
def get_plot_manager():
    plt_manager = PlotManager(title="Segmenter dataset 1")
    yield plt_manager


@pytest.fixture
def seg_log():
    yield pd.DataFrame(
        {
            "epoch": [0, 1, 2],
            "train_loss": [0.9, 0.6, 0.4],
            "train_iou": [0.1, 0.3, 0.5],
            "val_loss": [0.95, 0.7, 0.5],
            "val_iou": [0.1, 0.2, 0.4],
        }
    )


def test_plot_manager(tmp_path, get_plot_manager):
    """Function to test plot manager."""
    get_plot_manager.add_plot([0, 1, 2], [0.9, 0.6, 0.4], name="train_loss")
    get_plot_manager.write_html(tmp_path / "plots" / "segnet.html")
    assert (tmp_path / "plots" / "segnet.html").exists()
    assert get_plot_manager.figure.layout.xaxis.title.text == "epoch"


def test_adding_training_log(get_plot_manager, seg_log):
    """Function to test adding a training log to plot manager."""
    add_training_log_to_plot(seg_log, get_plot_manager, prefix="d1 ")
    names = [trace.name for trace in get_plot_manager.figure.data]
    assert names == ["d1 train_loss", "d1 train_iou", "d1 val_loss", "d1 val_iou"]
    colors = {trace.line.color for trace in get_plot_manager.figure.data}
    assert len(colors) == 4


def test_training_log_columns(get_plot_manager, seg_log):
    with pytest.raises(InvalidInputError):
        add_training_log_to_plot(seg_log, get_plot_manager, x_column="step")
    with pytest.raises(InvalidInputError):
        add_training_log_to_plot(seg_log, get_plot_manager, columns=["gap"])


def test_adding_metric_rows(get_plot_manager):
    row = MetricRow(ppv=0.5, tpr=1.0, iou=0.5, acc=0.75, mcc=0.5, f1=0.6, f2=0.8)
    add_metric_rows_to_plot({"Dataset 1": row, "Dataset 3": row}, get_plot_manager)
    assert list(get_plot_manager.figure.data[0].y) == [0.5, 0.5]
    with pytest.raises(InvalidInputError):
        add_metric_rows_to_plot({"Dataset 1": row}, get_plot_manager, metric="auc")


def test_overlay_prediction():
    image = ImageBuf.from_array(np.full((2, 2), 0.5))
    mask = MaskBuf.from_array(np.array([[1, 0], [0, 0]]))
    overlay = overlay_prediction(image, mask, opacity=1.0)
    assert overlay.channels == 3
    assert np.allclose(overlay.data[0, 0], [1.0, 0.0, 0.0])
    assert np.allclose(overlay.data[1, 1], [0.5, 0.5, 0.5])
    half = overlay_prediction(image, mask, color=(0.0, 1.0, 0.0), opacity=0.5)
    assert np.allclose(half.data[0, 0], [0.25, 0.75, 0.25])


def test_overlay_errors():
    image = ImageBuf.from_array(np.zeros((2, 2)))
    with pytest.raises(DimensionMismatchError):
        overlay_prediction(image, MaskBuf.zeros(3, 2))
    with pytest.raises(InvalidInputError):
        overlay_prediction(image, MaskBuf.zeros(2, 2), opacity=1.5)
