import numpy as np
import pandas as pd

from defectsynth.data_model import ImageBuf, MaskBuf, MetricRow
from defectsynth.exceptions import DimensionMismatchError, InvalidInputError
from defectsynth.plot_manager import PlotManager


def add_training_log_to_plot(
    log: pd.DataFrame,
    plot_manager: PlotManager,
    x_column: str = "epoch",
    columns: list[str] | None = None,
    prefix: str = "",
):
    """Adds one curve per log column.

    Parameters
    ----------

    log: pd.DataFrame
        Training log as returned by the training functions.
    plot_manager: PlotManager
        Plot manager instance.
    x_column: str
        Column holding the abscissae, `epoch` or `step`.
    columns: list[str] | None
        Columns to plot, defaults to every other column.
    prefix: str
        Prepended to every legend entry.

    Examples
    --------

    >>> from defectsynth import PlotManager
    >>> plt_instance = PlotManager("Dataset 1")
    >>> add_training_log_to_plot(log, plt_instance, columns=["train_iou", "val_iou"])
    """
    if x_column not in log.columns:
        msg = f"Log has no column {x_column=}, columns are {list(log.columns)}"
        raise InvalidInputError(msg)
    columns = [c for c in log.columns if c != x_column] if columns is None else columns
    missing = set(columns) - set(log.columns)
    if missing:
        msg = f"Log has no columns {sorted(missing)}"
        raise InvalidInputError(msg)
    for column in columns:
        plot_manager.add_plot(log[x_column], log[column], name=f"{prefix}{column}")


def add_metric_rows_to_plot(
    rows: dict[str, MetricRow], plot_manager: PlotManager, metric: str = "iou"
):
    """Adds one marker per dataset for a single metric."""
    if metric not in MetricRow.model_fields:
        msg = f"Unknown {metric=}"
        raise InvalidInputError(msg)
    plot_manager.add_plot(
        list(rows), [getattr(row, metric) for row in rows.values()], name=metric, mode="markers"
    )


def overlay_prediction(
    image: ImageBuf,
    mask: MaskBuf,
    color: tuple[float, float, float] = (1.0, 0.0, 0.0),
    opacity: float = 0.6,
) -> ImageBuf:
    """Returns an RGB copy of `image` with the foreground of `mask` tinted by `color`."""
    if image.shape != mask.shape:
        msg = f"Image shape {image.shape} does not match mask shape {mask.shape}"
        raise DimensionMismatchError(msg)
    if not 0 <= opacity <= 1:
        msg = f"Opacity must be in [0, 1], got {opacity=}"
        raise InvalidInputError(msg)
    rgb = np.repeat(image.data, 3, axis=2) if image.channels == 1 else image.data.copy()
    tint = np.asarray(color, dtype=np.float64)
    hit = mask.data.astype(bool)
    rgb[hit] = (1 - opacity) * rgb[hit] + opacity * tint
    return ImageBuf.from_array(np.clip(rgb, 0.0, 1.0))
