from itertools import cycle
from pathlib import Path

import plotly.colors
import plotly.graph_objects as go

# Curves of one figure are told apart by color only, the palette wraps after ten.
TRACE_PALETTE = tuple(plotly.colors.qualitative.D3)
LAYOUT_MARGIN = {"r": 20, "t": 40, "l": 20, "b": 20}


class PlotManager:
    """Class for managing plotly line charts of training curves.

    Parameters
    ----------

    title: str
        Title of the figure.
    xaxis: str
        Label of the x axis, defaults to `epoch`.

    Examples
    --------

    Collecting the loss curves of a segmenter run.

    >>> manager = PlotManager("Segmenter dataset 3")
    >>> manager.add_plot([0, 1, 2], [0.9, 0.6, 0.4], name="train_loss")
    >>> manager.write_html("dataset_3.html")
    """

    def __init__(self, title: str = "", xaxis: str = "epoch"):
        self.title = title
        self.xaxis = xaxis
        self._figure = go.Figure()
        self._palette = cycle(TRACE_PALETTE)

    @property
    def figure(self) -> go.Figure:
        return self._figure

    def add_plot(self, x: list[float], y: list[float], name: str, mode: str = "lines"):
        """Appends one curve named `name`, `mode` is passed to `go.Scatter`."""
        trace = go.Scatter(
            x=list(x),
            y=list(y),
            name=name,
            mode=mode,
            line={"color": next(self._palette), "width": 2},
        )
        self._figure.add_trace(trace)

    def show(self):
        self._apply_layout()
        self._figure.show()

    def write_html(self, path: Path | str):
        self._apply_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self._figure.write_html(path)

    def _apply_layout(self):
        self._figure.update_layout(
            title=self.title,
            xaxis_title=self.xaxis,
            margin=LAYOUT_MARGIN,
            legend={"x": 1, "y": 1},
        )
