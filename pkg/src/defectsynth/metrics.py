import math
from typing import Literal

import numpy as np
import pandas as pd

from defectsynth.constants import METRIC_COLUMNS
from defectsynth.data_model import Confusion, MaskBuf, MetricRow
from defectsynth.exceptions import DimensionMismatchError, InvalidInputError

LABEL_WIDTH = 10
COLUMN_WIDTH = 10


def confusion(pred: MaskBuf, gt: MaskBuf) -> Confusion:
    """Pixelwise confusion counts of a prediction against ground truth."""
    if pred.shape != gt.shape:
        msg = f"Prediction shape {pred.shape} does not match ground truth shape {gt.shape}"
        raise DimensionMismatchError(msg)
    p, g = pred.data.astype(bool), gt.data.astype(bool)
    return Confusion(
        tp=int(np.sum(p & g)),
        fp=int(np.sum(p & ~g)),
        fn=int(np.sum(~p & g)),
        tn=int(np.sum(~p & ~g)),
    )


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def f_beta(ppv: float, tpr: float, beta: float) -> float:
    b2 = beta * beta
    return _ratio((1 + b2) * ppv * tpr, b2 * ppv + tpr)


def compute_metrics(c: Confusion) -> MetricRow:
    """PPV, TPR, IoU, ACC, MCC, F1 and F2 of a confusion. Zero denominators give 0."""
    ppv = _ratio(c.tp, c.tp + c.fp)
    tpr = _ratio(c.tp, c.tp + c.fn)
    denominator = math.sqrt(
        float(c.tp + c.fp) * float(c.tp + c.fn) * float(c.tn + c.fp) * float(c.tn + c.fn)
    )
    # Rounding in the denominator can push a perfect score past 1.
    mcc = _ratio(float(c.tp) * c.tn - float(c.fp) * c.fn, denominator)
    return MetricRow(
        ppv=ppv,
        tpr=tpr,
        iou=_ratio(c.tp, c.tp + c.fp + c.fn),
        acc=_ratio(c.tp + c.tn, c.total),
        mcc=min(1.0, max(-1.0, mcc)),
        f1=f_beta(ppv, tpr, 1.0),
        f2=f_beta(ppv, tpr, 2.0),
    )


def evaluate_set(
    preds: list[MaskBuf], gts: list[MaskBuf], mode: Literal["micro", "macro"] = "micro"
) -> MetricRow:
    """Metrics over aligned prediction and ground truth lists.

    micro pools confusion counts before computing metrics, macro averages the
    per image metrics.
    """
    if len(preds) != len(gts):
        msg = f"Got {len(preds)} predictions for {len(gts)} ground truth masks"
        raise InvalidInputError(msg)
    if not preds:
        msg = "Can not evaluate an empty set."
        raise InvalidInputError(msg)
    confusions = [confusion(pred, gt) for pred, gt in zip(preds, gts)]
    if mode == "micro":
        return compute_metrics(sum(confusions[1:], confusions[0]))
    if mode == "macro":
        rows = np.array([compute_metrics(c).values() for c in confusions])
        return MetricRow(**dict(zip(MetricRow.model_fields, rows.mean(axis=0).tolist())))
    msg = f"Unknown aggregation {mode=}"
    raise InvalidInputError(msg)


def report_table(rows: dict[str, MetricRow]) -> str:
    """Fixed width table with one labelled line per row and six decimals.

    Examples
    --------

    >>> print(report_table({"Dataset 1": row}))
                     PPV       TPR       IoU       ACC       MCC        F1        F2
    Dataset 1   0.539169  0.586753  0.390778  0.985035  0.554870  0.561956  0.576576
    """
    if not rows:
        msg = "A report needs at least one row."
        raise InvalidInputError(msg)
    header = " " * LABEL_WIDTH + "".join(f"{name:>{COLUMN_WIDTH}}" for name in METRIC_COLUMNS)
    lines = [header]
    for label, row in rows.items():
        values = "".join(f"{value:>{COLUMN_WIDTH}.6f}" for value in row.values())
        lines.append(f"{label:<{LABEL_WIDTH}}{values}")
    return "\n".join(lines) + "\n"


def metrics_frame(rows: dict[str, MetricRow]) -> pd.DataFrame:
    """Machine readable form of `report_table`."""
    return pd.DataFrame(
        [[label, *row.values()] for label, row in rows.items()],
        columns=["label", *METRIC_COLUMNS],
    )
