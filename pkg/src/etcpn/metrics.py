"""Stepwise confusion counting and detection-quality metrics.

A step counts as positive when any injected fault is active at that step.
Degenerate denominators yield 0.0 with an explicit undefined flag instead
of NaN so emitted tables stay parseable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def evaluate(truth, preds) -> Confusion:
    """Count the per-step confusion between fault flags and alarms."""
    truth = np.asarray(truth, dtype=bool)
    preds = np.asarray(preds, dtype=bool)
    if truth.shape != preds.shape:
        raise DimensionError(
            f"length mismatch: {truth.shape} truth flags vs {preds.shape} alarms"
        )
    return Confusion(
        tp=int(np.sum(truth & preds)),
        fp=int(np.sum(~truth & preds)),
        tn=int(np.sum(~truth & ~preds)),
        fn=int(np.sum(truth & ~preds)),
    )


def _ratio(num: int, den: int, with_flag: bool):
    if den == 0:
        return (0.0, False) if with_flag else 0.0
    value = num / den
    return (value, True) if with_flag else value


def accuracy(c: Confusion, with_flag: bool = False):
    return _ratio(c.tp + c.tn, c.total, with_flag)


def recall(c: Confusion, with_flag: bool = False):
    return _ratio(c.tp, c.tp + c.fn, with_flag)


def fpr(c: Confusion, with_flag: bool = False):
    return _ratio(c.fp, c.fp + c.tn, with_flag)


def precision(c: Confusion, with_flag: bool = False):
    return _ratio(c.tp, c.tp + c.fp, with_flag)


def f1(c: Confusion, with_flag: bool = False):
    p, p_ok = precision(c, with_flag=True)
    r, r_ok = recall(c, with_flag=True)
    if not (p_ok and r_ok) or p + r == 0:
        return (0.0, False) if with_flag else 0.0
    value = 2.0 * p * r / (p + r)
    return (value, True) if with_flag else value


_COLUMNS = ("Method", "Accuracy", "Recall", "FPR", "F1")


def metric_row(method: str, c: Confusion) -> dict:
    out = {"Method": method}
    for name, fn in (("Accuracy", accuracy), ("Recall", recall), ("FPR", fpr), ("F1", f1)):
        value, defined = fn(c, with_flag=True)
        out[name] = value
        out[f"{name}_defined"] = defined
    return out


def format_table(rows) -> str:
    """Aligned plain-text table in the Method/Accuracy/Recall/FPR/F1 layout."""
    header = f"{'Method':<10}" + "".join(f"{c:>10}" for c in _COLUMNS[1:])
    lines = [header, "-" * len(header)]
    for row in rows:
        cells = []
        for c in _COLUMNS[1:]:
            text = f"{row[c]:.3f}" if row.get(f"{c}_defined", True) else "undef"
            cells.append(f"{text:>10}")
        lines.append(f"{row['Method']:<10}" + "".join(cells))
    return "\n".join(lines) + "\n"


def metrics_csv(rows) -> str:
    lines = [",".join(_COLUMNS)]
    for row in rows:
        cells = [row["Method"]]
        for c in _COLUMNS[1:]:
            cells.append(f"{row[c]:.6f}" if row.get(f"{c}_defined", True) else "0")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
