"""Per-label classification metrics with explicit flags for undefined cases."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

METRIC_NAMES = ("precision", "recall", "f1", "auc", "accuracy", "specificity")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "Confusion":
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(~t & ~p)))


def auc_score(scores, labels) -> tuple[float, bool]:
    """Mann-Whitney AUC with ties worth one half.

    Returns ``(auc, defined)``; with no positives or no negatives the AUC is
    reported as 0.5 and ``defined`` is False. Counts are summed in integer
    arithmetic (ties doubled) so the only rounding is the final division.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = np.sort(s[y]), np.sort(s[~y])
    if len(pos) == 0 or len(neg) == 0:
        return 0.5, False
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    twice = int(np.sum(below, dtype=np.int64)) * 2 + int(np.sum(upto - below, dtype=np.int64))
    return twice / (2 * len(pos) * len(neg)), True


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, True) if den else (0.0, False)


@dataclass(frozen=True)
class LabelMetrics:
    confusion: Confusion
    precision: float
    recall: float
    f1: float
    auc: float
    accuracy: float
    specificity: float
    flags: tuple[str, ...] = ()

    @classmethod
    def compute(cls, scores, labels, threshold: float = 0.5) -> "LabelMetrics":
        scores = np.asarray(scores, dtype=np.float64)
        c = Confusion.from_predictions(labels, scores >= threshold)
        flags = []
        precision, ok = _ratio(c.tp, c.tp + c.fp)
        if not ok:
            flags.append("precision_undefined")
        recall, ok = _ratio(c.tp, c.tp + c.fn)
        if not ok:
            flags.append("recall_undefined")
        specificity, ok = _ratio(c.tn, c.tn + c.fp)
        if not ok:
            flags.append("specificity_undefined")
        accuracy, _ = _ratio(c.tp + c.tn, c.tp + c.fp + c.fn + c.tn)
        # harmonic mean of precision and recall, written over counts so it rounds once
        f1 = 2 * c.tp / (2 * c.tp + c.fp + c.fn) if c.tp else 0.0
        if not c.tp:
            flags.append("f1_undefined")
        auc, ok = auc_score(scores, labels)
        if not ok:
            flags.append("auc_undefined")
        return cls(c, precision, recall, f1, auc, accuracy, specificity, tuple(flags))

    def as_dict(self) -> dict:
        return {m: getattr(self, m) for m in METRIC_NAMES}


@dataclass
class MetricsReport:
    """Metrics per split and per label (label index 0..4)."""

    splits: dict[str, list[LabelMetrics]] = field(default_factory=dict)
    threshold: float = 0.5

    def add(self, split: str, probs: np.ndarray, y: np.ndarray) -> None:
        probs = np.asarray(probs, dtype=np.float64)
        y = np.asarray(y)
        self.splits[split] = [LabelMetrics.compute(probs[:, j], y[:, j], self.threshold) for j in range(y.shape[1])]

    def macro_auc(self, split: str) -> float:
        return float(np.mean([m.auc for m in self.splits[split]]))

    def rows(self, model: str = "") -> list[dict]:
        out = []
        for split, per_label in self.splits.items():
            for j, m in enumerate(per_label):
                row = {"model": model, "split": split, "label": j}
                row.update(m.as_dict())
                row["flags"] = ";".join(m.flags)
                out.append(row)
        return out

    def to_csv(self, model: str = "") -> str:
        buf = io.StringIO()
        cols = ["model", "split", "label", *METRIC_NAMES, "flags"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows(model):
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()
