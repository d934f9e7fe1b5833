"""Micro-averaged F1 and evaluation reports.

Micro-F1 pools true positives, false positives, and false negatives across
classes before forming F1 = TP / (TP + (FP + FN) / 2).  With single-label
predictions every wrong prediction is simultaneously one FP and one FN, so
the pooled score collapses to plain accuracy; an internal assertion keeps
that identity honest.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _as_int_labels(pred, gold) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise DataError(
            f"prediction/gold shapes differ: {pred.shape} vs {gold.shape}"
        )
    if len(pred) == 0:
        raise DataError("cannot score an empty prediction set")
    if pred.min() < 0 or gold.min() < 0:
        raise DataError("class indices must be non-negative")
    return pred, gold


def micro_f1(pred, gold) -> float:
    """Micro-averaged F1 over single-label class index arrays."""
    pred, gold = _as_int_labels(pred, gold)
    n_classes = int(max(pred.max(), gold.max())) + 1
    tp = fp = fn = 0
    for c in range(n_classes):
        tp += int(np.sum((pred == c) & (gold == c)))
        fp += int(np.sum((pred == c) & (gold != c)))
        fn += int(np.sum((pred != c) & (gold == c)))
    score = tp / (tp + 0.5 * (fp + fn))
    accuracy = float(np.mean(pred == gold))
    assert abs(score - accuracy) < 1e-12, "micro-F1 must equal accuracy here"
    return score


def confusion_matrix(pred, gold, n_classes: int | None = None) -> np.ndarray:
    """Counts with gold labels on rows and predictions on columns."""
    pred, gold = _as_int_labels(pred, gold)
    if n_classes is None:
        n_classes = int(max(pred.max(), gold.max())) + 1
    elif int(max(pred.max(), gold.max())) >= n_classes:
        raise DataError("class index outside the declared label space")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (gold, pred), 1)
    return m


def per_class_prf(pred, gold, n_classes: int | None = None) -> list[dict]:
    """Per-class precision/recall/F1; zero-denominator cases score 0.0."""
    cm = confusion_matrix(pred, gold, n_classes)
    rows = []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        rows.append(
            {"class": c, "precision": precision, "recall": recall, "f1": f1,
             "support": tp + fn}
        )
    return rows


@dataclass
class EvalReport:
    model_name: str
    micro_f1: float
    n_examples: int
    n_classes: int
    class_names: list[str]
    per_class: list[dict]
    confusion: list[list[int]]
    extra: dict = field(default_factory=dict)
    # measured around prediction only; volatile, so it is logged but kept out
    # of the serialized report to preserve byte-for-byte reproducibility
    wall_clock_seconds: float | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "micro_f1": self.micro_f1,
            "n_examples": self.n_examples,
            "n_classes": self.n_classes,
            "class_names": self.class_names,
            "per_class": self.per_class,
            "confusion": self.confusion,
            **self.extra,
        }

    def render(self) -> str:
        lines = [
            f"model: {self.model_name}",
            f"examples: {self.n_examples}  classes: {self.n_classes}",
            f"micro-F1: {self.micro_f1:.4f}",
            "",
            f"{'class':<16} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}",
        ]
        for row in self.per_class:
            name = self.class_names[row["class"]]
            lines.append(
                f"{name:<16} {row['precision']:>9.4f} {row['recall']:>9.4f} "
                f"{row['f1']:>9.4f} {row['support']:>8d}"
            )
        lines.append("")
        lines.append("confusion (rows = gold, cols = predicted):")
        header = " " * 16 + " ".join(f"{n[:10]:>10}" for n in self.class_names)
        lines.append(header)
        for name, row in zip(self.class_names, self.confusion):
            lines.append(f"{name:<16}" + " ".join(f"{v:>10d}" for v in row))
        return "\n".join(lines) + "\n"


def build_report(model_name: str, pred, gold, class_names: list[str],
                 extra: dict | None = None) -> EvalReport:
    n_classes = len(class_names)
    pred_arr, gold_arr = _as_int_labels(pred, gold)
    if int(max(pred_arr.max(), gold_arr.max())) >= n_classes:
        raise DataError("class index outside the declared label space")
    return EvalReport(
        model_name=model_name,
        micro_f1=micro_f1(pred_arr, gold_arr),
        n_examples=len(gold_arr),
        n_classes=n_classes,
        class_names=list(class_names),
        per_class=per_class_prf(pred_arr, gold_arr, n_classes),
        confusion=confusion_matrix(pred_arr, gold_arr, n_classes).tolist(),
        extra=dict(extra or {}),
    )


def save_report(report: EvalReport, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
