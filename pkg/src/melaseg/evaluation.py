"""Confusion counts, the five overlap/rate metrics, and per-item reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from melaseg import dataset

METRICS = ("accuracy", "dice", "jaccard", "sensitivity", "specificity")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    dice: float
    jaccard: float
    sensitivity: float
    specificity: float
    # Names of metrics whose ratio was 0/0 and set to 1.
    undefined: tuple[str, ...] = ()

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in METRICS)


def confusion(pred: np.ndarray, truth: np.ndarray) -> Confusion:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction {pred.shape} and truth {truth.shape} differ in size")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(pred.size) - tp - fp - fn
    return Confusion(tp, fp, tn, fn)


def metrics(c: Confusion) -> Metrics:
    undefined = []

    def ratio(name, num, den):
        if den == 0:
            undefined.append(name)
            return 1.0
        return num / den

    values = dict(
        accuracy=ratio("accuracy", c.tp + c.tn, c.total),
        dice=ratio("dice", 2 * c.tp, 2 * c.tp + c.fp + c.fn),
        jaccard=ratio("jaccard", c.tp, c.tp + c.fp + c.fn),
        sensitivity=ratio("sensitivity", c.tp, c.tp + c.fn),
        specificity=ratio("specificity", c.tn, c.tn + c.fp),
    )
    return Metrics(**values, undefined=tuple(undefined))


@dataclass
class ItemResult:
    item: str
    confusion: Confusion
    metrics: Metrics


@dataclass
class EvalReport:
    kind: str
    items: list[ItemResult]
    overall: dict[str, float] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.overall:
            self.overall = average(self.items)


def average(items: Sequence[ItemResult]) -> dict[str, float]:
    """Unweighted mean of each metric over items."""
    if not items:
        return {name: float("nan") for name in METRICS}
    table = np.array([it.metrics.values() for it in items])
    return dict(zip(METRICS, table.mean(axis=0).tolist()))


def evaluate_masks(pairs: Iterable[tuple[str, np.ndarray, np.ndarray]]) -> EvalReport:
    """``pairs`` yields ``(item, predicted_mask, truth_mask)``."""
    items = []
    for item, pred, truth in pairs:
        c = confusion(pred, truth)
        items.append(ItemResult(item, c, metrics(c)))
    return EvalReport("segmentation", items)


def class_from_scores(mel: float, sk: float) -> str:
    """Three-class decision from the two task scores.

    The logistic score map is monotone, so this matches the rule on raw
    decision values with 0.5 in place of 0.
    """
    if mel > 0.5 and mel >= sk:
        return dataset.MELANOMA
    if sk > 0.5 and sk > mel:
        return dataset.SEBORRHEIC_KERATOSIS
    return dataset.NEVUS


def _task_confusion(pred: Sequence[bool], truth: Sequence[bool]) -> Confusion:
    p = np.asarray(pred, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    return confusion(p, t)


def classification_metrics(
    predictions: Sequence[tuple[str, float, float]],
    truth: dict[str, str],
    threshold: float = 0.5,
) -> EvalReport:
    """Melanoma-vs-rest and SK-vs-rest confusions plus 3-class accuracy.

    ``predictions`` holds ``(image_id, mel_score, sk_score)`` rows; a task is
    predicted positive when its score exceeds ``threshold``.
    """
    ids = [p[0] for p in predictions]
    missing = sorted(set(ids) - set(truth))
    unscored = sorted(set(truth) - set(ids))
    if missing or unscored:
        parts = []
        if missing:
            parts.append(f"no ground truth for: {', '.join(missing)}")
        if unscored:
            parts.append(f"no prediction for: {', '.join(unscored)}")
        raise KeyError("; ".join(parts))
    mel = np.array([p[1] for p in predictions])
    sk = np.array([p[2] for p in predictions])
    true_cls = [truth[i] for i in ids]
    items = []
    for task, scores, positive in (
        ("melanoma", mel, dataset.MELANOMA),
        ("seborrheic_keratosis", sk, dataset.SEBORRHEIC_KERATOSIS),
    ):
        c = _task_confusion(scores > threshold, [t == positive for t in true_cls])
        items.append(ItemResult(task, c, metrics(c)))
    pred_cls = [class_from_scores(a, b) for a, b in zip(mel, sk)]
    correct = sum(p == t for p, t in zip(pred_cls, true_cls))
    three_class = correct / len(ids) if ids else float("nan")
    return EvalReport(
        "classification",
        items,
        extra={"three_class_accuracy": three_class, "n_images": len(ids)},
    )


# -- output ----------------------------------------------------------------


def report_dict(report: EvalReport) -> dict:
    flagged = {it.item: list(it.metrics.undefined) for it in report.items if it.metrics.undefined}
    return {
        "kind": report.kind,
        "items": [
            {
                "item": it.item,
                "confusion": asdict(it.confusion),
                "metrics": {name: getattr(it.metrics, name) for name in METRICS},
                "undefined": list(it.metrics.undefined),
            }
            for it in report.items
        ],
        "overall": report.overall,
        "undefined_ratios": flagged,
        **report.extra,
    }


def write_report(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report_dict(report), indent=2) + "\n")


def write_metrics_csv(report: EvalReport, path) -> None:
    lines = ["item," + ",".join(METRICS)]
    for it in report.items:
        lines.append(it.item + "," + ",".join(f"{v:.6f}" for v in it.metrics.values()))
    Path(path).write_text("\n".join(lines) + "\n")


def format_summary(report: EvalReport) -> str:
    parts = [f"{name}={report.overall[name]:.4f}" for name in METRICS]
    line = f"{report.kind} ({len(report.items)} items): " + " ".join(parts)
    if "three_class_accuracy" in report.extra:
        line += f" three_class_accuracy={report.extra['three_class_accuracy']:.4f}"
    return line
