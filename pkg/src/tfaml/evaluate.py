"""ROC/AUC, thresholded confusion matrices, error rates and MI ranking."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")
        if self.total == 0:
            raise ValueError("empty confusion matrix")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Rates:
    """FPR, FNR and accuracy; ``nan`` marks a zero denominator."""

    fpr: float
    fnr: float
    acc: float


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(bool)


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionMatrix:
    """Tally predictions ``score > threshold`` against labels."""
    s, y = _check(scores, labels)
    pred = s > threshold
    return ConfusionMatrix(
        tp=int(np.sum(pred & y)),
        fp=int(np.sum(pred & ~y)),
        tn=int(np.sum(~pred & ~y)),
        fn=int(np.sum(~pred & y)),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else math.nan


def rates(cm: ConfusionMatrix) -> Rates:
    """``FP/(FP+TN)``, ``FN/(FN+TP)`` and ``(TP+TN)/total``; NaN when a
    denominator is zero."""
    return Rates(
        fpr=_ratio(cm.fp, cm.fp + cm.tn),
        fnr=_ratio(cm.fn, cm.fn + cm.tp),
        acc=_ratio(cm.tp + cm.tn, cm.total),
    )


def roc_auc(scores, labels) -> RocCurve:
    """ROC points at every distinct score and the trapezoidal AUC.

    Thresholds descend from ``+inf``; the point for threshold ``t`` counts
    ``score >= t`` as positive.  Tied scores form one diagonal step, so the
    area equals the Mann-Whitney statistic with ties counted one half.
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s.size - 1]
    tp = np.cumsum(y_sorted)[last]
    fp = (last + 1) - tp
    tp = np.r_[0, tp].astype(np.int64)
    fp = np.r_[0, fp].astype(np.int64)
    # exact integer twice-area, divided once
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2.0 * n_pos * n_neg)
    return RocCurve(
        thresholds=np.r_[np.inf, s_sorted[last]],
        fpr=fp / n_neg,
        tpr=tp / n_pos,
        auc=auc,
    )


def auc(scores, labels) -> float:
    return roc_auc(scores, labels).auc


def equal_frequency_bins(x, bins: int = 16) -> np.ndarray:
    """Bin index per value; equal values always share a bin.

    A value's bin is ``floor(r * bins / n)`` with ``r`` the number of values
    strictly below it, so heavy ties collapse bins rather than split them.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if bins < 1:
        raise ValueError("bins must be >= 1")
    rank = np.searchsorted(np.sort(x), x, side="left")
    return (rank * bins) // x.size


def _plugin_mi(a, b) -> float:
    """Plug-in MI in nats between two discrete code arrays."""
    a = np.unique(np.asarray(a), return_inverse=True)[1].ravel()
    b = np.unique(np.asarray(b), return_inverse=True)[1].ravel()
    n = a.size
    joint = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(joint, (a, b), 1)
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    c = joint[nz].astype(np.float64)
    expected = np.outer(pa, pb)[nz].astype(np.float64)
    mi = float(np.sum(c * np.log(c * n / expected)) / n)
    return max(mi, 0.0)


def mutual_information(x, labels, bins: int = 16) -> float:
    """MI (nats) between an equal-frequency-binned feature and binary labels."""
    x = np.asarray(x, dtype=np.float64).ravel()
    _, y = _check(np.zeros_like(x), labels)
    if not np.isfinite(x).all():
        raise ValueError("feature column must be finite")
    if y.all() or not y.any():
        raise ValueError("mutual information needs both classes")
    if np.all(x == x[0]):
        return 0.0
    return _plugin_mi(equal_frequency_bins(x, bins), y)


def categorical_mutual_information(codes, labels) -> float:
    _, y = _check(np.zeros(len(codes)), labels)
    return _plugin_mi(np.asarray(codes), y)


def rank_features(data, bins: int = 16) -> list[tuple[str, float]]:
    """MI of every feature with the label, largest first (ties by name).

    One-hot columns ``FIELD=value`` are folded back into one categorical
    feature ``FIELD``.
    """
    columns: dict[str, list[int]] = {}
    for j, name in enumerate(data.feature_order):
        columns.setdefault(name.split("=", 1)[0], []).append(j)
    out = []
    for name, cols in columns.items():
        if len(cols) == 1 and "=" not in data.feature_order[cols[0]]:
            mi = mutual_information(data.X[:, cols[0]], data.y, bins)
        else:
            block = data.X[:, cols]
            # rows matching no category (unseen at encoding time) get their own code
            codes = np.where(block.any(axis=1), np.argmax(block, axis=1), len(cols))
            mi = categorical_mutual_information(codes, data.y)
        out.append((name, mi))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


def _nan_to_none(x: float):
    return None if isinstance(x, float) and math.isnan(x) else x


def report_dict(scores, labels, threshold: float = 0.5, extra: dict | None = None) -> dict:
    cm = confusion(scores, labels, threshold)
    r = rates(cm)
    roc = roc_auc(scores, labels)
    doc = {
        "n": cm.total,
        "threshold": threshold,
        "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn},
        "rates": {k: _nan_to_none(v) for k, v in (("fpr", r.fpr), ("fnr", r.fnr), ("acc", r.acc))},
        "auc": roc.auc,
        "roc": [
            [None if math.isinf(t) else float(t), float(f), float(p)]
            for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr)
        ],
    }
    if extra:
        doc.update(extra)
    return doc


def write_report(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_roc_csv(path, roc: RocCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr):
            w.writerow(["inf" if math.isinf(t) else repr(float(t)), repr(float(f)), repr(float(p))])


def write_ranking(path, ranking) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "mi_nats"])
        for i, (name, mi) in enumerate(ranking, 1):
            w.writerow([i, name, repr(float(mi))])
