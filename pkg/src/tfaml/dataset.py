"""Per-customer feature rows combining transaction, spectral and CRM groups.

Canonical column order is T, then TF, then CRM::

    T    INCOMING_FUNDS, OUTGOING_FUNDS
    TF   MEAN, VAR, SKEW, KURT, TSPAR, FSPAR, FTSPAR, TDISC, FDISC, FTDISC, ENTROPY
    CRM  AGE, GENDER=<g>..., IS_COMMERCIAL, RISK_GROUP=<r>..., OCCUPATION=<o>..., CUSTOMER_AGE

Categorical CRM fields are one-hot encoded; category columns are sorted by
category value.  ``features.csv`` is ``customer_id,label,<columns>``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from . import spectral, tffeatures
from .ingest import CrmRecord, Horizon, TransactionSeries

log = logging.getLogger(__name__)

T_FEATURES = ("INCOMING_FUNDS", "OUTGOING_FUNDS")
TF_FEATURES = tffeatures.FEATURE_NAMES
CATEGORICAL_FIELDS = ("gender", "risk_group", "occupation")


class FeatureSet(str, Enum):
    T = "T"
    TF = "TF"
    CRM = "CRM"
    T_CRM = "T+CRM"
    TF_CRM = "TF+CRM"
    T_TF_CRM = "T+TF+CRM"

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(self.value.split("+"))


@dataclass
class FeatureVector:
    customer_id: str
    values: dict[str, float]
    groups: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class CrmEncoding:
    """Category vocabularies learned from training rows."""

    gender: tuple[str, ...] = ()
    risk_group: tuple[str, ...] = ()
    occupation: tuple[str, ...] = ()

    @classmethod
    def fit(cls, records) -> "CrmEncoding":
        records = list(records)
        return cls(
            *(tuple(sorted({getattr(r, f) for r in records})) for f in CATEGORICAL_FIELDS)
        )

    def column_names(self) -> list[str]:
        names = ["AGE"]
        names += [f"GENDER={v}" for v in self.gender]
        names.append("IS_COMMERCIAL")
        names += [f"RISK_GROUP={v}" for v in self.risk_group]
        names += [f"OCCUPATION={v}" for v in self.occupation]
        names.append("CUSTOMER_AGE")
        return names

    def to_dict(self) -> dict:
        return {f: list(getattr(self, f)) for f in CATEGORICAL_FIELDS}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CrmEncoding":
        return cls(*(tuple(d.get(f, ())) for f in CATEGORICAL_FIELDS))


@dataclass
class LabeledDataset:
    customer_ids: list[str]
    X: np.ndarray
    y: np.ndarray
    feature_order: list[str]
    groups: dict[str, str] = field(default_factory=dict)
    encoding: CrmEncoding | None = None

    def __len__(self) -> int:
        return len(self.customer_ids)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.customer_ids), -1)
        self.y = np.asarray(self.y, dtype=np.intp)
        if self.X.shape[1] != len(self.feature_order):
            raise ValueError("column count does not match feature_order")
        if len(set(self.feature_order)) != len(self.feature_order):
            raise ValueError("duplicate feature names")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not np.isfinite(self.X).all():
            raise ValueError("non-finite feature value")

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return LabeledDataset(
            [self.customer_ids[i] for i in rows],
            self.X[rows],
            self.y[rows],
            list(self.feature_order),
            dict(self.groups),
            self.encoding,
        )

    def select(self, selector: FeatureSet | str) -> "LabeledDataset":
        """Keep only the columns belonging to ``selector``'s groups."""
        wanted = set(FeatureSet(selector).groups)
        cols = [i for i, name in enumerate(self.feature_order) if self.groups.get(name) in wanted]
        return LabeledDataset(
            list(self.customer_ids),
            self.X[:, cols],
            self.y.copy(),
            [self.feature_order[i] for i in cols],
            {self.feature_order[i]: self.groups[self.feature_order[i]] for i in cols},
            self.encoding,
        )

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(
            self.customer_ids[i],
            dict(zip(self.feature_order, map(float, self.X[i]))),
            {n: self.groups.get(n, "") for n in self.feature_order},
        )

    def class_counts(self) -> tuple[int, int]:
        pos = int(self.y.sum())
        return len(self.y) - pos, pos


def transaction_features(series: TransactionSeries) -> tuple[float, float]:
    """Gross (incoming, outgoing) totals.

    Uses the record-level totals carried by ``series`` when present, so
    same-day flows do not cancel; otherwise falls back to the daily values.
    """
    if series.incoming_total or series.outgoing_total:
        return float(series.incoming_total), float(series.outgoing_total)
    v = np.asarray(series.values, dtype=np.float64)
    return float(v[v > 0].sum()), float(-v[v < 0].sum())


def encode_crm(record: CrmRecord, encoding: CrmEncoding) -> np.ndarray:
    """Numeric CRM sub-vector; unseen categories encode as all zeros."""
    parts = [[float(record.age)]]
    for name in CATEGORICAL_FIELDS:
        vocab = getattr(encoding, name)
        onehot = [1.0 if getattr(record, name) == v else 0.0 for v in vocab]
        parts.append(onehot)
        if name == "gender":
            parts.append([1.0 if record.is_commercial else 0.0])
    parts.append([float(record.customer_age)])
    return np.array([x for p in parts for x in p], dtype=np.float64)


def tf_feature_matrix(series_list, cfg: spectral.StftConfig) -> np.ndarray:
    return np.array(
        [tffeatures.extract_all(spectral.stft(s, cfg)).as_array() for s in series_list],
        dtype=np.float64,
    ).reshape(len(series_list), len(TF_FEATURES))


@dataclass
class AssemblyStats:
    kept: int = 0
    missing_crm: int = 0
    missing_label: int = 0
    zero_activity: int = 0


def assemble(
    selector: FeatureSet | str,
    series_map: Mapping[str, TransactionSeries],
    crm_map: Mapping[str, CrmRecord],
    labels: Mapping[str, int],
    horizon: Horizon | None = None,
    stft_cfg: spectral.StftConfig = spectral.StftConfig(),
    encoding: CrmEncoding | None = None,
    stats: AssemblyStats | None = None,
) -> LabeledDataset:
    """Build the feature table for the customers present in every source.

    A customer needs a label and a CRM record; one listed in the CRM file
    with no transactions gets an all-zero series (``horizon`` required for
    its length).  Rows are sorted by customer id.  The selector changes
    columns only, never rows.
    """
    selector = FeatureSet(selector)
    stats = stats if stats is not None else AssemblyStats()
    ids = set(labels) & set(crm_map)
    stats.missing_crm = len((set(labels) | set(series_map)) - set(crm_map))
    stats.missing_label = len((set(crm_map) | set(series_map)) - set(labels))
    if not ids:
        raise ValueError("no customer has both a label and a CRM record")
    ids = sorted(ids)

    series = []
    for cid in ids:
        s = series_map.get(cid)
        if s is None:
            if horizon is None:
                if not series_map:
                    raise ValueError(f"{cid} has no transactions and no horizon was given")
                n_days = len(next(iter(series_map.values())))
                s = TransactionSeries(cid, None, np.zeros(n_days))
            else:
                s = TransactionSeries.zeros(cid, horizon)
            stats.zero_activity += 1
        series.append(s)
    stats.kept = len(ids)
    if stats.missing_crm or stats.missing_label or stats.zero_activity:
        log.info(
            "assemble: kept %d, dropped %d without CRM, %d without label, %d zero-activity",
            stats.kept,
            stats.missing_crm,
            stats.missing_label,
            stats.zero_activity,
        )

    blocks, names, groups = [], [], {}
    if "T" in selector.groups:
        blocks.append(np.array([transaction_features(s) for s in series]).reshape(-1, 2))
        names += T_FEATURES
        groups.update(dict.fromkeys(T_FEATURES, "T"))
    if "TF" in selector.groups:
        blocks.append(tf_feature_matrix(series, stft_cfg))
        names += TF_FEATURES
        groups.update(dict.fromkeys(TF_FEATURES, "TF"))
    if "CRM" in selector.groups:
        if encoding is None:
            encoding = CrmEncoding.fit(crm_map[c] for c in ids)
        cols = encoding.column_names()
        blocks.append(np.array([encode_crm(crm_map[c], encoding) for c in ids]).reshape(-1, len(cols)))
        names += cols
        groups.update(dict.fromkeys(cols, "CRM"))

    X = np.hstack(blocks) if blocks else np.zeros((len(ids), 0))
    y = np.array([labels[c] for c in ids], dtype=np.intp)
    return LabeledDataset(ids, X, y, list(names), groups, encoding)


def write_features(path, data: LabeledDataset) -> None:
    """``customer_id,label,<columns>``; floats written with ``repr`` so they round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["customer_id", "label", *data.feature_order])
        for cid, label, row in zip(data.customer_ids, data.y, data.X):
            w.writerow([cid, int(label), *(repr(float(v)) for v in row)])


def _group_of(name: str) -> str:
    if name in T_FEATURES:
        return "T"
    if name in TF_FEATURES:
        return "TF"
    return "CRM"


def _encoding_from_columns(names) -> CrmEncoding | None:
    vocab = {f: [] for f in CATEGORICAL_FIELDS}
    seen_crm = False
    for name in names:
        if name in ("AGE", "CUSTOMER_AGE", "IS_COMMERCIAL"):
            seen_crm = True
        if "=" in name:
            prefix, value = name.split("=", 1)
            vocab[prefix.lower()].append(value)
            seen_crm = True
    return CrmEncoding(*(tuple(vocab[f]) for f in CATEGORICAL_FIELDS)) if seen_crm else None


def read_features(path) -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["customer_id", "label"]:
            raise ValueError(f"{path}: expected header starting customer_id,label")
        names = header[2:]
        ids, labels, rows = [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{reader.line_num}: expected {len(header)} fields")
            ids.append(row[0])
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(names))
    return LabeledDataset(
        ids, X, labels, names, {n: _group_of(n) for n in names}, _encoding_from_columns(names)
    )
