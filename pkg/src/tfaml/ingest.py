"""Parsing of transaction / CRM / label files and daily aggregation.

File schemas (UTF-8, comma separated, header row required)::

    transactions.csv  customer_id,date,amount,channel
    crm.csv           customer_id,age,gender,is_commercial,risk_group,occupation,customer_age
    labels.csv        customer_id,label

Incoming funds are positive amounts, outgoing funds negative.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_HORIZON_DAYS = 180

TRANSACTION_HEADER = ("customer_id", "date", "amount", "channel")
CRM_HEADER = (
    "customer_id",
    "age",
    "gender",
    "is_commercial",
    "risk_group",
    "occupation",
    "customer_age",
)
LABEL_HEADER = ("customer_id", "label")


class ParseError(ValueError):
    """Malformed input file; ``line`` is the 1-based physical line number."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


@dataclass(frozen=True)
class Horizon:
    """Half-open day range ``[start, start + days)``."""

    start: date
    days: int = DEFAULT_HORIZON_DAYS

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("empty horizon")

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.days)

    def __contains__(self, d: date) -> bool:
        return self.start <= d < self.end

    def index(self, d: date) -> int:
        return (d - self.start).days


@dataclass(frozen=True)
class TransactionRecord:
    customer_id: str
    date: date
    amount: float
    channel: str


@dataclass
class TransactionSeries:
    """Signed daily net amounts for one customer.

    ``incoming_total`` and ``outgoing_total`` are gross sums over the
    individual records, so same-day in/out flows do not cancel.
    """

    customer_id: str
    start_date: date
    values: np.ndarray
    incoming_total: float = 0.0
    outgoing_total: float = 0.0

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def zeros(cls, customer_id: str, horizon: Horizon) -> "TransactionSeries":
        return cls(customer_id, horizon.start, np.zeros(horizon.days))


@dataclass(frozen=True)
class CrmRecord:
    customer_id: str
    age: float
    gender: str
    is_commercial: bool
    risk_group: str
    occupation: str
    customer_age: float

    def __post_init__(self):
        if not (self.age >= 0 and self.customer_age >= 0):
            raise ValueError(f"{self.customer_id}: negative age field")


@dataclass(frozen=True)
class LabelRecord:
    customer_id: str
    label: int


@dataclass
class ParseStats:
    rows: int = 0
    dropped_out_of_horizon: int = 0
    extra: dict = field(default_factory=dict)


def _rows(path, header: Sequence[str]):
    """Yield ``(line_no, row)`` after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if tuple(c.strip() for c in first) != tuple(header):
            raise ParseError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    path, reader.line_num, f"expected {len(header)} fields, got {len(row)}"
                )
            yield reader.line_num, row


def _parse_amount(text: str) -> float:
    value = float(text)
    if not math.isfinite(value) or value == 0.0:
        raise ValueError(f"amount must be finite and nonzero: {text!r}")
    return value


def parse_transactions(
    path, horizon: Horizon | None = None, stats: ParseStats | None = None
) -> list[TransactionRecord]:
    """Read ``transactions.csv``; rows dated outside ``horizon`` are dropped.

    Raises :class:`ParseError` naming the line for a bad date or amount.
    """
    stats = stats if stats is not None else ParseStats()
    out = []
    for line, (cid, day, amount, channel) in _rows(path, TRANSACTION_HEADER):
        try:
            d = date.fromisoformat(day.strip())
        except ValueError:
            raise ParseError(path, line, f"bad date {day!r}") from None
        try:
            a = _parse_amount(amount.strip())
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        stats.rows += 1
        if horizon is not None and d not in horizon:
            stats.dropped_out_of_horizon += 1
            continue
        out.append(TransactionRecord(cid.strip(), d, a, channel.strip()))
    if stats.dropped_out_of_horizon:
        log.info("%s: dropped %d rows outside horizon", path, stats.dropped_out_of_horizon)
    return out


def _parse_bool01(text: str) -> bool:
    if text not in ("0", "1"):
        raise ValueError(f"expected 0 or 1, got {text!r}")
    return text == "1"


def parse_crm(path, stats: ParseStats | None = None) -> dict[str, CrmRecord]:
    """Read ``crm.csv``.  A row with an empty field is dropped (no imputation)
    and counted in ``stats.extra["crm_missing_field"]``; the customer then
    has no CRM record."""
    stats = stats if stats is not None else ParseStats()
    out = {}
    missing = 0
    for line, row in _rows(path, CRM_HEADER):
        row = [c.strip() for c in row]
        stats.rows += 1
        if any(c == "" for c in row):
            missing += 1
            continue
        try:
            rec = CrmRecord(
                customer_id=row[0],
                age=float(row[1]),
                gender=row[2],
                is_commercial=_parse_bool01(row[3]),
                risk_group=row[4],
                occupation=row[5],
                customer_age=float(row[6]),
            )
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        out[rec.customer_id] = rec
    stats.extra["crm_missing_field"] = missing
    if missing:
        log.warning("%s: dropped %d rows with a missing field", path, missing)
    return out


def parse_labels(path) -> dict[str, int]:
    out = {}
    for line, (cid, label) in _rows(path, LABEL_HEADER):
        label = label.strip()
        if label not in ("0", "1"):
            raise ParseError(path, line, f"label must be 0 or 1, got {label!r}")
        out[cid.strip()] = int(label)
    return out


def aggregate_daily(
    records: Iterable[TransactionRecord],
    horizon: Horizon,
    channel_filter: str | None = None,
) -> dict[str, TransactionSeries]:
    """Sum each customer's signed amounts per calendar day.

    Only customers with at least one (matching) record appear in the result.
    The output does not depend on the order of ``records``: each day is
    accumulated with :func:`math.fsum`.
    """
    per_day: dict[str, dict[int, list[float]]] = {}
    gross: dict[str, list[list[float]]] = {}
    for rec in records:
        if channel_filter is not None and rec.channel != channel_filter:
            continue
        if rec.date not in horizon:
            raise ValueError(f"record for {rec.customer_id} on {rec.date} outside horizon")
        per_day.setdefault(rec.customer_id, {}).setdefault(horizon.index(rec.date), []).append(
            rec.amount
        )
        g = gross.setdefault(rec.customer_id, [[], []])
        (g[0] if rec.amount > 0 else g[1]).append(rec.amount)

    out = {}
    for cid, days in per_day.items():
        values = np.zeros(horizon.days)
        for i, amounts in days.items():
            values[i] = math.fsum(amounts)
        incoming, outgoing = gross[cid]
        out[cid] = TransactionSeries(
            cid, horizon.start, values, math.fsum(incoming), -math.fsum(outgoing)
        )
    return out


def format_amount(amount: float) -> str:
    return f"{amount:.2f}"


def write_transactions(path, records: Iterable[TransactionRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRANSACTION_HEADER)
        for r in records:
            w.writerow((r.customer_id, r.date.isoformat(), format_amount(r.amount), r.channel))


def write_crm(path, records: Iterable[CrmRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CRM_HEADER)
        for r in records:
            w.writerow(
                (
                    r.customer_id,
                    f"{r.age:g}",
                    r.gender,
                    int(r.is_commercial),
                    r.risk_group,
                    r.occupation,
                    f"{r.customer_age:g}",
                )
            )


def write_labels(path, labels: dict[str, int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_HEADER)
        for cid, label in labels.items():
            w.writerow((cid, int(label)))


def infer_horizon(records: Sequence[TransactionRecord], days: int = DEFAULT_HORIZON_DAYS) -> Horizon:
    """Horizon starting at the earliest record's date."""
    if not records:
        raise ValueError("cannot infer a horizon from zero records")
    return Horizon(min(r.date for r in records), days)


__all__ = [
    "CrmRecord",
    "Horizon",
    "LabelRecord",
    "ParseError",
    "ParseStats",
    "TransactionRecord",
    "TransactionSeries",
    "aggregate_daily",
    "infer_horizon",
    "parse_crm",
    "parse_labels",
    "parse_transactions",
    "write_crm",
    "write_labels",
    "write_transactions",
]
