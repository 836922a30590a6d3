"""Seeded generator of labelled synthetic customers.

Normal customers are mostly salaried (salary on the 15th, rent on the 1st,
small card spending on ~60% of days); a minority have irregular income.
Suspicious customers follow one of three typologies:

``behaviour_change``
    salaried pattern until a changepoint in days [60, 120], then dense
    large in/out bursts;
``smurfing``
    runs of sub-threshold deposits each followed by one large outflow;
``pass_through``
    near-equal in/out pairs 0-2 days apart at irregular, high frequency.

A fraction of suspicious customers (``hidden_fraction``) transact like
normal ones, so only their CRM profile can give them away.  CRM fields of
suspicious customers are drawn from shifted distributions (see
``CRM_PROFILES``) which makes CRM informative but not decisive.

Every customer draws from its own generator seeded by ``(seed, index)``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .ingest import (
    CrmRecord,
    Horizon,
    TransactionRecord,
    TransactionSeries,
    aggregate_daily,
    write_crm,
    write_labels,
    write_transactions,
)

ARCHETYPES = ("behaviour_change", "smurfing", "pass_through")
DEFAULT_START = date(2019, 1, 1)

OCCUPATIONS = (
    "CIVIL_SERVANT",
    "ENGINEER",
    "HEALTHCARE",
    "RETIRED",
    "SELF_EMPLOYED",
    "STUDENT",
    "TRADER",
    "UNEMPLOYED",
)

# Probabilities for categorical CRM fields, and location/scale for numeric ones.
CRM_PROFILES = {
    0: {
        "age": (43.0, 13.0),
        "customer_age_mean": 9.0,
        "male": 0.50,
        "commercial": 0.12,
        "risk": {"LOW": 0.60, "MEDIUM": 0.30, "HIGH": 0.10},
        "occupation": (0.17, 0.15, 0.14, 0.14, 0.12, 0.10, 0.10, 0.08),
    },
    1: {
        "age": (37.0, 12.0),
        "customer_age_mean": 5.0,
        "male": 0.64,
        "commercial": 0.28,
        "risk": {"LOW": 0.40, "MEDIUM": 0.37, "HIGH": 0.23},
        "occupation": (0.10, 0.09, 0.08, 0.08, 0.19, 0.10, 0.20, 0.16),
    },
}


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 6680
    positive_fraction: float = 1945 / 6680
    horizon_days: int = 180
    start: date = DEFAULT_START
    seed: int = 0
    mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    hidden_fraction: float = 0.15
    irregular_fraction: float = 0.2

    def __post_init__(self):
        if self.n_customers < 1:
            raise ValueError("n_customers must be >= 1")
        if not 0.0 < self.positive_fraction < 1.0:
            raise ValueError("positive_fraction must lie in (0, 1)")
        if len(self.mix) != 3 or min(self.mix) < 0 or not math.isclose(sum(self.mix), 1.0):
            raise ValueError("archetype mix must be three nonnegative weights summing to 1")
        if not 0.0 <= self.hidden_fraction < 1.0 or not 0.0 <= self.irregular_fraction <= 1.0:
            raise ValueError("fractions must lie in [0, 1)")

    @property
    def horizon(self) -> Horizon:
        return Horizon(self.start, self.horizon_days)

    @property
    def n_positive(self) -> int:
        return int(round(self.n_customers * self.positive_fraction))


@dataclass
class Customer:
    customer_id: str
    label: int
    kind: str
    records: list[TransactionRecord] = field(default_factory=list)
    crm: CrmRecord | None = None


def customer_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


class _Ledger:
    """Collects records for one customer, rounding to cents."""

    def __init__(self, customer_id: str, horizon: Horizon):
        self.cid = customer_id
        self.horizon = horizon
        self.records: list[TransactionRecord] = []

    def add(self, day: int, amount: float, channel: str):
        if not 0 <= day < self.horizon.days:
            return
        cents = round(abs(amount) * 100)
        if cents == 0:
            cents = 1
        value = math.copysign(cents / 100.0, amount)
        self.records.append(
            TransactionRecord(self.cid, self.horizon.start + timedelta(days=day), value, channel)
        )

    def sorted(self) -> list[TransactionRecord]:
        return sorted(self.records, key=lambda r: r.date)


def _salary_scale(rng) -> float:
    return float(rng.lognormal(math.log(2500.0), 0.5))


def _salaried(rng, led: _Ledger, salary: float, until: int | None = None):
    end = led.horizon.days if until is None else until
    rent = salary * float(rng.uniform(0.25, 0.35))
    spend_mean = salary * 0.02
    for day in range(end):
        d = led.horizon.start + timedelta(days=day)
        if d.day == 15:
            led.add(day, salary * float(rng.normal(1.0, 0.02)), "EFT")
        if d.day == 1:
            led.add(day, -rent, "WEB")
        if rng.random() < 0.6:
            led.add(day, -float(rng.exponential(spend_mean)), "POS" if rng.random() < 0.8 else "ATM")


def _irregular(rng, led: _Ledger, scale: float):
    """Self-employed style income: a few payments of varying size each month."""
    for day in range(led.horizon.days):
        if rng.random() < 0.1:
            led.add(day, float(rng.lognormal(math.log(scale * 0.6), 0.6)), "EFT")
        if rng.random() < 0.6:
            led.add(day, -float(rng.exponential(scale * 0.03)), "POS" if rng.random() < 0.7 else "ATM")
        if rng.random() < 0.03:
            led.add(day, -float(rng.lognormal(math.log(scale * 0.5), 0.5)), "WEB")


def _behaviour_change(rng, led: _Ledger, salary: float):
    change = int(rng.integers(60, 121))
    _salaried(rng, led, salary, until=change)
    burst = salary * float(rng.uniform(0.05, 0.25))
    for day in range(change, led.horizon.days):
        if rng.random() < 0.5:
            led.add(day, float(rng.lognormal(math.log(burst), 0.4)), "BRANCH")
        if rng.random() < 0.5:
            led.add(day, -float(rng.lognormal(math.log(burst), 0.4)), "SWIFT")


def _smurfing(rng, led: _Ledger, salary: float):
    threshold = salary * float(rng.uniform(0.08, 0.25))
    day = int(rng.integers(0, 15))
    while day < led.horizon.days:
        total = 0.0
        for _ in range(int(rng.integers(4, 10))):
            amount = threshold * float(rng.uniform(0.8, 0.99))
            led.add(day, amount, "ATM" if rng.random() < 0.5 else "BRANCH")
            total += amount
            day += int(rng.integers(0, 3))
        day += int(rng.integers(1, 4))
        led.add(day, -total * float(rng.uniform(0.95, 1.0)), "SWIFT")
        day += int(rng.integers(8, 25))


def _pass_through(rng, led: _Ledger, salary: float):
    scale = salary * float(rng.uniform(0.05, 0.25))
    for day in range(led.horizon.days):
        if rng.random() < float(rng.uniform(0.1, 0.4)):
            amount = float(rng.lognormal(math.log(scale), 0.5))
            led.add(day, amount, "EFT")
            led.add(day + int(rng.integers(0, 3)), -amount * float(rng.uniform(0.97, 1.0)), "SWIFT")
        if rng.random() < 0.3:
            led.add(day, -float(rng.exponential(salary * 0.02)), "POS")


def _gen_crm(rng, customer_id: str, label: int) -> CrmRecord:
    prof = CRM_PROFILES[label]
    age = int(np.clip(round(rng.normal(*prof["age"])), 18, 90))
    customer_age = int(min(age - 18, round(rng.exponential(prof["customer_age_mean"]))))
    risk_levels = list(prof["risk"])
    return CrmRecord(
        customer_id=customer_id,
        age=float(age),
        gender="M" if rng.random() < prof["male"] else "F",
        is_commercial=bool(rng.random() < prof["commercial"]),
        risk_group=risk_levels[int(rng.choice(len(risk_levels), p=list(prof["risk"].values())))],
        occupation=OCCUPATIONS[int(rng.choice(len(OCCUPATIONS), p=prof["occupation"]))],
        customer_age=float(max(customer_age, 0)),
    )


def _draw_normal(rng, customer_id: str, horizon: Horizon, profile: str = "salaried"):
    led = _Ledger(customer_id, horizon)
    scale = _salary_scale(rng)
    if profile == "salaried":
        _salaried(rng, led, scale)
    elif profile == "irregular":
        _irregular(rng, led, scale)
    else:
        raise ValueError(f"unknown normal profile {profile!r}")
    return led.sorted()


def _draw_suspicious(rng, customer_id: str, horizon: Horizon, archetype: str):
    led = _Ledger(customer_id, horizon)
    salary = _salary_scale(rng)
    if archetype == "behaviour_change":
        _behaviour_change(rng, led, salary)
    elif archetype == "smurfing":
        _smurfing(rng, led, salary)
    elif archetype == "pass_through":
        _pass_through(rng, led, salary)
    else:
        raise ValueError(f"unknown archetype {archetype!r}")
    return led.sorted()


def _series(records, customer_id, horizon):
    series = aggregate_daily(records, horizon).get(customer_id)
    if series is None:
        series = TransactionSeries.zeros(customer_id, horizon)
    return series


def gen_normal(rng, customer_id: str = "C0", horizon: Horizon | None = None, profile="salaried"):
    """One clear customer as ``(TransactionSeries, CrmRecord)``."""
    horizon = horizon or Horizon(DEFAULT_START)
    records = _draw_normal(rng, customer_id, horizon, profile)
    return _series(records, customer_id, horizon), _gen_crm(rng, customer_id, 0)


def gen_suspicious(rng, archetype: str, customer_id: str = "C0", horizon: Horizon | None = None):
    """One suspicious customer of ``archetype`` as ``(TransactionSeries, CrmRecord)``."""
    horizon = horizon or Horizon(DEFAULT_START)
    records = _draw_suspicious(rng, customer_id, horizon, archetype)
    return _series(records, customer_id, horizon), _gen_crm(rng, customer_id, 1)


def _assign_kinds(cfg: SynthConfig) -> list[tuple[int, str]]:
    """(label, kind) per customer index, exact class counts."""
    master = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    n, n_pos = cfg.n_customers, cfg.n_positive
    order = master.permutation(n)
    kinds: list[tuple[int, str]] = [(0, "salaried")] * n

    n_hidden = int(round(n_pos * cfg.hidden_fraction))
    counts = [int(round((n_pos - n_hidden) * w)) for w in cfg.mix]
    counts[-1] = n_pos - n_hidden - sum(counts[:-1])
    pos_kinds = ["hidden"] * n_hidden
    for name, c in zip(ARCHETYPES, counts):
        pos_kinds += [name] * c
    for i, kind in zip(order[:n_pos], pos_kinds):
        kinds[i] = (1, kind)

    negatives = order[n_pos:]
    n_irregular = int(round(len(negatives) * cfg.irregular_fraction))
    for i in negatives[:n_irregular]:
        kinds[i] = (0, "irregular")
    return kinds


def generate(cfg: SynthConfig = SynthConfig()) -> list[Customer]:
    horizon = cfg.horizon
    width = max(5, len(str(cfg.n_customers)))
    out = []
    for i, (label, kind) in enumerate(_assign_kinds(cfg)):
        cid = f"C{i + 1:0{width}d}"
        rng = customer_rng(cfg.seed, i)
        if kind in ("salaried", "irregular"):
            records = _draw_normal(rng, cid, horizon, kind)
        elif kind == "hidden":
            records = _draw_normal(rng, cid, horizon, "salaried" if rng.random() < 0.7 else "irregular")
        else:
            records = _draw_suspicious(rng, cid, horizon, kind)
        out.append(Customer(cid, label, kind, records, _gen_crm(rng, cid, label)))
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def gen_dataset(cfg: SynthConfig, out_dir) -> dict[str, Path]:
    """Write ``transactions.csv``, ``crm.csv`` and ``labels.csv`` to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    customers = generate(cfg)
    paths = {
        "transactions": out_dir / "transactions.csv",
        "crm": out_dir / "crm.csv",
        "labels": out_dir / "labels.csv",
    }
    write_transactions(paths["transactions"], (r for c in customers for r in c.records))
    write_crm(paths["crm"], (c.crm for c in customers))
    write_labels(paths["labels"], {c.customer_id: c.label for c in customers})
    return paths
