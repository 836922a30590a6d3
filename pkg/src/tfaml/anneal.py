"""Simulated-annealing search over (min_leaf, min_split, max_depth).

The objective is hold-out AUC of a forest trained with a fixed seed, so it
is a deterministic function of the three parameters and is memoised.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import forest
from .evaluate import auc

log = logging.getLogger(__name__)

PARAM_NAMES = ("min_leaf", "min_split", "max_depth")
STEPS = np.array([-3, -2, -1, 1, 2, 3])


@dataclass(frozen=True)
class AnnealConfig:
    iterations: int = 1000
    t0: float = 0.05
    alpha: float = 0.995
    min_leaf: tuple[int, int] = (1, 50)
    min_split: tuple[int, int] = (2, 60)
    max_depth: tuple[int, int] = (1, 60)
    seed: int = 0
    n_trees: int = 100
    forest_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.t0 > 0.0:
            raise ValueError("t0 must be positive")
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"empty bounds for {name}")
        if self.min_leaf[0] < 1 or self.min_split[0] < 2 or self.max_depth[0] < 1:
            raise ValueError("bounds fall outside the valid forest parameter range")

    def bounds(self) -> list[tuple[int, int]]:
        return [getattr(self, name) for name in PARAM_NAMES]


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    min_leaf: int
    min_split: int
    max_depth: int
    auc: float
    temperature: float
    accepted: bool

    @property
    def state(self) -> tuple[int, int, int]:
        return (self.min_leaf, self.min_split, self.max_depth)


@dataclass
class TuneResult:
    best: dict
    best_auc: float
    initial: dict
    initial_auc: float
    trace: list[TraceEntry] = field(default_factory=list)

    def best_so_far(self) -> list[float]:
        out, cur = [], self.initial_auc
        for e in self.trace:
            cur = max(cur, e.auc)
            out.append(cur)
        return out

    def as_flags(self) -> str:
        return " ".join(f"--{k.replace('_', '-')} {v}" for k, v in self.best.items())


def split(data, fraction: float = 0.7, seed: int = 0):
    """Stratified ``(train, valid)`` split; each class keeps >= 1 row per side."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_rows = []
    for cls in (0, 1):
        rows = np.flatnonzero(data.y == cls)
        rows = rows[rng.permutation(rows.size)]
        k = int(round(fraction * rows.size))
        if rows.size >= 2:
            k = min(max(k, 1), rows.size - 1)
        train_rows.append(rows[:k])
    train_idx = np.sort(np.concatenate(train_rows))
    mask = np.ones(len(data), dtype=bool)
    mask[train_idx] = False
    return data.subset(train_idx), data.subset(np.flatnonzero(mask))


def _require_both_classes(data, what):
    pos = int(np.sum(data.y))
    if pos == 0 or pos == len(data.y):
        raise forest.DegenerateLabels(f"degenerate labels: {what} split has a single class")


def _clamp(v: int, lo: int, hi: int) -> int:
    return min(max(v, lo), hi)


def tune(train, valid, cfg: AnnealConfig = AnnealConfig()) -> TuneResult:
    _require_both_classes(train, "training")
    _require_both_classes(valid, "validation")
    rng = np.random.default_rng(cfg.seed)
    bounds = cfg.bounds()
    cache: dict[tuple[int, int, int], float] = {}

    def objective(state):
        if state not in cache:
            params = forest.ForestParams(
                n_trees=cfg.n_trees,
                min_leaf=state[0],
                min_split=state[1],
                max_depth=state[2],
                seed=cfg.forest_seed,
            )
            model = forest.train(train, params, threads=cfg.threads)
            cache[state] = auc(model.score_matrix(valid.X), valid.y)
        return cache[state]

    current = tuple(int(rng.integers(lo, hi + 1)) for lo, hi in bounds)
    current_auc = objective(current)
    initial, initial_auc = current, current_auc
    best, best_auc = current, current_auc
    trace = []
    for k in range(cfg.iterations):
        temp = cfg.t0 * cfg.alpha**k
        which = int(rng.integers(len(bounds)))
        step = int(rng.choice(STEPS))
        u = rng.random()
        cand = list(current)
        cand[which] = _clamp(cand[which] + step, *bounds[which])
        cand = tuple(cand)
        cand_auc = objective(cand)
        delta = cand_auc - current_auc
        accepted = delta >= 0 or u < math.exp(delta / temp)
        trace.append(TraceEntry(k, *cand, cand_auc, temp, accepted))
        if accepted:
            current, current_auc = cand, cand_auc
        if cand_auc > best_auc:
            best, best_auc = cand, cand_auc
        if k % 50 == 0:
            log.debug("iter %d T=%.3g auc=%.4f best=%.4f", k, temp, cand_auc, best_auc)
    return TuneResult(
        dict(zip(PARAM_NAMES, best)),
        best_auc,
        dict(zip(PARAM_NAMES, initial)),
        initial_auc,
        trace,
    )


def write_trace(path, result: TuneResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "min_leaf", "min_split", "max_depth", "auc", "temp", "accepted"])
        for e in result.trace:
            w.writerow(
                [
                    e.iteration,
                    e.min_leaf,
                    e.min_split,
                    e.max_depth,
                    repr(e.auc),
                    repr(e.temperature),
                    int(e.accepted),
                ]
            )
