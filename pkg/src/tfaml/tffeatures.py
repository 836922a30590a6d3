"""The eleven scalar time-frequency features of a magnitude spectrogram.

Definitions (M frames, K bins, v the M*K raw magnitudes, S the matrix
scaled to sum 1):

* MEAN, VAR, SKEW, KURT -- mean, central second moment, m3/m2**1.5 and
  m4/m2**2 (Pearson, not excess) of v.  SKEW and KURT are 0 when m2 == 0.
* TSPAR, FSPAR, FTSPAR -- Hoyer sparsity of the time marginal
  (row sums), the frequency marginal (column sums) and v itself.
* TDISC, FDISC, FTDISC -- mean squared forward difference of S along
  time, along frequency, and the sum of both over the interior grid.
* ENTROPY -- Shannon entropy of S in bits divided by log2(M*K).

Every feature is defined (and finite) for an all-zero spectrogram.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .spectral import Spectrogram

FEATURE_NAMES = (
    "MEAN",
    "VAR",
    "SKEW",
    "KURT",
    "TSPAR",
    "FSPAR",
    "FTSPAR",
    "TDISC",
    "FDISC",
    "FTDISC",
    "ENTROPY",
)


@dataclass(frozen=True)
class TfFeatures:
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    tspar: float
    fspar: float
    ftspar: float
    tdisc: float
    fdisc: float
    ftdisc: float
    entropy: float

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, astuple(self)))

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


assert len(fields(TfFeatures)) == len(FEATURE_NAMES)


def _matrix(spec) -> np.ndarray:
    mag = getattr(spec, "mag", spec)
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.size == 0:
        raise ValueError("spectrogram must be a nonempty 2-D matrix")
    return mag


def moments(spec) -> tuple[float, float, float, float]:
    v = _matrix(spec).ravel()
    if v.min() == v.max():
        return float(v[0]), 0.0, 0.0, 0.0
    # standardized moments are scale-free; scaling by the peak keeps
    # m2**1.5 and m2**2 clear of underflow for tiny magnitudes
    scale = float(np.abs(v).max())
    u = v / scale
    mean = u.mean()
    d = u - mean
    d2 = d * d
    m2 = d2.mean()
    if m2 == 0.0:
        return float(mean * scale), 0.0, 0.0, 0.0
    m3 = (d2 * d).mean()
    m4 = (d2 * d2).mean()
    return (
        float(mean * scale),
        float(m2 * scale * scale),
        float(m3 / m2**1.5),
        float(m4 / (m2 * m2)),
    )


def hoyer(v) -> float:
    """``(sqrt(n) - |v|_1/|v|_2) / (sqrt(n) - 1)``; 0 for n == 1 or v == 0."""
    v = np.abs(np.asarray(v, dtype=np.float64).ravel())
    n = v.size
    peak = v.max() if n else 0.0
    if n < 2 or peak == 0.0:
        return 0.0
    v = v / peak  # keeps the squares clear of underflow/overflow
    l2 = math.sqrt(float(np.dot(v, v)))
    root_n = math.sqrt(n)
    s = (root_n - float(v.sum()) / l2) / (root_n - 1.0)
    # rounding can push a one-hot or constant vector a few ulps outside [0, 1]
    return min(max(s, 0.0), 1.0)


def sparsity(spec) -> tuple[float, float, float]:
    mag = _matrix(spec)
    return hoyer(mag.sum(axis=1)), hoyer(mag.sum(axis=0)), hoyer(mag)


def _unit_energy(mag: np.ndarray) -> np.ndarray:
    total = mag.sum()
    return mag / total if total > 0 else np.zeros_like(mag)


def discontinuity(spec) -> tuple[float, float, float]:
    s = _unit_energy(_matrix(spec))
    m, k = s.shape
    dt = np.diff(s, axis=0)
    df = np.diff(s, axis=1)
    tdisc = float((dt * dt).sum() / ((m - 1) * k)) if m >= 2 else 0.0
    fdisc = float((df * df).sum() / (m * (k - 1))) if k >= 2 else 0.0
    if m >= 2 and k >= 2:
        # interior = cells where both forward differences exist
        a = dt[:, : k - 1]
        b = df[: m - 1, :]
        ftdisc = float((a * a + b * b).sum() / ((m - 1) * (k - 1)))
    else:
        ftdisc = 0.0
    return tdisc, fdisc, ftdisc


def entropy(spec) -> float:
    mag = _matrix(spec)
    n = mag.size
    p = _unit_energy(mag).ravel()
    p = p[p > 0]
    if n < 2 or p.size == 0:
        return 0.0
    h = -float(np.dot(p, np.log2(p))) / math.log2(n)
    return min(max(h, 0.0), 1.0)


def extract_all(spec: Spectrogram) -> TfFeatures:
    return TfFeatures(*moments(spec), *sparsity(spec), *discontinuity(spec), entropy(spec))
