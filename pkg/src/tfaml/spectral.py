"""Sliding-window short-time Fourier transform of daily transaction series."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class WindowFn(str, Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"


@dataclass(frozen=True)
class StftConfig:
    """Window length and hop in days; ``fft_len`` zero-pads each window."""

    window_len: int = 90
    hop: int = 1
    fft_len: int = 128
    window_fn: WindowFn = WindowFn.RECTANGULAR

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if self.fft_len < self.window_len:
            raise ValueError("fft_len must be >= window_len")
        object.__setattr__(self, "window_fn", WindowFn(self.window_fn))

    def n_frames(self, n: int) -> int:
        if n < self.window_len:
            raise ValueError("series shorter than window")
        return (n - self.window_len) // self.hop + 1

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2 + 1

    def window(self) -> np.ndarray:
        if self.window_fn is WindowFn.HANN:
            # periodic Hann, the usual choice for spectral analysis
            n = np.arange(self.window_len)
            return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_len)
        return np.ones(self.window_len)


@dataclass
class Spectrogram:
    """Magnitude matrix, frames (oldest first) by one-sided frequency bins."""

    mag: np.ndarray
    fft_len: int

    @property
    def frames(self) -> int:
        return self.mag.shape[0]

    @property
    def bins(self) -> int:
        return self.mag.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        """Bin centre frequencies in cycles per day."""
        return np.arange(self.bins) / self.fft_len


def _as_values(series) -> np.ndarray:
    values = getattr(series, "values", series)
    return np.asarray(values, dtype=np.float64)


def stft(series, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Magnitude STFT of a real series.

    ``mag[m, k] = |sum_n x[m*hop + n] w[n] exp(-2j*pi*k*n/fft_len)|`` for
    ``n < window_len`` and ``k <= fft_len // 2``.  ``series`` may be a
    :class:`~tfaml.ingest.TransactionSeries` or a 1-D array.
    """
    x = _as_values(series)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    cfg.n_frames(len(x))  # length check
    frames = sliding_window_view(x, cfg.window_len)[:: cfg.hop]
    spectrum = np.fft.rfft(frames * cfg.window(), n=cfg.fft_len, axis=1)
    return Spectrogram(np.abs(spectrum), cfg.fft_len)


def normalize(spec: Spectrogram) -> tuple[Spectrogram, bool]:
    """Scale to unit total energy (entries sum to one).

    Returns ``(normalized, degenerate)``; an all-zero input comes back as
    zeros with ``degenerate=True``.
    """
    total = spec.mag.sum()
    if total == 0.0:
        return Spectrogram(np.zeros_like(spec.mag), spec.fft_len), True
    return Spectrogram(spec.mag / total, spec.fft_len), False


def export_spectrogram(spec: Spectrogram, path, format: str = "csv") -> None:
    """Write ``spec`` as CSV or binary PGM (P5).

    CSV: a ``bin_0,...,bin_{K-1}`` header (bin k is k/fft_len cycles/day)
    then one row per frame, oldest first.  PGM: width K, height M, scaled
    so the largest magnitude maps to 255.
    """
    try:
        if format == "csv":
            header = ",".join(f"bin_{k}" for k in range(spec.bins))
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(header + "\n")
                for row in spec.mag:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
        elif format == "pgm":
            peak = spec.mag.max() if spec.mag.size else 0.0
            if peak > 0:
                img = np.rint(spec.mag / peak * 255.0).astype(np.uint8)
            else:
                img = np.zeros(spec.mag.shape, dtype=np.uint8)
            with open(path, "wb") as fh:
                fh.write(b"P5\n%d %d\n255\n" % (spec.bins, spec.frames))
                fh.write(img.tobytes())
        else:
            raise ValueError(f"unknown spectrogram format {format!r}")
    except OSError as exc:
        raise OSError(f"cannot write spectrogram to {path}: {exc}") from exc


def read_spectrogram_csv(path, fft_len: int | None = None) -> Spectrogram:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [
            [float(v) for v in line.split(",")]
            for line in fh
            if line.strip()
        ]
    mag = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    return Spectrogram(mag, fft_len if fft_len is not None else 2 * (len(header) - 1))
