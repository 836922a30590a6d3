import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dft_spectrogram

from tfaml import spectral
from tfaml.spectral import Spectrogram, StftConfig


def test_default_frame_count():
    spec = spectral.stft(np.ones(180))
    assert (spec.frames, spec.bins) == (91, 65)


def test_zero_series_gives_zero_spectrogram():
    assert not spectral.stft(np.zeros(180)).mag.any()


def test_constant_series_matches_oracle():
    cfg = StftConfig(90, 1, 128)
    x = np.full(100, 3.5)
    spec = spectral.stft(x, cfg)
    assert np.allclose(spec.mag[:, 0], 3.5 * 90, rtol=1e-13)
    oracle = np.array(dft_spectrogram(list(x), 90, 1, 128))
    assert np.allclose(spec.mag, oracle, rtol=1e-9, atol=1e-9)


def test_on_bin_cosine():
    n = np.arange(128)
    x = np.cos(2 * np.pi * n * 8 / 128)
    spec = spectral.stft(x, StftConfig(128, 1, 128))
    assert spec.mag.shape == (1, 65)
    assert spec.mag[0, 8] == pytest.approx(64.0, rel=1e-12)
    others = np.delete(spec.mag[0], 8)
    assert others.max() < 1e-10
    oracle = np.array(dft_spectrogram(list(x), 128, 1, 128))
    assert oracle[0, 8] == pytest.approx(64.0, rel=1e-12)


def test_short_series_rejected():
    with pytest.raises(ValueError, match="series shorter than window"):
        spectral.stft(np.ones(50), StftConfig(90))


@pytest.mark.parametrize(
    "kwargs", [dict(window_len=0), dict(hop=0), dict(window_len=100, fft_len=64)]
)
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        StftConfig(**kwargs)


def test_hann_window_matches_oracle(rng):
    cfg = StftConfig(16, 3, 32, "hann")
    x = rng.normal(size=40)
    oracle = dft_spectrogram(list(x), 16, 3, 32, list(cfg.window()))
    assert np.allclose(spectral.stft(x, cfg).mag, oracle, rtol=1e-9, atol=1e-12)


def test_time_shift_shifts_frames(rng):
    cfg = StftConfig(20, 2, 32)
    x = rng.normal(size=80)
    j = 3
    shifted = np.r_[np.zeros(cfg.hop * j), x]
    a = spectral.stft(x, cfg).mag
    b = spectral.stft(shifted, cfg).mag
    assert np.allclose(b[j:], a, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1e6), st.integers(0, 2**32 - 1))
def test_homogeneity(a, seed):
    x = np.random.default_rng(seed).normal(size=60)
    cfg = StftConfig(30, 1, 32)
    base = spectral.stft(x, cfg).mag
    assert np.allclose(spectral.stft(a * x, cfg).mag, a * base, rtol=1e-12, atol=1e-9 * max(a, 1))


def test_normalize_uniform():
    spec, degenerate = spectral.normalize(Spectrogram(np.full((2, 2), 2.0), 2))
    assert not degenerate
    # entries sum to one
    assert np.array_equal(spec.mag, np.full((2, 2), 0.25))


def test_normalize_zero_flags_degenerate():
    spec, degenerate = spectral.normalize(Spectrogram(np.zeros((3, 4)), 6))
    assert degenerate and not spec.mag.any()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_normalize_sums_to_one(m, k, seed):
    mag = np.random.default_rng(seed).exponential(size=(m, k)) * 1e3
    spec, degenerate = spectral.normalize(Spectrogram(mag, 2 * (k - 1)))
    assert not degenerate
    assert abs(spec.mag.sum() - 1.0) <= 1e-12


def test_export_csv_round_trip(tmp_path, rng):
    spec = spectral.stft(rng.normal(size=120), StftConfig(64, 4, 64))
    path = tmp_path / "s.csv"
    spectral.export_spectrogram(spec, path, "csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(f"bin_{k}" for k in range(33))
    assert len(lines) == 1 + spec.frames
    back = spectral.read_spectrogram_csv(path)
    assert np.array_equal(back.mag, spec.mag)
    assert back.fft_len == 64


def test_export_pgm(tmp_path):
    mag = np.array([[0.0, 1.0, 2.0], [4.0, 3.0, 0.5]])
    path = tmp_path / "s.pgm"
    spectral.export_spectrogram(Spectrogram(mag, 4), path, "pgm")
    data = path.read_bytes()
    header = b"P5\n3 2\n255\n"
    assert data.startswith(header)
    pixels = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(2, 3)
    assert pixels.max() == 255 and pixels[1, 0] == 255
    assert list(pixels[0]) == [0, 64, 128]


def test_export_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "s.csv"
    with pytest.raises(OSError, match="missing"):
        spectral.export_spectrogram(Spectrogram(np.ones((1, 2)), 2), bad)
