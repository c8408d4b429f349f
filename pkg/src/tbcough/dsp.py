"""Framing, windows and one-sided FFT spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TooShortError

WINDOWS = ("hann", "hamming", "rect")


@dataclass(frozen=True)
class FrameConfig:
    frame_len_s: float
    hop_len_s: float
    fft_size: int
    sample_rate: int
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_len_s <= self.frame_len_s:
            raise ConfigError("need 0 < hop_len_s <= frame_len_s")
        if self.window not in WINDOWS:
            raise ConfigError(f"unknown window {self.window!r}")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.fft_size < 1 or self.fft_size & (self.fft_size - 1):
            raise ConfigError("fft_size must be a power of two")
        if self.fft_size < self.frame_length:
            raise ConfigError(f"fft_size {self.fft_size} shorter than frame ({self.frame_length})")

    @property
    def frame_length(self) -> int:
        return int(round(self.frame_len_s * self.sample_rate))

    @property
    def hop_length(self) -> int:
        return max(1, int(round(self.hop_len_s * self.sample_rate)))

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size

    def as_dict(self) -> dict:
        return dict(frame_len_s=self.frame_len_s, hop_len_s=self.hop_len_s,
                    fft_size=self.fft_size, sample_rate=self.sample_rate, window=self.window)


# Table 3 parameter blocks
TEMPORAL_SPECTRAL = FrameConfig(0.05, 0.025, 1024, 16000, "hann")
SPECTROTEMPORAL = FrameConfig(0.04, 0.02, 2048, 22050, "hann")


def make_window(kind: str, length: int) -> np.ndarray:
    """Symmetric window of ``length`` points."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    phase = np.cos(2.0 * np.pi * n / (length - 1))
    if kind == "hann":
        return 0.5 - 0.5 * phase
    if kind == "hamming":
        return 0.54 - 0.46 * phase
    if kind == "rect":
        return np.ones(length)
    raise ConfigError(f"unknown window {kind!r}")


def frame_count(n_samples: int, frame_length: int, hop_length: int) -> int:
    if n_samples < frame_length:
        return 0
    return (n_samples - frame_length) // hop_length + 1


@dataclass
class Frames:
    """Stack of analysis frames of one signal.

    ``raw`` is a read-only strided view onto the source samples; ``windowed``
    is the raw slice multiplied by ``window``.
    """

    raw: np.ndarray
    window: np.ndarray
    t_start: np.ndarray

    @property
    def windowed(self) -> np.ndarray:
        return self.raw * self.window

    def __len__(self):
        return self.raw.shape[0]


def frame_signal(samples, cfg: FrameConfig) -> Frames:
    """Cut ``samples`` into overlapping frames; an incomplete tail is dropped."""
    x = np.asarray(getattr(samples, "samples", samples), dtype=np.float64)
    L, hop = cfg.frame_length, cfg.hop_length
    n = frame_count(x.size, L, hop)
    if n == 0:
        raise TooShortError(
            f"signal of {x.size} samples shorter than one frame "
            f"({L} samples = {cfg.frame_len_s} s at {cfg.sample_rate} Hz)")
    raw = np.lib.stride_tricks.sliding_window_view(x, L)[::hop][:n]
    return Frames(raw, make_window(cfg.window, L), np.arange(n) * hop / cfg.sample_rate)


@dataclass
class Spectrum:
    """One-sided magnitude spectrum, bins 0..fft_size/2 along the last axis."""

    magnitude: np.ndarray
    bin_hz: float = 1.0

    @property
    def power(self) -> np.ndarray:
        return self.magnitude ** 2

    @property
    def n_bins(self) -> int:
        return self.magnitude.shape[-1]


def fft_magnitude(frames, fft_size: int, sample_rate: float | None = None) -> Spectrum:
    """Zero-padded ``fft_size``-point FFT magnitude of each frame (last axis)."""
    x = np.asarray(frames, dtype=np.float64)
    if x.shape[-1] > fft_size:
        raise ValueError(f"frame length {x.shape[-1]} exceeds fft_size {fft_size}")
    mag = np.abs(np.fft.rfft(x, n=fft_size, axis=-1))
    return Spectrum(mag, sample_rate / fft_size if sample_rate else 1.0)
