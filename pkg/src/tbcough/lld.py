"""Per-frame low-level descriptors: temporal, spectral and mel/cepstral.

Vectorised functions operate along the last axis, so they accept a single
frame (1-D) or a stack of frames (2-D, one frame per row).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft

from .audio_io import AudioClip, resample
from .dsp import SPECTROTEMPORAL, TEMPORAL_SPECTRAL, FrameConfig, fft_magnitude, frame_signal
from .errors import ConfigError, DataError, TooShortError

INTENSITY_REF = 2e-5
INTENSITY_FLOOR = 1e-12
LOG_MEL_FLOOR = 1e-10
ROLLOFF_FRACTION = 0.90
N_MELS = 128
N_MFCC = 13

TEMPORAL_NAMES = ("energy", "zcr", "intensity")
SPECTRAL_NAMES = ("centroid", "spread", "rolloff", "entropy", "flux")
MFCC_NAMES = tuple(f"mfcc{i}" for i in range(N_MFCC))
LLD_NAMES = TEMPORAL_NAMES + SPECTRAL_NAMES + MFCC_NAMES


# ---------------------------------------------------------------------------
# temporal


def frame_energy(raw, window=None):
    x = np.asarray(raw, dtype=np.float64)
    if window is not None:
        x = x * window
    return np.mean(x * x, axis=-1)


def zero_crossing_rate(raw):
    """Fraction of adjacent sample pairs whose sign differs (sgn(0) = +1).

    Computed on the unwindowed frame.
    """
    x = np.asarray(raw, dtype=np.float64)
    s = np.where(x >= 0, 1.0, -1.0)
    return 0.5 * np.abs(np.diff(s, axis=-1)).sum(axis=-1) / x.shape[-1]


def intensity_db(raw, window=None):
    ms = frame_energy(raw, window)
    return 10.0 * np.log10(np.maximum(ms, INTENSITY_FLOOR) / INTENSITY_REF)


# ---------------------------------------------------------------------------
# spectral; silent spectra map to 0 for every descriptor


def _safe_div(num, den):
    num, den = np.asarray(num, dtype=np.float64), np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out[()] if out.ndim == 0 else out


def spectral_centroid(magnitude):
    """Magnitude-weighted mean bin index."""
    X = np.asarray(magnitude, dtype=np.float64)
    k = np.arange(X.shape[-1])
    return _safe_div((X * k).sum(axis=-1), X.sum(axis=-1))


def spectral_spread(magnitude):
    X = np.asarray(magnitude, dtype=np.float64)
    k = np.arange(X.shape[-1])
    total = X.sum(axis=-1)
    centroid = _safe_div((X * k).sum(axis=-1), total)
    var = _safe_div((X * (k - np.expand_dims(centroid, -1)) ** 2).sum(axis=-1), total)
    return np.sqrt(np.maximum(var, 0.0))


def spectral_rolloff(power, fraction=ROLLOFF_FRACTION):
    """Smallest bin whose cumulative power reaches ``fraction`` of the total."""
    S = np.asarray(power, dtype=np.float64)
    cum = np.cumsum(S, axis=-1)
    total = cum[..., -1:]
    # relative slack of 1e-12 absorbs summation-order rounding
    reached = cum >= fraction * total * (1.0 - 1e-12)
    idx = np.argmax(reached, axis=-1)
    return np.where(total[..., 0] > 0, idx, 0)


def spectral_entropy(power):
    """Shannon entropy of the normalised power distribution, divided by log2(n_bins)."""
    S = np.asarray(power, dtype=np.float64)
    n_bins = S.shape[-1]
    if n_bins < 2:
        return np.zeros(S.shape[:-1])[()]
    P = _safe_div(S, S.sum(axis=-1, keepdims=True))
    terms = np.zeros_like(P)
    np.multiply(P, np.log2(P, out=np.zeros_like(P), where=P > 0), out=terms, where=P > 0)
    return -terms.sum(axis=-1) / np.log2(n_bins)


def _l1_normalise(S):
    return _safe_div(S, S.sum(axis=-1, keepdims=True))


def spectral_flux(power, prev_power, p=2):
    """p-norm distance between two L1-normalised power spectra."""
    a = _l1_normalise(np.asarray(power, dtype=np.float64))
    b = _l1_normalise(np.asarray(prev_power, dtype=np.float64))
    return (np.abs(a - b) ** p).sum(axis=-1) ** (1.0 / p)


def spectral_flux_series(power, p=2):
    """Flux for each row of a frames x bins power matrix; the first frame is 0."""
    S = np.asarray(power, dtype=np.float64)
    out = np.zeros(S.shape[0])
    if S.shape[0] > 1:
        out[1:] = spectral_flux(S[1:], S[:-1], p)
    return out


# ---------------------------------------------------------------------------
# mel / cepstral


def mel_scale(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # n_filters x n_bins
    points_bin: np.ndarray  # n_filters + 2 edge/centre bins
    f_min: float
    f_max: float

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def centers_bin(self) -> np.ndarray:
        return self.points_bin[1:-1]


@lru_cache(maxsize=16)
def build_mel_filterbank(n_filters=N_MELS, fft_size=2048, sample_rate=22050, f_min=0.0,
                         f_max=None) -> MelFilterbank:
    """Triangular filters with peak 1, centres equally spaced on the mel scale."""
    if f_max is None:
        f_max = sample_rate / 2.0
    if n_filters < 1:
        raise ConfigError("n_filters must be >= 1")
    if not 0 <= f_min < f_max <= sample_rate / 2.0:
        raise ConfigError("need 0 <= f_min < f_max <= Nyquist")
    n_bins = fft_size // 2 + 1
    mels = np.linspace(mel_scale(f_min), mel_scale(f_max), n_filters + 2)
    points = np.round(mel_to_hz(mels) * fft_size / sample_rate).astype(int)
    points = np.clip(points, 0, n_bins - 1)
    if np.any(np.diff(points) <= 0):
        raise ConfigError(f"{n_filters} mel filters too many for a {fft_size}-point FFT "
                          "at this sample rate (empty triangle)")
    k = np.arange(n_bins)
    weights = np.zeros((n_filters, n_bins))
    for m in range(n_filters):
        lo, c, hi = points[m], points[m + 1], points[m + 2]
        rise = (k - lo) / (c - lo)
        fall = (hi - k) / (hi - c)
        weights[m] = np.maximum(0.0, np.minimum(rise, fall))
    weights.setflags(write=False)
    points.setflags(write=False)
    return MelFilterbank(weights, points, float(f_min), float(f_max))


@dataclass
class LogMelSpectrogram:
    values: np.ndarray  # n_mels x n_frames, natural-log power
    config: FrameConfig
    clip_id: str = ""

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def _at_rate(clip: AudioClip, rate: int) -> AudioClip:
    return clip if clip.sample_rate == rate else resample(clip, rate)


def log_mel_spectrogram(clip: AudioClip, cfg: FrameConfig = SPECTROTEMPORAL,
                        n_mels: int = N_MELS) -> LogMelSpectrogram:
    clip = _at_rate(clip, cfg.sample_rate)
    frames = frame_signal(clip.samples, cfg)
    power = fft_magnitude(frames.windowed, cfg.fft_size).power
    fb = build_mel_filterbank(n_mels, cfg.fft_size, cfg.sample_rate)
    mel = power @ fb.weights.T
    return LogMelSpectrogram(np.log(np.maximum(mel, LOG_MEL_FLOOR)).T, cfg, clip.clip_id)


def mfcc_from_log_mel(log_mel, n_coeffs: int = N_MFCC) -> np.ndarray:
    """Orthonormal DCT-II along the mel axis, first ``n_coeffs`` rows."""
    values = getattr(log_mel, "values", log_mel)
    if n_coeffs > values.shape[0]:
        raise ConfigError(f"n_coeffs {n_coeffs} exceeds n_filters {values.shape[0]}")
    return sp_fft.dct(values, type=2, norm="ortho", axis=0)[:n_coeffs]


def mfcc(clip: AudioClip, n_coeffs: int = N_MFCC, cfg: FrameConfig = SPECTROTEMPORAL,
         n_mels: int = N_MELS) -> np.ndarray:
    if n_coeffs > n_mels:
        raise ConfigError(f"n_coeffs {n_coeffs} exceeds n_filters {n_mels}")
    return mfcc_from_log_mel(log_mel_spectrogram(clip, cfg, n_mels), n_coeffs)


# ---------------------------------------------------------------------------
# per-clip matrix


@dataclass
class LldBlock:
    values: np.ndarray  # n_frames x n_cols
    names: tuple
    t_start: np.ndarray


@dataclass
class LldMatrix:
    """Descriptor columns of one clip, possibly on several frame grids.

    The temporal/spectral and MFCC descriptors come from different frame
    configurations, so each grid is kept as its own block.
    """

    blocks: list
    clip_id: str = ""
    warnings: list = field(default_factory=list)

    @classmethod
    def from_array(cls, values, names=None, clip_id=""):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be n_frames x n_descriptors")
        if names is None:
            names = tuple(f"lld{i}" for i in range(values.shape[1]))
        return cls([LldBlock(values, tuple(names), np.arange(values.shape[0], dtype=float))],
                   clip_id)

    @property
    def descriptor_names(self) -> tuple:
        return tuple(n for b in self.blocks for n in b.names)

    @property
    def n_descriptors(self) -> int:
        return len(self.descriptor_names)

    def columns(self):
        for b in self.blocks:
            for j, name in enumerate(b.names):
                yield name, b.values[:, j]


@dataclass
class ClipAnalysis:
    lld: LldMatrix
    log_mel: LogMelSpectrogram
    mfcc: np.ndarray


def temporal_spectral_block(clip: AudioClip, cfg: FrameConfig = TEMPORAL_SPECTRAL) -> LldBlock:
    clip = _at_rate(clip, cfg.sample_rate)
    if clip.samples.size < cfg.frame_length:
        raise TooShortError(
            f"clip {clip.clip_id!r} is {clip.duration:.4f} s; minimum duration is "
            f"{cfg.frame_len_s} s at {cfg.sample_rate} Hz")
    frames = frame_signal(clip.samples, cfg)
    spec = fft_magnitude(frames.windowed, cfg.fft_size)
    power = spec.power
    cols = [
        frame_energy(frames.raw, frames.window),
        zero_crossing_rate(frames.raw),
        intensity_db(frames.raw, frames.window),
        spectral_centroid(spec.magnitude),
        spectral_spread(spec.magnitude),
        spectral_rolloff(power).astype(np.float64),
        spectral_entropy(power),
        spectral_flux_series(power),
    ]
    return LldBlock(np.column_stack(cols), TEMPORAL_NAMES + SPECTRAL_NAMES, frames.t_start)


def analyze_clip(clip: AudioClip, ts_cfg: FrameConfig = TEMPORAL_SPECTRAL,
                 st_cfg: FrameConfig = SPECTROTEMPORAL, n_mels: int = N_MELS,
                 n_mfcc: int = N_MFCC) -> ClipAnalysis:
    ts = temporal_spectral_block(clip, ts_cfg)
    lm = log_mel_spectrogram(clip, st_cfg, n_mels)
    cc = mfcc_from_log_mel(lm, n_mfcc)
    st_t = np.arange(lm.n_frames) * st_cfg.hop_length / st_cfg.sample_rate
    mf = LldBlock(cc.T.copy(), tuple(f"mfcc{i}" for i in range(n_mfcc)), st_t)
    m = LldMatrix([ts, mf], clip.clip_id)
    for b in m.blocks:
        if not np.all(np.isfinite(b.values)):
            raise DataError(f"clip {clip.clip_id!r}: non-finite descriptor values")
    return ClipAnalysis(m, lm, cc)


def extract_lld_matrix(clip: AudioClip, ts_cfg: FrameConfig = TEMPORAL_SPECTRAL,
                       st_cfg: FrameConfig = SPECTROTEMPORAL) -> LldMatrix:
    return analyze_clip(clip, ts_cfg, st_cfg).lld


# ---------------------------------------------------------------------------
# export


def write_lld_csv(m: LldMatrix, path) -> None:
    """One row per frame; each row fills only the columns of its own grid."""
    names = m.descriptor_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid", "frame", "t_start", *names])
        for g, b in enumerate(m.blocks):
            for i in range(b.values.shape[0]):
                row = dict(zip(b.names, b.values[i]))
                w.writerow([g, i, repr(float(b.t_start[i]))]
                           + [repr(float(row[n])) if n in row else "" for n in names])


def encode_log_mel(values) -> bytes:
    """Header of two little-endian uint32 (n_mels, n_frames), then float32 mel-major data."""
    v = np.asarray(getattr(values, "values", values))
    return struct.pack("<II", *v.shape) + np.ascontiguousarray(v, dtype="<f4").tobytes()


def decode_log_mel(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise DataError("log-mel block too short")
    n_mels, n_frames = struct.unpack("<II", data[:8])
    body = data[8:]
    if len(body) != 4 * n_mels * n_frames:
        raise DataError("log-mel block size does not match header")
    return np.frombuffer(body, dtype="<f4").reshape(n_mels, n_frames).astype(np.float64)
