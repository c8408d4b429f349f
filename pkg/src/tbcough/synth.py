"""Seeded synthetic cough corpora: band-limited noise bursts plus metadata."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio_io import encode_wav, write_manifest
from .errors import ConfigError
from .tabular import MetadataRecord, format_metadata

# binary fields whose "yes" rate moves with the label when metadata_signal > 0
LINKED_BINARIES = ("fever", "night_sweats", "weight_loss", "hemoptysis", "prior_tb")


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    n_participants: int = 40
    clips_min: int = 5
    clips_max: int = 5
    positive_fraction: float = 0.5
    sample_rate: int = 44100
    duration_s: float = 0.5
    neg_band: tuple = (300.0, 1200.0)
    pos_band: tuple = (2000.0, 6000.0)
    audio_signal: float = 1.0  # chance a clip uses its own class's band
    metadata_signal: float = 0.0  # 0 = metadata independent of label
    missing_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        n_pos = int(round(self.n_participants * self.positive_fraction))
        if n_pos < 1 or n_pos >= self.n_participants:
            raise ConfigError("synthetic corpus needs both classes non-empty")
        if not 1 <= self.clips_min <= self.clips_max:
            raise ConfigError("need 1 <= clips_min <= clips_max")
        for lo, hi in (self.neg_band, self.pos_band):
            if not 0 <= lo < hi <= self.sample_rate / 2:
                raise ConfigError(f"band ({lo}, {hi}) outside (0, Nyquist)")
        if not 0 <= self.audio_signal <= 1 or not 0 <= self.metadata_signal <= 1:
            raise ConfigError("signal strengths must lie in [0, 1]")

    @property
    def n_positive(self) -> int:
        return int(round(self.n_participants * self.positive_fraction))


def band_noise(rng, n, sample_rate, band):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[(f < band[0]) | (f > band[1])] = 0.0
    x = np.fft.irfft(spec, n)
    return x / (np.sqrt(np.mean(x * x)) + 1e-12)


def cough_burst(rng, spec: SyntheticCorpusSpec, band) -> np.ndarray:
    n = int(round(spec.duration_s * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    onset = rng.uniform(0.0, 0.05)
    tau = rng.uniform(0.06, 0.15)
    env = np.where(t >= onset, np.exp(-(t - onset) / tau), 0.0)
    env *= np.clip((t - onset) / 0.01, 0.0, 1.0)
    x = band_noise(rng, n, spec.sample_rate, band) * env
    x *= rng.uniform(0.2, 0.6) / (np.max(np.abs(x)) + 1e-12)
    return x + 1e-3 * rng.standard_normal(n)


def synth_metadata(rng, label: int, s: float, missing_rate: float) -> MetadataRecord:
    sign = 1.0 if label else -1.0
    vals = {}
    for name in ("sex", "prior_tb_pulmonary", "prior_tb_extrapulmonary", "prior_tb_unknown",
                 "smoke_last_week"):
        vals[name] = float(rng.random() < 0.5)
    for name in LINKED_BINARIES:
        vals[name] = float(rng.random() < 0.5 + 0.4 * s * sign)
    vals["age"] = round(float(max(18.0, rng.normal(40.0, 12.0))), 0)
    vals["height"] = round(float(rng.normal(165.0, 9.0)), 1)
    vals["weight"] = round(float(rng.normal(62.0, 10.0) - 6.0 * s * sign), 1)
    vals["cough_duration_days"] = round(float(np.exp(rng.normal(3.0, 0.6))), 0)
    vals["heart_rate"] = round(float(rng.normal(85.0, 12.0) + 8.0 * s * sign), 0)
    vals["temperature"] = round(float(rng.normal(36.8, 0.4) + 0.4 * s * sign), 1)
    if missing_rate > 0:
        for name in list(vals):
            if rng.random() < missing_rate:
                vals[name] = None
    return MetadataRecord(**vals)


def generate_corpus(spec: SyntheticCorpusSpec, out_dir) -> Path:
    """Write ``out_dir/audio/*.wav`` and ``out_dir/manifest.csv``; returns the manifest path."""
    out = Path(out_dir)
    audio = out / "audio"
    audio.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    labels = np.zeros(spec.n_participants, dtype=int)
    labels[rng.permutation(spec.n_participants)[:spec.n_positive]] = 1
    bands = (spec.neg_band, spec.pos_band)
    rows = []
    for i in range(spec.n_participants):
        pid = f"p{i:04d}"
        label = int(labels[i])
        meta = format_metadata(synth_metadata(rng, label, spec.metadata_signal, spec.missing_rate))
        for j in range(int(rng.integers(spec.clips_min, spec.clips_max + 1))):
            cid = f"{pid}_c{j:02d}"
            if rng.random() < spec.audio_signal:
                band = bands[label]
            else:
                band = bands[int(rng.integers(0, 2))]
            (audio / f"{cid}.wav").write_bytes(
                encode_wav(cough_burst(rng, spec, band), spec.sample_rate))
            rows.append(dict(clip_id=cid, file_path=f"audio/{cid}.wav", participant_id=pid,
                             label="TB+" if label else "TB-", **meta))
    path = out / "manifest.csv"
    write_manifest(path, rows)
    return path


def spec_from_dict(d: dict) -> SyntheticCorpusSpec:
    known = set(asdict(SyntheticCorpusSpec()))
    bad = set(d) - known
    if bad:
        raise ConfigError(f"unknown synthetic corpus settings {sorted(bad)}")
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return SyntheticCorpusSpec(**d)
