"""WAV decoding/encoding, polyphase resampling and the dataset manifest."""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import DecodeError, IntegrityError, SchemaError, UnsupportedFormatError
from .tabular import METADATA_FIELDS, MetadataRecord, parse_metadata

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.6

POSITIVE_LABELS = {"TB+", "1", "pos", "positive"}
NEGATIVE_LABELS = {"TB-", "TB−", "0", "neg", "negative"}

MANIFEST_COLUMNS = ("clip_id", "file_path", "participant_id", "label") + METADATA_FIELDS


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    clip_id: str = ""
    participant_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DecodeError(f"clip {self.clip_id!r}: samples must be a non-empty 1-D sequence")
        if self.sample_rate <= 0:
            raise DecodeError(f"clip {self.clip_id!r}: sample rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise DecodeError(f"clip {self.clip_id!r}: non-finite samples")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


# ---------------------------------------------------------------------------
# WAV


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise DecodeError("fmt chunk too short")
    fmt_tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if fmt_tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise DecodeError("extensible fmt chunk too short")
        # first two bytes of the subformat GUID hold the real format tag
        fmt_tag = struct.unpack("<H", body[24:26])[0]
    return fmt_tag, channels, rate, block_align, bits


def decode_wav_bytes(data: bytes, clip_id: str = "", participant_id: str = "") -> AudioClip:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DecodeError("not a RIFF/WAVE stream")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            if len(body) < size:
                raise DecodeError(f"truncated data chunk ({len(body)} of {size} bytes)")
            pcm = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise DecodeError("missing fmt chunk")
    if pcm is None:
        raise DecodeError("missing data chunk")

    fmt_tag, channels, rate, block_align, bits = fmt
    if channels < 1 or rate <= 0:
        raise DecodeError("invalid channel count or sample rate")
    width = bits // 8
    if fmt_tag == WAVE_FORMAT_PCM and bits in (8, 16, 24, 32):
        n = len(pcm) // (width * channels)
        raw = pcm[: n * width * channels]
        if bits == 8:
            x = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
        elif bits == 24:
            b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
            ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
            x = ints.astype(np.float64) / float(1 << 23)
        else:
            dtype = "<i2" if bits == 16 else "<i4"
            x = np.frombuffer(raw, dtype=dtype).astype(np.float64) / float(1 << (bits - 1))
    elif fmt_tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        n = len(pcm) // (4 * channels)
        x = np.frombuffer(pcm[: n * 4 * channels], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormatError(f"unsupported WAV encoding (format tag {fmt_tag:#x}, {bits} bits)")

    if x.size == 0:
        raise DecodeError("no audio frames")
    x = x.reshape(-1, channels).mean(axis=1)
    return AudioClip(x, rate, clip_id=clip_id, participant_id=participant_id)


def decode_wav(path, clip_id: str | None = None, participant_id: str = "") -> AudioClip:
    """Read a PCM/float WAV file as a mono float clip in [-1, 1]."""
    path = Path(path)
    data = path.read_bytes()
    try:
        return decode_wav_bytes(data, clip_id=clip_id if clip_id is not None else path.stem,
                                participant_id=participant_id)
    except DecodeError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def encode_wav(samples, sample_rate: int, bits: int = 16) -> bytes:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    if bits == 16:
        ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        fmt_tag = WAVE_FORMAT_PCM
    elif bits == 32:
        ints = x.astype("<f4")
        fmt_tag = WAVE_FORMAT_IEEE_FLOAT
    else:
        raise UnsupportedFormatError(f"encoder supports 16-bit PCM and 32-bit float, not {bits}")
    payload = ints.tobytes()
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, channels, sample_rate, sample_rate * block_align,
                      block_align, bits)
    return (b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)) + b"WAVE"
            + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(payload)) + payload)


def write_wav(path, samples, sample_rate: int, bits: int = 16) -> None:
    Path(path).write_bytes(encode_wav(samples, sample_rate, bits))


# ---------------------------------------------------------------------------
# Resampling


def _resample_filter(up: int, down: int) -> np.ndarray:
    numtaps = RESAMPLE_TAPS_PER_PHASE * up + 1
    # unit DC gain; resample_poly applies the factor ``up`` itself
    return signal.firwin(numtaps, 1.0 / max(up, down), window=("kaiser", RESAMPLE_KAISER_BETA))


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Polyphase windowed-sinc resampling to ``target_rate``.

    Output length is ``round(len * target / source)``; equal rates return
    the samples untouched.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.clip_id, clip.participant_id)
    ratio = Fraction(target_rate, clip.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    y = signal.resample_poly(clip.samples, up, down, window=_resample_filter(up, down))
    n_out = int(round(clip.samples.size * target_rate / clip.sample_rate))
    if y.size >= n_out:
        y = y[:n_out]
    else:
        y = np.concatenate([y, np.zeros(n_out - y.size)])
    return AudioClip(y, target_rate, clip.clip_id, clip.participant_id)


# ---------------------------------------------------------------------------
# Manifest


@dataclass(frozen=True)
class ManifestRow:
    clip_id: str
    file_path: Path
    participant_id: str
    label: int
    metadata: MetadataRecord


@dataclass
class Manifest:
    rows: list[ManifestRow]
    source: Path | None = None
    _index: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        labels = {}
        for i, row in enumerate(self.rows):
            if row.clip_id in self._index:
                raise IntegrityError(f"duplicate clip_id {row.clip_id!r}")
            self._index[row.clip_id] = i
            prev = labels.setdefault(row.participant_id, row.label)
            if prev != row.label:
                raise IntegrityError(f"participant {row.participant_id!r} has conflicting labels")

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def row(self, clip_id: str) -> ManifestRow:
        return self.rows[self._index[clip_id]]

    @property
    def clip_ids(self) -> list[str]:
        return [r.clip_id for r in self.rows]

    @property
    def participants(self) -> dict[str, list[str]]:
        groups: dict[str, list[str]] = {}
        for r in self.rows:
            groups.setdefault(r.participant_id, []).append(r.clip_id)
        return groups

    @property
    def participant_labels(self) -> dict[str, int]:
        return {r.participant_id: r.label for r in self.rows}

    def subset(self, participant_ids) -> "Manifest":
        keep = set(participant_ids)
        return Manifest([r for r in self.rows if r.participant_id in keep], self.source)


def parse_label(text: str) -> int:
    t = text.strip()
    if t in POSITIVE_LABELS:
        return 1
    if t in NEGATIVE_LABELS:
        return 0
    raise SchemaError(f"unrecognised label {text!r}")


def load_manifest(path, audio_root=None) -> Manifest:
    """Load the per-clip manifest CSV.

    Relative ``file_path`` entries resolve against ``audio_root`` (default:
    the manifest's directory).
    """
    path = Path(path)
    root = Path(audio_root) if audio_root is not None else path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                label = parse_label(rec["label"])
                meta = parse_metadata({k: rec[k] for k in METADATA_FIELDS})
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            fp = Path(rec["file_path"])
            rows.append(ManifestRow(rec["clip_id"], fp if fp.is_absolute() else root / fp,
                                    rec["participant_id"], label, meta))
    return Manifest(rows, source=path)


def write_manifest(path, rows) -> None:
    """Write manifest rows (dicts keyed by MANIFEST_COLUMNS, already serialised)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(MANIFEST_COLUMNS), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


@dataclass
class DatasetStats:
    n_participants: int
    n_pos: int
    n_neg: int
    n_clips: int
    mean_clips: float
    std_clips: float
    min_clips: int
    max_clips: int
    total_minutes: float | None
    by_class: dict = field(default_factory=dict)


def _count_stats(counts):
    c = np.asarray(counts, dtype=float)
    std = float(c.std(ddof=1)) if c.size > 1 else 0.0
    return float(c.mean()), std, int(c.min()), int(c.max())


def dataset_stats(m: Manifest, clips=None) -> DatasetStats:
    """Table-style summary of a manifest.

    ``clips`` maps clip_id to an AudioClip (or a duration in seconds); when
    omitted the total duration is left as None.
    """
    if len(m) == 0:
        raise SchemaError("empty manifest")
    groups = m.participants
    labels = m.participant_labels

    def minutes(ids):
        if clips is None:
            return None
        total = 0.0
        for cid in ids:
            c = clips[cid]
            total += c.duration if isinstance(c, AudioClip) else float(c)
        return total / 60.0

    by_class = {}
    for name, lab in (("pos", 1), ("neg", 0)):
        pids = [p for p in groups if labels[p] == lab]
        if not pids:
            continue
        counts = [len(groups[p]) for p in pids]
        mean, std, lo, hi = _count_stats(counts)
        by_class[name] = dict(n_participants=len(pids), n_clips=sum(counts), mean_clips=mean,
                              std_clips=std, min_clips=lo, max_clips=hi,
                              total_minutes=minutes([c for p in pids for c in groups[p]]))
    counts = [len(v) for v in groups.values()]
    mean, std, lo, hi = _count_stats(counts)
    n_pos = sum(1 for p in groups if labels[p] == 1)
    return DatasetStats(len(groups), n_pos, len(groups) - n_pos, sum(counts), mean, std, lo, hi,
                        minutes(m.clip_ids), by_class)
