"""Per-clip feature extraction with a content-addressed cache, and table assembly."""

from __future__ import annotations

import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audio_io import Manifest, decode_wav_bytes
from .dsp import SPECTROTEMPORAL, TEMPORAL_SPECTRAL, FrameConfig
from .errors import ConfigError, CoughError
from .lld import N_MELS, N_MFCC, analyze_clip
from .summarize import summarize_clip
from .tabular import (BINARY_FIELDS, METADATA_FIELDS, FeatureTable, Layout, encode_metadata,
                      flatten_spectrogram, silent_mfcc_column)

log = logging.getLogger(__name__)

CACHE_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    audio_summary: bool = True
    metadata: bool = False
    flat_spectrogram: bool = False
    flat_mfcc: bool = False
    target_frames: int = 24
    temporal_spectral: FrameConfig = TEMPORAL_SPECTRAL
    spectrotemporal: FrameConfig = SPECTROTEMPORAL
    n_mels: int = N_MELS
    n_mfcc: int = N_MFCC

    def __post_init__(self):
        if not (self.audio_summary or self.metadata or self.flat_spectrogram or self.flat_mfcc):
            raise ConfigError("no feature block enabled")
        if self.target_frames < 1:
            raise ConfigError("target_frames must be >= 1")

    def extraction_key(self) -> dict:
        """Settings that change per-clip extraction output (the cache key part)."""
        return dict(version=CACHE_VERSION, ts=self.temporal_spectral.as_dict(),
                    st=self.spectrotemporal.as_dict(), n_mels=self.n_mels, n_mfcc=self.n_mfcc)

    def as_dict(self) -> dict:
        return dict(audio_summary=self.audio_summary, metadata=self.metadata,
                    flat_spectrogram=self.flat_spectrogram, flat_mfcc=self.flat_mfcc,
                    target_frames=self.target_frames, **self.extraction_key())


@dataclass
class ClipFeatures:
    summary: np.ndarray
    names: tuple
    log_mel: np.ndarray
    mfcc: np.ndarray
    warnings: list = field(default_factory=list)


def compute_clip_features(data: bytes, cfg: FeatureConfig, clip_id: str = "") -> ClipFeatures:
    clip = decode_wav_bytes(data, clip_id=clip_id)
    a = analyze_clip(clip, cfg.temporal_spectral, cfg.spectrotemporal, cfg.n_mels, cfg.n_mfcc)
    fv = summarize_clip(a.lld)
    return ClipFeatures(fv.values, fv.names, a.log_mel.values, a.mfcc, fv.warnings)


class FeatureCache:
    """npz files keyed by sha256(clip bytes + extraction settings)."""

    def __init__(self, root):
        self.root = Path(root) if root is not None else None
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(data: bytes, cfg: FeatureConfig) -> str:
        h = hashlib.sha256(data)
        h.update(json.dumps(cfg.extraction_key(), sort_keys=True).encode())
        return h.hexdigest()

    def _path(self, key):
        return self.root / key[:2] / f"{key}.npz"

    def get(self, key):
        if self.root is None:
            return None
        p = self._path(key)
        if not p.exists():
            return None
        with np.load(p, allow_pickle=False) as z:
            return ClipFeatures(z["summary"], tuple(str(n) for n in z["names"]), z["log_mel"],
                                z["mfcc"], [str(w) for w in z["warnings"]])

    def put(self, key, feats: ClipFeatures):
        if self.root is None:
            return
        p = self._path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        buf = io.BytesIO()
        np.savez(buf, summary=feats.summary, names=np.array(feats.names), log_mel=feats.log_mel,
                 mfcc=feats.mfcc, warnings=np.array(feats.warnings, dtype=str))
        tmp = p.with_suffix(".tmp")
        tmp.write_bytes(buf.getvalue())
        tmp.replace(p)


def _extract_one(args):
    path, clip_id, cfg, cache_root = args
    try:
        data = Path(path).read_bytes()
        cache = FeatureCache(cache_root)
        key = cache.key(data, cfg)
        hit = cache.get(key)
        if hit is not None:
            return clip_id, hit, True, None
        feats = compute_clip_features(data, cfg, clip_id)
        cache.put(key, feats)
        return clip_id, feats, False, None
    except (OSError, CoughError, ValueError) as exc:
        return clip_id, None, False, f"{type(exc).__name__}: {exc}"


@dataclass
class ExtractionResult:
    features: dict  # clip_id -> ClipFeatures
    failures: list  # (clip_id, message)
    n_cached: int
    n_computed: int


def extract_manifest(manifest: Manifest, cfg: FeatureConfig, cache_dir=None,
                     jobs: int = 1) -> ExtractionResult:
    tasks = [(str(r.file_path), r.clip_id, cfg, str(cache_dir) if cache_dir else None)
             for r in manifest.rows]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_extract_one, tasks, chunksize=8))
    else:
        results = [_extract_one(t) for t in tasks]
    feats, failures, n_cached, n_computed = {}, [], 0, 0
    for clip_id, f, cached, err in results:
        if err is not None:
            log.error("clip %s failed: %s", clip_id, err)
            failures.append((clip_id, err))
            continue
        feats[clip_id] = f
        n_cached += cached
        n_computed += not cached
    return ExtractionResult(feats, failures, n_cached, n_computed)


def metadata_kinds():
    return ["binary" if n in BINARY_FIELDS else "numeric" for n in METADATA_FIELDS]


def build_table(manifest: Manifest, extraction: ExtractionResult, cfg: FeatureConfig) -> FeatureTable:
    """Fuse the enabled blocks for every successfully extracted clip, in manifest order."""
    rows = [r for r in manifest.rows if r.clip_id in extraction.features]
    if not rows:
        raise CoughError("no clips with features")
    first = extraction.features[rows[0].clip_id]
    blocks, names, kinds = [], [], []
    if cfg.audio_summary:
        blocks.append(("audio_summary", len(first.names)))
        names += list(first.names)
        kinds += [None] * len(first.names)
    if cfg.metadata:
        blocks.append(("metadata", len(METADATA_FIELDS)))
        names += [f"meta_{n}" for n in METADATA_FIELDS]
        kinds += metadata_kinds()
    T = cfg.target_frames
    if cfg.flat_spectrogram:
        blocks.append(("flat_spectrogram", cfg.n_mels * T))
        names += [f"logmel_{m}_{t}" for m in range(cfg.n_mels) for t in range(T)]
        kinds += [None] * (cfg.n_mels * T)
    if cfg.flat_mfcc:
        blocks.append(("flat_mfcc", cfg.n_mfcc * T))
        names += [f"mfccflat_{c}_{t}" for c in range(cfg.n_mfcc) for t in range(T)]
        kinds += [None] * (cfg.n_mfcc * T)
    mfcc_pad = silent_mfcc_column(cfg.n_mels, cfg.n_mfcc) if cfg.flat_mfcc else None
    X = np.empty((len(rows), sum(w for _, w in blocks)))
    for i, r in enumerate(rows):
        f = extraction.features[r.clip_id]
        parts = []
        if cfg.audio_summary:
            parts.append(f.summary)
        if cfg.metadata:
            parts.append(encode_metadata(r.metadata))
        if cfg.flat_spectrogram:
            parts.append(flatten_spectrogram(f.log_mel, T))
        if cfg.flat_mfcc:
            parts.append(flatten_spectrogram(f.mfcc, T, pad_value=mfcc_pad))
        X[i] = np.concatenate(parts)
    return FeatureTable(X, [r.clip_id for r in rows], [r.participant_id for r in rows],
                        [r.label for r in rows], Layout(tuple(blocks)), names, kinds)


def with_blocks(cfg: FeatureConfig, **toggles) -> FeatureConfig:
    return replace(cfg, **toggles)
