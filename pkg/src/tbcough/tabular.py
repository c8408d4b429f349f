"""Clinical metadata encoding, imputation, scaling and feature fusion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import LayoutError, LeakageError, NotFittedError, SchemaError

log = logging.getLogger(__name__)

# column order of the manifest and of the encoded vector
METADATA_FIELDS = (
    "age", "sex", "height", "weight", "cough_duration_days",
    "prior_tb", "prior_tb_pulmonary", "prior_tb_extrapulmonary", "prior_tb_unknown",
    "hemoptysis", "heart_rate", "temperature",
    "smoke_last_week", "fever", "night_sweats", "weight_loss",
)
NUMERIC_FIELDS = frozenset({"age", "height", "weight", "cough_duration_days", "heart_rate",
                            "temperature"})
BINARY_FIELDS = frozenset(METADATA_FIELDS) - NUMERIC_FIELDS
MIN_AGE = 18

_BINARY_TEXT = {"yes": 1.0, "no": 0.0, "male": 1.0, "female": 0.0}


@dataclass(frozen=True)
class MetadataRecord:
    """One participant's demographic/clinical fields; None marks a missing value."""

    age: float | None = None
    sex: float | None = None
    height: float | None = None
    weight: float | None = None
    cough_duration_days: float | None = None
    prior_tb: float | None = None
    prior_tb_pulmonary: float | None = None
    prior_tb_extrapulmonary: float | None = None
    prior_tb_unknown: float | None = None
    hemoptysis: float | None = None
    heart_rate: float | None = None
    temperature: float | None = None
    smoke_last_week: float | None = None
    fever: float | None = None
    night_sweats: float | None = None
    weight_loss: float | None = None


assert tuple(f.name for f in fields(MetadataRecord)) == METADATA_FIELDS


def _parse_field(name: str, text) -> float | None:
    if text is None:
        return None
    t = str(text).strip()
    if t == "":
        return None
    if name in BINARY_FIELDS:
        expected = ("male", "female") if name == "sex" else ("yes", "no")
        if t.lower() not in expected:
            raise SchemaError(f"field {name!r}: expected one of {expected}, got {t!r}")
        return _BINARY_TEXT[t.lower()]
    try:
        value = float(t)
    except ValueError:
        raise SchemaError(f"field {name!r}: cannot parse number from {t!r}") from None
    if not math.isfinite(value):
        raise SchemaError(f"field {name!r}: non-finite value {t!r}")
    return value


def parse_metadata(raw: dict) -> MetadataRecord:
    rec = MetadataRecord(**{name: _parse_field(name, raw.get(name)) for name in METADATA_FIELDS})
    if rec.age is not None and rec.age < MIN_AGE:
        log.warning("participant age %s below cohort minimum %d", rec.age, MIN_AGE)
    return rec


def format_metadata(rec: MetadataRecord) -> dict:
    """Inverse of parse_metadata: manifest cell strings."""
    out = {}
    for name in METADATA_FIELDS:
        v = getattr(rec, name)
        if v is None:
            out[name] = ""
        elif name == "sex":
            out[name] = "male" if v else "female"
        elif name in BINARY_FIELDS:
            out[name] = "yes" if v else "no"
        else:
            out[name] = repr(float(v))
    return out


def encode_metadata(rec: MetadataRecord) -> np.ndarray:
    """16-element vector in METADATA_FIELDS order; missing values are NaN until imputed."""
    return np.array([np.nan if getattr(rec, n) is None else float(getattr(rec, n))
                     for n in METADATA_FIELDS])


# ---------------------------------------------------------------------------
# imputation and scaling; both fit on training rows only


def _check_tags(fold_tags, test_fold, n_rows):
    if fold_tags is None:
        return
    tags = np.asarray(fold_tags)
    if tags.shape[0] != n_rows:
        raise ValueError("fold_tags length does not match rows")
    if test_fold is not None and np.any(tags == test_fold):
        raise LeakageError(f"rows tagged with held-out fold {test_fold} passed to fit")


class Imputer:
    """Median fill for numeric columns, mode fill for binary ones.

    ``kinds`` has one entry per column: "numeric", "binary" or None (column
    never imputed).
    """

    def __init__(self, kinds):
        self.kinds = list(kinds)
        self.fill_ = None

    def fit(self, X, fold_tags=None, test_fold=None):
        X = np.asarray(X, dtype=np.float64)
        _check_tags(fold_tags, test_fold, X.shape[0])
        fill = np.zeros(X.shape[1])
        for j, kind in enumerate(self.kinds):
            col = X[:, j][~np.isnan(X[:, j])]
            if kind is None or col.size == 0:
                continue
            if kind == "numeric":
                fill[j] = np.median(col)
            else:
                vals, counts = np.unique(col, return_counts=True)
                fill[j] = vals[np.argmax(counts)]
        self.fill_ = fill
        return self

    def transform(self, X):
        if self.fill_ is None:
            raise NotFittedError("imputer used before fit")
        X = np.array(X, dtype=np.float64)
        if X.shape[-1] != self.fill_.size:
            raise LayoutError(f"imputer expects {self.fill_.size} columns, got {X.shape[-1]}")
        mask = np.isnan(X)
        X[mask] = np.broadcast_to(self.fill_, X.shape)[mask]
        return X

    def missing_counts(self, X):
        return np.isnan(np.asarray(X, dtype=np.float64)).sum(axis=0)


class Scaler:
    """Column z-scoring; constant columns are masked and map to 0."""

    def __init__(self):
        self.mean_ = None
        self.scale_ = None
        self.constant_ = None

    def fit(self, X, fold_tags=None, test_fold=None):
        X = np.asarray(X, dtype=np.float64)
        _check_tags(fold_tags, test_fold, X.shape[0])
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("scaler needs a non-empty 2-D matrix")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
        self.constant_ = ~(sd > 0) | (X.min(axis=0) == X.max(axis=0))
        self.scale_ = np.where(self.constant_, 1.0, sd)
        return self

    def transform(self, X):
        if self.mean_ is None:
            raise NotFittedError("scaler applied before fit")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean_.size:
            raise LayoutError(f"scaler expects {self.mean_.size} columns, got {X.shape[-1]}")
        Z = (X - self.mean_) / self.scale_
        return np.where(self.constant_, 0.0, Z)


def fit_scaler(X, fold_tags=None, test_fold=None) -> Scaler:
    return Scaler().fit(X, fold_tags, test_fold)


def apply_scaler(s: Scaler, X):
    return s.transform(X)


# ---------------------------------------------------------------------------
# spectrogram flattening and fusion


def crop_or_pad(values, target_frames: int, pad_column):
    """Centre-crop or symmetrically pad the time axis (axis 1) to ``target_frames``."""
    v = np.asarray(values, dtype=np.float64)
    T = v.shape[1]
    if T >= target_frames:
        start = (T - target_frames) // 2
        return v[:, start:start + target_frames]
    left = (target_frames - T) // 2
    right = target_frames - T - left
    pad = np.broadcast_to(np.asarray(pad_column, dtype=np.float64).reshape(-1, 1),
                          (v.shape[0], 1))
    return np.hstack([np.repeat(pad, left, axis=1), v, np.repeat(pad, right, axis=1)])


def flatten_spectrogram(s, target_frames: int = 24, pad_value=None) -> np.ndarray:
    """Crop/pad a (bands x frames) matrix in time and flatten band-major.

    Padding defaults to the log-mel floor, ln(1e-10).
    """
    from .lld import LOG_MEL_FLOOR

    values = getattr(s, "values", s)
    if pad_value is None:
        pad_value = np.log(LOG_MEL_FLOOR)
    return crop_or_pad(values, target_frames, pad_value).ravel()


def silent_mfcc_column(n_mels: int, n_coeffs: int) -> np.ndarray:
    """MFCC of an all-floor log-mel column; pad value for flattened MFCC blocks."""
    from .lld import LOG_MEL_FLOOR, mfcc_from_log_mel

    return mfcc_from_log_mel(np.full((n_mels, 1), np.log(LOG_MEL_FLOOR)), n_coeffs)[:, 0]


@dataclass(frozen=True)
class Layout:
    """Ordered (block name, width) pairs partitioning a fused vector."""

    blocks: tuple

    @property
    def width(self) -> int:
        return sum(w for _, w in self.blocks)

    @property
    def offsets(self) -> dict:
        out, pos = {}, 0
        for name, w in self.blocks:
            out[name] = (pos, pos + w)
            pos += w
        return out

    def project(self, vector, name):
        lo, hi = self.offsets[name]
        return np.asarray(vector)[..., lo:hi]

    def as_list(self):
        return [[name, w] for name, w in self.blocks]

    @classmethod
    def from_list(cls, items):
        return cls(tuple((str(n), int(w)) for n, w in items))


@dataclass
class FusedVector:
    values: np.ndarray
    layout: Layout
    clip_id: str = ""


def fuse(audio, meta=None, flat=None, layout: Layout | None = None, clip_id: str = "") -> FusedVector:
    """Concatenate audio summary | metadata | flattened block(s).

    ``flat`` may be one vector or a mapping of block name to vector (e.g.
    flattened log-mel and flattened MFCC).
    """
    audio_vals = np.asarray(getattr(audio, "values", audio), dtype=np.float64)
    parts = [("audio_summary", audio_vals)]
    if meta is not None and np.size(meta):
        parts.append(("metadata", np.asarray(meta, dtype=np.float64)))
    if flat is not None:
        if isinstance(flat, dict):
            parts.extend((k, np.asarray(v, dtype=np.float64)) for k, v in flat.items())
        else:
            parts.append(("flat_spectrogram", np.asarray(flat, dtype=np.float64)))
    actual = Layout(tuple((n, v.size) for n, v in parts))
    if layout is not None and layout != actual:
        raise LayoutError(f"fused layout {actual.as_list()} does not match expected "
                          f"{layout.as_list()}")
    clip_id = clip_id or getattr(audio, "clip_id", "")
    return FusedVector(np.concatenate([v.ravel() for _, v in parts]), actual, clip_id)


@dataclass
class FeatureTable:
    """Fused per-clip design matrix plus the ids needed for grouped evaluation."""

    X: np.ndarray
    clip_ids: list
    participant_ids: np.ndarray
    labels: np.ndarray
    layout: Layout
    names: list
    kinds: list  # imputation kind per column ("numeric", "binary" or None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.participant_ids = np.asarray(self.participant_ids, dtype=object)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n, d = self.X.shape
        if not (len(self.clip_ids) == n == self.participant_ids.size == self.labels.size):
            raise LayoutError("feature table columns have inconsistent lengths")
        if not (d == self.layout.width == len(self.names) == len(self.kinds)):
            raise LayoutError(f"feature table width {d} does not match layout "
                              f"{self.layout.width}")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "FeatureTable":
        idx = np.asarray(idx)
        return FeatureTable(self.X[idx], [self.clip_ids[i] for i in np.arange(len(self))[idx]],
                            self.participant_ids[idx], self.labels[idx], self.layout,
                            self.names, self.kinds)

    def with_labels(self, labels) -> "FeatureTable":
        return FeatureTable(self.X, self.clip_ids, self.participant_ids, labels, self.layout,
                            self.names, self.kinds)

    def select_blocks(self, names) -> "FeatureTable":
        """Keep only the named layout blocks, in layout order."""
        keep = [(n, w) for n, w in self.layout.blocks if n in set(names)]
        offs = self.layout.offsets
        cols = np.concatenate([np.arange(*offs[n]) for n, _ in keep]) if keep else np.arange(0)
        return FeatureTable(self.X[:, cols], self.clip_ids, self.participant_ids, self.labels,
                            Layout(tuple(keep)), [self.names[c] for c in cols],
                            [self.kinds[c] for c in cols])
