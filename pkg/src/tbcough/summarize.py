"""Per-clip summary statistics over descriptor columns."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .lld import LldMatrix

log = logging.getLogger(__name__)

STAT_SUFFIXES = ("mean", "std", "skew", "kurt")


def _as_1d(v):
    x = np.asarray(v, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty sequence")
    return x


def _is_constant(x):
    return x.min() == x.max()


def mean(v) -> float:
    x = _as_1d(v)
    return float(x.sum() / x.size)


def std(v) -> float:
    """Sample standard deviation (N - 1 denominator)."""
    x = _as_1d(v)
    if x.size < 2:
        raise ValueError("std needs at least 2 values")
    if _is_constant(x):
        return 0.0
    d = x - mean(x)
    return float(np.sqrt((d * d).sum() / (x.size - 1)))


def skewness(v) -> float:
    """Biased third moment over the (N - 1)-variance to the 3/2; 0 for constant input."""
    x = _as_1d(v)
    n = x.size
    if n < 3:
        raise ValueError("skewness needs at least 3 values")
    if _is_constant(x):
        return 0.0
    d = x - mean(x)
    m2 = (d * d).sum() / (n - 1)
    return float(((d ** 3).sum() / n) / m2 ** 1.5)


def kurtosis(v) -> float:
    """Bias-corrected excess kurtosis g2; 0 for constant input."""
    x = _as_1d(v)
    n = x.size
    if n < 4:
        raise ValueError("kurtosis needs at least 4 values")
    if _is_constant(x):
        return 0.0
    d = x - mean(x)
    var = (d * d).sum() / (n - 1)
    s4 = (d ** 4).sum()
    # fourth moment normalised by the squared sample variance
    return float((n + 1) * n / ((n - 1) * (n - 2) * (n - 3)) * s4 / (var * var)
                 - 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3)))


def column_stats(v, warnings=None, name=""):
    """[mean, std, skew, kurt]; statistics a short column cannot support fall back to 0."""
    x = _as_1d(v)
    n = x.size
    out = [mean(x),
           std(x) if n >= 2 else 0.0,
           skewness(x) if n >= 3 else 0.0,
           kurtosis(x) if n >= 4 else 0.0]
    if n < 4:
        msg = f"column {name!r} has {n} frame(s); higher statistics set to 0"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return out


@dataclass
class FeatureVector:
    values: np.ndarray
    names: tuple
    clip_id: str = ""
    participant_id: str = ""
    label: int | None = None
    warnings: list = field(default_factory=list)

    def __len__(self):
        return self.values.size


def summarize_clip(m, participant_id: str = "", label=None) -> FeatureVector:
    if not isinstance(m, LldMatrix):
        m = LldMatrix.from_array(m)
    values, names, warnings = [], [], list(m.warnings)
    for name, col in m.columns():
        if col.size < 1:
            raise ValueError(f"column {name!r} has no frames")
        values.extend(column_stats(col, warnings, name))
        names.extend(f"{name}_{s}" for s in STAT_SUFFIXES)
    return FeatureVector(np.asarray(values), tuple(names), m.clip_id, participant_id, label,
                         warnings)


def write_feature_csv(path, vectors) -> None:
    """One row per clip: clip_id, participant_id, label, then the named values."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("no feature vectors to write")
    names = vectors[0].names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "participant_id", "label", *names])
        for fv in vectors:
            if fv.names != names:
                raise ValueError(f"clip {fv.clip_id!r} has a different feature layout")
            w.writerow([fv.clip_id, fv.participant_id, "" if fv.label is None else fv.label,
                        *(repr(float(x)) for x in fv.values)])
