"""Pipeline configuration: TOML file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dsp import SPECTROTEMPORAL, TEMPORAL_SPECTRAL, FrameConfig
from .errors import ConfigError
from .features import FeatureConfig
from .models import FAMILIES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("cough-only", "cough-metadata")


@dataclass
class PipelineConfig:
    manifest: Path | None = None
    audio_root: Path | None = None
    out_dir: Path = Path("out")
    features: FeatureConfig = field(default_factory=FeatureConfig)
    experiment: str = "cough-only"
    families: tuple = ("LR",)
    k_outer: int = 10
    k_inner: int = 5
    seed: int = 0
    jobs: int = 1
    cache: bool = True
    grids: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    def validate(self) -> "PipelineConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.experiment == "cough-only" and self.features.metadata:
            raise ConfigError("cough-only experiment cannot enable the metadata block")
        if self.experiment == "cough-metadata" and not self.features.metadata:
            raise ConfigError("cough-metadata experiment needs the metadata block")
        bad = [f for f in self.families if f not in FAMILIES]
        if bad or not self.families:
            raise ConfigError(f"unknown model families {bad}; expected a subset of {FAMILIES}")
        for fam in self.grids:
            if fam not in FAMILIES:
                raise ConfigError(f"grid given for unknown family {fam!r}")
        if self.k_outer < 2 or self.k_inner < 2:
            raise ConfigError("fold counts must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def fingerprint(self, manifest_digest: str = "") -> str:
        """Hash of everything that determines results (not paths, not jobs)."""
        payload = dict(features=self.features.as_dict(), experiment=self.experiment,
                       families=list(self.families), k_outer=self.k_outer, k_inner=self.k_inner,
                       seed=self.seed, grids=self.grids, manifest=manifest_digest)
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _frame_config(d: dict | None, default: FrameConfig) -> FrameConfig:
    if not d:
        return default
    allowed = set(default.as_dict())
    bad = set(d) - allowed
    if bad:
        raise ConfigError(f"unknown frame settings {sorted(bad)}")
    return replace(default, **d)


def _resolve(base: Path, value):
    if value in (None, ""):
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def config_from_dict(d: dict, base_dir=Path(".")) -> PipelineConfig:
    d = dict(d)
    base = Path(base_dir)
    paths = d.pop("paths", {}) or {}
    bad = set(paths) - {"manifest", "audio_root", "out_dir"}
    if bad:
        raise ConfigError(f"unknown [paths] keys {sorted(bad)}")
    feats = dict(d.pop("features", {}) or {})
    if d.get("experiment") == "cough-metadata":
        feats.setdefault("metadata", True)
    frames = d.pop("frames", {}) or {}
    fcfg_kwargs = {k: feats.pop(k) for k in list(feats)
                   if k in ("audio_summary", "metadata", "flat_spectrogram", "flat_mfcc",
                            "target_frames", "n_mels", "n_mfcc")}
    if feats:
        raise ConfigError(f"unknown feature settings {sorted(feats)}")
    fcfg = FeatureConfig(
        temporal_spectral=_frame_config(frames.get("temporal_spectral"), TEMPORAL_SPECTRAL),
        spectrotemporal=_frame_config(frames.get("spectrotemporal"), SPECTROTEMPORAL),
        **fcfg_kwargs)
    cfg = PipelineConfig(
        manifest=_resolve(base, paths.get("manifest")),
        audio_root=_resolve(base, paths.get("audio_root")),
        out_dir=_resolve(base, paths.get("out_dir")) or Path("out"),
        features=fcfg,
    )
    simple = ("experiment", "k_outer", "k_inner", "seed", "jobs", "cache")
    for k in simple:
        if k in d:
            setattr(cfg, k, d.pop(k))
    if "families" in d:
        cfg.families = tuple(d.pop("families"))
    cfg.grids = d.pop("grids", {}) or {}
    cfg.synth = d.pop("synth", {}) or {}
    if d:
        raise ConfigError(f"unknown config keys {sorted(d)}")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, path.parent)


def apply_overrides(cfg: PipelineConfig, seed=None, families=None, experiment=None, out=None,
                    jobs=None, manifest=None) -> PipelineConfig:
    if seed is not None:
        cfg.seed = seed
    if families:
        cfg.families = tuple(f.strip().upper() for f in families.split(",") if f.strip())
    if experiment is not None:
        cfg.experiment = experiment
        if experiment == "cough-metadata":
            cfg.features = replace(cfg.features, metadata=True)
    if out is not None:
        cfg.out_dir = Path(out)
    if jobs is not None:
        cfg.jobs = jobs
    if manifest is not None:
        cfg.manifest = Path(manifest)
    return cfg.validate()
