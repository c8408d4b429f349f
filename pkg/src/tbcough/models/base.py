"""Model specs, fitted-model container, grids and the JSON envelope."""

from __future__ import annotations

import base64
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError, LayoutError
from ..tabular import Imputer, Layout, Scaler

FAMILIES = ("LR", "MLP", "RF", "AB")
FORMAT_NAME = "tbcough-model"
FORMAT_VERSION = 1

MLP_WIDTH_SCHEDULES = ((256, 128, 64, 32, 16), (128, 64, 32, 16, 8), (64, 32, 16, 8, 4))
MLP_ALLOWED_WIDTHS = (256, 128, 64, 32, 16, 8, 4)
LOG_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)

# training settings a grid override may also set (fixed by default)
EXTRA_AXES = {"MLP": ("epochs", "batch_size", "learning_rate"), "RF": ("bootstrap",)}

# trees see raw features, the gradient-trained families see z-scored ones
SCALED_FAMILIES = frozenset({"LR", "MLP"})


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")

    def as_dict(self):
        return dict(family=self.family, hyperparameters=_jsonable(self.hyperparameters),
                    seed=self.seed)

    def with_seed(self, seed: int) -> "ModelSpec":
        return ModelSpec(self.family, dict(self.hyperparameters), seed)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def hyperparameter_grid(family: str, seed: int = 0, overrides: dict | None = None) -> list:
    """Exhaustive grid for ``family``; ``overrides`` replaces individual axes."""
    axes = {
        "LR": {"C": list(LOG_GRID)},
        "MLP": {"alpha": list(LOG_GRID), "widths": [list(w) for w in MLP_WIDTH_SCHEDULES]},
        "RF": {"n_estimators": [100, 300, 500], "max_features": ["sqrt", "log2"],
               "max_depth": [4, 6, 8], "criterion": ["gini", "entropy"]},
        "AB": {"n_estimators": [10, 50, 100, 250, 500],
               "learning_rate": [1e-4, 1e-3, 1e-2, 1e-1, 1.0]},
    }
    if family not in axes:
        raise ConfigError(f"no grid for model family {family!r}")
    grid_axes = dict(axes[family])
    for k, v in (overrides or {}).items():
        if k not in grid_axes and k not in EXTRA_AXES.get(family, ()):
            raise ConfigError(f"{family} has no hyperparameter {k!r}")
        grid_axes[k] = list(v) if isinstance(v, (list, tuple)) else [v]
    names = list(grid_axes)
    return [ModelSpec(family, dict(zip(names, combo)), seed)
            for combo in itertools.product(*(grid_axes[n] for n in names))]


@dataclass
class TrainedModel:
    family: str
    hyperparameters: dict
    seed: int
    n_features: int
    params: dict  # name -> ndarray

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.family, dict(self.hyperparameters), self.seed)


def check_xy(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite values")
    if y is None:
        return X
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise DataError("y must have one label per row")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0/1")
    return X, y.astype(np.float64)


def train(spec: ModelSpec, X, y) -> TrainedModel:
    from . import adaboost, forest, logistic, mlp

    hp = spec.hyperparameters
    if spec.family == "LR":
        return logistic.train_lr(X, y, C=hp.get("C", 1.0), seed=spec.seed)
    if spec.family == "MLP":
        return mlp.train_mlp(X, y, alpha=hp.get("alpha", 1e-4),
                             widths=hp.get("widths", MLP_WIDTH_SCHEDULES[0]), seed=spec.seed,
                             **{k: hp[k] for k in ("epochs", "batch_size", "learning_rate") if k in hp})
    if spec.family == "RF":
        return forest.train_rf(X, y, n_estimators=hp.get("n_estimators", 100),
                               max_features=hp.get("max_features", "sqrt"),
                               max_depth=hp.get("max_depth", 6),
                               criterion=hp.get("criterion", "gini"),
                               bootstrap=hp.get("bootstrap", True), seed=spec.seed)
    return adaboost.train_adaboost(X, y, n_estimators=hp.get("n_estimators", 50),
                                   learning_rate=hp.get("learning_rate", 1.0), seed=spec.seed)


def predict_proba(m: TrainedModel, X) -> np.ndarray:
    from . import adaboost, forest, logistic, mlp

    X = check_xy(X)
    if X.shape[1] != m.n_features:
        raise LayoutError(f"model expects {m.n_features} features, got {X.shape[1]}")
    fn = {"LR": logistic.predict_lr, "MLP": mlp.predict_mlp, "RF": forest.predict_rf,
          "AB": adaboost.predict_adaboost}[m.family]
    return fn(m.params, X)


# ---------------------------------------------------------------------------
# preprocessing + model


@dataclass
class Pipeline:
    """Imputer -> optional scaler -> classifier, as fitted on one training set."""

    model: TrainedModel
    imputer: Imputer
    scaler: Scaler | None = None
    layout: Layout | None = None
    fingerprint: str = ""

    def transform(self, X):
        X = self.imputer.transform(X)
        return self.scaler.transform(X) if self.scaler is not None else X

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        expected = self.layout.width if self.layout is not None else self.model.n_features
        if X.ndim != 2 or X.shape[1] != expected:
            got = X.shape[1] if X.ndim == 2 else X.shape
            raise LayoutError(f"expected {expected} feature columns, got {got}")
        return predict_proba(self.model, self.transform(X))


def fit_pipeline(spec: ModelSpec, X, y, kinds, fold_tags=None, test_fold=None,
                 layout: Layout | None = None) -> Pipeline:
    imputer = Imputer(kinds).fit(X, fold_tags, test_fold)
    Xi = imputer.transform(X)
    scaler = None
    if spec.family in SCALED_FAMILIES:
        scaler = Scaler().fit(Xi, fold_tags, test_fold)
        Xi = scaler.transform(Xi)
    return Pipeline(train(spec, Xi, y), imputer, scaler, layout)


# ---------------------------------------------------------------------------
# serialization


def _enc(a) -> dict:
    a = np.asarray(a)
    le = np.ascontiguousarray(a.astype(a.dtype.newbyteorder("<"), copy=False))
    return {"dtype": le.dtype.str, "shape": list(a.shape),
            "data": base64.b64encode(le.tobytes()).decode("ascii")}


def _dec(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(d["shape"]).copy()


def pipeline_to_dict(p: Pipeline) -> dict:
    m = p.model
    pre = {"kinds": list(p.imputer.kinds), "impute_fill": _enc(p.imputer.fill_)}
    if p.scaler is not None:
        pre.update(scale_mean=_enc(p.scaler.mean_), scale_scale=_enc(p.scaler.scale_),
                   scale_constant=_enc(p.scaler.constant_))
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "family": m.family,
        "hyperparameters": _jsonable(m.hyperparameters),
        "seed": m.seed,
        "n_features": m.n_features,
        "layout": p.layout.as_list() if p.layout is not None else None,
        "fingerprint": p.fingerprint,
        "preprocessing": pre,
        "params": {k: _enc(v) for k, v in sorted(m.params.items())},
    }


def pipeline_from_dict(d: dict) -> Pipeline:
    if d.get("format") != FORMAT_NAME:
        raise DataError("not a tbcough model file")
    if d.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {d.get('version')}")
    model = TrainedModel(d["family"], d["hyperparameters"], d["seed"], d["n_features"],
                         {k: _dec(v) for k, v in d["params"].items()})
    pre = d["preprocessing"]
    imputer = Imputer(pre["kinds"])
    imputer.fill_ = _dec(pre["impute_fill"])
    scaler = None
    if "scale_mean" in pre:
        scaler = Scaler()
        scaler.mean_ = _dec(pre["scale_mean"])
        scaler.scale_ = _dec(pre["scale_scale"])
        scaler.constant_ = _dec(pre["scale_constant"])
    layout = Layout.from_list(d["layout"]) if d.get("layout") is not None else None
    return Pipeline(model, imputer, scaler, layout, d.get("fingerprint", ""))


def save_pipeline(p: Pipeline, path) -> None:
    Path(path).write_text(json.dumps(pipeline_to_dict(p), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_pipeline(path) -> Pipeline:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    return pipeline_from_dict(d)


def model_to_dict(m: TrainedModel) -> dict:
    return {"family": m.family, "hyperparameters": _jsonable(m.hyperparameters), "seed": m.seed,
            "n_features": m.n_features, "params": {k: _enc(v) for k, v in sorted(m.params.items())}}


def model_from_dict(d: dict) -> TrainedModel:
    return TrainedModel(d["family"], d["hyperparameters"], d["seed"], d["n_features"],
                        {k: _dec(v) for k, v in d["params"].items()})
