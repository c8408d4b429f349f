"""Grouped cross-validation, ROC-AUC and experiment reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CoughError, DataError, LeakageError, UndefinedAUCError
from .models import ModelSpec, fit_pipeline, hyperparameter_grid
from .tabular import FeatureTable


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=tuple(keys)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# fold plans


@dataclass
class FoldPlan:
    assignments: dict  # participant_id -> fold
    k: int
    seed: int

    def fold_of(self, participant_ids) -> np.ndarray:
        return np.array([self.assignments[p] for p in participant_ids], dtype=np.int64)

    def splits(self, participant_ids):
        """Yield (fold, train_idx, test_idx) over clip rows."""
        folds = self.fold_of(participant_ids)
        for f in range(self.k):
            test = np.flatnonzero(folds == f)
            train = np.flatnonzero(folds != f)
            check_group_exclusive(participant_ids, train, test)
            yield f, train, test


def check_group_exclusive(participant_ids, train_idx, test_idx):
    pids = np.asarray(participant_ids, dtype=object)
    overlap = set(pids[train_idx]) & set(pids[test_idx])
    if overlap:
        raise LeakageError(f"participants in both train and test: {sorted(overlap)[:5]}")


def _participants(data):
    """(participant_ids per clip, labels per clip) from a manifest, table or pair."""
    if isinstance(data, FeatureTable):
        return list(data.participant_ids), list(data.labels)
    if hasattr(data, "rows"):
        return [r.participant_id for r in data.rows], [r.label for r in data.rows]
    pids, labels = data
    return list(pids), list(labels)


def stratified_group_kfold(data, k: int = 10, seed: int = 0) -> FoldPlan:
    """Assign whole participants to ``k`` folds, balancing class counts first, then clip counts.

    Participants are shuffled by ``seed``, stably ordered by (label, clip
    count descending) and placed greedily; fold ties go to the lowest index.
    """
    pids, labels = _participants(data)
    if k < 2:
        raise ValueError("k must be >= 2")
    counts: dict = {}
    plabel: dict = {}
    for p, y in zip(pids, labels):
        counts[p] = counts.get(p, 0) + 1
        if plabel.setdefault(p, int(y)) != int(y):
            raise DataError(f"participant {p!r} has conflicting labels")
    for cls in (0, 1):
        n_cls = sum(1 for p in plabel if plabel[p] == cls)
        if n_cls < k:
            raise DataError(f"{k} folds need at least {k} participants per class; "
                            f"class {cls} has {n_cls}")
    order = sorted(plabel)
    rng = np.random.default_rng(seed)
    order = [order[i] for i in rng.permutation(len(order))]
    order.sort(key=lambda p: (plabel[p], -counts[p]))
    class_count = np.zeros((2, k), dtype=np.int64)
    size = np.zeros(k, dtype=np.int64)
    assign = {}
    for p in order:
        c = plabel[p]
        f = min(range(k), key=lambda j: (class_count[c, j], size[j], j))
        assign[p] = f
        class_count[c, f] += 1
        size[f] += counts[p]
    return FoldPlan(assign, k, seed)


# ---------------------------------------------------------------------------
# metrics


def auc(scores, labels) -> float:
    """ROC-AUC as the Mann-Whitney statistic from average ranks (ties count 1/2)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.size != y.size:
        raise ValueError("scores and labels differ in length")
    if np.isnan(s).any():
        raise DataError("NaN score")
    pos = y == 1
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedAUCError("AUC undefined: labels contain a single class")
    _, inverse, tie_counts = np.unique(s, return_inverse=True, return_counts=True)
    upper = np.cumsum(tie_counts)
    avg_rank = upper - (tie_counts - 1) / 2.0
    rank_sum = avg_rank[inverse][pos].sum()
    return float((rank_sum - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def aggregate_by_participant(scores, participants, labels=None, weights=None):
    """Mean clip score per participant.

    ``participants`` is either a per-clip sequence of ids aligned with
    ``scores`` or a Manifest, in which case ``scores`` maps clip_id -> score.
    Returns (participant ids sorted, scores, labels or None).
    """
    if hasattr(participants, "rows"):
        manifest = participants
        known = {r.clip_id: r for r in manifest.rows}
        ids, vals, labs = [], [], []
        for cid, sc in scores.items():
            if cid not in known:
                raise DataError(f"clip {cid!r} is not in the manifest")
            ids.append(known[cid].participant_id)
            vals.append(sc)
            labs.append(known[cid].label)
        participants, scores, labels = ids, vals, labs
    scores = np.asarray(scores, dtype=np.float64)
    pids = np.asarray(participants, dtype=object)
    if pids.size != scores.size:
        raise DataError("every scored clip needs a participant")
    w = np.ones_like(scores) if weights is None else np.asarray(weights, dtype=np.float64)
    groups: dict = {}
    for i, p in enumerate(pids):
        groups.setdefault(p, []).append(i)
    out_ids = sorted(groups)
    # fsum is exactly rounded, so the result ignores clip order
    out = np.array([math.fsum(scores[i] * w[i] for i in groups[p]) / math.fsum(w[i] for i in groups[p])
                    for p in out_ids])
    out_labels = None
    if labels is not None:
        lab = np.asarray(labels)
        out_labels = np.array([lab[groups[p][0]] for p in out_ids])
    return out_ids, out, out_labels


# ---------------------------------------------------------------------------
# tuning and experiments


def _score_spec(spec, table: FeatureTable, plan: FoldPlan):
    fold_aucs = []
    folds = plan.fold_of(table.participant_ids)
    for f, tr, va in plan.splits(table.participant_ids):
        pipe = fit_pipeline(spec, table.X[tr], table.labels[tr], table.kinds, folds[tr], f,
                            table.layout)
        fold_aucs.append(auc(pipe.predict_proba(table.X[va]), table.labels[va]))
    return float(np.mean(fold_aucs))


def nested_tune(table: FeatureTable, family: str, inner_k: int = 5, seed: int = 0, grid=None):
    """Pick the grid point with the best mean inner-fold cough AUC (earliest wins ties).

    Returns (spec, list of mean inner AUCs in grid order).
    """
    grid = list(grid) if grid is not None else hyperparameter_grid(family, seed)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if len(grid) == 1:
        return grid[0], []
    plan = stratified_group_kfold(table, inner_k, seed)
    scores = [_score_spec(spec, table, plan) for spec in grid]
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return grid[best], scores


@dataclass
class FoldReport:
    fold: int
    spec: dict
    cough_auc: float
    participant_auc: float
    n_test_coughs: int
    n_test_participants: int
    inner_scores: list = field(default_factory=list)
    n_imputed_train: int = 0
    n_imputed_test: int = 0


def _mean_std(values):
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


@dataclass
class RunReport:
    family: str
    folds: list
    cough_auc_mean: float
    cough_auc_std: float
    participant_auc_mean: float
    participant_auc_std: float
    fingerprint: str = ""
    layout: list = field(default_factory=list)
    experiment: str = ""
    k: int = 10
    k_inner: int = 5
    seed: int = 0

    @classmethod
    def from_folds(cls, family, folds, **kw):
        cm, cs = _mean_std([f.cough_auc for f in folds])
        pm, ps = _mean_std([f.participant_auc for f in folds])
        return cls(family, folds, cm, cs, pm, ps, **kw)

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["folds"] = [FoldReport(**f) for f in d["folds"]]
        return cls(**d)


def _run_fold(table: FeatureTable, fold_of_row, fold, family, grid, k_inner, seed):
    train = np.flatnonzero(fold_of_row != fold)
    test = np.flatnonzero(fold_of_row == fold)
    check_group_exclusive(table.participant_ids, train, test)
    train_table = table.subset(train)
    spec, inner = nested_tune(train_table, family, k_inner, derive_seed(seed, fold, 1), grid)
    spec = spec.with_seed(derive_seed(seed, fold, 2))
    pipe = fit_pipeline(spec, train_table.X, train_table.labels, table.kinds,
                        fold_of_row[train], fold, table.layout)
    probs = pipe.predict_proba(table.X[test])
    y = table.labels[test]
    _, pscores, plabels = aggregate_by_participant(probs, table.participant_ids[test], y)
    imp = np.isnan(table.X)
    return FoldReport(fold, spec.as_dict(), auc(probs, y), auc(pscores, plabels), int(test.size),
                      int(len(set(table.participant_ids[test]))), inner,
                      int(imp[train].sum()), int(imp[test].sum()))


def _run_fold_args(args):
    try:
        return _run_fold(*args)
    except CoughError as exc:
        raise type(exc)(f"fold {args[2]}: {exc}") from exc


def run_experiment(table: FeatureTable, family: str, k: int = 10, k_inner: int = 5, seed: int = 0,
                   grid=None, jobs: int = 1, fingerprint: str = "", experiment: str = "") -> RunReport:
    """Outer grouped k-fold with nested tuning; one FoldReport per outer fold.

    Fold results depend only on (table, family, grid, seed), never on ``jobs``.
    """
    if grid is None:
        grid = hyperparameter_grid(family, seed)
    plan = stratified_group_kfold(table, k, seed)
    fold_of_row = plan.fold_of(table.participant_ids)
    tasks = [(table, fold_of_row, f, family, grid, k_inner, seed) for f in range(k)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            folds = list(ex.map(_run_fold_args, tasks))
    else:
        folds = [_run_fold_args(t) for t in tasks]
    return RunReport.from_folds(family, folds, fingerprint=fingerprint,
                                layout=table.layout.as_list(), experiment=experiment, k=k,
                                k_inner=k_inner, seed=seed)


# ---------------------------------------------------------------------------
# report output

FOLD_CSV_COLUMNS = ("family", "fold", "cough_auc", "participant_auc", "n_test_coughs",
                    "n_test_participants", "hyperparameters", "fingerprint")


def folds_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FOLD_CSV_COLUMNS)
    for r in reports:
        for f in r.folds:
            w.writerow([r.family, f.fold, repr(f.cough_auc), repr(f.participant_auc),
                        f.n_test_coughs, f.n_test_participants,
                        json.dumps(f.spec["hyperparameters"], sort_keys=True), r.fingerprint])
    return buf.getvalue()


def summary_table(reports) -> str:
    """Text table of per-cough and per-participant AUC (mean, std, median) per family."""
    head = f"{'model':<6} {'cough AUC':>17} {'median':>7}   {'participant AUC':>17} {'median':>7}"
    lines = [head, "-" * len(head)]
    for r in reports:
        cm = float(np.median([f.cough_auc for f in r.folds]))
        pm = float(np.median([f.participant_auc for f in r.folds]))
        lines.append(f"{r.family:<6} {r.cough_auc_mean:>8.3f} ± {r.cough_auc_std:<6.3f} {cm:>7.3f}   "
                     f"{r.participant_auc_mean:>8.3f} ± {r.participant_auc_std:<6.3f} {pm:>7.3f}")
    return "\n".join(lines) + "\n"


def permute_participant_labels(table: FeatureTable, seed: int = 0) -> FeatureTable:
    """Shuffle labels across participants, keeping each participant's clips consistent."""
    _, _, plabels = aggregate_by_participant(np.zeros(len(table)), table.participant_ids,
                                             table.labels)
    pids = sorted(set(table.participant_ids))
    perm = np.random.default_rng(seed).permutation(len(pids))
    new = {p: int(plabels[perm[i]]) for i, p in enumerate(pids)}
    return table.with_labels([new[p] for p in table.participant_ids])
