"""Command-line entry point: synth, extract, crossvalidate, train-final, predict, report."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .audio_io import load_manifest
from .config import EXPERIMENTS, PipelineConfig, apply_overrides, load_config
from .errors import ConfigError, CoughError, DataError, LayoutError, SchemaError
from .evaluation import (RunReport, aggregate_by_participant, derive_seed, folds_csv,
                         nested_tune, run_experiment, summary_table)
from .features import build_table, extract_manifest
from .lld import encode_log_mel
from .models import fit_pipeline, hyperparameter_grid, load_pipeline, save_pipeline
from .summarize import FeatureVector, write_feature_csv
from .synth import generate_corpus, spec_from_dict

log = logging.getLogger("tbcough")


def _manifest(cfg: PipelineConfig):
    if cfg.manifest is None:
        raise ConfigError("no manifest path configured (paths.manifest)")
    m = load_manifest(cfg.manifest, cfg.audio_root)
    digest = hashlib.sha256(Path(cfg.manifest).read_bytes()).hexdigest()
    return m, digest


def _extract(cfg: PipelineConfig):
    m, digest = _manifest(cfg)
    cache = cfg.out_dir / "cache" if cfg.cache else None
    res = extract_manifest(m, cfg.features, cache, cfg.jobs)
    return m, digest, res


def _write_failures(cfg, failures):
    path = cfg.out_dir / "extract_errors.csv"
    if not failures:
        if path.exists():
            path.unlink()
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "error"])
        w.writerows(failures)


def cmd_extract(cfg: PipelineConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    m, digest, res = _extract(cfg)
    fp = cfg.fingerprint(digest)
    rows = [r for r in m.rows if r.clip_id in res.features]
    if rows:
        vectors = [FeatureVector(res.features[r.clip_id].summary, res.features[r.clip_id].names,
                                 r.clip_id, r.participant_id, r.label) for r in rows]
        write_feature_csv(cfg.out_dir / "features.csv", vectors)
        if cfg.features.metadata or cfg.features.flat_spectrogram or cfg.features.flat_mfcc:
            table = build_table(m, res, cfg.features)
            with open(cfg.out_dir / "fused_features.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["clip_id", "participant_id", "label", *table.names])
                for i, cid in enumerate(table.clip_ids):
                    w.writerow([cid, table.participant_ids[i], int(table.labels[i]),
                                *("" if np.isnan(x) else repr(float(x)) for x in table.X[i])])
        if cfg.features.flat_spectrogram:
            d = cfg.out_dir / "logmel"
            d.mkdir(exist_ok=True)
            for r in rows:
                (d / f"{r.clip_id}.lmel").write_bytes(encode_log_mel(res.features[r.clip_id].log_mel))
    _write_failures(cfg, res.failures)
    meta = dict(fingerprint=fp, n_clips=len(rows), n_failed=len(res.failures),
                features=cfg.features.as_dict())
    (cfg.out_dir / "features.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    print(f"extracted {len(rows)} clips ({res.n_cached} cached, {res.n_computed} computed, "
          f"{len(res.failures)} failed)")
    return DataError.exit_code if res.failures else 0


def _table(cfg: PipelineConfig):
    m, digest, res = _extract(cfg)
    _write_failures(cfg, res.failures)
    if res.failures:
        raise DataError(f"{len(res.failures)} clip(s) failed extraction; "
                        f"see {cfg.out_dir / 'extract_errors.csv'}")
    return m, digest, build_table(m, res, cfg.features)


def _grid(cfg: PipelineConfig, family: str):
    return hyperparameter_grid(family, cfg.seed, cfg.grids.get(family))


def cmd_crossvalidate(cfg: PipelineConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _, digest, table = _table(cfg)
    fp = cfg.fingerprint(digest)
    reports = []
    for fam in cfg.families:
        r = run_experiment(table, fam, cfg.k_outer, cfg.k_inner, cfg.seed, _grid(cfg, fam),
                           cfg.jobs, fp, cfg.experiment)
        (cfg.out_dir / f"report_{fam}.json").write_text(r.to_json(), encoding="utf-8")
        reports.append(r)
    (cfg.out_dir / "folds.csv").write_text(folds_csv(reports), encoding="utf-8")
    text = summary_table(reports)
    (cfg.out_dir / "summary.txt").write_text(text + f"fingerprint {fp}\n", encoding="utf-8")
    print(text, end="")
    return 0


def cmd_train_final(cfg: PipelineConfig, family: str | None = None) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    m, digest, table = _table(cfg)
    if len(set(table.participant_ids)) == 0:
        raise SchemaError("no participants to train on")
    fam = family or cfg.families[0]
    spec, _ = nested_tune(table, fam, cfg.k_inner, derive_seed(cfg.seed, 0, 1), _grid(cfg, fam))
    spec = spec.with_seed(derive_seed(cfg.seed, 0, 2))
    pipe = fit_pipeline(spec, table.X, table.labels, table.kinds, layout=table.layout)
    pipe.fingerprint = cfg.fingerprint(digest)
    path = cfg.out_dir / f"model_{fam}.json"
    save_pipeline(pipe, path)
    print(f"wrote {path} ({spec.hyperparameters})")
    return 0


def cmd_predict(cfg: PipelineConfig, model_path) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    pipe = load_pipeline(model_path)
    _, _, table = _table(cfg)
    if pipe.layout is not None and pipe.layout != table.layout:
        raise LayoutError(f"model expects layout {pipe.layout.as_list()} "
                          f"({pipe.layout.width} dims) but features have "
                          f"{table.layout.as_list()} ({table.layout.width} dims)")
    probs = pipe.predict_proba(table.X)
    pids, pscores, _ = aggregate_by_participant(probs, table.participant_ids)
    per_p = dict(zip(pids, pscores))
    path = cfg.out_dir / "scores.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "participant_id", "clip_probability", "participant_probability",
                    "fingerprint"])
        for cid, p, pr in zip(table.clip_ids, table.participant_ids, probs):
            w.writerow([cid, p, repr(float(pr)), repr(float(per_p[p])), pipe.fingerprint])
    print(f"wrote {path}")
    return 0


def cmd_synth(cfg: PipelineConfig) -> int:
    settings = dict(cfg.synth)
    settings["seed"] = cfg.seed
    path = generate_corpus(spec_from_dict(settings), cfg.out_dir)
    print(f"wrote {path}")
    return 0


def cmd_report(cfg: PipelineConfig) -> int:
    paths = sorted(cfg.out_dir.glob("report_*.json"))
    if not paths:
        raise DataError(f"no report_*.json files in {cfg.out_dir}")
    reports = [RunReport.from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in paths]
    print(summary_table(reports), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML pipeline config")
    common.add_argument("--seed", type=int)
    common.add_argument("--families", help="comma-separated subset of LR,MLP,RF,AB")
    common.add_argument("--experiment", choices=EXPERIMENTS)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--jobs", type=int)
    common.add_argument("--manifest", type=Path, help="manifest CSV (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tbcough", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common], help="extract per-clip features")
    sub.add_parser("crossvalidate", parents=[common], help="grouped CV with nested tuning")
    tf = sub.add_parser("train-final", parents=[common], help="tune and fit on all data")
    tf.add_argument("--family")
    pr = sub.add_parser("predict", parents=[common], help="score a manifest with a saved model")
    pr.add_argument("--model", type=Path, required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    sub.add_parser("report", parents=[common], help="print the AUC summary of saved reports")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        cfg = apply_overrides(cfg, args.seed, args.families, args.experiment, args.out,
                              args.jobs, args.manifest)
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "crossvalidate":
            return cmd_crossvalidate(cfg)
        if args.command == "train-final":
            return cmd_train_final(cfg, args.family)
        if args.command == "predict":
            return cmd_predict(cfg, args.model)
        if args.command == "synth":
            return cmd_synth(cfg)
        return cmd_report(cfg)
    except CoughError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
