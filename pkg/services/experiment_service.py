"""
Experiment pipelines behind the CLI commands.

Every function takes a RunContext (output directory, resolved config, seeds)
plus its inputs, writes its CSV / JSON outputs through ``ctx.output`` and
returns the paths it wrote.
"""

import json
from dataclasses import replace
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.clusterer import elbow_scan, project_2d, write_curve, write_projection
from core.dataset import (
    LabeledDataset,
    Preprocessing,
    fit_transform,
    ingest_csv,
    load_features_csv,
    merge_balanced,
    preprocess,
    profile,
    read_url_list,
    split,
    synthesize_corpus,
    write_features_csv,
    write_urls_csv,
)
from core.ensembles import grid_search, load_model, predict, predict_proba, save_model, train_model
from core.errors import ConfigInvalid, InputMissing, NoFeatures
from core.evalx import ConfusionMatrix, EvalReport, eval_matched, eval_mismatched, write_reports
from core.logger import get_logger
from core.schema import FEATURE_SCHEMA
from core.zoo import AttackConfig, attack_accuracy_rate, outcome_lines
from integrations.providers import ProviderSuite, build_provider_suite
from services.extraction_service import extract_dataset, extract_urls
from services.run_service import RunContext, write_json

logger = get_logger("experiment_service")

PREPROCESSING_FILE = "preprocessing.json"
ATTACK_COLUMNS = [
    "Dataset", "Model", "Solver", "Confidence", "Rows", "Attacked",
    "CleanAccuracy", "AttackAccuracyRate", "AttackSuccessRate",
]


def _inputs(ctx: RunContext, given: Optional[Sequence[str]], at_least: int = 1) -> List[str]:
    paths = list(given or ctx.config.paths.inputs)
    if len(paths) < at_least:
        raise InputMissing(f"{ctx.command} needs at least {at_least} input file(s)")
    for p in paths:
        if not Path(p).exists():
            raise InputMissing(f"input file not found: {p}")
    return paths


def _today(ctx: RunContext) -> date:
    return date.fromisoformat(ctx.config.today)


def open_providers(ctx: RunContext) -> ProviderSuite:
    cfg = ctx.config.providers
    return build_provider_suite(cfg.mode, cfg.fixtures_dir)


def _model_file(kind: str) -> str:
    return f"model_{kind}.json"


def _load_featurized(path: str) -> LabeledDataset:
    d = load_features_csv(path)
    if len(d) == 0:
        raise NoFeatures(f"{path} has no featurized rows")
    return d


# --- synth ---


def run_synth(ctx: RunContext, n_per_class: int, datasets: int = 1) -> List[Path]:
    """One synthetic url,label corpus, or ``datasets`` independent ones."""
    if datasets < 1:
        raise ConfigInvalid("--datasets must be >= 1")
    written = []
    root = ctx.seed("synth")
    with ctx.stage("synth"):
        for i in range(datasets):
            if datasets == 1:
                seed, name = root, "urls"
            else:
                seed, name = int(np.random.default_rng([root, i]).integers(2 ** 63 - 1)), f"urls_{i + 1}"
            d = synthesize_corpus(n_per_class, seed, name=name)
            path = ctx.output(f"{name}.csv")
            write_urls_csv(d, str(path))
            written.append(path)
    return written


# --- extract ---


def run_extract(
    ctx: RunContext,
    inputs: Optional[Sequence[str]] = None,
    providers: Optional[ProviderSuite] = None,
) -> List[Path]:
    """Ingest, preprocess and featurize url,label CSVs."""
    paths = _inputs(ctx, inputs)
    providers = providers or open_providers(ctx)
    providers.assert_offline()
    written = []
    for p in paths:
        with ctx.stage(f"ingest:{Path(p).stem}"):
            d = preprocess(ingest_csv(p), ctx.seed("preprocess"))
        with ctx.stage(f"extract:{Path(p).stem}"):
            featurized = extract_dataset(d, providers, _today(ctx))
        name = "features.csv" if len(paths) == 1 else f"features_{Path(p).stem}.csv"
        out = ctx.output(name)
        write_features_csv(featurized, str(out))
        written.append(out)
    providers.save()
    return written


# --- train ---


def run_train(ctx: RunContext, inputs: Optional[Sequence[str]] = None) -> List[Path]:
    """
    Train every configured kind on the training split, store models and the
    preprocessing state, and evaluate on the held-out split.
    """
    d = _load_featurized(_inputs(ctx, inputs)[0])
    mcfg = ctx.config.models
    train, test = split(d, ctx.config.train_fraction, ctx.seed("split"))
    prep, (X_train, X_test) = fit_transform(train, test)
    write_json(ctx.output(PREPROCESSING_FILE), prep.to_dict())

    reports = []
    for kind in mcfg.kinds:
        with ctx.stage(f"train:{kind}"):
            model = train_model(kind, X_train, train.labels(), mcfg, ctx.seed("model"),
                                schema_hash=FEATURE_SCHEMA.schema_hash())
        save_model(model, str(ctx.output(_model_file(kind))))
        pred = predict(model, X_test)
        cm = ConfusionMatrix.from_predictions(test.labels(), pred)
        reports.append(EvalReport.build(kind, d.name, d.name, None, ctx.config.seed, cm, pred))

    csv_path, json_path = ctx.output("holdout_report.csv"), ctx.output("holdout_report.json")
    write_reports(reports, str(csv_path), str(json_path))
    return [csv_path, json_path]


def load_trained(model_dir: str, kind: str):
    """Model plus the preprocessing state stored next to it."""
    root = Path(model_dir)
    model_path, prep_path = root / _model_file(kind), root / PREPROCESSING_FILE
    for p in (model_path, prep_path):
        if not p.exists():
            raise InputMissing(f"trained artifact not found: {p}")
    prep = Preprocessing.from_dict(json.loads(prep_path.read_text(encoding="utf-8")))
    return load_model(str(model_path)), prep


# --- evaluation ---


def run_eval_matched(ctx: RunContext, inputs: Optional[Sequence[str]] = None) -> List[Path]:
    reports = []
    for p in _inputs(ctx, inputs):
        d = _load_featurized(p)
        for kind in ctx.config.models.kinds:
            with ctx.stage(f"matched:{d.name}:{kind}"):
                reports.append(eval_matched(d, kind, ctx.config.folds, ctx.config.seed, ctx.config.models))
    csv_path, json_path = ctx.output("matched_report.csv"), ctx.output("matched_report.json")
    write_reports(reports, str(csv_path), str(json_path))
    return [csv_path, json_path]


def run_eval_mismatched(ctx: RunContext, inputs: Optional[Sequence[str]] = None) -> List[Path]:
    datasets = [_load_featurized(p) for p in _inputs(ctx, inputs, at_least=2)]
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        datasets = [replace(d, name=f"{d.name}_{i + 1}") for i, d in enumerate(datasets)]
    reports = []
    for kind in ctx.config.models.kinds:
        with ctx.stage(f"mismatched:{kind}"):
            reports.extend(eval_mismatched(datasets, kind, ctx.config.seed, ctx.config.models))
    csv_path, json_path = ctx.output("mismatched_report.csv"), ctx.output("mismatched_report.json")
    write_reports(reports, str(csv_path), str(json_path))
    return [csv_path, json_path]


def run_grid_search(ctx: RunContext, inputs: Optional[Sequence[str]] = None, folds: int = 5) -> List[Path]:
    """Cross-validated accuracy per n_estimators on the training split."""
    d = _load_featurized(_inputs(ctx, inputs)[0])
    train, _ = split(d, ctx.config.train_fraction, ctx.seed("split"))
    _, (X_train,) = fit_transform(train)
    rows = []
    for kind in ctx.config.models.kinds:
        with ctx.stage(f"grid:{kind}"):
            res = grid_search(X_train, train.labels(), kind, ctx.config.models.grid, folds,
                              ctx.seed("model"), ctx.config.models, FEATURE_SCHEMA.schema_hash())
        for entry in res.table:
            rows.append({
                "Dataset": d.name,
                "Model": kind,
                "NEstimators": entry["n_estimators"],
                "Accuracy": entry["accuracy"],
                "Selected": int(entry["n_estimators"] == res.best_n_estimators),
            })
    out = ctx.output("grid_search.csv")
    pd.DataFrame(rows).to_csv(out, index=False, lineterminator="\n", float_format="%.6f")
    return [out]


# --- cluster ---


def run_cluster(ctx: RunContext, inputs: Optional[Sequence[str]] = None) -> List[Path]:
    """Elbow scan over k = 1..9, then the 2-D projection coloured by the chosen clustering."""
    d = _load_featurized(_inputs(ctx, inputs)[0])
    _, (X,) = fit_transform(d)
    ccfg = ctx.config.cluster
    with ctx.stage("elbow"):
        curve, chosen, results = elbow_scan(X, seed=ctx.seed("cluster"), restarts=ccfg.restarts,
                                            max_iter=ccfg.max_iter)
    best = next(r for r in results if r.k == chosen)
    with ctx.stage("projection"):
        coords = project_2d(X)

    curve_path, proj_path, summary_path = (
        ctx.output("elbow.csv"), ctx.output("projection.csv"), ctx.output("cluster_summary.json")
    )
    write_curve(str(curve_path), [r.k for r in results], curve)
    labels = d.labels()
    write_projection(str(proj_path), coords, best.assignments, labels)
    sizes = []
    for c in range(chosen):
        members = best.assignments == c
        sizes.append({
            "cluster": c,
            "size": int(members.sum()),
            "benign": int((labels[members] == 0).sum()),
            "malicious": int((labels[members] == 1).sum()),
        })
    write_json(summary_path, {"dataset": d.name, "chosen_k": chosen, "distortion": curve, "clusters": sizes})
    return [curve_path, proj_path, summary_path]


# --- attack ---


def run_attack(
    ctx: RunContext,
    model_dir: str,
    inputs: Optional[Sequence[str]] = None,
    solver: Optional[str] = None,
) -> List[Path]:
    """
    Untargeted attack on the held-out split of a featurized dataset, one row
    per model kind and confidence.
    """
    d = _load_featurized(_inputs(ctx, inputs)[0])
    acfg = ctx.config.attack
    _, test = split(d, ctx.config.train_fraction, ctx.seed("split"))
    test = test.subset(range(min(len(test), acfg.max_samples)))
    solver = solver or acfg.solver

    rows, lines = [], []
    for kind in ctx.config.models.kinds:
        model, prep = load_trained(model_dir, kind)
        X = prep.transform(test.records())
        for rho in acfg.confidences:
            cfg = AttackConfig(
                rho=float(rho),
                probe_k=acfg.probe_k,
                step_h=acfg.step_h,
                budget=acfg.budget,
                box_delta=acfg.box_delta,
                seed=ctx.seed("attack"),
                solver=solver,
            )
            with ctx.stage(f"attack:{kind}:{rho:g}"):
                summary = attack_accuracy_rate(model, X, test.labels(), cfg)
            rows.append({
                "Dataset": d.name,
                "Model": kind,
                "Solver": solver,
                "Confidence": summary.rho,
                "Rows": summary.n_rows,
                "Attacked": summary.attacked,
                "CleanAccuracy": summary.clean_accuracy,
                "AttackAccuracyRate": summary.attack_accuracy_rate,
                "AttackSuccessRate": summary.success_rate,
            })
            lines.append(outcome_lines(summary.outcomes, model=kind, confidence=summary.rho, solver=solver))

    report, samples = ctx.output("attack_report.csv"), ctx.output("attack_samples.jsonl")
    pd.DataFrame(rows, columns=ATTACK_COLUMNS).to_csv(report, index=False, lineterminator="\n", float_format="%.6f")
    samples.write_text("".join(lines), encoding="utf-8")
    return [report, samples]


# --- profile / merge ---


def run_profile(ctx: RunContext, inputs: Optional[Sequence[str]] = None, bucket_width: int = 10) -> List[Path]:
    """Class statistics plus per-class URL length histograms."""
    d = ingest_csv(_inputs(ctx, inputs)[0])
    stats = profile(d, bucket_width)
    out = ctx.output("profile.json")
    write_json(out, stats)
    written = [out]
    for name in ("benign", "malicious"):
        hist = ctx.output(f"histogram_{name}.csv")
        pd.DataFrame(stats["classes"][name].get("histogram", []), columns=["lo", "hi", "count"]).to_csv(
            hist, index=False, lineterminator="\n"
        )
        written.append(hist)
    return written


def run_merge(ctx: RunContext, benign: str, malicious: str, name: str = "merged") -> List[Path]:
    """Balanced dataset from a benign source and a malicious source."""
    b, m = ingest_csv(_inputs(ctx, [benign])[0]), ingest_csv(_inputs(ctx, [malicious])[0])
    merged = merge_balanced(preprocess(b, ctx.seed("preprocess")), preprocess(m, ctx.seed("preprocess")),
                            ctx.seed("merge"), name=name)
    out = ctx.output(f"{name}.csv")
    write_urls_csv(merged, str(out))
    logger.info("Merged %s + %s into %d rows", b.name, m.name, len(merged))
    return [out]


# --- predict ---


def run_predict(
    ctx: RunContext,
    model_dir: str,
    kind: str,
    inputs: Optional[Sequence[str]] = None,
    providers: Optional[ProviderSuite] = None,
) -> List[Path]:
    """Score unlabeled URLs with a trained model: url,prediction,p_malicious."""
    urls = read_url_list(_inputs(ctx, inputs)[0])
    model, prep = load_trained(model_dir, kind)
    providers = providers or open_providers(ctx)
    providers.assert_offline()
    with ctx.stage("extract"):
        records = extract_urls(urls, providers, _today(ctx))
    providers.save()
    kept = [(u, r) for u, r in zip(urls, records) if r is not None]
    rows: List[Dict] = []
    if kept:
        X = prep.transform([r for _, r in kept])
        proba = predict_proba(model, X)
        labels = predict(model, X)
        for (u, _), label, p in zip(kept, labels, proba):
            rows.append({"url": u, "prediction": int(label), "p_malicious": float(p[1])})
    out = ctx.output("predictions.csv")
    pd.DataFrame(rows, columns=["url", "prediction", "p_malicious"]).to_csv(
        out, index=False, lineterminator="\n", float_format="%.6f"
    )
    return [out]
