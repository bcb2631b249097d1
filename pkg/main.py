"""
Malicious Ad URL Detector - Main Entry Point

Run:
  python main.py synth --n-per-class 500        - Synthetic url,label corpus
  python main.py extract --input urls.csv       - 89-slot feature extraction
  python main.py train --input features.csv     - Train the ensembles (holdout report)
  python main.py eval-matched --input f.csv     - k-fold evaluation on one dataset
  python main.py eval-mismatched --input a b    - Train on one dataset, test on the others
  python main.py grid-search --input f.csv      - n_estimators grid search
  python main.py cluster --input f.csv          - K-Means elbow scan + 2-D projection
  python main.py attack --input f.csv --models run/   - ZOO attack on trained models
  python main.py profile --input urls.csv       - Dataset statistics and histograms
  python main.py merge --benign b.csv --malicious m.csv
  python main.py predict --input urls.csv --models run/
  python main.py init-db                        - Initialize database

Common flags: --config <json> --seed <int> --providers <live|record|replay>
--fixtures <dir> --out <dir>
"""

import argparse
import sys
from pathlib import Path

# Ensure project root is on path
sys.path.insert(0, str(Path(__file__).resolve().parent))

# Minimal imports for all commands
from core.config import MODEL_KINDS, PROVIDER_MODES, settings
from core.errors import DetectorError

EXIT_DETECTOR_ERROR = 2
EXIT_UNEXPECTED = 1


def _config(args):
    from core.config import load_run_config

    cfg = load_run_config(args.config, args.seed, args.providers, args.out, args.fixtures)
    kinds = getattr(args, "kinds", None)
    if kinds:
        from dataclasses import replace

        cfg = replace(cfg, models=replace(cfg.models, kinds=list(kinds)))
    return cfg


def _run(command: str, args, body) -> int:
    from services.run_service import open_run

    cfg = _config(args)
    with open_run(command, cfg) as ctx:
        written = body(ctx)
    for path in written:
        print(path)
    return 0


def cmd_synth(args) -> int:
    from services.experiment_service import run_synth

    return _run("synth", args, lambda ctx: run_synth(ctx, args.n_per_class, args.datasets))


def cmd_extract(args) -> int:
    from services.experiment_service import run_extract

    return _run("extract", args, lambda ctx: run_extract(ctx, args.input))


def cmd_train(args) -> int:
    from services.experiment_service import run_train

    return _run("train", args, lambda ctx: run_train(ctx, args.input))


def cmd_eval_matched(args) -> int:
    from services.experiment_service import run_eval_matched

    return _run("eval-matched", args, lambda ctx: run_eval_matched(ctx, args.input))


def cmd_eval_mismatched(args) -> int:
    from services.experiment_service import run_eval_mismatched

    return _run("eval-mismatched", args, lambda ctx: run_eval_mismatched(ctx, args.input))


def cmd_grid_search(args) -> int:
    from services.experiment_service import run_grid_search

    return _run("grid-search", args, lambda ctx: run_grid_search(ctx, args.input, args.folds))


def cmd_cluster(args) -> int:
    from services.experiment_service import run_cluster

    return _run("cluster", args, lambda ctx: run_cluster(ctx, args.input))


def cmd_attack(args) -> int:
    from services.experiment_service import run_attack

    return _run("attack", args, lambda ctx: run_attack(ctx, args.models, args.input, args.solver))


def cmd_profile(args) -> int:
    from services.experiment_service import run_profile

    return _run("profile", args, lambda ctx: run_profile(ctx, args.input, args.bucket_width))


def cmd_merge(args) -> int:
    from services.experiment_service import run_merge

    return _run("merge", args, lambda ctx: run_merge(ctx, args.benign, args.malicious, args.name))


def cmd_predict(args) -> int:
    from services.experiment_service import run_predict

    return _run("predict", args, lambda ctx: run_predict(ctx, args.models, args.kind, args.input))


def cmd_init_db(args) -> int:
    """Initialize database schema."""
    from database.connection import init_db

    init_db()
    print("Database initialized.")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "eval-matched": cmd_eval_matched,
    "eval-mismatched": cmd_eval_mismatched,
    "grid-search": cmd_grid_search,
    "cluster": cmd_cluster,
    "attack": cmd_attack,
    "profile": cmd_profile,
    "merge": cmd_merge,
    "predict": cmd_predict,
    "init-db": cmd_init_db,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config JSON file")
    common.add_argument("--seed", type=int, help="Root seed (overrides config)")
    common.add_argument("--providers", choices=PROVIDER_MODES, help="Web provider mode")
    common.add_argument("--fixtures", help="Fixture store directory")
    common.add_argument("--out", help="Output directory")

    parser = argparse.ArgumentParser(description=settings.PROJECT_NAME)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="Generate a synthetic url,label corpus")
    s.add_argument("--n-per-class", type=int, default=500)
    s.add_argument("--datasets", type=int, default=1, help="Number of independent corpora")

    e = sub.add_parser("extract", parents=[common], help="Extract the 89 features")
    e.add_argument("--input", nargs="+", help="url,label CSV file(s)")

    for name, help_text, many in (
        ("train", "Train ensembles and evaluate on the held-out split", False),
        ("eval-matched", "k-fold evaluation per dataset", True),
        ("eval-mismatched", "Cross-dataset evaluation", True),
        ("grid-search", "n_estimators grid search", False),
        ("cluster", "K-Means elbow scan and 2-D projection", False),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--input", nargs="+" if many else None, help="Featurized CSV file(s)")
        p.add_argument("--kinds", nargs="+", choices=MODEL_KINDS, help="Model kinds (overrides config)")
        if name == "grid-search":
            p.add_argument("--folds", type=int, default=5, choices=(5, 10))

    a = sub.add_parser("attack", parents=[common], help="ZOO attack on trained models")
    a.add_argument("--input", help="Featurized CSV the models were trained on")
    a.add_argument("--models", required=True, help="Directory written by train")
    a.add_argument("--solver", choices=("adam", "newton"), help="Coordinate solver (overrides config)")
    a.add_argument("--kinds", nargs="+", choices=MODEL_KINDS, help="Model kinds (overrides config)")

    pr = sub.add_parser("profile", parents=[common], help="Dataset statistics and length histograms")
    pr.add_argument("--input", help="url,label CSV")
    pr.add_argument("--bucket-width", type=int, default=10)

    m = sub.add_parser("merge", parents=[common], help="Balanced merge of a benign and a malicious source")
    m.add_argument("--benign", required=True)
    m.add_argument("--malicious", required=True)
    m.add_argument("--name", default="merged")

    pd_ = sub.add_parser("predict", parents=[common], help="Score unlabeled URLs")
    pd_.add_argument("--input", help="CSV with a url column")
    pd_.add_argument("--models", required=True, help="Directory written by train")
    pd_.add_argument("--kind", default="regularized_boost", choices=MODEL_KINDS)

    sub.add_parser("init-db", help="Initialize database")
    return parser


def _as_list(value):
    if value is None or isinstance(value, list):
        return value
    return [value]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "input"):
        args.input = _as_list(args.input)

    from core.logger import emit_error_line, get_logger, log_error, setup_logging

    setup_logging()
    logger = get_logger("main")
    try:
        return COMMANDS[args.command](args)
    except DetectorError as e:
        log_error(logger, f"{args.command} failed", exc=e)
        emit_error_line(e.code, e.message)
        return EXIT_DETECTOR_ERROR
    except Exception as e:
        log_error(logger, f"Unexpected failure in {args.command}", exc=e)
        emit_error_line("Unexpected", str(e))
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
