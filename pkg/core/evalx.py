"""
Detection metrics and the matched / mismatched evaluation protocols.

Positive class is malicious (label 1). Metrics whose denominator is zero
are reported as None rather than 0.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.config import ModelConfig, derive_seed
from core.dataset import LabeledDataset, fit_transform, kfold
from core.ensembles import predict, train_model
from core.errors import ConfigInvalid, EmptyMatrix, TooFewRows
from core.logger import get_logger
from core.schema import FEATURE_SCHEMA

logger = get_logger("evalx")

REPORT_COLUMNS = ["Dataset", "TestedOn", "Model", "Folds", "Accuracy", "Precision", "FPR", "FNR"]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    @classmethod
    def from_predictions(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> "ConfusionMatrix":
        t = np.asarray(y_true, dtype=int)
        p = np.asarray(y_pred, dtype=int)
        return cls(
            tp=int(((t == 1) & (p == 1)).sum()),
            tn=int(((t == 0) & (p == 0)).sum()),
            fp=int(((t == 0) & (p == 1)).sum()),
            fn=int(((t == 1) & (p == 0)).sum()),
        )


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: Optional[float]
    fpr: Optional[float]
    fnr: Optional[float]


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy and precision as percentages; FPR and FNR as fractions."""
    if cm.total <= 0:
        raise EmptyMatrix("confusion matrix has no rows")

    def ratio(num: int, den: int) -> Optional[float]:
        return num / den if den else None

    precision = ratio(cm.tp, cm.tp + cm.fp)
    return Metrics(
        accuracy=100.0 * (cm.tp + cm.tn) / cm.total,
        precision=None if precision is None else 100.0 * precision,
        fpr=ratio(cm.fp, cm.fp + cm.tn),
        fnr=ratio(cm.fn, cm.tp + cm.fn),
    )


@dataclass
class EvalReport:
    model_kind: str
    trained_on: str
    tested_on: str
    folds: Optional[int]
    seed: int
    confusion: ConfusionMatrix
    accuracy: float
    precision: Optional[float]
    fpr: Optional[float]
    fnr: Optional[float]
    predictions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int), compare=False, repr=False)
    # matched (k-fold), holdout (train split -> test split) or cross (dataset i -> dataset j)
    protocol: str = "holdout"

    @classmethod
    def build(cls, model_kind, trained_on, tested_on, folds, seed, cm, predictions, protocol=None) -> "EvalReport":
        m = metrics(cm)
        return cls(
            model_kind, trained_on, tested_on, folds, seed, cm,
            m.accuracy, m.precision, m.fpr, m.fnr, np.asarray(predictions, dtype=int),
            protocol or ("matched" if folds is not None else "holdout"),
        )

    def to_row(self) -> Dict[str, Any]:
        return {
            "Dataset": self.trained_on,
            "TestedOn": self.tested_on,
            "Model": self.model_kind,
            "Folds": self.folds if self.protocol == "matched" else self.protocol,
            "Accuracy": self.accuracy,
            "Precision": self.precision,
            "FPR": self.fpr,
            "FNR": self.fnr,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            **self.to_row(),
            "protocol": self.protocol,
            "seed": self.seed,
            "confusion": asdict(self.confusion),
            "schema_hash": FEATURE_SCHEMA.schema_hash(),
        }


def eval_matched(
    d: LabeledDataset,
    kind: str,
    folds: int = 10,
    seed: int = 0,
    cfg: Optional[ModelConfig] = None,
) -> EvalReport:
    """
    k-fold cross-validation on one dataset; confusion matrices are pooled.

    Each fold fits its own vocabulary and scaler on its training part.
    """
    if folds not in (5, 10):
        raise ConfigInvalid("matched evaluation uses 5 or 10 folds")
    y = d.labels()
    predictions = np.full(len(d), -1, dtype=int)
    pooled = ConfusionMatrix()
    for f, test_idx in enumerate(kfold(d, folds, derive_seed(seed, "kfold"))):
        train_mask = np.ones(len(d), dtype=bool)
        train_mask[test_idx] = False
        train = d.subset(np.flatnonzero(train_mask))
        test = d.subset(test_idx)
        _, (X_train, X_test) = fit_transform(train, test)
        model = train_model(kind, X_train, train.labels(), cfg, derive_seed(seed, "model"),
                            schema_hash=FEATURE_SCHEMA.schema_hash())
        fold_pred = predict(model, X_test)
        predictions[test_idx] = fold_pred
        pooled = pooled + ConfusionMatrix.from_predictions(y[test_idx], fold_pred)
        logger.debug("%s fold %d/%d on %s done", kind, f + 1, folds, d.name)

    report = EvalReport.build(kind, d.name, d.name, folds, seed, pooled, predictions)
    logger.info("Matched %s on %s (%d folds): accuracy %.2f%%", kind, d.name, folds, report.accuracy)
    return report


def eval_holdout(
    train: LabeledDataset,
    test: LabeledDataset,
    kind: str,
    seed: int = 0,
    cfg: Optional[ModelConfig] = None,
    folds: Optional[int] = None,
) -> EvalReport:
    """Train on all of train, test on all of test."""
    if len(test) == 0:
        raise TooFewRows(f"{test.name} has no rows to test on")
    _, (X_train, X_test) = fit_transform(train, test)
    model = train_model(kind, X_train, train.labels(), cfg, derive_seed(seed, "model"),
                        schema_hash=FEATURE_SCHEMA.schema_hash())
    pred = predict(model, X_test)
    cm = ConfusionMatrix.from_predictions(test.labels(), pred)
    return EvalReport.build(kind, train.name, test.name, folds, seed, cm, pred)


def eval_mismatched(
    datasets: Sequence[LabeledDataset],
    kind: str,
    seed: int = 0,
    cfg: Optional[ModelConfig] = None,
) -> List[EvalReport]:
    """Every ordered pair (i, j != i): train on dataset i, test on dataset j."""
    if len(datasets) < 2:
        raise TooFewRows("mismatched evaluation needs at least 2 datasets")
    reports = []
    for i, train in enumerate(datasets):
        others = [d for j, d in enumerate(datasets) if j != i]
        _, matrices = fit_transform(train, *others)
        model = train_model(kind, matrices[0], train.labels(), cfg, derive_seed(seed, "model"),
                            schema_hash=FEATURE_SCHEMA.schema_hash())
        for test, X_test in zip(others, matrices[1:]):
            pred = predict(model, X_test)
            cm = ConfusionMatrix.from_predictions(test.labels(), pred)
            reports.append(EvalReport.build(kind, train.name, test.name, None, seed, cm, pred, "cross"))
        logger.info("Mismatched %s: trained on %s, tested on %d datasets", kind, train.name, len(others))
    return reports


def reports_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports], columns=REPORT_COLUMNS)


def write_reports(reports: Sequence[EvalReport], csv_path: str, json_path: Optional[str] = None) -> None:
    """CSV with the table columns; optional JSON with confusion matrices."""
    p = Path(csv_path)
    p.parent.mkdir(parents=True, exist_ok=True)
    reports_frame(reports).to_csv(p, index=False, lineterminator="\n", float_format="%.6f")
    if json_path:
        Path(json_path).write_text(
            json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
