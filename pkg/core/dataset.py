"""
Labeled URL datasets: CSV ingestion, preprocessing (empty-row removal,
hostname dedup, seeded shuffle), balanced merging, IQR scaling, stratified
split / k-fold, profiling and a synthetic desk-scale corpus.

Labels: 0 benign, 1 malicious.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import (
    EmptyFile,
    InputMissing,
    InsufficientRows,
    MissingColumn,
    NoFeatures,
    SchemaMismatch,
    TooFewRows,
    UnparsableUrl,
)
from core.features_lexical import LexicalResources, default_resources
from core.logger import get_logger
from core.schema import (
    FEATURE_SCHEMA,
    MISSING,
    CategoryVocabulary,
    FeatureRecord,
    FeatureVector,
    records_to_matrix,
)
from core.url_model import parse_url

logger = get_logger("dataset")

LABELS = (0, 1)
QUANTILE_METHOD = "linear"


@dataclass(frozen=True)
class LabeledRow:
    raw: str
    label: int
    features: Optional[FeatureRecord] = None


@dataclass
class LabeledDataset:
    """Rows of (raw URL, optional feature record, label) with provenance."""

    rows: List[LabeledRow]
    name: str = "dataset"
    provenance: Dict[str, Any] = field(default_factory=dict)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.rows)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=int)

    def urls(self) -> List[str]:
        return [r.raw for r in self.rows]

    def records(self) -> List[FeatureRecord]:
        missing = [i for i, r in enumerate(self.rows) if r.features is None]
        if missing:
            raise NoFeatures(f"{self.name}: {len(missing)} rows have no features")
        return [r.features for r in self.rows]

    def class_counts(self) -> Dict[int, int]:
        labels = self.labels()
        return {c: int((labels == c).sum()) for c in LABELS}

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "LabeledDataset":
        return replace(self, rows=[self.rows[i] for i in indices], name=name or self.name)

    def has_features(self) -> bool:
        return bool(self.rows) and all(r.features is not None for r in self.rows)


def _host_of(raw: str) -> Optional[str]:
    try:
        return parse_url(raw).host
    except UnparsableUrl:
        return None


# ---------------------------------------------------------------------------
# Ingestion / persistence
# ---------------------------------------------------------------------------


def _read_frame(path: Path) -> Tuple[pd.DataFrame, int]:
    if not path.exists():
        raise InputMissing(f"input file not found: {path}")
    bad_lines: List[List[str]] = []

    def _on_bad(line: List[str]) -> None:
        bad_lines.append(line)
        return None

    try:
        df = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            engine="python",
            on_bad_lines=_on_bad,
        )
    except pd.errors.EmptyDataError as e:
        raise EmptyFile(f"{path} is empty") from e
    return df, len(bad_lines)


def ingest_csv(path: str, name: Optional[str] = None) -> LabeledDataset:
    """Load a url,label CSV. Malformed rows are counted and skipped."""
    p = Path(path)
    df, skipped = _read_frame(p)
    df.columns = [c.strip().lower() for c in df.columns]
    for col in ("url", "label"):
        if col not in df.columns:
            raise MissingColumn(f"{p}: missing column {col!r}")

    rows: List[LabeledRow] = []
    for url, label in zip(df["url"], df["label"]):
        url = (url or "").strip()
        label = (label or "").strip()
        if label not in ("0", "1") or not url or _host_of(url) is None:
            skipped += 1
            continue
        rows.append(LabeledRow(url, int(label)))

    logger.info("Loaded %d rows from %s (%d skipped)", len(rows), p, skipped)
    return LabeledDataset(
        rows=rows,
        name=name or p.stem,
        provenance={"sources": [str(p)]},
        skipped=skipped,
    )


def read_url_list(path: str) -> List[str]:
    """URLs from a CSV with a ``url`` column (labels, if any, are ignored)."""
    p = Path(path)
    df, skipped = _read_frame(p)
    df.columns = [c.strip().lower() for c in df.columns]
    if "url" not in df.columns:
        raise MissingColumn(f"{p}: missing column 'url'")
    urls = []
    for url in df["url"]:
        url = (url or "").strip()
        if not url or _host_of(url) is None:
            skipped += 1
            continue
        urls.append(url)
    logger.info("Loaded %d unlabeled URLs from %s (%d skipped)", len(urls), p, skipped)
    return urls


def write_urls_csv(d: LabeledDataset, path: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"url": d.urls(), "label": d.labels().tolist()})
    frame.to_csv(p, index=False, lineterminator="\n")


def write_features_csv(d: LabeledDataset, path: str) -> None:
    """url,label plus the 89 feature columns in schema order."""
    records = d.records()
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    data = {"url": d.urls(), "label": d.labels().tolist()}
    for name in FEATURE_SCHEMA.names:
        data[name] = [_format_slot(rec[name]) for rec in records]
    pd.DataFrame(data).to_csv(p, index=False, lineterminator="\n")


def _format_slot(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)) or float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def load_features_csv(path: str, name: Optional[str] = None) -> LabeledDataset:
    """Inverse of write_features_csv."""
    p = Path(path)
    df, skipped = _read_frame(p)
    missing = [c for c in ("url", "label", *FEATURE_SCHEMA.names) if c not in df.columns]
    if missing:
        raise MissingColumn(f"{p}: missing columns {missing[:5]}")

    rows: List[LabeledRow] = []
    for rec in df.to_dict(orient="records"):
        try:
            values: Dict[str, Any] = {}
            for spec in FEATURE_SCHEMA.slots:
                raw_value = rec[spec.name]
                if spec.encoding == "category":
                    values[spec.name] = raw_value
                elif spec.encoding == "float":
                    values[spec.name] = float(raw_value)
                else:
                    values[spec.name] = int(float(raw_value))
            label = int(rec["label"])
            if label not in LABELS:
                raise ValueError(label)
        except (TypeError, ValueError):
            skipped += 1
            continue
        rows.append(LabeledRow(rec["url"], label, FeatureRecord(values)))

    logger.info("Loaded %d featurized rows from %s (%d skipped)", len(rows), p, skipped)
    return LabeledDataset(rows, name=name or p.stem, provenance={"sources": [str(p)]}, skipped=skipped)


# ---------------------------------------------------------------------------
# Preprocessing / merging
# ---------------------------------------------------------------------------


def preprocess(d: LabeledDataset, seed: int) -> LabeledDataset:
    """Drop empty / unparsable rows and repeated hostnames (first kept), then shuffle."""
    seen = set()
    kept: List[LabeledRow] = []
    for r in d.rows:
        if not r.raw or not r.raw.strip():
            continue
        host = _host_of(r.raw)
        if host is None or host in seen:
            continue
        seen.add(host)
        kept.append(r)
    order = np.random.default_rng(seed).permutation(len(kept))
    logger.info("Preprocessed %s: %d -> %d rows", d.name, len(d), len(kept))
    return replace(
        d,
        rows=[kept[i] for i in order],
        provenance={**d.provenance, "preprocess_seed": seed},
    )


def merge_balanced(benign: LabeledDataset, malicious: LabeledDataset, seed: int, name: str = "merged") -> LabeledDataset:
    """Equal class counts: min(|benign| // 2, |malicious|) each, sampled without replacement."""
    b_rows = [r for r in benign.rows if r.label == 0]
    m_rows = [r for r in malicious.rows if r.label == 1]
    n = min(len(b_rows) // 2, len(m_rows))
    if n == 0:
        raise InsufficientRows(
            f"cannot balance {len(b_rows)} benign and {len(m_rows)} malicious rows"
        )
    rng = np.random.default_rng(seed)
    b_pick = rng.choice(len(b_rows), size=n, replace=False)
    m_pick = rng.choice(len(m_rows), size=n, replace=False)
    rows = [b_rows[i] for i in b_pick] + [m_rows[i] for i in m_pick]
    order = rng.permutation(len(rows))
    return LabeledDataset(
        rows=[rows[i] for i in order],
        name=name,
        provenance={
            "sources": benign.provenance.get("sources", [benign.name]) + malicious.provenance.get("sources", [malicious.name]),
            "merge_seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# IQR scaling
# ---------------------------------------------------------------------------


@dataclass
class ScalerState:
    median: np.ndarray
    iqr: np.ndarray
    quantile_method: str = QUANTILE_METHOD

    def to_dict(self) -> Dict[str, Any]:
        return {
            "median": [float(v) for v in self.median],
            "iqr": [float(v) for v in self.iqr],
            "quantile_method": self.quantile_method,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScalerState":
        return cls(
            np.asarray(data["median"], dtype=float),
            np.asarray(data["iqr"], dtype=float),
            data.get("quantile_method", QUANTILE_METHOD),
        )


def fit_scaler(X: np.ndarray) -> ScalerState:
    """Per-slot median and Q3 - Q1 (linear interpolation); -1 sentinels are ignored."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise NoFeatures("scaler needs at least 2 featurized rows")
    p = X.shape[1]
    median = np.zeros(p)
    iqr = np.zeros(p)
    for j in range(p):
        col = X[:, j]
        col = col[col != MISSING]
        if col.size == 0:
            continue
        q1, q2, q3 = np.percentile(col, [25, 50, 75], method=QUANTILE_METHOD)
        median[j] = q2
        iqr[j] = max(0.0, q3 - q1)
    return ScalerState(median, iqr)


def apply_scaler(state: ScalerState, X):
    """(x - median) / IQR per slot; IQR = 0 slots pass through unchanged.

    Accepts a matrix, a single row or a FeatureVector (returned as one).
    """
    if isinstance(X, FeatureVector):
        return FeatureVector.from_array(apply_scaler(state, X.as_array()))
    X = np.asarray(X, dtype=float)
    scale = state.iqr > 0
    out = X.copy()
    out[..., scale] = (X[..., scale] - state.median[scale]) / state.iqr[scale]
    return out


# ---------------------------------------------------------------------------
# Split / folds
# ---------------------------------------------------------------------------


def split(d: LabeledDataset, train_fraction: float, seed: int) -> Tuple[LabeledDataset, LabeledDataset]:
    """Stratified train/test split."""
    train_idx, test_idx = split_indices(d.labels(), train_fraction, seed)
    return d.subset(train_idx, f"{d.name}-train"), d.subset(test_idx, f"{d.name}-test")


def split_indices(labels: np.ndarray, train_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    labels = np.asarray(labels)
    if len(labels) < 2:
        raise TooFewRows("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for c in LABELS:
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        n_train = int(round(idx.size * train_fraction))
        train_parts.append(idx[:n_train])
        test_parts.append(idx[n_train:])
    train = rng.permutation(np.concatenate(train_parts))
    test = rng.permutation(np.concatenate(test_parts))
    if train.size == 0 or test.size == 0:
        raise TooFewRows("split leaves an empty part")
    return train, test


def kfold(d: LabeledDataset, k: int, seed: int) -> List[np.ndarray]:
    """k disjoint stratified test-index folds covering every row once."""
    return kfold_indices(d.labels(), k, seed)


def kfold_indices(labels: np.ndarray, k: int, seed: int) -> List[np.ndarray]:
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(labels) < k:
        raise TooFewRows(f"{len(labels)} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    ordered = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in LABELS])
    assignment = np.arange(ordered.size) % k
    return [np.sort(ordered[assignment == f]) for f in range(k)]


# ---------------------------------------------------------------------------
# Profiling
# ---------------------------------------------------------------------------


def special_char_count(raw: str) -> int:
    return sum(1 for c in raw if not (c.isascii() and c.isalnum()))


def _url_stats(raw: str) -> Tuple[int, int, int, bool]:
    text = raw.strip()
    try:
        u = parse_url(text)
        path_len, ip = len(u.path), u.is_ip_host
    except UnparsableUrl:
        path_len, ip = 0, False
    return len(text), special_char_count(text), path_len, ip


def length_histogram(lengths: Sequence[int], bucket_width: int = 10) -> List[Tuple[int, int, int]]:
    """(bucket_lo, bucket_hi, count) rows; bucket_hi is exclusive."""
    if not lengths:
        return []
    top = int(max(lengths)) // bucket_width + 1
    counts = np.bincount(np.asarray(lengths, dtype=int) // bucket_width, minlength=top)
    return [(i * bucket_width, (i + 1) * bucket_width, int(c)) for i, c in enumerate(counts)]


def profile(d: LabeledDataset, bucket_width: int = 10) -> Dict[str, Any]:
    """Per-class mean URL length, special-character count, path length and IP-host fraction."""
    report: Dict[str, Any] = {"dataset": d.name, "rows": len(d), "classes": {}}
    for c, label_name in zip(LABELS, ("benign", "malicious")):
        stats = [_url_stats(r.raw) for r in d.rows if r.label == c]
        if not stats:
            report["classes"][label_name] = {"count": 0}
            continue
        lengths = [s[0] for s in stats]
        report["classes"][label_name] = {
            "count": len(stats),
            "mean_length": float(np.mean(lengths)),
            "mean_special_chars": float(np.mean([s[1] for s in stats])),
            "mean_path_length": float(np.mean([s[2] for s in stats])),
            "ip_host_fraction": float(np.mean([s[3] for s in stats])),
            "histogram": length_histogram(lengths, bucket_width),
        }
    return report


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

BENIGN_MEAN_LENGTH = 44.28
BENIGN_SD_LENGTH = 8.0
MALICIOUS_MEAN_LENGTH = 63.14
MALICIOUS_SD_LENGTH = 12.0
MALICIOUS_MEAN_SPECIAL = 13.98
MALICIOUS_SD_SPECIAL = 3.0
MALICIOUS_IP_FRACTION = 0.012

BENIGN_TLDS = ("com", "org", "net", "edu", "io")
MALICIOUS_TLDS = ("com", "net", "xyz", "top", "info")
PATH_SPECIALS = "/-_.=&~"
_ALNUM = "abcdefghijklmnopqrstuvwxyz0123456789"
_LETTERS = "abcdefghijklmnopqrstuvwxyz"
_DIGITS = "0123456789"


def _content_words(res: LexicalResources) -> List[str]:
    keep = {"noun", "verb", "adjective"}
    return [w for w in res.dictionary.words() if len(w) >= 3 and w.isalpha() and res.dictionary.tags(w) & keep]


def _target_length(rng: np.random.Generator, mean: float, sd: float, lo: int, hi: int) -> int:
    return int(min(hi, max(lo, round(rng.normal(mean, sd)))))


def _benign_url(rng: np.random.Generator, words: List[str], used: set) -> str:
    target = _target_length(rng, BENIGN_MEAN_LENGTH, BENIGN_SD_LENGTH, 22, 100)
    tld = BENIGN_TLDS[int(rng.integers(len(BENIGN_TLDS)))]
    budget = target - len("https://www.") - len(tld) - 3
    host = None
    for _ in range(50):
        a, b = words[int(rng.integers(len(words)))], words[int(rng.integers(len(words)))]
        domain = a + b
        candidate = f"www.{domain}.{tld}"
        if candidate in used:
            continue
        host = candidate
        if len(domain) <= budget:
            break
    if host is None:
        host = f"www.{words[int(rng.integers(len(words)))]}{len(used)}.{tld}"
    used.add(host)

    prefix = f"https://{host}"
    remaining = target - len(prefix)
    if remaining < 2:
        return prefix
    parts: List[str] = []
    while sum(len(p) + 1 for p in parts) < remaining:
        parts.append(words[int(rng.integers(len(words)))])
    sep = "/" if rng.random() < 0.5 else "-"
    path = ("/" + sep.join(parts))[:remaining]
    if path[-1] in "/-":
        path = path[:-1] + _LETTERS[int(rng.integers(len(_LETTERS)))]
    return prefix + path


def _random_domain(rng: np.random.Generator) -> str:
    n = int(rng.integers(7, 12))
    chars = []
    for _ in range(n):
        pool = _DIGITS if rng.random() < 0.35 else _LETTERS
        chars.append(pool[int(rng.integers(len(pool)))])
    chars[0] = _LETTERS[int(rng.integers(len(_LETTERS)))]
    return "".join(chars)


def _malicious_url(rng: np.random.Generator, sensitive: Sequence[str], used: set) -> str:
    target = _target_length(rng, MALICIOUS_MEAN_LENGTH, MALICIOUS_SD_LENGTH, 30, 160)
    specials = _target_length(rng, MALICIOUS_MEAN_SPECIAL, MALICIOUS_SD_SPECIAL, 5, 40)

    while True:
        if rng.random() < MALICIOUS_IP_FRACTION:
            host = ".".join(str(int(v)) for v in rng.integers(1, 255, size=4))
        else:
            host = f"{_random_domain(rng)}.{MALICIOUS_TLDS[int(rng.integers(len(MALICIOUS_TLDS)))]}"
        if host not in used:
            used.add(host)
            break

    prefix = f"http://{host}"
    path_len = max(4, target - len(prefix))
    extra_specials = specials - special_char_count(prefix) - 1

    body: List[str] = []
    for _ in range(int(rng.integers(1, 3))):
        body.extend(sensitive[int(rng.integers(len(sensitive)))])
    while len(body) < path_len - 1:
        body.append(_ALNUM[int(rng.integers(len(_ALNUM)))])
    body = body[: path_len - 1]

    k = int(min(max(0, extra_specials), len(body) - 1))
    if k > 0:
        positions = rng.choice(np.arange(1, len(body)), size=k, replace=False)
        for pos in positions:
            body[int(pos)] = PATH_SPECIALS[int(rng.integers(len(PATH_SPECIALS)))]
    return prefix + "/" + "".join(body)


def synthesize_corpus(
    n_per_class: int,
    seed: int,
    resources: Optional[LexicalResources] = None,
    name: str = "synthetic",
) -> LabeledDataset:
    """Benign-like and malicious-like URLs shaped after the published corpus statistics."""
    if n_per_class < 10:
        raise TooFewRows("synthetic corpus needs at least 10 rows per class")
    res = resources or default_resources()
    words = _content_words(res)
    sensitive = [w for w in res.sensitive_words if w.isalnum()]
    rng = np.random.default_rng(seed)
    used: set = set()

    rows = [LabeledRow(_benign_url(rng, words, used), 0) for _ in range(n_per_class)]
    rows += [LabeledRow(_malicious_url(rng, sensitive, used), 1) for _ in range(n_per_class)]
    order = rng.permutation(len(rows))
    logger.info("Synthesized %d rows (seed=%d)", len(rows), seed)
    return LabeledDataset(
        rows=[rows[i] for i in order],
        name=name,
        provenance={"sources": ["synthetic"], "seed": seed},
    )


# ---------------------------------------------------------------------------
# Training-split transform
# ---------------------------------------------------------------------------


@dataclass
class Preprocessing:
    """Category vocabulary plus IQR scaler, both fitted on a training portion."""

    vocabulary: CategoryVocabulary
    scaler: ScalerState

    @classmethod
    def fit(cls, records: Sequence[FeatureRecord]) -> "Preprocessing":
        vocabulary = CategoryVocabulary.fit(records)
        return cls(vocabulary, fit_scaler(records_to_matrix(records, vocabulary)))

    def transform(self, records: Sequence[FeatureRecord]) -> np.ndarray:
        if not records:
            return np.zeros((0, len(FEATURE_SCHEMA)))
        return apply_scaler(self.scaler, records_to_matrix(records, self.vocabulary))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_hash": FEATURE_SCHEMA.schema_hash(),
            "vocabulary": self.vocabulary.to_dict(),
            "scaler": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Preprocessing":
        if data.get("schema_hash") != FEATURE_SCHEMA.schema_hash():
            raise SchemaMismatch("preprocessing state was fitted against a different schema")
        return cls(CategoryVocabulary.from_dict(data["vocabulary"]), ScalerState.from_dict(data["scaler"]))


def fit_transform(train: LabeledDataset, *others: LabeledDataset) -> Tuple[Preprocessing, List[np.ndarray]]:
    """Fit on train; return the transform and the matrices of train and every other dataset."""
    prep = Preprocessing.fit(train.records())
    return prep, [prep.transform(d.records()) for d in (train, *others)]
