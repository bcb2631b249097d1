import os
import sys
from dataclasses import replace
from pathlib import Path

# Keep the run registry and feature cache away from the on-disk database.
os.environ.setdefault("DATABASE_URL", "sqlite:///:memory:")
os.environ.setdefault("RUN_REGISTRY_ENABLED", "false")
os.environ.setdefault("FEATURE_CACHE_ENABLED", "false")

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import numpy as np
import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from core.dataset import LabeledRow, synthesize_corpus
from core.features_lexical import default_resources, extract_lexical
from core.schema import FeatureRecord, WebFeatures
from database.models import Base


def _blobs(seed):
    rng = np.random.default_rng(seed)
    benign = rng.normal(0.0, 1.0, size=(100, 5))
    malicious = rng.normal(3.0, 1.0, size=(100, 5))
    return np.vstack([benign, malicious]), np.repeat([0, 1], 100)


@pytest.fixture(scope="session")
def blobs():
    """Two separable Gaussian blobs, 100 rows per class, 5 dimensions."""
    return _blobs(0)


@pytest.fixture(scope="session")
def blobs_test():
    return _blobs(1)


def _featurize(d):
    res = default_resources()
    rows = [
        LabeledRow(r.raw, r.label, FeatureRecord.combine(extract_lexical(r.raw, res), WebFeatures.missing()))
        for r in d.rows
    ]
    return replace(d, rows=rows)


@pytest.fixture(scope="session")
def featurized_small():
    """120 synthetic rows with lexical features (web slots missing)."""
    return _featurize(synthesize_corpus(60, seed=11, name="small"))


@pytest.fixture(scope="session")
def featurized_corpus():
    """1000 synthetic rows (500 per class) with lexical features."""
    return _featurize(synthesize_corpus(500, seed=0, name="synthetic"))


@pytest.fixture
def fixture_dir(tmp_path):
    """Empty fixture store directory: every replayed lookup is missing."""
    path = tmp_path / "fixtures"
    path.mkdir()
    return path


@pytest.fixture
def db_session():
    """Session on a fresh in-memory SQLite database."""
    engine = create_engine("sqlite:///:memory:")
    Base.metadata.create_all(bind=engine)
    session = sessionmaker(autocommit=False, autoflush=False, bind=engine)()
    try:
        yield session
    finally:
        session.close()
        engine.dispose()
