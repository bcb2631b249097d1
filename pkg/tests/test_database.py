from core.features_lexical import extract_lexical
from core.schema import FEATURE_SCHEMA, FeatureRecord, WebFeatures
from database import crud
from database.models import FeatureCacheEntry


def _record(url="http://www.example.com/index.html"):
    return FeatureRecord.combine(extract_lexical(url), WebFeatures.missing())


def test_cache_miss_then_hit(db_session):
    h = FEATURE_SCHEMA.schema_hash()
    url = "http://www.example.com/index.html"
    assert crud.get_cached_features(db_session, url, h, "replay") is None
    rec = _record(url)
    crud.put_cached_features(db_session, url, h, "replay", rec)
    assert crud.get_cached_features(db_session, url, h, "replay") == rec


def test_cache_key_includes_provider_state(db_session):
    h = FEATURE_SCHEMA.schema_hash()
    url = "http://www.example.com/index.html"
    crud.put_cached_features(db_session, url, h, "replay", _record(url), fixture_digest="aaa")
    assert crud.get_cached_features(db_session, url, h, "replay", fixture_digest="bbb") is None
    assert crud.get_cached_features(db_session, url, h, "live", fixture_digest="aaa") is None
    assert crud.get_cached_features(db_session, url, "other", "replay", fixture_digest="aaa") is None


def test_cache_put_updates_in_place(db_session):
    h = FEATURE_SCHEMA.schema_hash()
    url = "http://a.example.org/"
    crud.put_cached_features(db_session, url, h, "replay", _record(url))
    crud.put_cached_features(db_session, url, h, "replay", _record(url))
    assert db_session.query(FeatureCacheEntry).count() == 1
    assert crud.count_cached_features(db_session, h) == 1


def test_run_lifecycle(db_session):
    run = crud.start_run(db_session, "train", "f" * 64, 42, "runs/x")
    assert run.status == "running"
    done = crud.finish_run(db_session, run.id, "failed", "TooFewRows")
    assert done.status == "failed"
    assert done.error_code == "TooFewRows"
    assert done.duration_seconds >= 0
    assert crud.finish_run(db_session, 9999) is None


def test_recent_runs_filter_by_command(db_session):
    for command in ("synth", "train", "train"):
        crud.start_run(db_session, command, "0" * 64, 1, "out")
    assert len(crud.get_recent_runs(db_session, "train")) == 2
    assert len(crud.get_recent_runs(db_session)) == 3


def test_engine_options_by_backend():
    from sqlalchemy.pool import StaticPool

    from database.connection import engine_options, is_memory

    assert is_memory("sqlite://") and is_memory("sqlite:///:memory:")
    assert not is_memory("sqlite:///data/detector.db")
    assert engine_options("sqlite:///:memory:")["poolclass"] is StaticPool
    pg = engine_options("postgresql://u@localhost/db")
    assert pg["pool_size"] == 5 and "connect_args" not in pg
