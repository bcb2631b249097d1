import json
import zlib
from datetime import date

import pytest

from core.config import RunConfig, PathsConfig
from core.dataset import synthesize_corpus, write_features_csv
from core.errors import FetchFailed, FixtureMissing, TooFewRows
from core.schema import FEATURE_SCHEMA, MISSING, WEB_NAMES
from database import crud
from database.connection import SessionLocal
from integrations.providers import build_provider_suite
from services.extraction_service import extract_dataset, extract_record, extract_urls
from services.run_service import RESOLVED_CONFIG, RUN_MANIFEST, SEED_MODULES, open_run

TODAY = date(2023, 1, 1)


def test_extract_record_without_providers():
    rec = extract_record("http://www.example.com/login.php?id=1", None, TODAY)
    assert len(rec) == len(FEATURE_SCHEMA)
    assert all(rec[name] == MISSING for name in WEB_NAMES)


REPLAY_NAMES = ("GoogleSearchFeature", "LevenshteinDistance", "DomainAgeInDays", "ASNNumber", "ImgCount", "DivTagCount")


class StubLive:
    """Deterministic stand-in for every live provider."""

    def search(self, query):
        return [f"https://www.{query}/", f"https://mirror{len(query)}.net/{query}"]

    def lookup(self, domain):
        return {
            "ip": "93.184.216.34",
            "asn": "AS15133",
            "asn_country_code": "US",
            "asn_cidr": "93.184.216.0/24",
            "creation_date": f"2015-03-{len(domain) % 9 + 1:02d}",
            "updated_date": "2022-01-01",
            "postal_code": "90210",
        }

    def fetch(self, url):
        if "login" in url:
            raise FetchFailed("unreachable")
        return f"<html><head><title>{len(url)}</title><meta x></head><body><img src=a><div></div></body></html>"

    def is_registered(self, domain):
        return zlib.crc32(domain.encode("utf-8")) % 7 == 0


def test_replay_of_recorded_corpus_is_byte_identical(tmp_path):
    d = synthesize_corpus(15, seed=4)
    live = StubLive()
    stubs = {k: live for k in ("search", "whois", "fetcher", "registry")}
    recorder = build_provider_suite("record", str(tmp_path / "fx"), live=stubs)
    recorded = extract_dataset(d, recorder, TODAY, workers=4)
    recorder.save()

    written = []
    for workers in (1, 4):
        suite = build_provider_suite("replay", str(tmp_path / "fx"))
        replayed = extract_dataset(d, suite, TODAY, workers=workers)
        assert replayed.records() == recorded.records()
        path = tmp_path / f"features_{workers}.csv"
        write_features_csv(replayed, str(path))
        written.append(path.read_bytes())
    assert written[0] == written[1]

    records = recorded.records()
    for name in REPLAY_NAMES:
        assert any(rec[name] != MISSING for rec in records), name


def test_replay_miss_raises_fixture_missing_and_extracts_as_sentinel(fixture_dir):
    suite = build_provider_suite("replay", str(fixture_dir))
    with pytest.raises(FixtureMissing):
        suite.search.search("never-recorded.example")
    rec = extract_record("http://never-recorded.com/", suite, TODAY)
    # Levenshtein falls back to the suspicious list when search is unavailable.
    assert all(rec[name] == MISSING for name in WEB_NAMES if name not in ("Entropy", "LevenshteinDistance"))


def test_unparsable_urls_are_dropped():
    records = extract_urls(["http://ok.example.com/", "http://"], None, TODAY, workers=1)
    assert records[0] is not None
    assert records[1] is None


def test_feature_cache_round_trip():
    urls = ["http://cache-one.example.com/a", "http://cache-two.example.net/b"]
    first = extract_urls(urls, None, TODAY, workers=1, use_cache=True)
    db = SessionLocal()
    try:
        stored = crud.get_cached_features(db, urls[0], FEATURE_SCHEMA.schema_hash(), "none")
    finally:
        db.close()
    assert stored == first[0]
    second = extract_urls(urls, None, TODAY, workers=1, use_cache=True)
    assert second == first


def _cfg(tmp_path):
    return RunConfig(seed=5, paths=PathsConfig(out=str(tmp_path / "run")))


def test_open_run_writes_snapshot_and_manifest(tmp_path):
    cfg = _cfg(tmp_path)
    with open_run("synth", cfg) as ctx:
        with ctx.stage("work"):
            ctx.output("a.csv").write_text("x\n")
    out = tmp_path / "run"
    assert json.loads((out / RESOLVED_CONFIG).read_text()) == cfg.to_dict()
    manifest = json.loads((out / RUN_MANIFEST).read_text())
    assert manifest["command"] == "synth"
    assert manifest["config_hash"] == cfg.config_hash()
    assert manifest["outputs"] == ["a.csv"]
    assert set(manifest["derived_seeds"]) == set(SEED_MODULES)
    assert "work" in manifest["timings"]


def test_open_run_keeps_manifest_on_failure(tmp_path):
    cfg = _cfg(tmp_path)
    with pytest.raises(TooFewRows):
        with open_run("train", cfg):
            raise TooFewRows("nothing")
    assert (tmp_path / "run" / RUN_MANIFEST).exists()
