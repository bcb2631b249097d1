"""
Feature extraction over whole datasets.

URLs are featurized on a thread pool; providers tolerate concurrent calls and
rows keep their input order. When the feature cache is enabled, records are
looked up and stored from the calling thread only.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import date
from typing import Dict, List, Optional, Sequence

from sqlalchemy.exc import SQLAlchemyError

from core.config import settings
from core.dataset import LabeledDataset, LabeledRow
from core.errors import UnparsableUrl
from core.features_lexical import LexicalResources, default_resources, extract_lexical
from core.features_web import extract_web
from core.logger import get_logger
from core.schema import FEATURE_SCHEMA, FeatureRecord, WebFeatures
from core.url_model import parse_url
from integrations.providers import ProviderSuite

logger = get_logger("extraction_service")


def extract_record(
    raw: str,
    providers: Optional[ProviderSuite],
    today: date,
    resources: Optional[LexicalResources] = None,
) -> FeatureRecord:
    """
    All 89 slots for one URL. Without providers the web slots are left at the
    missing sentinel.
    """
    res = resources or default_resources()
    u = parse_url(raw, res.suffixes)
    lex = extract_lexical(raw, res, u)
    if providers is None:
        web = WebFeatures.missing()
    else:
        web = extract_web(u, raw, providers, res.suffixes, res.suspicious_domains, today)
    return FeatureRecord.combine(lex, web)


class FeatureCache:
    """Feature cache keyed by URL, schema hash, provider mode and fixture digest."""

    def __init__(self, providers: Optional[ProviderSuite], session_factory=None):
        from database.connection import init_db

        init_db()
        self._session_factory = session_factory
        self.mode = providers.mode if providers else "none"
        self.digest = providers.fixture_digest() if providers else ""
        self.schema_hash = FEATURE_SCHEMA.schema_hash()

    def get_many(self, urls: Sequence[str]) -> Dict[str, FeatureRecord]:
        from database import crud
        from database.connection import session_scope

        found: Dict[str, FeatureRecord] = {}
        with session_scope(self._session_factory) as db:
            for url in urls:
                rec = crud.get_cached_features(db, url, self.schema_hash, self.mode, self.digest)
                if rec is not None:
                    found[url] = rec
        return found

    def put_many(self, records: Dict[str, FeatureRecord]) -> None:
        from database import crud
        from database.connection import session_scope

        with session_scope(self._session_factory) as db:
            for url, rec in records.items():
                crud.put_cached_features(db, url, self.schema_hash, self.mode, rec, self.digest)


def extract_urls(
    urls: Sequence[str],
    providers: Optional[ProviderSuite],
    today: date,
    resources: Optional[LexicalResources] = None,
    workers: Optional[int] = None,
    use_cache: Optional[bool] = None,
) -> List[Optional[FeatureRecord]]:
    """Records in input order; None where the URL cannot be parsed."""
    res = resources or default_resources()
    use_cache = settings.FEATURE_CACHE_ENABLED if use_cache is None else use_cache

    cache: Optional[FeatureCache] = None
    cached: Dict[str, FeatureRecord] = {}
    if use_cache:
        try:
            cache = FeatureCache(providers)
            cached = cache.get_many(urls)
        except SQLAlchemyError as e:
            logger.warning("Feature cache unavailable, extracting everything: %s", e)
            cache = None

    def _one(raw: str) -> Optional[FeatureRecord]:
        if raw in cached:
            return cached[raw]
        try:
            return extract_record(raw, providers, today, res)
        except UnparsableUrl as e:
            logger.warning("Skipping %s: %s", raw, e)
            return None

    n_workers = max(1, workers or settings.EXTRACT_WORKERS)
    if n_workers == 1 or len(urls) < 2:
        records = [_one(u) for u in urls]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_one, urls))

    if cache is not None:
        fresh = {u: r for u, r in zip(urls, records) if r is not None and u not in cached}
        try:
            cache.put_many(fresh)
        except SQLAlchemyError as e:
            logger.warning("Could not store %d records in the feature cache: %s", len(fresh), e)
    logger.info("Extracted %d URLs (%d from cache)", len(urls), len(cached))
    return records


def extract_dataset(
    d: LabeledDataset,
    providers: Optional[ProviderSuite],
    today: date,
    resources: Optional[LexicalResources] = None,
    workers: Optional[int] = None,
    use_cache: Optional[bool] = None,
) -> LabeledDataset:
    """Featurized copy of a dataset; rows whose URL cannot be parsed are dropped."""
    records = extract_urls(d.urls(), providers, today, resources, workers, use_cache)
    rows: List[LabeledRow] = []
    dropped = 0
    for row, rec in zip(d.rows, records):
        if rec is None:
            dropped += 1
            continue
        rows.append(LabeledRow(row.raw, row.label, rec))
    return replace(
        d,
        rows=rows,
        skipped=d.skipped + dropped,
        provenance={**d.provenance, "providers": providers.mode if providers else "none"},
    )
