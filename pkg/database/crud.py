"""
CRUD operations for the feature cache and run registry.
"""

import json
from datetime import datetime
from typing import List, Optional

from sqlalchemy import desc
from sqlalchemy.orm import Session

from core.schema import FeatureRecord
from database.models import FeatureCacheEntry, RunRecord


# --- Feature cache ---


def get_cached_features(
    db: Session,
    url: str,
    schema_hash: str,
    provider_mode: str,
    fixture_digest: str = "",
) -> Optional[FeatureRecord]:
    """Cached record for a URL, or None."""
    entry = (
        db.query(FeatureCacheEntry)
        .filter(
            FeatureCacheEntry.url == url,
            FeatureCacheEntry.schema_hash == schema_hash,
            FeatureCacheEntry.provider_mode == provider_mode,
            FeatureCacheEntry.fixture_digest == fixture_digest,
        )
        .first()
    )
    if entry is None:
        return None
    return FeatureRecord.from_dict(json.loads(entry.record_json))


def put_cached_features(
    db: Session,
    url: str,
    schema_hash: str,
    provider_mode: str,
    record: FeatureRecord,
    fixture_digest: str = "",
) -> FeatureCacheEntry:
    """Insert or update the cached record for a URL."""
    payload = json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))
    existing = (
        db.query(FeatureCacheEntry)
        .filter(
            FeatureCacheEntry.url == url,
            FeatureCacheEntry.schema_hash == schema_hash,
            FeatureCacheEntry.provider_mode == provider_mode,
            FeatureCacheEntry.fixture_digest == fixture_digest,
        )
        .first()
    )
    if existing:
        existing.record_json = payload
        db.commit()
        db.refresh(existing)
        return existing
    entry = FeatureCacheEntry(
        url=url,
        schema_hash=schema_hash,
        provider_mode=provider_mode,
        fixture_digest=fixture_digest,
        record_json=payload,
    )
    db.add(entry)
    db.commit()
    db.refresh(entry)
    return entry


def count_cached_features(db: Session, schema_hash: Optional[str] = None) -> int:
    q = db.query(FeatureCacheEntry)
    if schema_hash:
        q = q.filter(FeatureCacheEntry.schema_hash == schema_hash)
    return q.count()


# --- Runs ---


def start_run(db: Session, command: str, config_hash: str, seed: int, out_dir: str) -> RunRecord:
    """Register a command execution as running."""
    run = RunRecord(command=command, config_hash=config_hash, seed=seed, out_dir=out_dir, status="running")
    db.add(run)
    db.commit()
    db.refresh(run)
    return run


def finish_run(db: Session, run_id: int, status: str = "ok", error_code: Optional[str] = None) -> Optional[RunRecord]:
    """Mark a run finished and record its duration."""
    run = db.query(RunRecord).filter(RunRecord.id == run_id).first()
    if not run:
        return None
    run.status = status
    run.error_code = error_code
    run.finished_at = datetime.utcnow()
    if run.started_at:
        run.duration_seconds = (run.finished_at - run.started_at).total_seconds()
    db.commit()
    db.refresh(run)
    return run


def get_recent_runs(db: Session, command: Optional[str] = None, limit: int = 20) -> List[RunRecord]:
    """Most recent runs, optionally for one command."""
    q = db.query(RunRecord)
    if command:
        q = q.filter(RunRecord.command == command)
    return q.order_by(desc(RunRecord.started_at), desc(RunRecord.id)).limit(limit).all()
