"""
SQLAlchemy models for the Malicious Ad URL Detector.

Schema supports:
- Feature cache (one extracted record per URL / schema / provider state)
- Run registry (one row per CLI invocation)
"""

from datetime import datetime

from sqlalchemy import (
    Column,
    DateTime,
    Float,
    Integer,
    String,
    Text,
    UniqueConstraint,
)
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class FeatureCacheEntry(Base):
    """Extracted feature record for a URL under one schema and provider state."""

    __tablename__ = "feature_cache"

    id = Column(Integer, primary_key=True, autoincrement=True)
    url = Column(Text, nullable=False)
    schema_hash = Column(String(64), nullable=False)
    provider_mode = Column(String(16), nullable=False)
    fixture_digest = Column(String(64), nullable=False, default="")
    record_json = Column(Text, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)

    __table_args__ = (
        UniqueConstraint("url", "schema_hash", "provider_mode", "fixture_digest", name="uq_feature_cache_key"),
    )


class RunRecord(Base):
    """One CLI command execution."""

    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String(32), nullable=False)
    config_hash = Column(String(64), nullable=False)
    seed = Column(Integer, nullable=False)
    out_dir = Column(Text, nullable=False)
    status = Column(String(16), nullable=False, default="running")  # running | ok | failed
    error_code = Column(String(64), nullable=True)
    started_at = Column(DateTime, default=datetime.utcnow)
    finished_at = Column(DateTime, nullable=True)
    duration_seconds = Column(Float, nullable=True)
