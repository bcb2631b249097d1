"""
Database module for the Malicious Ad URL Detector (feature cache and run registry).
"""

from database.connection import get_db, init_db, engine, SessionLocal, session_scope
from database.models import Base, FeatureCacheEntry, RunRecord

__all__ = [
    "get_db",
    "init_db",
    "engine",
    "SessionLocal",
    "session_scope",
    "Base",
    "FeatureCacheEntry",
    "RunRecord",
]
