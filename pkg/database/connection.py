"""
Engine and sessions for the feature cache and run registry.

SQLite is the default store (data/detector.db). An in-memory URL keeps a
single shared connection so worker threads and the caller see the same tables.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Generator, Iterator

from sqlalchemy import create_engine
from sqlalchemy.engine import make_url
from sqlalchemy.orm import sessionmaker, Session
from sqlalchemy.pool import StaticPool

from core.config import settings
from database.models import Base


def is_sqlite(url: str) -> bool:
    return make_url(url).get_backend_name() == "sqlite"


def is_memory(url: str) -> bool:
    return is_sqlite(url) and make_url(url).database in (None, "", ":memory:")


def engine_options(url: str) -> Dict[str, Any]:
    """Keyword arguments for create_engine, by backend."""
    options: Dict[str, Any] = {"echo": settings.DEBUG, "pool_pre_ping": True}
    if not is_sqlite(url):
        options.update(pool_size=5, max_overflow=10)
        return options
    options["connect_args"] = {"check_same_thread": False}
    if is_memory(url):
        options["poolclass"] = StaticPool
    else:
        Path(make_url(url).database).parent.mkdir(parents=True, exist_ok=True)
    return options


engine = create_engine(settings.DATABASE_URL, **engine_options(settings.DATABASE_URL))
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)


def init_db() -> None:
    """Create the feature_cache and runs tables if missing."""
    Base.metadata.create_all(bind=engine)


@contextmanager
def session_scope(factory=None) -> Iterator[Session]:
    """One session, always closed; crud functions commit their own writes."""
    db = (factory or SessionLocal)()
    try:
        yield db
    finally:
        db.close()


def get_db() -> Generator[Session, None, None]:
    with session_scope() as db:
        yield db
