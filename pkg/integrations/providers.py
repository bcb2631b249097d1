"""
Provider interfaces for the web-scrapped features, plus the fixture store
behind the record / replay modes.

Modes:
- live:   call the live provider only
- record: call the live provider and persist every response (or failure)
- replay: answer from the fixture store only; never touches the network
"""

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Protocol

from core.config import PROVIDER_MODES
from core.errors import (
    ConfigInvalid,
    FetchFailed,
    FixtureMissing,
    NoRecord,
    ProviderUnavailable,
)
from core.logger import get_logger

logger = get_logger("providers")

FIXTURE_FILES = {
    "search": "search.json",
    "whois": "whois.json",
    "pages": "pages.json",
    "registry": "registry.json",
}

_ERRORS = {
    FetchFailed.code: FetchFailed,
    NoRecord.code: NoRecord,
    ProviderUnavailable.code: ProviderUnavailable,
}


class SearchProvider(Protocol):
    def search(self, query: str) -> List[str]:
        """Ranked result URLs (or hosts) for a query."""


class WhoisProvider(Protocol):
    def lookup(self, domain: str) -> Dict[str, Any]:
        """Registration / ASN record; raises NoRecord when none exists."""


class PageFetcher(Protocol):
    def fetch(self, url: str) -> str:
        """HTML body; raises FetchFailed when the page cannot be retrieved."""


class DomainRegistry(Protocol):
    def is_registered(self, domain: str) -> bool:
        ...


class FixtureStore:
    """
    One JSON document per provider kind: {key: {"response": ..., "captured_at": ...}}.

    Failures are stored as {"response": null, "error": <code>} so replay
    reproduces them. Reads are lock-free after load; writes take a lock.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self._data: Dict[str, Dict[str, Dict[str, Any]]] = {}
        self._dirty: set = set()
        self._lock = threading.Lock()

    def _kind(self, kind: str) -> Dict[str, Dict[str, Any]]:
        if kind not in FIXTURE_FILES:
            raise ValueError(f"unknown fixture kind {kind!r}")
        if kind not in self._data:
            with self._lock:
                if kind not in self._data:
                    path = self.root / FIXTURE_FILES[kind]
                    if path.exists():
                        self._data[kind] = json.loads(path.read_text(encoding="utf-8"))
                    else:
                        self._data[kind] = {}
        return self._data[kind]

    def get(self, kind: str, key: str) -> Any:
        entry = self._kind(kind).get(key)
        if entry is None:
            raise FixtureMissing(f"no {kind} fixture for {key!r}")
        error = entry.get("error")
        if error:
            raise _ERRORS.get(error, ProviderUnavailable)(f"recorded {kind} failure for {key!r}")
        return entry.get("response")

    def put(
        self,
        kind: str,
        key: str,
        response: Any,
        error: Optional[str] = None,
        captured_at: Optional[str] = None,
    ) -> None:
        entries = self._kind(kind)
        entry: Dict[str, Any] = {
            "response": response,
            "captured_at": captured_at or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        if error:
            entry["error"] = error
        with self._lock:
            entries[key] = entry
            self._dirty.add(kind)

    def keys(self, kind: str) -> List[str]:
        return sorted(self._kind(kind))

    @staticmethod
    def dumps(entries: Dict[str, Any]) -> str:
        return json.dumps(entries, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def save(self) -> None:
        with self._lock:
            if not self._dirty:
                return
            self.root.mkdir(parents=True, exist_ok=True)
            for kind in sorted(self._dirty):
                path = self.root / FIXTURE_FILES[kind]
                path.write_text(self.dumps(self._data[kind]), encoding="utf-8")
                logger.info("Wrote %d %s fixtures to %s", len(self._data[kind]), kind, path)
            self._dirty.clear()

    def digest(self) -> str:
        """SHA-256 over the fixture files on disk (missing files hash as empty)."""
        h = hashlib.sha256()
        for kind in sorted(FIXTURE_FILES):
            path = self.root / FIXTURE_FILES[kind]
            h.update(kind.encode("utf-8"))
            if path.exists():
                h.update(path.read_bytes())
        return h.hexdigest()


class _FixtureBacked:
    """Routes one provider kind through live calls and/or the fixture store."""

    kind = ""

    def __init__(self, mode: str, store: Optional[FixtureStore] = None, live: Any = None):
        if mode not in PROVIDER_MODES:
            raise ConfigInvalid(f"unknown provider mode {mode!r}")
        if mode in ("replay", "record") and store is None:
            raise ConfigInvalid(f"{mode} mode needs a fixture store")
        if mode in ("live", "record") and live is None:
            raise ConfigInvalid(f"{mode} mode needs a live {self.kind} provider")
        self.mode = mode
        self.store = store
        self.live = live if mode != "replay" else None
        self._memo: Dict[str, Any] = {}
        self._lock = threading.Lock()

    def _call(self, key: str, live_fn: Callable[[str], Any]) -> Any:
        with self._lock:
            if key in self._memo:
                ok, value = self._memo[key]
                if ok:
                    return value
                raise value
        try:
            if self.mode == "replay":
                value = self.store.get(self.kind, key)
            else:
                try:
                    value = live_fn(key)
                except ProviderUnavailable as e:
                    if self.mode == "record":
                        self.store.put(self.kind, key, None, error=e.code)
                    raise
                if self.mode == "record":
                    self.store.put(self.kind, key, value)
        except ProviderUnavailable as e:
            with self._lock:
                self._memo[key] = (False, e)
            raise
        with self._lock:
            self._memo[key] = (True, value)
        return value


class FixtureSearch(_FixtureBacked):
    kind = "search"

    def search(self, query: str) -> List[str]:
        return list(self._call(query, lambda q: self.live.search(q)) or [])


class FixtureWhois(_FixtureBacked):
    kind = "whois"

    def lookup(self, domain: str) -> Dict[str, Any]:
        record = self._call(domain, lambda d: self.live.lookup(d))
        if not record:
            raise NoRecord(f"no WHOIS record for {domain}")
        return dict(record)


class FixtureFetcher(_FixtureBacked):
    kind = "pages"

    def fetch(self, url: str) -> str:
        body = self._call(url, lambda u: self.live.fetch(u))
        if body is None:
            raise FetchFailed(f"no body for {url}")
        return body


class FixtureRegistry(_FixtureBacked):
    kind = "registry"

    def is_registered(self, domain: str) -> bool:
        return bool(self._call(domain, lambda d: self.live.is_registered(d)))


@dataclass
class ProviderSuite:
    """The four lookups web features depend on, all in one mode."""

    search: FixtureSearch
    whois: FixtureWhois
    fetcher: FixtureFetcher
    registry: FixtureRegistry
    mode: str
    store: Optional[FixtureStore] = None

    def providers(self) -> List[_FixtureBacked]:
        return [self.search, self.whois, self.fetcher, self.registry]

    def assert_offline(self) -> None:
        """Replay mode must not hold any live provider."""
        if self.mode != "replay":
            return
        for p in self.providers():
            if p.mode != "replay" or p.live is not None:
                raise ConfigInvalid(f"{p.kind} provider can reach the network in replay mode")

    def fixture_digest(self) -> str:
        return self.store.digest() if self.store is not None else ""

    def save(self) -> None:
        if self.mode == "record" and self.store is not None:
            self.store.save()


def _live_providers() -> Dict[str, Any]:
    from integrations.scrapers import DnsDomainRegistry, RequestsPageFetcher, WhoisLookup
    from integrations.web_search import TavilySearchProvider

    return {
        "search": TavilySearchProvider(),
        "whois": WhoisLookup(),
        "fetcher": RequestsPageFetcher(),
        "registry": DnsDomainRegistry(),
    }


def build_provider_suite(
    mode: str,
    fixtures_dir: Optional[str] = None,
    live: Optional[Dict[str, Any]] = None,
) -> ProviderSuite:
    """Assemble a ProviderSuite for a mode; replay requires an existing fixture directory."""
    if mode not in PROVIDER_MODES:
        raise ConfigInvalid(f"providers mode must be one of {PROVIDER_MODES}")
    store: Optional[FixtureStore] = None
    if mode == "replay":
        if not fixtures_dir or not Path(fixtures_dir).is_dir():
            raise ConfigInvalid(f"replay mode needs an existing fixture directory: {fixtures_dir}")
        store = FixtureStore(Path(fixtures_dir))
        live = {}
    else:
        if mode == "record":
            if not fixtures_dir:
                raise ConfigInvalid("record mode needs a fixture directory")
            store = FixtureStore(Path(fixtures_dir))
        live = live if live is not None else _live_providers()

    suite = ProviderSuite(
        search=FixtureSearch(mode, store, live.get("search")),
        whois=FixtureWhois(mode, store, live.get("whois")),
        fetcher=FixtureFetcher(mode, store, live.get("fetcher")),
        registry=FixtureRegistry(mode, store, live.get("registry")),
        mode=mode,
        store=store,
    )
    suite.assert_offline()
    logger.info("Providers ready (mode=%s, fixtures=%s)", mode, fixtures_dir or "-")
    return suite
