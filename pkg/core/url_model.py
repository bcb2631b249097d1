"""
URL decomposition shared by every feature extractor.

parse_url splits a raw URL (or a bare host, as found in domain-only dataset
rows) into scheme / subdomain / domain / TLD / port / path / query / fragment.
TLD recognition uses the bundled public-suffix snapshot.
"""

import ipaddress
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, NewType, Optional, Tuple
from urllib.parse import unquote, urlsplit

from core.config import settings
from core.errors import UnparsableUrl

RawUrl = NewType("RawUrl", str)

_SCHEME_RE = re.compile(r"^([a-zA-Z][a-zA-Z0-9+.\-]*)://")


def as_raw_url(text: str) -> RawUrl:
    """Validate raw input: non-empty after trimming surrounding whitespace."""
    if text is None or not str(text).strip():
        raise UnparsableUrl("empty URL")
    return RawUrl(str(text))


@dataclass(frozen=True)
class SuffixTable:
    """Known TLD / ccTLD / second-level suffixes from a pinned snapshot."""

    suffixes: FrozenSet[str]
    version: str = "unversioned"

    @classmethod
    def load(cls, path: Path) -> "SuffixTable":
        suffixes = set()
        version = "unversioned"
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("//"):
                m = re.match(r"//\s*Version:\s*(\S+)", line)
                if m:
                    version = m.group(1)
                continue
            suffixes.add(line.lower())
        return cls(frozenset(suffixes), version)

    def __contains__(self, item: str) -> bool:
        return item in self.suffixes


@lru_cache(maxsize=1)
def default_suffix_table() -> SuffixTable:
    """Suffix table from RESOURCES_DIR/public_suffix.dat."""
    return SuffixTable.load(Path(settings.RESOURCES_DIR) / "public_suffix.dat")


@dataclass(frozen=True)
class ParsedUrl:
    """Structural decomposition of a URL."""

    scheme: Optional[str]
    host: str
    subdomain: Optional[str]
    domain: str
    tld: Optional[str]
    is_ip_host: bool
    port: Optional[int] = None
    path: str = ""
    query: str = ""
    fragment: str = ""
    userinfo: Optional[str] = None
    port_text: Optional[str] = None
    has_query: bool = False
    has_fragment: bool = False

    @property
    def registered_domain(self) -> str:
        """domain.tld (or just domain when no TLD is known)."""
        return f"{self.domain}.{self.tld}" if self.tld else self.domain


def is_ip_host(host: str) -> bool:
    """True for dotted-quad IPv4 (optionally behind 'www.') or bracketed IPv6."""
    if not host:
        return False
    if host.startswith("[") and host.endswith("]"):
        try:
            ipaddress.IPv6Address(host[1:-1])
            return True
        except ValueError:
            return False
    candidate = host[4:] if host.startswith("www.") else host
    try:
        ipaddress.IPv4Address(candidate)
        return True
    except ValueError:
        return False


def effective_tld_split(host: str, tld_table) -> Tuple[Optional[str], str, Optional[str]]:
    """
    Split host into (subdomain, domain, tld) using the longest known suffix.

    When no suffix is known the last label is treated as the domain and tld is None.
    """
    labels = [label for label in host.lower().split(".") if label != ""]
    if not labels:
        raise UnparsableUrl(f"no host labels in {host!r}")
    # Longest suffix first; at least one label must remain for the domain.
    for i in range(1, len(labels)):
        candidate = ".".join(labels[i:])
        if candidate in tld_table:
            subdomain = ".".join(labels[: i - 1]) or None
            return subdomain, labels[i - 1], candidate
    subdomain = ".".join(labels[:-1]) or None
    return subdomain, labels[-1], None


def parse_url(raw: str, tld_table: Optional[SuffixTable] = None) -> ParsedUrl:
    """
    Parse a raw URL. Scheme-less input is read host-first.

    Raises UnparsableUrl when no host token can be identified.
    """
    text = as_raw_url(raw).strip()
    table = tld_table if tld_table is not None else default_suffix_table()

    m = _SCHEME_RE.match(text)
    scheme = m.group(1).lower() if m else None
    try:
        parts = urlsplit(text if m else "//" + text)
    except ValueError as e:
        raise UnparsableUrl(f"cannot split {text!r}: {e}") from e

    # urlsplit drops a bare "?" or "#"; remember the delimiters.
    has_fragment = "#" in text
    before_fragment = text.split("#", 1)[0]

    netloc = parts.netloc
    userinfo = None
    if "@" in netloc:
        userinfo, netloc = netloc.rsplit("@", 1)

    port: Optional[int] = None
    port_text: Optional[str] = None
    host_part = netloc
    if netloc.startswith("["):
        end = netloc.find("]")
        if end != -1:
            host_part = netloc[: end + 1]
            rest = netloc[end + 1:]
            if rest.startswith(":") and (rest[1:].isdigit() or rest == ":"):
                port_text = rest[1:]
                port = int(port_text) if port_text else None
    elif ":" in netloc:
        head, _, tail = netloc.rpartition(":")
        if tail.isdigit() or tail == "":
            host_part, port_text = head, tail
            port = int(tail) if tail else None

    host = unquote(host_part).lower()
    if not host or host in (".", "[]"):
        raise UnparsableUrl(f"no host in {text!r}")

    ip_host = is_ip_host(host)
    if ip_host:
        if host.startswith("www."):
            subdomain, domain = "www", host[4:]
        else:
            subdomain, domain = None, host
        tld = None
    else:
        subdomain, domain, tld = effective_tld_split(host, table)

    return ParsedUrl(
        scheme=scheme,
        host=host,
        subdomain=subdomain,
        domain=domain,
        tld=tld,
        is_ip_host=ip_host,
        port=port,
        path=parts.path,
        query=parts.query,
        fragment=parts.fragment,
        userinfo=userinfo,
        port_text=port_text,
        has_query="?" in before_fragment,
        has_fragment=has_fragment,
    )


def serialize_url(u: ParsedUrl) -> str:
    """Rebuild scheme://[userinfo@]host[:port]path[?query][#fragment]."""
    out = f"{u.scheme}://" if u.scheme else ""
    if u.userinfo is not None:
        out += f"{u.userinfo}@"
    out += u.host
    if u.port_text is not None:
        out += f":{u.port_text}"
    elif u.port is not None:
        out += f":{u.port}"
    out += u.path
    if u.query or u.has_query:
        out += f"?{u.query}"
    if u.fragment or u.has_fragment:
        out += f"#{u.fragment}"
    return out
