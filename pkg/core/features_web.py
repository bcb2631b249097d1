"""
Web-scrapped features: the 40 slots that need external lookups.

Deep-web rows (edit distance, entropy, 11 typosquat counts), the search hit
count, host-based rows from WHOIS/ASN records and content-based rows from the
fetched page. Every lookup goes through a provider; provider failures become
the -1 sentinel for the affected slots.
"""

import ipaddress
import logging
import math
import re
import zlib
from collections import Counter
from datetime import date, datetime
from typing import Any, Dict, Iterable, Iterator, List, Optional, Set

import Levenshtein

from core.errors import EmptyString, FetchFailed, FixtureMissing, NoRecord, ProviderUnavailable, UnknownKind
from core.logger import get_logger
from core.schema import CONTENT_NAMES, HOST_NAMES, MISSING, WebFeatures
from core.url_model import ParsedUrl, SuffixTable, effective_tld_split, is_ip_host, parse_url

logger = get_logger("features_web")

SEARCH_TOP_N = 60

TYPOSQUAT_KINDS = (
    "hyphenation",
    "homoglyph",
    "vowel_swap",
    "bitsquatting",
    "insertion",
    "omission",
    "repetition",
    "replacement",
    "subdomain",
    "transposition",
    "addition",
)

# Web slot fed by each typosquat kind.
TYPOSQUAT_SLOTS = {
    "hyphenation": "Hyphenstring",
    "homoglyph": "Homoglyph",
    "vowel_swap": "Vowel",
    "bitsquatting": "Bitsquatting",
    "insertion": "InsertionString",
    "omission": "Omission",
    "repetition": "Repeatition",
    "replacement": "Replacement",
    "subdomain": "Subdomain",
    "transposition": "Transposition",
    "addition": "AdditionString",
}

LABEL_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-")
VOWELS = "aeiou"

QWERTY = {
    "1": "2q", "2": "3wq1", "3": "4ew2", "4": "5re3", "5": "6tr4", "6": "7yt5", "7": "8uy6", "8": "9iu7", "9": "0oi8", "0": "po9",
    "q": "12wa", "w": "3esaq2", "e": "4rdsw3", "r": "5tfde4", "t": "6ygfr5", "y": "7uhgt6", "u": "8ijhy7", "i": "9okju8", "o": "0plki9", "p": "lo0",
    "a": "qwsz", "s": "edxzaw", "d": "rfcxse", "f": "tgvcdr", "g": "yhbvft", "h": "ujnbgy", "j": "ikmnhu", "k": "olmji", "l": "kop",
    "z": "asx", "x": "zsdc", "c": "xdfv", "v": "cfgb", "b": "vghn", "n": "bhjm", "m": "njk",
}

# ASCII confusables.
HOMOGLYPHS = {
    "0": ("o",),
    "1": ("l", "i"),
    "3": ("8",),
    "6": ("9",),
    "8": ("3",),
    "9": ("6",),
    "b": ("d", "lb"),
    "c": ("e",),
    "d": ("b", "cl", "dl"),
    "e": ("c",),
    "g": ("q",),
    "h": ("lh",),
    "i": ("1", "l"),
    "k": ("lc",),
    "l": ("1", "i"),
    "m": ("n", "nn", "rn"),
    "n": ("m", "r"),
    "o": ("0",),
    "q": ("g",),
    "u": ("v",),
    "v": ("u",),
    "w": ("vv",),
    "rn": ("m",),
    "cl": ("d",),
}

_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]{0,61}[a-z0-9])?$")


def _log_unavailable(what: str, key: str, e: ProviderUnavailable) -> None:
    # Replay misses log at DEBUG.
    level = logging.DEBUG if isinstance(e, FixtureMissing) else logging.WARNING
    logger.log(level, "%s unavailable for %s: %s", what, key, e.code)


# ---------------------------------------------------------------------------
# String measures
# ---------------------------------------------------------------------------


def levenshtein(a: str, b: str) -> int:
    return Levenshtein.distance(a or "", b or "")


def shannon_entropy(s: str) -> float:
    """Bits per character over the character frequencies of s."""
    if not s:
        raise EmptyString("entropy of an empty string")
    n = len(s)
    h = 0.0
    for count in Counter(s).values():
        p = count / n
        h -= p * math.log2(p)
    return h


# ---------------------------------------------------------------------------
# Typosquatting
# ---------------------------------------------------------------------------


def _valid_candidate(candidate: str) -> bool:
    labels = candidate.split(".")
    return all(_LABEL_RE.match(label) for label in labels)


def _bitsquatting(d: str) -> Iterator[str]:
    for i, c in enumerate(d):
        for mask in (1, 2, 4, 8, 16, 32, 64, 128):
            b = chr(ord(c) ^ mask)
            if b in LABEL_CHARS:
                yield d[:i] + b + d[i + 1:]


def _homoglyph(d: str) -> Iterator[str]:
    for i, c in enumerate(d):
        for g in HOMOGLYPHS.get(c, ()):
            yield d[:i] + g + d[i + 1:]
    for i in range(len(d) - 1):
        win = d[i:i + 2]
        for c in {win[0], win[1], win}:
            for g in HOMOGLYPHS.get(c, ()):
                yield d[:i] + win.replace(c, g) + d[i + 2:]


def _hyphenation(d: str) -> Iterator[str]:
    for i in range(1, len(d)):
        yield d[:i] + "-" + d[i:]


def _insertion(d: str) -> Iterator[str]:
    for i, c in enumerate(d):
        for k in QWERTY.get(c, ""):
            yield d[:i] + k + c + d[i + 1:]
            yield d[:i] + c + k + d[i + 1:]


def _omission(d: str) -> Iterator[str]:
    for i in range(len(d)):
        yield d[:i] + d[i + 1:]


def _repetition(d: str) -> Iterator[str]:
    for i, c in enumerate(d):
        yield d[:i] + c + d[i:]


def _replacement(d: str) -> Iterator[str]:
    for i, c in enumerate(d):
        for k in QWERTY.get(c, ""):
            yield d[:i] + k + d[i + 1:]


def _subdomain(d: str) -> Iterator[str]:
    for i in range(1, len(d)):
        if d[i] not in "-." and d[i - 1] not in "-.":
            yield d[:i] + "." + d[i:]


def _transposition(d: str) -> Iterator[str]:
    for i in range(len(d) - 1):
        yield d[:i] + d[i + 1] + d[i] + d[i + 2:]


def _vowel_swap(d: str) -> Iterator[str]:
    for i, c in enumerate(d):
        if c in VOWELS:
            for v in VOWELS:
                yield d[:i] + v + d[i + 1:]


def _addition(d: str) -> Iterator[str]:
    for c in "0123456789abcdefghijklmnopqrstuvwxyz":
        yield d + c


_GENERATORS = {
    "hyphenation": _hyphenation,
    "homoglyph": _homoglyph,
    "vowel_swap": _vowel_swap,
    "bitsquatting": _bitsquatting,
    "insertion": _insertion,
    "omission": _omission,
    "repetition": _repetition,
    "replacement": _replacement,
    "subdomain": _subdomain,
    "transposition": _transposition,
    "addition": _addition,
}


def typosquat_variants(domain: str, kind: str) -> Set[str]:
    """Candidate labels for one permutation kind; the input itself is never included."""
    gen = _GENERATORS.get(kind)
    if gen is None:
        raise UnknownKind(f"unknown typosquat kind {kind!r}")
    domain = (domain or "").lower()
    if not domain:
        return set()
    return {v for v in gen(domain) if v and v != domain and _valid_candidate(v)}


def typosquat_feature(domain: str, kind: str, registry, tld: Optional[str] = None) -> int:
    """Number of generated variants the registry reports as registered (-1 if unavailable)."""
    variants = sorted(typosquat_variants(domain, kind))
    try:
        count = 0
        for v in variants:
            candidate = f"{v}.{tld}" if tld else v
            if registry.is_registered(candidate):
                count += 1
        return count
    except ProviderUnavailable as e:
        _log_unavailable("Registry", f"{domain}/{kind}", e)
        return MISSING


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def _registered(host: str, tld_table: SuffixTable) -> str:
    host = host.lower().strip(".")
    if not host or is_ip_host(host):
        return host
    _, domain, tld = effective_tld_split(host, tld_table)
    return f"{domain}.{tld}" if tld else domain


def result_hosts(results: Iterable[str], tld_table: SuffixTable) -> List[str]:
    """Hosts of the top result URLs (or bare hosts), in rank order."""
    hosts = []
    for item in list(results)[:SEARCH_TOP_N]:
        try:
            hosts.append(parse_url(item, tld_table).host)
        except Exception:
            logger.debug("Skipping unparsable search result %r", item)
    return hosts


def search_results(domain: str, search) -> Optional[List[str]]:
    """Ranked result URLs for the domain, or None when search is unavailable."""
    try:
        return list(search.search(domain))
    except ProviderUnavailable as e:
        _log_unavailable("Search", domain, e)
        return None


def count_hits(domain: str, results: Optional[List[str]], tld_table: SuffixTable) -> int:
    if results is None:
        return MISSING
    target = _registered(domain, tld_table)
    return sum(1 for h in result_hosts(results, tld_table) if _registered(h, tld_table) == target)


def search_hit_count(domain: str, search, tld_table: SuffixTable) -> int:
    """Top-60 result hosts whose registered domain equals the query's (-1 if unavailable)."""
    return count_hits(domain, search_results(domain, search), tld_table)


def nearest_distance(domain: str, candidates: Iterable[str]) -> Optional[int]:
    distances = [levenshtein(domain, c) for c in candidates if c]
    return min(distances) if distances else None


def levenshtein_feature(
    domain: str,
    search,
    suspicious_domains: Iterable[str],
    tld_table: SuffixTable,
) -> float:
    """Edit distance to the nearest search-result domain, else to the nearest suspicious-list entry."""
    return distance_to_results(domain, search_results(domain, search), suspicious_domains, tld_table)


def distance_to_results(
    domain: str,
    results: Optional[List[str]],
    suspicious_domains: Iterable[str],
    tld_table: SuffixTable,
) -> float:
    hosts = result_hosts(results, tld_table) if results is not None else []
    dist = nearest_distance(domain, [_registered(h, tld_table) for h in hosts])
    if dist is None:
        dist = nearest_distance(domain, sorted(suspicious_domains))
    return float(dist) if dist is not None else float(MISSING)


# ---------------------------------------------------------------------------
# Host-based
# ---------------------------------------------------------------------------

_EPOCH = date(1970, 1, 1)


def encode_ip(ip: Any) -> int:
    try:
        return int(ipaddress.IPv4Address(str(ip).strip()))
    except (ValueError, ipaddress.AddressValueError):
        return MISSING


def encode_asn(asn: Any) -> int:
    m = re.search(r"\d+", str(asn or ""))
    return int(m.group()) if m else MISSING


def encode_country(code: Any) -> int:
    """Two-letter code as a base-26 id starting at 1."""
    code = str(code or "").strip().upper()
    if len(code) != 2 or not code.isalpha() or not code.isascii():
        return MISSING
    return (ord(code[0]) - 65) * 26 + (ord(code[1]) - 65) + 1


def encode_cidr(cidr: Any) -> int:
    text = str(cidr or "").split(",")[0].strip()
    if "/" not in text:
        return MISSING
    try:
        return int(ipaddress.ip_network(text, strict=False).prefixlen)
    except ValueError:
        return MISSING


def encode_postal(code: Any) -> int:
    text = str(code or "").strip().upper()
    return zlib.crc32(text.encode("utf-8")) if text else MISSING


def parse_day(value: Any) -> Optional[date]:
    if value is None or value == "":
        return None
    if isinstance(value, list):
        value = value[0] if value else None
        if value is None:
            return None
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value).strip()[:10])
    except ValueError:
        return None


def epoch_days(value: Any) -> int:
    d = parse_day(value)
    if d is None:
        return MISSING
    return max(0, (d - _EPOCH).days)


def host_features(domain: str, whois, today: date) -> Dict[str, int]:
    """IPAddress .. DomainAgeInDays; each slot falls back to -1 independently."""
    try:
        record = whois.lookup(domain)
    except (ProviderUnavailable, NoRecord) as e:
        _log_unavailable("WHOIS", domain, e)
        return {name: MISSING for name in HOST_NAMES}
    if not record:
        return {name: MISSING for name in HOST_NAMES}

    created = parse_day(record.get("creation_date"))
    age = (today - created).days if created else MISSING
    return {
        "IPAddress": encode_ip(record.get("ip")),
        "ASNNumber": encode_asn(record.get("asn")),
        "ASNCountryCode": encode_country(record.get("asn_country_code")),
        "ASN_CIDR": encode_cidr(record.get("asn_cidr")),
        "ASNPostalCode": encode_postal(record.get("postal_code")),
        "ASNCreationDate": epoch_days(record.get("creation_date")),
        "ASNUpdationDate": epoch_days(record.get("updated_date")),
        "DomainAgeInDays": age if age >= 0 else MISSING,
    }


# ---------------------------------------------------------------------------
# Content-based
# ---------------------------------------------------------------------------

CONTENT_PATTERNS = {
    "img": re.compile(r"<img\b", re.I),
    "link": re.compile(r"<(?:a|link)\b", re.I),
    "body": re.compile(r"<body\b", re.I),
    "meta": re.compile(r"<meta\b", re.I),
    "div": re.compile(r"<div\b", re.I),
    "status_bar": re.compile(r"onmouseover\s*=[^>]*window\.status", re.I),
    "right_click": re.compile(
        r"event\.button\s*==\s*2|oncontextmenu\s*=\s*[\"']?\s*return\s+false|contextmenu[\"']?\s*,[^)]*preventDefault",
        re.I,
    ),
    "popup": re.compile(r"window\.open\s*\(", re.I),
    "mailto": re.compile(r"mailto:", re.I),
    "frame": re.compile(r"<i?frame\b", re.I),
    "title": re.compile(r"<title\b[^>]*>(.*?)</title>", re.I | re.S),
    "eval": re.compile(r"\beval\s*\("),
    "escape": re.compile(r"\bescape\s*\("),
    "exec": re.compile(r"\bexec\s*\("),
    "search": re.compile(r"\bsearch\s*\("),
    "form": re.compile(r"<form\b[^>]*>(.*?)</form>", re.I | re.S),
    "tag": re.compile(r"<[^>]+>"),
}


def _title_empty(body: str) -> int:
    m = CONTENT_PATTERNS["title"].search(body)
    return 0 if m and m.group(1).strip() else 1


def _image_only_form(body: str) -> int:
    for m in CONTENT_PATTERNS["form"].finditer(body):
        inner = m.group(1)
        if CONTENT_PATTERNS["img"].search(inner) and not CONTENT_PATTERNS["tag"].sub("", inner).strip():
            return 1
    return 0


def page_features(u: ParsedUrl, raw: str, body: str) -> Dict[str, int]:
    """Rows computed from a fetched page body."""
    p = CONTENT_PATTERNS
    return {
        "ImgCount": len(p["img"].findall(body)),
        "TotalLinks": len(p["link"].findall(body)),
        "NumParameters": len([q for q in u.query.split("&") if q]),
        "NumFragments": raw.count("#"),
        "BodyTagCount": len(p["body"].findall(body)),
        "MetaTagCount": len(p["meta"].findall(body)),
        "DivTagCount": len(p["div"].findall(body)),
        "FakeLinkInStatusBar": int(bool(p["status_bar"].search(body))),
        "RightClickDisabled": int(bool(p["right_click"].search(body))),
        "PopUpWindow": int(bool(p["popup"].search(body))),
        "CheckMailto": int(bool(p["mailto"].search(body))),
        "CheckFrametag": int(bool(p["frame"].search(body))),
        "TitleCheck": _title_empty(body),
        "SourceEvalCount": len(p["eval"].findall(body)),
        "SourceEscapeCount": len(p["escape"].findall(body)),
        "SourceExecCount": len(p["exec"].findall(body)),
        "SourceSearchCount": len(p["search"].findall(body)),
        "ImageOnlyInForm": _image_only_form(body),
    }


def content_features(url: str, fetcher, parsed: Optional[ParsedUrl] = None) -> Dict[str, int]:
    """Content-based rows; an unfetchable page yields 18 sentinels."""
    try:
        body = fetcher.fetch(url)
    except (FetchFailed, ProviderUnavailable) as e:
        _log_unavailable("Fetch", url, e)
        return {name: MISSING for name in CONTENT_NAMES}
    if body is None:
        return {name: MISSING for name in CONTENT_NAMES}
    u = parsed or parse_url(url)
    return page_features(u, url.strip(), body)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def extract_web(
    u: ParsedUrl,
    raw: str,
    providers,
    tld_table: SuffixTable,
    suspicious_domains: Iterable[str],
    today: date,
) -> WebFeatures:
    """All 40 web slots for one URL."""
    query = u.registered_domain
    results = search_results(query, providers.search)
    values: Dict[str, Any] = {
        "LevenshteinDistance": distance_to_results(query, results, suspicious_domains, tld_table),
        "Entropy": shannon_entropy(raw.strip()),
    }
    for kind in TYPOSQUAT_KINDS:
        if u.is_ip_host:
            values[TYPOSQUAT_SLOTS[kind]] = 0
        else:
            values[TYPOSQUAT_SLOTS[kind]] = typosquat_feature(u.domain, kind, providers.registry, u.tld)
    values["GoogleSearchFeature"] = count_hits(query, results, tld_table)
    values.update(host_features(query, providers.whois, today))
    values.update(content_features(raw.strip(), providers.fetcher, u))
    return WebFeatures(values)
