"""
Live lookups for the web-scrapped features.

- RequestsPageFetcher: page HTML over HTTP(S) with requests
- WhoisLookup: domain registration dates (python-whois) + ASN data (ipwhois RDAP)
- DnsDomainRegistry: registration check through DNS (dnspython)

Every class raises a ProviderUnavailable subclass on failure; the feature
layer turns those into -1 sentinels.
"""

import socket
from datetime import date, datetime
from functools import lru_cache
from typing import Any, Dict, Optional

import requests

from core.config import settings
from core.errors import FetchFailed, NoRecord, ProviderUnavailable
from core.logger import get_logger

logger = get_logger("scrapers")

USER_AGENT = "Mozilla/5.0 (compatible; malicious-ad-url-detector/1.0)"
MAX_BODY_BYTES = 2_000_000


class RequestsPageFetcher:
    """Fetch page HTML; non-2xx responses and transport errors raise FetchFailed."""

    def __init__(self, timeout: Optional[int] = None, session: Optional[requests.Session] = None):
        self.timeout = timeout or settings.REQUEST_TIMEOUT
        self.session = session or requests.Session()
        self.session.headers.setdefault("User-Agent", USER_AGENT)

    def fetch(self, url: str) -> str:
        target = url if "://" in url else f"http://{url}"
        try:
            resp = self.session.get(target, timeout=self.timeout, allow_redirects=True)
        except requests.RequestException as e:
            logger.warning("Fetch failed for %s: %s", target, e)
            raise FetchFailed(f"{target}: {e}") from e
        if not 200 <= resp.status_code < 300:
            logger.warning("Fetch for %s returned HTTP %d", target, resp.status_code)
            raise FetchFailed(f"{target}: HTTP {resp.status_code}")
        return resp.text[:MAX_BODY_BYTES]


def _iso_day(value: Any) -> Optional[str]:
    """python-whois returns datetimes, lists of datetimes or strings."""
    if isinstance(value, list):
        value = next((v for v in value if v), None)
    if isinstance(value, datetime):
        return value.date().isoformat()
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, str) and len(value) >= 10:
        return value[:10]
    return None


@lru_cache(maxsize=1024)
def resolve_ipv4(domain: str) -> Optional[str]:
    try:
        return socket.gethostbyname(domain)
    except (socket.gaierror, UnicodeError, OSError):
        return None


class WhoisLookup:
    """Domain WHOIS dates plus RDAP ASN data for the resolved IP."""

    def lookup(self, domain: str) -> Dict[str, Any]:
        record: Dict[str, Any] = {}

        try:
            import whois

            w = whois.whois(domain)
        except ImportError as e:
            raise ProviderUnavailable("python-whois is not installed") from e
        except Exception as e:
            logger.warning("WHOIS lookup failed for %s: %s", domain, e)
            w = None
        if w is not None:
            record["creation_date"] = _iso_day(w.get("creation_date"))
            record["updated_date"] = _iso_day(w.get("updated_date"))
            postal = w.get("registrant_postal_code") or w.get("zipcode")
            if isinstance(postal, list):
                postal = postal[0] if postal else None
            record["postal_code"] = postal

        ip = resolve_ipv4(domain)
        if ip:
            record["ip"] = ip
            try:
                from ipwhois import IPWhois

                data = IPWhois(ip).lookup_rdap(depth=0)
                record["asn"] = data.get("asn")
                record["asn_country_code"] = data.get("asn_country_code")
                record["asn_cidr"] = data.get("asn_cidr")
            except ImportError as e:
                raise ProviderUnavailable("ipwhois is not installed") from e
            except Exception as e:
                logger.warning("RDAP lookup failed for %s (%s): %s", domain, ip, e)

        record = {k: v for k, v in record.items() if v}
        if not record:
            raise NoRecord(f"no WHOIS or ASN data for {domain}")
        return record


class DnsDomainRegistry:
    """A domain counts as registered when DNS knows it (any A or NS answer, or a non-NXDOMAIN reply)."""

    def __init__(self, lifetime: float = 3.0):
        self.lifetime = lifetime

    def is_registered(self, domain: str) -> bool:
        try:
            import dns.exception
            import dns.resolver
        except ImportError as e:
            raise ProviderUnavailable("dnspython is not installed") from e

        for rtype in ("A", "NS"):
            try:
                dns.resolver.resolve(domain, rtype, lifetime=self.lifetime)
                return True
            except dns.resolver.NXDOMAIN:
                return False
            except (dns.resolver.NoAnswer, dns.resolver.NoNameservers):
                continue
            except dns.exception.Timeout as e:
                raise ProviderUnavailable(f"DNS timeout for {domain}") from e
            except dns.exception.DNSException as e:
                logger.debug("DNS error for %s/%s: %s", domain, rtype, e)
                continue
        # Name exists but has neither A nor NS answers.
        return True
