"""
Live search provider over the Tavily API.

Backs the search hit count and the Levenshtein feature: the registered domain
is the query, and the ranked result URLs come back in engine order.
"""

import os
from typing import Any, Dict, List, Optional

from core.config import settings
from core.errors import ProviderUnavailable
from core.logger import get_logger

logger = get_logger("web_search")

# Tavily caps a single search call well below the 60 results the hit count looks at.
TAVILY_MAX_PER_CALL = 20


def _get_tavily_client():
    """TavilyClient for the configured key, or None when the key or package is missing."""
    api_key = settings.TAVILY_API_KEY or os.environ.get("TAVILY_API_KEY")
    if not api_key:
        logger.warning("TAVILY_API_KEY not set; live search disabled")
        return None
    try:
        from tavily import TavilyClient
    except ImportError:
        logger.warning("tavily-python is not installed")
        return None
    return TavilyClient(api_key=api_key)


def result_urls(response: Dict[str, Any]) -> List[str]:
    return [r["url"] for r in response.get("results", []) if r.get("url")]


class TavilySearchProvider:
    """SearchProvider: domain -> ranked result URLs (at most max_results)."""

    def __init__(self, max_results: Optional[int] = None, search_depth: str = "advanced"):
        self.max_results = max_results or settings.SEARCH_MAX_RESULTS
        self.search_depth = search_depth
        self._client = None

    def _client_or_raise(self):
        if self._client is None:
            self._client = _get_tavily_client()
        if self._client is None:
            raise ProviderUnavailable("Tavily client unavailable")
        return self._client

    def search(self, query: str) -> List[str]:
        client = self._client_or_raise()
        try:
            response = client.search(
                query=query,
                max_results=min(self.max_results, TAVILY_MAX_PER_CALL),
                search_depth=self.search_depth,
            )
        except Exception as e:
            logger.warning("Tavily search failed for %r: %s", query, e)
            raise ProviderUnavailable(f"Tavily search failed: {e}") from e
        urls = result_urls(response)
        logger.debug("Search %r returned %d results", query, len(urls))
        return urls[: self.max_results]
