"""
Lexical features: the 49 slots computed from the URL string alone.

Rows 1-40 are linguistic (lengths, counts, ratios, token flags); rows 41-49
are human-engineered (dictionary classification of the domain, character
n-gram scores, sensitive words, suspicious-list membership).
"""

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from core.config import settings
from core.errors import EmptyCorpus, EmptyDictionary, EmptyDomain
from core.logger import get_logger
from core.schema import LINGUISTIC_NAMES, LexicalFeatures
from core.url_model import ParsedUrl, SuffixTable, parse_url

logger = get_logger("features_lexical")

NGRAM_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789-"
NGRAM_PAD = "^"
DELIMITERS = frozenset("(){}[],/*")
MEANINGFUL_POS = frozenset({"noun", "pronoun"})
PRONOUNCEABLE_POS = frozenset({"verb", "adjective"})

_HEX_TOKEN_RE = re.compile(r"[0-9a-fA-F]{16,}")
_FILE_EXT_RE = re.compile(r"\.([A-Za-z0-9]{1,8})$")
_PATH_TLD_RE = re.compile(r"\.([a-z]{2,})(?=[/?#.=&_-]|$)")
_JS_RE = re.compile(r"\.js\b", re.I)
_CSS_RE = re.compile(r"\.css\b", re.I)


def _read_lines(path: Path) -> List[str]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


# ---------------------------------------------------------------------------
# Dictionary and domain-word classification
# ---------------------------------------------------------------------------


class Dictionary:
    """English word list with part-of-speech tags."""

    def __init__(self, entries: Mapping[str, Iterable[str]]):
        self.pos: Dict[str, FrozenSet[str]] = {
            w.lower(): frozenset(p.lower() for p in tags) for w, tags in entries.items()
        }
        if not self.pos:
            raise EmptyDictionary("dictionary has no entries")
        self.max_len = max(len(w) for w in self.pos)

    @classmethod
    def load(cls, path: Path) -> "Dictionary":
        entries: Dict[str, set] = {}
        for line in _read_lines(path):
            parts = line.split("\t")
            word = parts[0].strip().lower()
            if not word:
                continue
            tags = entries.setdefault(word, set())
            if len(parts) > 1 and parts[1].strip():
                tags.add(parts[1].strip().lower())
        return cls(entries)

    def __contains__(self, word: str) -> bool:
        return word in self.pos

    def __len__(self) -> int:
        return len(self.pos)

    def words(self) -> List[str]:
        return sorted(self.pos)

    def tags(self, word: str) -> FrozenSet[str]:
        return self.pos.get(word, frozenset())


def segment_words(text: str, dictionary: Dictionary) -> Optional[List[str]]:
    """
    Split text into the fewest dictionary words (each at least two letters).

    Returns None when no full segmentation exists.
    """
    n = len(text)
    if n == 0:
        return None
    best: List[Optional[Tuple[int, int]]] = [None] * (n + 1)  # (word count, start of last word)
    best[0] = (0, 0)
    for end in range(1, n + 1):
        for start in range(max(0, end - dictionary.max_len), end - 1):
            if best[start] is None:
                continue
            if text[start:end] not in dictionary:
                continue
            cand = (best[start][0] + 1, start)
            if best[end] is None or cand[0] < best[end][0]:
                best[end] = cand
    if best[n] is None:
        return None
    words = []
    pos = n
    while pos > 0:
        start = best[pos][1]
        words.append(text[start:pos])
        pos = start
    return list(reversed(words))


def classify_domain_word(domain: str, dictionary: Dictionary) -> Tuple[int, int, int, int]:
    """
    (is_english, is_meaningful, is_pronounceable, is_random) for a domain label.

    Exactly one of the last three flags is set.
    """
    if dictionary is None or len(dictionary) == 0:
        raise EmptyDictionary("dictionary has no entries")
    domain = (domain or "").strip().lower()
    if not domain:
        raise EmptyDomain("domain is empty")

    is_english = 1 if domain in dictionary else 0

    words: List[str] = []
    for part in domain.split("-"):
        if not part:
            continue
        seg = segment_words(part, dictionary)
        if seg is None:
            words = []
            break
        words.extend(seg)

    tags = set()
    for w in words:
        tags |= dictionary.tags(w)
    if tags & MEANINGFUL_POS:
        return is_english, 1, 0, 0
    if tags & PRONOUNCEABLE_POS:
        return is_english, 0, 1, 0
    return is_english, 0, 0, 1


# ---------------------------------------------------------------------------
# Character n-grams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NgramModel:
    """Character n-gram counts over the [a-z0-9-] alphabet."""

    order: int
    counts: Mapping[str, int]
    context_counts: Mapping[str, int]
    total: int
    alphabet_size: int = len(NGRAM_ALPHABET)

    def probability(self, gram: str, smoothed: bool = True) -> float:
        ctx = self.context_counts.get(gram[:-1], 0)
        hits = self.counts.get(gram, 0)
        if smoothed:
            return (hits + 1) / (ctx + self.alphabet_size)
        return hits / ctx if ctx else 0.0

    @property
    def floor(self) -> float:
        return math.log(1.0 / self.alphabet_size)


def _clean(text: str) -> str:
    return "".join(c for c in text.lower() if c in NGRAM_ALPHABET)


def _grams(word: str, order: int) -> List[str]:
    padded = NGRAM_PAD * (order - 1) + word
    return [padded[i:i + order] for i in range(len(word))]


def ngram_train(corpus: Sequence[str], order: int) -> NgramModel:
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    cleaned = [_clean(w) for w in corpus or []]
    cleaned = [w for w in cleaned if w]
    if not cleaned:
        raise EmptyCorpus("n-gram corpus is empty")
    counts: Counter = Counter()
    contexts: Counter = Counter()
    for word in cleaned:
        for gram in _grams(word, order):
            counts[gram] += 1
            contexts[gram[:-1]] += 1
    return NgramModel(order, dict(counts), dict(contexts), sum(counts.values()))


def ngram_score(model: NgramModel, domain: str) -> float:
    """Mean add-one-smoothed log-probability per n-gram."""
    word = _clean(domain or "")
    if len(word) < model.order:
        return model.floor
    grams = _grams(word, model.order)
    return sum(math.log(model.probability(g)) for g in grams) / len(grams)


# ---------------------------------------------------------------------------
# Word lists
# ---------------------------------------------------------------------------


def sensitive_and_suspicious(
    domain_and_path: str,
    sensitive_words: Sequence[str],
    suspicious_domains: Iterable[str],
) -> Tuple[int, int]:
    """(SensitiveWordCount, InSuspiciousList) for host+path text."""
    text = (domain_and_path or "").lower()
    count = sum(text.count(w.lower()) for w in sensitive_words if w)
    host = text.split("/", 1)[0]
    listed = any(host == d or host.endswith("." + d) for d in suspicious_domains)
    return count, 1 if listed else 0


@dataclass(frozen=True)
class LexicalResources:
    """Bundled snapshots the lexical extractor depends on."""

    suffixes: SuffixTable
    dictionary: Dictionary
    sensitive_words: Tuple[str, ...]
    suspicious_domains: FrozenSet[str]
    anonymous_words: Tuple[str, ...]
    ngrams: Dict[int, NgramModel] = field(default_factory=dict)

    @classmethod
    def load(cls, resources_dir: Optional[str] = None) -> "LexicalResources":
        root = Path(resources_dir or settings.RESOURCES_DIR)
        dictionary = Dictionary.load(root / "dictionary.tsv")
        corpus = dictionary.words()
        res = cls(
            suffixes=SuffixTable.load(root / "public_suffix.dat"),
            dictionary=dictionary,
            sensitive_words=tuple(w.lower() for w in _read_lines(root / "sensitive_words.txt")),
            suspicious_domains=frozenset(d.lower() for d in _read_lines(root / "suspicious_domains.txt")),
            anonymous_words=tuple(w.lower() for w in _read_lines(root / "anonymous_words.txt")),
            ngrams={order: ngram_train(corpus, order) for order in (1, 2, 3)},
        )
        logger.debug(
            "Loaded lexical resources: %d words, %d suffixes (%s)",
            len(dictionary), len(res.suffixes.suffixes), res.suffixes.version,
        )
        return res


@lru_cache(maxsize=4)
def default_resources(resources_dir: Optional[str] = None) -> LexicalResources:
    return LexicalResources.load(resources_dir)


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def dist_digit_alphabet(text: str) -> float:
    """Mean index gap between each digit and its nearest ASCII letter (0 without both)."""
    letters = [i for i, c in enumerate(text) if c.isascii() and c.isalpha()]
    digits = [i for i, c in enumerate(text) if c.isascii() and c.isdigit()]
    if not letters or not digits:
        return 0.0
    total = 0
    j = 0
    for d in digits:
        while j + 1 < len(letters) and letters[j + 1] < d:
            j += 1
        gap = abs(d - letters[j])
        if j + 1 < len(letters):
            gap = min(gap, abs(letters[j + 1] - d))
        total += gap
    return total / len(digits)


def file_extension(path: str) -> str:
    last = path.rsplit("/", 1)[-1]
    m = _FILE_EXT_RE.search(last)
    return m.group(1).lower() if m else ""


def _after_scheme(text: str, u: ParsedUrl) -> str:
    if u.scheme:
        idx = text.find("://")
        if idx != -1:
            return text[idx + 3:]
    return text


def extract_linguistic(u: ParsedUrl, raw: str, tld_table: SuffixTable, anonymous_words: Sequence[str] = ()) -> Dict[str, object]:
    """Rows 1-40. Character counts run over the raw string, lengths over parsed fields."""
    text = raw.strip()
    lower = text.lower()
    n = len(text)

    digits = sum(1 for c in text if c.isascii() and c.isdigit())
    letters = sum(1 for c in text if c.isascii() and c.isalpha())
    upper = sum(1 for c in text if c.isascii() and c.isupper())
    lower_count = sum(1 for c in text if c.isascii() and c.islower())
    special = n - digits - letters

    ext = file_extension(u.path)
    sub_labels = u.subdomain.split(".") if u.subdomain else []
    path_tlds = [m.group(1) for m in _PATH_TLD_RE.finditer(u.path.lower())]

    values = {
        "URLLength": n,
        "CheckIPAsHostName": int(u.is_ip_host),
        "CheckEXE": int(".exe" in lower),
        "DigitAlphabetRatio": _ratio(digits, letters),
        "SpecialcharAlphabetRatio": _ratio(special, letters),
        "UppercaseLowercaseRatio": _ratio(upper, lower_count),
        "DomainURLRatio": _ratio(len(u.host), n),
        "NumericCharCount": digits,
        "EnglishLetterCount": letters,
        "SpecialCharCount": special,
        "DotCount": text.count("."),
        "SemiColCount": text.count(";"),
        "UnderscoreCount": text.count("_"),
        "QuesMarkCount": text.count("?"),
        "HashCharCount": text.count("#"),
        "EqualCount": text.count("="),
        "PercentCharCount": text.count("%"),
        "AmpersandCount": text.count("&"),
        "DashCharCount": text.count("-"),
        "DelimiterCount": sum(1 for c in text if c in DELIMITERS),
        "AtCharCount": text.count("@"),
        "TildeCharCount": text.count("~"),
        "DoubleSlashCount": _after_scheme(text, u).count("//"),
        "IsHashed": int(bool(_HEX_TOKEN_RE.search(u.path))),
        "TLD": u.tld or "",
        "DistDigitAlphabet": dist_digit_alphabet(text),
        "HttpsInUrl": int("https" in lower),
        "FileExtension": ext,
        "TLDInSubdomain": int(any(label in tld_table for label in sub_labels if label != "www")),
        "TLDInPath": int(any(t in tld_table for t in path_tlds)),
        "HttpsInHostName": int("https" in u.host),
        "HostNameLength": len(u.host),
        "PathLength": len(u.path),
        "QueryLength": len(u.query),
        "DistWordBased": int(any(w in lower for w in anonymous_words)),
        "URLWithoutwww": int("www" not in u.host),
        "FTPUsed": int("ftp://" in lower),
        "JSUsed": int(bool(_JS_RE.search(text))),
        "FilesInURL": int(bool(ext)),
        "CSSUsed": int(bool(_CSS_RE.search(text))),
    }
    return {name: values[name] for name in LINGUISTIC_NAMES}


def extract_lexical(
    raw: str,
    resources: Optional[LexicalResources] = None,
    parsed: Optional[ParsedUrl] = None,
) -> LexicalFeatures:
    """All 49 lexical slots for one URL."""
    res = resources or default_resources()
    u = parsed or parse_url(raw, res.suffixes)
    values = extract_linguistic(u, raw, res.suffixes, res.anonymous_words)

    english, meaningful, pronounceable, random_ = classify_domain_word(u.domain, res.dictionary)
    sensitive, suspicious = sensitive_and_suspicious(
        u.host + u.path, res.sensitive_words, res.suspicious_domains
    )
    values.update({
        "IsDomainEnglishWord": english,
        "IsDomainMeaningful": meaningful,
        "IsDomainPronounceable": pronounceable,
        "IsDomainRandom": random_,
        "Unigram": ngram_score(res.ngrams[1], u.domain),
        "Bigram": ngram_score(res.ngrams[2], u.domain),
        "Trigram": ngram_score(res.ngrams[3], u.domain),
        "SensitiveWordCount": sensitive,
        "InSuspiciousList": suspicious,
    })
    return LexicalFeatures(values)
