"""
Feature schema: the 89 slots (49 lexical then 40 web-scrapped), their
subgroups and encodings, plus the containers that carry them between the
extractors, the dataset layer and the models.
"""

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import SchemaMismatch

MISSING = -1

Slot = Union[int, float, str]


@dataclass(frozen=True)
class SlotSpec:
    name: str
    group: str  # lexical | web
    subgroup: str
    encoding: str  # int | binary | float | category


def _specs(group: str, subgroup: str, rows: Sequence[Tuple[str, str]]) -> List[SlotSpec]:
    return [SlotSpec(name, group, subgroup, enc) for name, enc in rows]


_LINGUISTIC = [
    ("URLLength", "int"),
    ("CheckIPAsHostName", "binary"),
    ("CheckEXE", "binary"),
    ("DigitAlphabetRatio", "float"),
    ("SpecialcharAlphabetRatio", "float"),
    ("UppercaseLowercaseRatio", "float"),
    ("DomainURLRatio", "float"),
    ("NumericCharCount", "int"),
    ("EnglishLetterCount", "int"),
    ("SpecialCharCount", "int"),
    ("DotCount", "int"),
    ("SemiColCount", "int"),
    ("UnderscoreCount", "int"),
    ("QuesMarkCount", "int"),
    ("HashCharCount", "int"),
    ("EqualCount", "int"),
    ("PercentCharCount", "int"),
    ("AmpersandCount", "int"),
    ("DashCharCount", "int"),
    ("DelimiterCount", "int"),
    ("AtCharCount", "int"),
    ("TildeCharCount", "int"),
    ("DoubleSlashCount", "int"),
    ("IsHashed", "binary"),
    ("TLD", "category"),
    ("DistDigitAlphabet", "float"),
    ("HttpsInUrl", "binary"),
    ("FileExtension", "category"),
    ("TLDInSubdomain", "binary"),
    ("TLDInPath", "binary"),
    ("HttpsInHostName", "binary"),
    ("HostNameLength", "int"),
    ("PathLength", "int"),
    ("QueryLength", "int"),
    ("DistWordBased", "binary"),
    ("URLWithoutwww", "binary"),
    ("FTPUsed", "binary"),
    ("JSUsed", "binary"),
    ("FilesInURL", "binary"),
    ("CSSUsed", "binary"),
]

_HUMAN_ENGINEERED = [
    ("IsDomainEnglishWord", "binary"),
    ("IsDomainMeaningful", "binary"),
    ("IsDomainPronounceable", "binary"),
    ("IsDomainRandom", "binary"),
    ("Unigram", "float"),
    ("Bigram", "float"),
    ("Trigram", "float"),
    ("SensitiveWordCount", "int"),
    ("InSuspiciousList", "binary"),
]

_DEEP_WEB = [
    ("LevenshteinDistance", "float"),
    ("Entropy", "float"),
    ("Hyphenstring", "int"),
    ("Homoglyph", "int"),
    ("Vowel", "int"),
    ("Bitsquatting", "int"),
    ("InsertionString", "int"),
    ("Omission", "int"),
    ("Repeatition", "int"),
    ("Replacement", "int"),
    ("Subdomain", "int"),
    ("Transposition", "int"),
    ("AdditionString", "int"),
]

_URL_SEGMENTATION = [("GoogleSearchFeature", "int")]

_HOST_BASED = [
    ("IPAddress", "int"),
    ("ASNNumber", "int"),
    ("ASNCountryCode", "int"),
    ("ASN_CIDR", "int"),
    ("ASNPostalCode", "int"),
    ("ASNCreationDate", "int"),
    ("ASNUpdationDate", "int"),
    ("DomainAgeInDays", "int"),
]

_CONTENT_BASED = [
    ("ImgCount", "int"),
    ("TotalLinks", "int"),
    ("NumParameters", "int"),
    ("NumFragments", "int"),
    ("BodyTagCount", "int"),
    ("MetaTagCount", "int"),
    ("DivTagCount", "int"),
    ("FakeLinkInStatusBar", "binary"),
    ("RightClickDisabled", "binary"),
    ("PopUpWindow", "binary"),
    ("CheckMailto", "binary"),
    ("CheckFrametag", "binary"),
    ("TitleCheck", "binary"),
    ("SourceEvalCount", "int"),
    ("SourceEscapeCount", "int"),
    ("SourceExecCount", "int"),
    ("SourceSearchCount", "int"),
    ("ImageOnlyInForm", "binary"),
]


class FeatureSchema:
    """Ordered slot specifications with a stable content hash."""

    def __init__(self, slots: Sequence[SlotSpec]):
        self.slots: Tuple[SlotSpec, ...] = tuple(slots)
        self.names: Tuple[str, ...] = tuple(s.name for s in self.slots)
        self._index = {name: i for i, name in enumerate(self.names)}
        if len(self._index) != len(self.names):
            raise SchemaMismatch("duplicate slot names in schema")

    def __len__(self) -> int:
        return len(self.slots)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaMismatch(f"unknown slot {name!r}") from None

    def names_in(self, group: str) -> Tuple[str, ...]:
        return tuple(s.name for s in self.slots if s.group == group)

    def category_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.slots if s.encoding == "category")

    def schema_hash(self) -> str:
        payload = json.dumps(
            [[s.name, s.group, s.subgroup, s.encoding] for s in self.slots],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self) -> List[Dict[str, str]]:
        return [
            {"name": s.name, "group": s.group, "subgroup": s.subgroup, "encoding": s.encoding}
            for s in self.slots
        ]


FEATURE_SCHEMA = FeatureSchema(
    _specs("lexical", "linguistic", _LINGUISTIC)
    + _specs("lexical", "human_engineered", _HUMAN_ENGINEERED)
    + _specs("web", "deep_web", _DEEP_WEB)
    + _specs("web", "url_segmentation", _URL_SEGMENTATION)
    + _specs("web", "host_based", _HOST_BASED)
    + _specs("web", "content_based", _CONTENT_BASED)
)

LEXICAL_NAMES = FEATURE_SCHEMA.names_in("lexical")
WEB_NAMES = FEATURE_SCHEMA.names_in("web")
LINGUISTIC_NAMES = tuple(n for n, _ in _LINGUISTIC)
HOST_NAMES = tuple(n for n, _ in _HOST_BASED)
CONTENT_NAMES = tuple(n for n, _ in _CONTENT_BASED)
CATEGORY_SLOTS = FEATURE_SCHEMA.category_names()


class _NamedSlots:
    """Fixed set of named slots, kept in schema order."""

    NAMES: Tuple[str, ...] = ()

    def __init__(self, values: Mapping[str, Slot]):
        missing = [n for n in self.NAMES if n not in values]
        extra = [n for n in values if n not in self.NAMES]
        if missing or extra:
            raise SchemaMismatch(
                f"{type(self).__name__}: missing={missing[:5]} unexpected={extra[:5]}"
            )
        self._values: Dict[str, Slot] = {n: values[n] for n in self.NAMES}

    def __getitem__(self, name: str) -> Slot:
        return self._values[name]

    def __len__(self) -> int:
        return len(self.NAMES)

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self._values == other._values

    def __repr__(self) -> str:
        return f"{type(self).__name__}({len(self)} slots)"

    def items(self):
        return self._values.items()

    def to_dict(self) -> Dict[str, Slot]:
        return dict(self._values)


class LexicalFeatures(_NamedSlots):
    NAMES = LEXICAL_NAMES


class WebFeatures(_NamedSlots):
    NAMES = WEB_NAMES

    @classmethod
    def missing(cls) -> "WebFeatures":
        """All slots set to the missing sentinel."""
        return cls({n: MISSING for n in cls.NAMES})


class FeatureRecord(_NamedSlots):
    """All 89 extracted slots; category slots still hold raw strings."""

    NAMES = FEATURE_SCHEMA.names

    @classmethod
    def combine(cls, lex: LexicalFeatures, web: WebFeatures) -> "FeatureRecord":
        if not isinstance(lex, LexicalFeatures) or not isinstance(web, WebFeatures):
            raise SchemaMismatch("expected LexicalFeatures and WebFeatures")
        merged = lex.to_dict()
        merged.update(web.to_dict())
        return cls(merged)

    @classmethod
    def from_dict(cls, data: Mapping[str, Slot]) -> "FeatureRecord":
        return cls(data)


@dataclass(frozen=True)
class FeatureVector:
    """Numeric 89-slot vector tagged with the schema it was built against."""

    values: Tuple[float, ...]
    schema_hash: str

    def __post_init__(self):
        if len(self.values) != len(FEATURE_SCHEMA):
            raise SchemaMismatch(f"expected {len(FEATURE_SCHEMA)} slots, got {len(self.values)}")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_json(self) -> str:
        return json.dumps({"schema_hash": self.schema_hash, "values": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "FeatureVector":
        data = json.loads(text)
        vector = cls(tuple(float(v) for v in data["values"]), data["schema_hash"])
        if vector.schema_hash != FEATURE_SCHEMA.schema_hash():
            raise SchemaMismatch("vector was built against a different schema")
        return vector

    @classmethod
    def from_array(cls, arr: Iterable[float]) -> "FeatureVector":
        return cls(tuple(float(v) for v in arr), FEATURE_SCHEMA.schema_hash())


class CategoryVocabulary:
    """
    Integer ids for the string-typed slots (TLD, FileExtension).

    Ids are frequency-ranked from 1 on the fitting rows (ties broken
    alphabetically); unseen or empty values map to 0.
    """

    def __init__(self, ids: Optional[Dict[str, Dict[str, int]]] = None):
        self.ids: Dict[str, Dict[str, int]] = {
            slot: dict((ids or {}).get(slot, {})) for slot in CATEGORY_SLOTS
        }

    @classmethod
    def fit(cls, records: Iterable[FeatureRecord]) -> "CategoryVocabulary":
        counters = {slot: Counter() for slot in CATEGORY_SLOTS}
        for rec in records:
            for slot in CATEGORY_SLOTS:
                value = rec[slot]
                if isinstance(value, str) and value:
                    counters[slot][value] += 1
        ids = {}
        for slot, counter in counters.items():
            ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
            ids[slot] = {value: rank for rank, (value, _) in enumerate(ranked, start=1)}
        return cls(ids)

    def encode(self, slot: str, value: Slot) -> int:
        if not isinstance(value, str):
            return 0
        return self.ids.get(slot, {}).get(value, 0)

    def to_dict(self) -> Dict[str, Dict[str, int]]:
        return {slot: dict(sorted(m.items())) for slot, m in self.ids.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, int]]) -> "CategoryVocabulary":
        return cls({k: {v: int(i) for v, i in m.items()} for k, m in data.items()})


def record_to_vector(record: FeatureRecord, vocabulary: Optional[CategoryVocabulary] = None) -> FeatureVector:
    """Numericize a record; category slots go through the vocabulary (0 without one)."""
    vocab = vocabulary or CategoryVocabulary()
    values = []
    for spec in FEATURE_SCHEMA.slots:
        raw = record[spec.name]
        if spec.encoding == "category":
            values.append(float(vocab.encode(spec.name, raw)))
        else:
            values.append(float(raw))
    return FeatureVector(tuple(values), FEATURE_SCHEMA.schema_hash())


def assemble_feature_vector(
    lex: LexicalFeatures,
    web: WebFeatures,
    vocabulary: Optional[CategoryVocabulary] = None,
) -> FeatureVector:
    """Lexical slots then web slots, 89 in total."""
    return record_to_vector(FeatureRecord.combine(lex, web), vocabulary)


def records_to_matrix(
    records: Sequence[FeatureRecord], vocabulary: Optional[CategoryVocabulary] = None
) -> np.ndarray:
    if not records:
        return np.zeros((0, len(FEATURE_SCHEMA)))
    return np.vstack([record_to_vector(r, vocabulary).as_array() for r in records])
