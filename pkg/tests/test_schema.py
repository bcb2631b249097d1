import pytest

from core.errors import SchemaMismatch
from core.schema import (
    CATEGORY_SLOTS,
    FEATURE_SCHEMA,
    LEXICAL_NAMES,
    WEB_NAMES,
    CategoryVocabulary,
    FeatureRecord,
    FeatureVector,
    LexicalFeatures,
    WebFeatures,
    assemble_feature_vector,
)


def _lex(**overrides):
    values = {name: 0 for name in LEXICAL_NAMES}
    values.update({"TLD": "com", "FileExtension": ""})
    values.update(overrides)
    return LexicalFeatures(values)


def test_schema_has_89_slots_in_table_order():
    assert len(FEATURE_SCHEMA) == 89
    assert len(LEXICAL_NAMES) == 49
    assert len(WEB_NAMES) == 40
    assert FEATURE_SCHEMA.names[0] == "URLLength"
    assert FEATURE_SCHEMA.names[48] == "InSuspiciousList"
    assert FEATURE_SCHEMA.names[49] == "LevenshteinDistance"
    assert FEATURE_SCHEMA.names[-1] == "ImageOnlyInForm"
    assert CATEGORY_SLOTS == ("TLD", "FileExtension")


def test_schema_hash_is_stable():
    assert FEATURE_SCHEMA.schema_hash() == FEATURE_SCHEMA.schema_hash()
    assert len(FEATURE_SCHEMA.schema_hash()) == 64


def test_assembled_vector_length_is_89():
    v = assemble_feature_vector(_lex(URLLength=51), WebFeatures.missing())
    assert len(v) == 89
    assert v.values[0] == 51.0
    assert v.values[49] == -1.0


def test_vector_json_round_trip():
    v = assemble_feature_vector(_lex(DotCount=3), WebFeatures.missing())
    assert FeatureVector.from_json(v.to_json()) == v


def test_vector_from_other_schema_rejected():
    v = assemble_feature_vector(_lex(), WebFeatures.missing())
    text = v.to_json().replace(v.schema_hash, "0" * 64)
    with pytest.raises(SchemaMismatch):
        FeatureVector.from_json(text)


def test_missing_slot_rejected():
    values = {name: 0 for name in LEXICAL_NAMES[:-1]}
    with pytest.raises(SchemaMismatch):
        LexicalFeatures(values)


def test_swapped_parts_rejected():
    with pytest.raises(SchemaMismatch):
        FeatureRecord.combine(WebFeatures.missing(), _lex())


def test_vocabulary_ranks_by_frequency_and_maps_unseen_to_zero():
    web = WebFeatures.missing()
    records = [
        FeatureRecord.combine(_lex(TLD=t, FileExtension=e), web)
        for t, e in [("com", "php"), ("net", ""), ("com", "html"), ("org", "php"), ("com", "")]
    ]
    vocab = CategoryVocabulary.fit(records)
    assert vocab.encode("TLD", "com") == 1
    assert vocab.encode("TLD", "net") == 2
    assert vocab.encode("TLD", "org") == 3
    assert vocab.encode("TLD", "xyz") == 0
    assert vocab.encode("FileExtension", "php") == 1
    assert vocab.encode("FileExtension", "") == 0

    restored = CategoryVocabulary.from_dict(vocab.to_dict())
    v1 = assemble_feature_vector(_lex(TLD="net"), web, vocab)
    v2 = assemble_feature_vector(_lex(TLD="net"), web, restored)
    assert v1 == v2
    assert v1.values[FEATURE_SCHEMA.index("TLD")] == 2.0
