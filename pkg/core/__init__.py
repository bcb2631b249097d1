"""
Malicious Ad URL Detector - Core Module

Feature extraction, tree ensembles, evaluation, clustering and the ZOO attack.
Use lazy imports to avoid loading heavy deps when not needed.
"""

_EXPORTS = {
    "parse_url": "core.url_model",
    "extract_lexical": "core.features_lexical",
    "extract_web": "core.features_web",
    "assemble_feature_vector": "core.schema",
    "synthesize_corpus": "core.dataset",
    "train_model": "core.ensembles",
    "predict_proba": "core.ensembles",
    "eval_matched": "core.evalx",
    "eval_mismatched": "core.evalx",
    "elbow_scan": "core.clusterer",
    "attack_adam_scd": "core.zoo",
    "attack_scd": "core.zoo",
}


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        return getattr(importlib.import_module(_EXPORTS[name]), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = list(_EXPORTS)
