"""
Exception hierarchy for the Malicious Ad URL Detector.

Every error carries a short machine-readable ``code`` used by the CLI when it
reports a failure on stderr.
"""


class DetectorError(Exception):
    """Base class for all detector errors."""

    code: str = "DetectorError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- URL parsing ---


class UnparsableUrl(DetectorError):
    code = "UnparsableUrl"


class NoKnownTld(DetectorError):
    code = "NoKnownTld"


# --- Lexical features ---


class EmptyDomain(DetectorError):
    code = "EmptyDomain"


class EmptyDictionary(DetectorError):
    code = "EmptyDictionary"


class EmptyCorpus(DetectorError):
    code = "EmptyCorpus"


# --- Web features / providers ---


class EmptyString(DetectorError):
    code = "EmptyString"


class UnknownKind(DetectorError):
    code = "UnknownKind"


class ProviderUnavailable(DetectorError):
    code = "ProviderUnavailable"


class FixtureMissing(ProviderUnavailable):
    """Replay store has no entry for the requested key."""

    code = "FixtureMissing"


class FetchFailed(ProviderUnavailable):
    code = "FetchFailed"


class NoRecord(ProviderUnavailable):
    code = "NoRecord"


class SchemaMismatch(DetectorError):
    code = "SchemaMismatch"


# --- Datasets ---


class MissingColumn(DetectorError):
    code = "MissingColumn"


class EmptyFile(DetectorError):
    code = "EmptyFile"


class InsufficientRows(DetectorError):
    code = "InsufficientRows"


class NoFeatures(DetectorError):
    code = "NoFeatures"


class TooFewRows(DetectorError):
    code = "TooFewRows"


# --- Models / evaluation / clustering / attack ---


class SingleClass(DetectorError):
    code = "SingleClass"


class EmptyMatrix(DetectorError):
    code = "EmptyMatrix"


class TooFewPoints(DetectorError):
    code = "TooFewPoints"


class InvalidClass(DetectorError):
    code = "InvalidClass"


class OracleFailure(DetectorError):
    code = "OracleFailure"


# --- CLI ---


class ConfigInvalid(DetectorError):
    code = "ConfigInvalid"


class InputMissing(DetectorError):
    code = "InputMissing"
