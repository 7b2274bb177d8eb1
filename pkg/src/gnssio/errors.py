"""Exception hierarchy shared by all gnssio modules."""


class GnssioError(Exception):
    """Base class for every error raised by this package."""


class MissingHeader(GnssioError):
    """The CSV file has no header row."""


class UnknownColumn(GnssioError):
    """A required column is absent from the CSV header."""


class RowParseError(GnssioError):
    """A single malformed data row. Collected per row, not raised."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
        self.message = message


class MissingFrequency(GnssioError):
    """Observation has no carrier frequency, so no satellite key exists."""


class EmptyEpoch(GnssioError):
    """An epoch with zero observations cannot be featurized or predicted."""


class EmptyTrainingSet(GnssioError):
    """Training requires at least one sample/session."""


class OneClassOnly(GnssioError):
    """Both classes are required but only one is present."""


class ZeroTotal(GnssioError):
    """Accuracy is undefined when the total sample count is zero."""


class MissingGroup(GnssioError):
    """The manifest lacks a dataset group the scenario requires."""


class FeatureModeMismatch(GnssioError):
    """Model was trained with a different feature mode than requested."""


class ModelSchemaMismatch(GnssioError):
    """Model file is corrupt, has a wrong version, or an incompatible feature order."""


class InvalidConfig(GnssioError):
    """A configuration value is out of its allowed range."""
