"""Typed exceptions shared across the package."""


class FirmFactsError(Exception):
    """Base class for all package errors."""

    code = "EGENERIC"


class ParameterError(FirmFactsError, ValueError):
    """Distribution parameters violate their domain (e.g. sigma <= 0)."""

    code = "EPARAM"


class DomainError(FirmFactsError, ValueError):
    """Function argument outside its mathematical domain."""

    code = "EDOMAIN"


class ZeroDenominatorError(DomainError):
    """Net value is zero, so the generalized growth rate is undefined."""

    code = "EZERODEN"


class UndefinedGrowthError(DomainError):
    """A component is zero at exactly one of the two dates."""

    code = "EGROWTH"


class UndefinedMomentError(FirmFactsError):
    """Requested moment does not exist for this distribution."""

    code = "EMOMENT"


class UnsupportedMethodError(FirmFactsError):
    """Fitting method not available for the requested family."""

    code = "EMETHOD"


class DegenerateSampleError(FirmFactsError, ValueError):
    """Sample carries no usable variation (e.g. all values equal)."""

    code = "EDEGEN"


class DegenerateGroupError(DegenerateSampleError):
    """A year or bin has too little variation; carries the group label."""

    code = "EGROUP"

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group


class SampleSizeError(FirmFactsError, ValueError):
    """Too few observations for the requested operation."""

    code = "ESIZE"


class NumericalError(FirmFactsError):
    """Numerical routine failed to reach its target tolerance."""

    code = "ENUMERIC"

    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class CalibrationError(FirmFactsError):
    """Too many bootstrap replicates failed to fit."""

    code = "ECALIB"


class CoverageError(FirmFactsError, KeyError):
    """A required year/date is not covered by the supplied series."""

    code = "ECOVER"


class SchemaError(FirmFactsError, ValueError):
    """Input file does not match the documented schema."""

    code = "ESCHEMA"

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(FirmFactsError, ValueError):
    """Invalid run or generator configuration."""

    code = "ECONFIG"
