"""Exception hierarchy shared across the package."""


class VmBanditError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VmBanditError, ValueError):
    """Invalid parameters, fleet definitions or configuration files."""


class DataError(VmBanditError, ValueError):
    """Malformed or out-of-range data (rewards, CSV cells, report files)."""


class SequencingError(VmBanditError, ValueError):
    """Step records appended out of order."""


class AggregationError(VmBanditError, ValueError):
    """Run logs that cannot be merged together."""


class SizeError(VmBanditError, ValueError):
    """Instance too large for exhaustive enumeration."""


class UnsupportedOperationError(VmBanditError, TypeError):
    """Operation not defined for the fleet's reward model."""
