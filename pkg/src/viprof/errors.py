"""Exception hierarchy shared across the toolkit."""


class ViprofError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ViprofError):
    """Malformed, inconsistent, or missing input data."""


class CapabilityUnavailable(ViprofError):
    """An optional runtime capability (e.g. neural inference) is not installed."""
