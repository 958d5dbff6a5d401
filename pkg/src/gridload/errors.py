"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed input: bad config, missing column, unparsable field."""


class DataError(ValueError):
    """Well-formed input that cannot support the requested computation."""
