class RetbiasError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RetbiasError):
    """Invalid or unresolvable experiment configuration."""


class DataError(RetbiasError):
    """Malformed or inconsistent input data."""


class FingerprintMismatch(DataError):
    def __init__(self, what: str, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(f"{what} fingerprint mismatch: index has {expected}, input has {found}")
