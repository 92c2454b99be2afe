"""Shared exception types."""


class PoolmapError(Exception):
    """Base class for package-specific failures."""


class ConfigError(PoolmapError, ValueError):
    """A configuration value violates its documented constraints."""


class CsvFormatError(PoolmapError, ValueError):
    """A CSV file does not match the documented schema."""


class NumericError(PoolmapError, RuntimeError):
    """Training produced a non-finite quantity."""
