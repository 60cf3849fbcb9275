"""Shared exception types with CLI exit-code mapping."""


class RsnsError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RsnsError):
    """Invalid or unknown configuration (exit code 2)."""

    exit_code = 2


class BudgetError(RsnsError):
    """A resource budget (memory, transform size) would be exceeded (exit code 3)."""

    exit_code = 3


class InstabilityError(RsnsError):
    """The integrator rejected a step on a conserved-quantity drift check (exit code 4)."""

    exit_code = 4


class SnapshotFormatError(RsnsError):
    """Snapshot file is malformed, truncated, or fails its integrity check."""

    exit_code = 2
