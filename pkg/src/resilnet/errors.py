"""Exception types shared across the toolkit.

Each class carries a short machine-readable ``category`` used by the CLI
to report structured failures.
"""


class ResilnetError(Exception):
    category = "error"


class ConfigurationError(ResilnetError):
    """Malformed or inconsistent run configuration (bad field, misaligned steps)."""

    category = "configuration"


class CapabilityError(ResilnetError):
    """Request exceeds an exact-computation cap (caller should use certificates)."""

    category = "capability"


class DesignFailureError(ResilnetError):
    """Observer gain design could not certify stability."""

    category = "design-failure"
