"""Exception types shared across the package.

Keeping these in one module lets the CLI map error classes onto exit codes
without importing every subsystem.
"""


class DgmsimError(Exception):
    """Base class for all package errors."""


class ConfigError(DgmsimError):
    """A study configuration is malformed or has unresolved cross-references."""


class TaxonomyError(DgmsimError):
    """A component declaration violates the taxonomy rules."""


class SelectionError(DgmsimError):
    """Dataset screening or subset-rule application failed."""


class InferenceError(DgmsimError):
    """Parameter inference from a selected dataset failed."""


class EngineError(DgmsimError):
    """Replication-engine validation or execution failed."""
