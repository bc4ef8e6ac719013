"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so procedures and parsers
should raise the most specific one that applies.
"""


class ConfigError(ValueError):
    """A procedure, series, or experiment configuration is invalid."""


class StreamError(ValueError):
    """An input record (p-value, batch id, label) is malformed."""


class BudgetError(RuntimeError):
    """A runtime budget invariant was violated (scheduler bug or bad schedule)."""


class AuditError(RuntimeError):
    """A completed trace failed its prefix budget audit."""
