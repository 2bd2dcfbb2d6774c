"""Shared error types."""


class ValidationError(ValueError):
    """Raised when an input file or record violates a documented format contract.

    The message always names the offending file, line, id or field so the CLI
    can surface it verbatim.
    """
