"""Shared error type carrying a stable machine-readable code."""


class PlannerError(ValueError):
    """Raised on contract violations; ``code`` is a stable kebab-case identifier."""

    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code
