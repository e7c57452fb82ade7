"""Exception types shared across the package."""


class GridFileError(ValueError):
    """A grid file could not be parsed.

    ``line`` is the 1-based line number of the offending row, or None when
    the problem is not tied to a single line (e.g. an empty file).
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    """An experiment config file is missing, malformed, or inconsistent."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        parts = []
        if key is not None:
            parts.append(f"key '{key}'")
        if line is not None:
            parts.append(f"line {line}")
        if parts:
            message = f"{message} ({', '.join(parts)})"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """A simulation or training run produced exploding / non-finite values."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class SelectionError(RuntimeError):
    """A lag or dimension could not be selected from the computed profiles."""
