"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input file. ``row`` is the 1-based data row, when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class LabelError(ValueError):
    pass


class DomainError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class UnsupportedCertificate(ValueError):
    pass
