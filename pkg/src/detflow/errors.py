"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DetflowError(Exception):
    exit_code = 3


class ShapeError(DetflowError, ValueError):
    """Operand dimensions or moduli do not match."""


class ModelError(DetflowError):
    """Operation requested on the wrong network model (linear vs general)."""


class NotLayeredError(DetflowError):
    """Operation requires a layered network."""


class NetworkError(DetflowError):
    """Network violates a structural invariant."""


class LimitError(DetflowError):
    """An enumeration or runtime budget would be exceeded."""

    exit_code = 4


class DocumentError(DetflowError):
    """Malformed network document (syntax or schema)."""

    exit_code = 2

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
