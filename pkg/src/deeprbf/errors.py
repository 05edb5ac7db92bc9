"""Exception types raised across the package."""


class RbfError(Exception):
    """Base class for every domain error raised by deeprbf."""


class DimensionError(RbfError, ValueError):
    """Array shapes or dimensions are incompatible."""


class ConfigError(RbfError, ValueError):
    """A configuration value violates its contract."""


class ChromosomeError(RbfError, ValueError):
    """A chromosome does not match the network layout it is decoded against."""


class LabelError(RbfError, ValueError):
    """Target labels do not follow the expected encoding."""


class NonFiniteLossError(RbfError, ArithmeticError):
    def __init__(self, epoch, value):
        self.epoch = epoch
        self.value = value
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}")


class DataError(RbfError, ValueError):
    """A data row or field is malformed; carries the row number and field name when known."""

    def __init__(self, message, row=None, field=None):
        self.row = row
        self.field = field
        where = []
        if row is not None:
            where.append(f"row {row}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MissingArtifactError(RbfError, FileNotFoundError):
    """A file produced by an earlier pipeline step is absent."""
