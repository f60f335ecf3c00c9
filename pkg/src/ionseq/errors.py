"""Exception types shared across the package."""


class IonSeqError(Exception):
    """Base class for all package errors."""


class FieldRangeError(IonSeqError, ValueError):
    """A value does not fit the bit width of the field it is written to."""

    def __init__(self, field, value, bits=None, detail=""):
        self.field = field
        self.value = value
        msg = f"{field}={value!r} out of range"
        if bits is not None:
            msg += f" for {bits}-bit field"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CapacityError(IonSeqError):
    """A table or word has no room for the requested entries."""

    def __init__(self, table, requested, capacity):
        self.table = table
        self.requested = requested
        self.capacity = capacity
        super().__init__(f"{table} capacity exceeded: {requested} > {capacity}")


class WordFormatError(IonSeqError, ValueError):
    """A 256-bit block does not decode to any known word variant."""


class GateLookupError(IonSeqError, LookupError):
    """A gate, LUT entry or parameter is not defined."""


class ConfigError(IonSeqError, ValueError):
    """Invalid run or model configuration."""
