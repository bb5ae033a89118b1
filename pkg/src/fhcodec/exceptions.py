"""Exception hierarchy shared across the package."""


class FhcodecError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FhcodecError):
    """Invalid or inconsistent scenario configuration."""


class NumericalError(FhcodecError):
    """A numerical routine failed to produce a usable result."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization hit a non-positive (or NaN) pivot."""


class ChannelFileError(FhcodecError):
    """Malformed channel file; ``byte_offset`` locates the problem."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class FrameParseError(FhcodecError):
    """Malformed compressed frame; offsets locate the problem."""

    def __init__(self, message: str, byte_offset: int | None = None,
                 bit_offset: int | None = None):
        where = []
        if byte_offset is not None:
            where.append(f"byte offset {byte_offset}")
        if bit_offset is not None:
            where.append(f"bit offset {bit_offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.byte_offset = byte_offset
        self.bit_offset = bit_offset
