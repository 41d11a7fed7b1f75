"""Exception types shared across the toolkit."""


class EosscanError(Exception):
    """Base class for all toolkit errors."""


class MalformedBinary(EosscanError):
    """The input is not a well-formed Wasm binary."""


class UnsupportedVersion(MalformedBinary):
    """The binary magic is valid but the version word is not supported."""


class UnresolvableBranch(EosscanError):
    """A branch depth exceeds the nesting it appears in."""


class UnknownBlock(EosscanError):
    """A basic-block id that does not exist in the graph."""


class WidthMismatch(EosscanError):
    """Bitvector operand widths are inconsistent for the operation."""


class AddressOverflow(EosscanError):
    """A memory access falls outside the linear-memory bound."""


class MemoryAuditError(EosscanError):
    """The symbolic-memory key space violates its invariants."""


class UnsupportedInstruction(EosscanError):
    """Opcode outside the implemented integer/control/memory subset."""

    def __init__(self, name, byte_offset=None):
        self.name = name
        self.byte_offset = byte_offset
        super().__init__(f"unsupported instruction {name!r}")


class EmulationException(EosscanError):
    """An emulated host function hit undefined behavior; the path dies."""


class NoDispatcher(EosscanError):
    """The module exports no usable entry function."""


class InvalidName(EosscanError):
    """A string is not a valid 64-bit account/action name."""


class MalformedLog(EosscanError):
    """A transaction-log line violates the record schema."""
