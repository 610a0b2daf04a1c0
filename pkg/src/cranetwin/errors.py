"""Exception hierarchy shared by all crane twin components."""


class CraneTwinError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CraneTwinError, ValueError):
    """An argument is outside the physically or logically valid domain."""


class SingularityError(DomainError):
    """The plant model is evaluated at a singular configuration (e.g. rope length <= 0)."""


class NumericalError(CraneTwinError, ArithmeticError):
    """Integration produced a non-finite value. The message names the offending field."""


class StateError(CraneTwinError, RuntimeError):
    """The command is not valid in the crane's current state (e.g. not homed)."""


class BusyError(StateError):
    """A motion command arrived while another run is in progress."""


class NotFoundError(CraneTwinError, KeyError):
    """A requested run, trace or report does not exist."""

    def __str__(self) -> str:  # KeyError quotes its args; keep plain messages
        return Exception.__str__(self)


class ConflictError(CraneTwinError):
    """A record with the same identity already exists."""


class StorageError(CraneTwinError, OSError):
    """The historian could not persist or read data."""


class ProtocolError(CraneTwinError):
    """A malformed bus frame, topic or subscription pattern."""


class BusConnectionError(CraneTwinError, ConnectionError):
    """The bus client is not connected to a broker."""
