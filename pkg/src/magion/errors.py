"""Exception hierarchy.

Every error carries a short ``code`` string so the CLI (and callers that log
failures) can tell failure classes apart without parsing messages.
"""


class MagionError(Exception):
    code = "error"


class InvalidProfileError(MagionError, ValueError):
    """A dot profile violates its probability invariants."""

    code = "invalid-profile"


class EmptyDeviceError(MagionError, ValueError):
    code = "empty-device"


class UnknownCircuitError(MagionError, KeyError):
    code = "unknown-circuit"


class UnsupportedProtocolError(MagionError, ValueError):
    """Gating protocol outside the supported set (only negative voltages activate)."""

    code = "unsupported-protocol"


class MajorityTieError(MagionError, ValueError):
    """SD and vortex counts are equal, so the majority state is undefined."""

    code = "majority-tie"


class InactiveDotError(MagionError, ValueError):
    """A challenged dot reads as paramagnetic OFF: either never gated or tampered with."""

    code = "tamper-or-inactive"


class ChallengeError(MagionError, ValueError):
    code = "invalid-challenge"


class MappingError(MagionError, ValueError):
    code = "invalid-mapping"


class SchemaError(MagionError, ValueError):
    code = "schema-violation"


class ChecksumError(MagionError, ValueError):
    code = "checksum-mismatch"
