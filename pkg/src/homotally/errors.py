"""Error types shared across the election pipeline.

Every error carries a stable machine-readable ``code`` (used in wire error
payloads and in the CLI's error lines) and a distinct process exit code so
operators and scripts can tell failure classes apart.
"""


class ProtocolError(Exception):
    code = "error"
    exit_code = 1


class ConfigError(ProtocolError):
    """Malformed or inconsistent election configuration."""

    code = "invalid-config"
    exit_code = 10


class UnsupportedScaleError(ConfigError):
    """Election shape needs a field wider than the supported 64 bits."""

    code = "unsupported-scale"
    exit_code = 11


class FieldMismatchError(ProtocolError):
    """Arithmetic attempted between elements of different fields."""

    code = "field-mismatch"
    exit_code = 12


class InvalidCandidateError(ProtocolError):
    code = "invalid-candidate"
    exit_code = 13


class DuplicateBallotError(ProtocolError):
    code = "duplicate-ballot"
    exit_code = 14


class CapacityError(ProtocolError):
    """More ballots submitted than the election has voters."""

    code = "capacity"
    exit_code = 15


class PhaseError(ProtocolError):
    """Operation not allowed in the center's current lifecycle phase."""

    code = "phase"
    exit_code = 16


class JournalError(ProtocolError):
    """Journal replay hit a corrupt, truncated, or inconsistent entry."""

    code = "journal-integrity"
    exit_code = 17


class RecordIntegrityError(ProtocolError):
    """Finalization record digest does not match its fields."""

    code = "record-integrity"
    exit_code = 18


class RecordAuthenticityError(ProtocolError):
    """Finalization record signature fails under the registered key."""

    code = "record-authenticity"
    exit_code = 19


class InsufficientSharesError(ProtocolError):
    code = "insufficient-shares"
    exit_code = 20


class InconsistentSharesError(ProtocolError):
    """Different share subsets reconstruct different values."""

    code = "inconsistent-subsets"
    exit_code = 21

    def __init__(self, message, divergent=()):
        super().__init__(message)
        self.divergent = tuple(divergent)


class CorruptedTallyError(ProtocolError):
    """Reconstructed tally falls outside the encodable range."""

    code = "corrupted-tally"
    exit_code = 22


class ImplausibleCountError(ProtocolError):
    """Decoded tally claims more votes than there are voters."""

    code = "implausible-count"
    exit_code = 23


class DuplicatePointError(ProtocolError):
    """Interpolation given two shares at the same evaluation point."""

    code = "duplicate-point"
    exit_code = 24


class ServiceError(ProtocolError):
    """Center service failed to start or bind."""

    code = "service"
    exit_code = 25


class WireError(ProtocolError):
    """Malformed or out-of-contract wire message."""

    code = "bad-request"
    exit_code = 26


class UnknownElectionError(ProtocolError):
    code = "unknown-election"
    exit_code = 27
