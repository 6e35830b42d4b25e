"""Threshold secret-sharing elections with an additively homomorphic tally.

Ballots are bit-window encoded, split into per-center shares over a prime
field, accumulated additively by independent collection centers, and tallied
by interpolating the summed shares at zero; no center ever sees a vote.
"""

from .ballot import (
    ElectionConfig,
    EncodedBallot,
    TallyResult,
    decode_tally,
    derive_config,
    encode_vote,
    manual_config,
)
from .center import CollectionCenter, FinalizationRecord
from .field import FieldElement, Prime, smallest_prime_above
from .shamir import (
    FixedCoefficients,
    Polynomial,
    Share,
    SharingPolicy,
    accumulate,
    interpolate_at_zero,
    make_polynomial,
    split,
)
from .tally import TallyReport, compute_result, turnout_check, verify_record

__version__ = "0.1.0"

__all__ = [
    "CollectionCenter",
    "ElectionConfig",
    "EncodedBallot",
    "FieldElement",
    "FinalizationRecord",
    "FixedCoefficients",
    "Polynomial",
    "Prime",
    "Share",
    "SharingPolicy",
    "TallyReport",
    "TallyResult",
    "accumulate",
    "compute_result",
    "decode_tally",
    "derive_config",
    "encode_vote",
    "interpolate_at_zero",
    "make_polynomial",
    "manual_config",
    "smallest_prime_above",
    "split",
    "turnout_check",
    "verify_record",
]
