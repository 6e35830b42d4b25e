"""Election parameterization and the bit-window vote encoding.

A vote for candidate k is the field element 2^((k-1)*w), giving every
candidate a private w-bit counter window inside one number. Summing the
encoded ballots (mod p) counts every candidate at once, provided p is large
enough that no reachable tally wraps; derive_config enforces that bound.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .errors import (
    ConfigError,
    CorruptedTallyError,
    FieldMismatchError,
    ImplausibleCountError,
    InvalidCandidateError,
    UnsupportedScaleError,
)
from .field import FieldElement, Prime, is_prime, smallest_prime_above
from .shamir import SharingPolicy

# Largest supported field: residues and packed tallies must fit in 64 bits,
# matching the wire format's promise and any fixed-width implementation.
MAX_FIELD_BITS = 64

_PUBLIC_KEY_FIELD = "center_public_keys"


def window_width_for(voter_count: int) -> int:
    """Bits needed to count up to voter_count votes: floor(log2 n) + 1."""
    if voter_count < 1:
        raise ConfigError("voter_count must be >= 1")
    return voter_count.bit_length()


def _check_candidates(candidates: Sequence[str]) -> tuple[str, ...]:
    names = tuple(candidates)
    if not names:
        raise ConfigError("need at least one candidate")
    if any(not isinstance(name, str) or not name.strip() for name in names):
        raise ConfigError("candidate names must be non-empty strings")
    if len(set(names)) != len(names):
        raise ConfigError("candidate names must be unique")
    return names


@dataclass(frozen=True)
class ElectionConfig:
    """Full election parameters, including the officer-secret eval points.

    Construction checks well-formedness. It does not re-check the strict
    every-tally-representable field bound, so configurations with hand-picked
    small fields can be loaded and operated; derive_config is the strict path.
    """

    election_id: str
    candidates: tuple[str, ...]
    voter_count: int
    window_width: int
    prime: Prime
    policy: SharingPolicy

    def __post_init__(self):
        _check_candidates(self.candidates)
        if self.voter_count < 1:
            raise ConfigError("voter_count must be >= 1")
        if self.window_width != window_width_for(self.voter_count):
            raise ConfigError(
                f"window_width {self.window_width} does not fit {self.voter_count} voters"
            )
        p = self.prime.value
        if self.policy.modulus != p:
            raise ConfigError("evaluation points live in a different field")
        if self.policy.center_count >= p:
            raise ConfigError("field too small for the number of centers")
        # Every single-ballot code must itself be a field element.
        if self.largest_code >= p:
            raise ConfigError(
                f"field size {p} cannot represent the candidate codes (max {self.largest_code})"
            )

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)

    @property
    def threshold(self) -> int:
        return self.policy.threshold

    @property
    def center_count(self) -> int:
        return self.policy.center_count

    @property
    def packed_bits(self) -> int:
        return self.candidate_count * self.window_width

    @property
    def max_packed(self) -> int:
        return (1 << self.packed_bits) - 1

    @property
    def largest_code(self) -> int:
        return 1 << ((self.candidate_count - 1) * self.window_width)

    def meets_tally_bound(self) -> bool:
        """True when every reachable tally is representable: p > 2^(m*w) - 1."""
        return self.prime.value > self.max_packed


@dataclass(frozen=True)
class PublicElection:
    """The center-facing view of an election: everything but the eval points."""

    election_id: str
    candidates: tuple[str, ...]
    voter_count: int
    window_width: int
    prime: Prime
    threshold: int
    center_count: int
    center_public_keys: Mapping[int, str]

    def __post_init__(self):
        _check_candidates(self.candidates)
        if self.voter_count < 1:
            raise ConfigError("voter_count must be >= 1")
        if self.window_width != window_width_for(self.voter_count):
            raise ConfigError(
                f"window_width {self.window_width} does not fit {self.voter_count} voters"
            )
        if not 1 <= self.threshold <= self.center_count:
            raise ConfigError(
                f"threshold {self.threshold} incompatible with {self.center_count} centers"
            )
        if self.center_count >= self.prime.value:
            raise ConfigError("field too small for the number of centers")

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)

    @property
    def packed_bits(self) -> int:
        return self.candidate_count * self.window_width

    @property
    def max_packed(self) -> int:
        return (1 << self.packed_bits) - 1


AnyConfig = Union[ElectionConfig, PublicElection]


@dataclass(frozen=True)
class EncodedBallot:
    """One vote packed as a field element: 2^((k-1)*w) for candidate k."""

    value: FieldElement


@dataclass(frozen=True)
class TallyResult:
    """Per-candidate counts unpacked from one reconstructed field element."""

    counts: tuple[int, ...]
    raw_decoded: FieldElement


def derive_config(
    candidates: Sequence[str],
    voter_count: int,
    threshold: int,
    center_count: int,
    rng: random.Random | None = None,
    election_id: str | None = None,
    prime: int | None = None,
) -> ElectionConfig:
    """Build a fully-checked election: window width, field, and eval points.

    The field must hold every reachable tally, so p > 2^(m*w) - 1 (and > c).
    Passing ``prime`` pins the field explicitly; anything below that bound is
    rejected rather than silently risking tally wrap-around.
    """
    names = _check_candidates(candidates)
    if voter_count < 1:
        raise ConfigError("voter_count must be >= 1")
    if not 1 <= threshold <= center_count:
        raise ConfigError(
            f"threshold {threshold} incompatible with {center_count} centers"
        )
    rng = rng if rng is not None else random.SystemRandom()

    width = window_width_for(voter_count)
    packed_bits = len(names) * width
    if packed_bits >= MAX_FIELD_BITS:
        raise UnsupportedScaleError(
            f"{len(names)} candidates x {width}-bit windows needs {packed_bits} bits; "
            f"the supported field tops out below 2^{MAX_FIELD_BITS}"
        )
    bound = max((1 << packed_bits) - 1, center_count)
    if prime is None:
        chosen = smallest_prime_above(bound)
    else:
        if not is_prime(prime):
            raise ConfigError(f"{prime} is not prime")
        if prime <= bound:
            raise ConfigError(
                f"field size {prime} cannot hold every tally; need a prime > {bound}"
            )
        chosen = Prime(prime)

    points: list[int] = []
    seen: set[int] = set()
    while len(points) < center_count:
        candidate_point = rng.randrange(1, chosen.value)
        if candidate_point not in seen:
            seen.add(candidate_point)
            points.append(candidate_point)

    if election_id is None:
        election_id = f"election-{rng.randrange(1 << 48):012x}"

    policy = SharingPolicy(
        threshold=threshold,
        eval_points=tuple(FieldElement(x, chosen.value) for x in points),
    )
    return ElectionConfig(
        election_id=election_id,
        candidates=names,
        voter_count=voter_count,
        window_width=width,
        prime=chosen,
        policy=policy,
    )


def manual_config(
    election_id: str,
    candidates: Sequence[str],
    voter_count: int,
    prime: int,
    threshold: int,
    eval_points: Sequence[int],
) -> ElectionConfig:
    """Election over a hand-picked field and hand-picked evaluation points.

    Skips the every-tally-representable bound, so a field smaller than the
    worst-case packed tally is accepted; such an election can wrap and
    miscount if enough voters pile onto high-window candidates. Callers own
    that risk. Everything else is validated as usual.
    """
    if not is_prime(prime):
        raise ConfigError(f"{prime} is not prime")
    policy = SharingPolicy(
        threshold=threshold,
        eval_points=tuple(FieldElement(x, prime) for x in eval_points),
    )
    return ElectionConfig(
        election_id=election_id,
        candidates=_check_candidates(candidates),
        voter_count=voter_count,
        window_width=window_width_for(voter_count),
        prime=Prime(prime),
        policy=policy,
    )


def encode_vote(config: AnyConfig, candidate_index: int) -> EncodedBallot:
    """Encode one vote for candidate_index (1-based) as 2^((k-1)*w)."""
    if not 1 <= candidate_index <= config.candidate_count:
        raise InvalidCandidateError(
            f"candidate {candidate_index} outside 1..{config.candidate_count}"
        )
    code = 1 << ((candidate_index - 1) * config.window_width)
    return EncodedBallot(FieldElement(code, config.prime.value))


def decode_tally(config: AnyConfig, packed: FieldElement) -> TallyResult:
    """Unpack a reconstructed tally into per-candidate counts.

    Rejects values outside the encodable range and counts no election could
    have produced; both indicate wrap-around, corruption, or tampering.
    """
    if packed.modulus != config.prime.value:
        raise FieldMismatchError(
            f"tally in Z_{packed.modulus}, election in Z_{config.prime.value}"
        )
    if packed.residue > config.max_packed:
        raise CorruptedTallyError(
            f"packed value {packed.residue} exceeds encodable maximum {config.max_packed}"
        )
    width = config.window_width
    mask = (1 << width) - 1
    counts = tuple(
        (packed.residue >> (k * width)) & mask
        for k in range(config.candidate_count)
    )
    for name, count in zip(config.candidates, counts):
        if count > config.voter_count:
            raise ImplausibleCountError(
                f"{name} shows {count} votes with only {config.voter_count} voters"
            )
    if sum(counts) > config.voter_count:
        raise ImplausibleCountError(
            f"{sum(counts)} total votes with only {config.voter_count} voters"
        )
    return TallyResult(counts=counts, raw_decoded=packed)


def public_doc(
    config: ElectionConfig, center_public_keys: Mapping[int, str] | None = None
) -> dict:
    """Publishable config document. Field order is fixed for diff-ability.

    The evaluation points are deliberately absent: they belong to the
    officer-only secrets document.
    """
    doc = {
        "election_id": config.election_id,
        "candidates": list(config.candidates),
        "voter_count": config.voter_count,
        "window_width": config.window_width,
        "prime": str(config.prime.value),
        "threshold": config.threshold,
        "center_count": config.center_count,
    }
    if center_public_keys is not None:
        doc[_PUBLIC_KEY_FIELD] = {
            str(center_id): key for center_id, key in sorted(center_public_keys.items())
        }
    return doc


def secrets_doc(config: ElectionConfig) -> dict:
    """Officer-only document holding the per-center evaluation points."""
    return {
        "election_id": config.election_id,
        "eval_points": [str(point.residue) for point in config.policy.eval_points],
    }


def _parse_decimal(value, what: str) -> int:
    if not isinstance(value, str) or not value.isdigit():
        raise ConfigError(f"{what} must be a decimal string, got {value!r}")
    return int(value)


def parse_public_doc(doc: Mapping) -> PublicElection:
    """Validate and load a public config document (center-side view)."""
    if not isinstance(doc, Mapping):
        raise ConfigError("config document must be a JSON object")
    required = (
        "election_id",
        "candidates",
        "voter_count",
        "window_width",
        "prime",
        "threshold",
        "center_count",
    )
    missing = [key for key in required if key not in doc]
    if missing:
        raise ConfigError(f"config document missing fields: {', '.join(missing)}")
    election_id = doc["election_id"]
    if not isinstance(election_id, str) or not election_id:
        raise ConfigError("election_id must be a non-empty string")
    if not isinstance(doc["candidates"], list):
        raise ConfigError("candidates must be a list")
    for field_name in ("voter_count", "window_width", "threshold", "center_count"):
        if not isinstance(doc[field_name], int) or isinstance(doc[field_name], bool):
            raise ConfigError(f"{field_name} must be an integer")
    prime_value = _parse_decimal(doc["prime"], "prime")
    if not is_prime(prime_value):
        raise ConfigError(f"configured field size {prime_value} is not prime")

    raw_keys = doc.get(_PUBLIC_KEY_FIELD, {})
    if not isinstance(raw_keys, Mapping):
        raise ConfigError(f"{_PUBLIC_KEY_FIELD} must be an object")
    keys: dict[int, str] = {}
    for raw_id, key in raw_keys.items():
        try:
            center_id = int(raw_id)
        except (TypeError, ValueError):
            raise ConfigError(f"bad center id {raw_id!r} in {_PUBLIC_KEY_FIELD}")
        if not isinstance(key, str):
            raise ConfigError(f"public key for center {center_id} must be a string")
        keys[center_id] = key
    if keys and set(keys) != set(range(1, doc["center_count"] + 1)):
        raise ConfigError("public keys must cover centers 1..center_count")

    return PublicElection(
        election_id=election_id,
        candidates=tuple(doc["candidates"]),
        voter_count=doc["voter_count"],
        window_width=doc["window_width"],
        prime=Prime(prime_value),
        threshold=doc["threshold"],
        center_count=doc["center_count"],
        center_public_keys=keys,
    )


def config_from_docs(public: Mapping, secrets: Mapping) -> ElectionConfig:
    """Recombine the public document with the officer secrets document."""
    view = parse_public_doc(public)
    if not isinstance(secrets, Mapping):
        raise ConfigError("secrets document must be a JSON object")
    if secrets.get("election_id") != view.election_id:
        raise ConfigError(
            "secrets document belongs to a different election "
            f"({secrets.get('election_id')!r} vs {view.election_id!r})"
        )
    raw_points = secrets.get("eval_points")
    if not isinstance(raw_points, list):
        raise ConfigError("secrets document must carry an eval_points list")
    if len(raw_points) != view.center_count:
        raise ConfigError(
            f"{len(raw_points)} eval points for {view.center_count} centers"
        )
    p = view.prime.value
    points = []
    for raw in raw_points:
        residue = _parse_decimal(raw, "eval point")
        if not 0 < residue < p:
            raise ConfigError(f"eval point {residue} outside (0, {p})")
        points.append(FieldElement(residue, p))
    policy = SharingPolicy(threshold=view.threshold, eval_points=tuple(points))
    return ElectionConfig(
        election_id=view.election_id,
        candidates=view.candidates,
        voter_count=view.voter_count,
        window_width=view.window_width,
        prime=view.prime,
        policy=policy,
    )
