"""Result computation for the election official.

Verify each center's signed finalization record, reconstruct the packed
tally by interpolating the per-center share sums at zero, cross-check that
every chosen t-subset of centers reconstructs the same value, and decode the
agreed value into per-candidate counts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .ballot import ElectionConfig, TallyResult, decode_tally
from .center import FinalizationRecord, record_digest
from .errors import (
    ConfigError,
    InconsistentSharesError,
    InsufficientSharesError,
    RecordAuthenticityError,
    RecordIntegrityError,
)
from .field import FieldElement
from .shamir import interpolate_at_zero
from . import signing

# Cross-checking every t-subset is the default; past this many subsets a
# deterministic covering selection is used instead.
SUBSET_CAP = 35


@dataclass(frozen=True)
class TallyReport:
    """Published result: counts, the packed value, and the audit trail."""

    election_id: str
    candidates: tuple[str, ...]
    counts: tuple[int, ...]
    packed: int
    subsets_checked: tuple[tuple[tuple[int, ...], int], ...]
    records: tuple[FinalizationRecord, ...]
    turnout: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "election_id": self.election_id,
            "result": [
                {"candidate": name, "votes": count}
                for name, count in zip(self.candidates, self.counts)
            ],
            "packed": str(self.packed),
            "subsets_checked": [
                {"centers": list(centers), "value": str(value)}
                for centers, value in self.subsets_checked
            ],
            "turnout": {str(cid): count for cid, count in sorted(self.turnout.items())},
            "records": [record.to_dict() for record in self.records],
        }

    def render_table(self) -> str:
        """Human-readable result table, most votes first."""
        order = sorted(
            range(len(self.candidates)), key=lambda k: (-self.counts[k], k)
        )
        width = max(len("Candidate"), max(len(n) for n in self.candidates))
        lines = [
            f"{'Candidate':<{width}} | Votes Secured",
            f"{'-' * width}-+--------------",
        ]
        lines.extend(
            f"{self.candidates[k]:<{width}} | {self.counts[k]:>13}" for k in order
        )
        return "\n".join(lines)


def verify_record(record: FinalizationRecord, public_key_hex: str) -> FinalizationRecord:
    """Check a record's digest against its fields and its signature.

    The digest recomputation is an independent check: a record whose fields
    were altered fails here even if its signature was re-attached verbatim.
    """
    digest = record_digest(
        record.election_id,
        record.center_id,
        record.share_sum,
        record.received_count,
    )
    if digest.hex() != record.digest:
        raise RecordIntegrityError(
            f"center {record.center_id}: record digest does not match its fields"
        )
    if not signing.verify(public_key_hex, digest, record.signature):
        raise RecordAuthenticityError(
            f"center {record.center_id}: signature invalid under the registered key"
        )
    return record


def _covering_subsets(
    ids: Sequence[int], threshold: int, cap: int
) -> list[tuple[int, ...]]:
    """Deterministic subset selection when C(c, t) exceeds the cap.

    Wrap-around windows over the sorted ids first: they guarantee every
    center appears in at least one chosen subset and (when c > t) is absent
    from at least one, which is what tamper detection needs. The remainder
    fills lexicographically.
    """
    ordered = sorted(ids)
    count = len(ordered)
    chosen: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for start in range(count):
        window = tuple(
            sorted(ordered[(start + offset) % count] for offset in range(threshold))
        )
        if window not in seen:
            seen.add(window)
            chosen.append(window)
        if len(chosen) == cap:
            return chosen
    for combo in itertools.combinations(ordered, threshold):
        if len(chosen) == cap:
            break
        if combo not in seen:
            seen.add(combo)
            chosen.append(combo)
    return chosen


def choose_subsets(
    ids: Iterable[int], threshold: int, cap: int = SUBSET_CAP
) -> list[tuple[int, ...]]:
    ordered = sorted(ids)
    if math.comb(len(ordered), threshold) <= cap:
        return list(itertools.combinations(ordered, threshold))
    return _covering_subsets(ordered, threshold, cap)


def compute_result(
    records: Sequence[FinalizationRecord],
    config: ElectionConfig,
    subset_cap: int = SUBSET_CAP,
) -> TallyReport:
    """Reconstruct, cross-check, and decode the election result.

    Every chosen t-subset of the provided records must reconstruct the same
    packed value; any divergence is reported with the offending subsets
    rather than picking a winner among them.
    """
    threshold = config.threshold
    by_center: dict[int, FinalizationRecord] = {}
    for record in records:
        if record.election_id != config.election_id:
            raise ConfigError(
                f"record for election {record.election_id!r}, "
                f"tallying {config.election_id!r}"
            )
        if not 1 <= record.center_id <= config.center_count:
            raise ConfigError(f"record from unknown center {record.center_id}")
        if record.center_id in by_center:
            raise ConfigError(f"two records from center {record.center_id}")
        if record.share_sum >= config.prime.value:
            raise ConfigError(
                f"center {record.center_id} share sum {record.share_sum} outside the field"
            )
        if record.received_count > config.voter_count:
            raise ConfigError(
                f"center {record.center_id} claims {record.received_count} ballots "
                f"for {config.voter_count} voters"
            )
        by_center[record.center_id] = record
    if len(by_center) < threshold:
        raise InsufficientSharesError(
            f"{len(by_center)} records cannot meet threshold {threshold}"
        )

    p = config.prime.value
    subsets = choose_subsets(by_center, threshold, cap=subset_cap)
    reconstructions: list[tuple[tuple[int, ...], int]] = []
    for subset in subsets:
        points = [
            (config.policy.point_for(cid), FieldElement(by_center[cid].share_sum, p))
            for cid in subset
        ]
        value = interpolate_at_zero(points, threshold)
        reconstructions.append((subset, value.residue))

    values = {value for _, value in reconstructions}
    if len(values) != 1:
        divergent = [
            {"centers": list(subset), "value": str(value)}
            for subset, value in reconstructions
        ]
        raise InconsistentSharesError(
            f"subsets disagree: {sorted(values)}; "
            "at least one center's share sum is corrupt",
            divergent=divergent,
        )
    packed = values.pop()

    result: TallyResult = decode_tally(config, FieldElement(packed, p))
    ordered_records = tuple(by_center[cid] for cid in sorted(by_center))
    return TallyReport(
        election_id=config.election_id,
        candidates=config.candidates,
        counts=result.counts,
        packed=packed,
        subsets_checked=tuple(reconstructions),
        records=ordered_records,
        turnout={cid: by_center[cid].received_count for cid in sorted(by_center)},
    )


def turnout_check(report: TallyReport, config: ElectionConfig) -> list[str]:
    """Advisory notes flagging centers whose ballot count strays from the rest.

    Every center should see one share per cast ballot, so the counts should
    all match; a straggler points at lost or injected submissions.
    """
    notes: list[str] = []
    counts = list(report.turnout.values())
    if not counts:
        return notes
    majority = max(set(counts), key=counts.count)
    for center_id, count in sorted(report.turnout.items()):
        if count != majority:
            notes.append(
                f"center {center_id} reports {count} ballots; majority reports {majority}"
            )
    total = sum(report.counts)
    if total != majority:
        notes.append(
            f"decoded votes total {total} but centers report {majority} ballots"
        )
    return notes
