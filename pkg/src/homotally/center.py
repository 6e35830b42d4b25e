"""Collection-center node: accumulate vote shares, then sign off the sum.

A center is a small state machine (idle -> collecting -> finalized) wrapped
around one field element: the running sum of every share it has accepted.
It never sees votes, candidates, or the other centers' shares, so the sum is
the only election-related state it can possibly hold.

Durability comes from an append-only journal of newline-delimited JSON
entries, each chained to its predecessor by a running SHA-256 checksum. A
share is journaled (and fsynced) before it is acknowledged, so replaying the
journal always reproduces exactly the acknowledged state. Corruption stops
replay with an error; there is no silent repair.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

from . import signing
from .ballot import PublicElection, parse_public_doc
from .errors import (
    CapacityError,
    DuplicateBallotError,
    FieldMismatchError,
    JournalError,
    PhaseError,
)
from .field import FieldElement

PHASE_IDLE = "idle"
PHASE_COLLECTING = "collecting"
PHASE_FINALIZED = "finalized"

_HEX_DIGEST = re.compile(r"^[0-9a-f]{64}$")
_HEX_SIGNATURE = re.compile(r"^[0-9a-f]{128}$")


def record_digest(
    election_id: str, center_id: int, share_sum: int, received_count: int
) -> bytes:
    """SHA-256 over the record's canonical little-endian byte layout."""
    h = hashlib.sha256()
    h.update(election_id.encode("utf-8"))
    h.update(struct.pack("<I", center_id))
    h.update(struct.pack("<Q", share_sum))
    h.update(struct.pack("<Q", received_count))
    return h.digest()


@dataclass(frozen=True)
class FinalizationRecord:
    """A center's signed statement of its final share sum and ballot count."""

    election_id: str
    center_id: int
    share_sum: int
    received_count: int
    digest: str
    signature: str

    def to_dict(self) -> dict:
        return {
            "election_id": self.election_id,
            "center_id": self.center_id,
            "share_sum": str(self.share_sum),
            "received_count": self.received_count,
            "digest": self.digest,
            "signature": self.signature,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FinalizationRecord":
        try:
            election_id = doc["election_id"]
            center_id = doc["center_id"]
            share_sum = doc["share_sum"]
            received_count = doc["received_count"]
            digest = doc["digest"]
            signature = doc["signature"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"record document missing field: {exc}")
        if not isinstance(election_id, str) or not election_id:
            raise ValueError("election_id must be a non-empty string")
        if not isinstance(center_id, int) or isinstance(center_id, bool) or center_id < 1:
            raise ValueError("center_id must be a positive integer")
        if not isinstance(share_sum, str) or not share_sum.isdigit():
            raise ValueError("share_sum must be a decimal string")
        if not isinstance(received_count, int) or isinstance(received_count, bool) or received_count < 0:
            raise ValueError("received_count must be a non-negative integer")
        # Hex fields are strictly lowercase; a case-flipped digest must not
        # slip through as the same value.
        if not isinstance(digest, str) or not _HEX_DIGEST.fullmatch(digest):
            raise ValueError("digest must be 64 lowercase hex chars")
        if not isinstance(signature, str) or not _HEX_SIGNATURE.fullmatch(signature):
            raise ValueError("signature must be 128 lowercase hex chars")
        return cls(
            election_id=election_id,
            center_id=center_id,
            share_sum=int(share_sum),
            received_count=received_count,
            digest=digest,
            signature=signature,
        )


def _canonical(payload: dict) -> str:
    return json.dumps(payload, separators=(",", ":"), sort_keys=True)


def _chain_check(previous: str, payload: dict) -> str:
    return hashlib.sha256((previous + _canonical(payload)).encode("utf-8")).hexdigest()


class Journal:
    """Append-only, checksum-chained journal backing one center."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._handle = None
        self._last_check = ""

    def open_fresh(self) -> None:
        if self.path.exists() and self.path.stat().st_size > 0:
            raise JournalError(
                f"{self.path} already has entries; recover from it instead"
            )
        self._handle = open(self.path, "a", encoding="utf-8")

    def open_existing(self, last_check: str) -> None:
        self._last_check = last_check
        self._handle = open(self.path, "a", encoding="utf-8")

    def append(self, payload: dict) -> None:
        if self._handle is None:
            raise JournalError("journal is not open")
        check = _chain_check(self._last_check, payload)
        line = json.dumps(
            {**payload, "check": check}, separators=(",", ":"), sort_keys=True
        )
        self._handle.write(line + "\n")
        self._handle.flush()
        os.fsync(self._handle.fileno())
        self._last_check = check

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    @staticmethod
    def replay(path: str | Path) -> Iterator[tuple[dict, str]]:
        """Yield (payload, check) per entry, verifying the checksum chain."""
        previous = ""
        with open(path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                stripped = line.rstrip("\n")
                if not line.endswith("\n"):
                    raise JournalError(f"{path}:{number}: truncated final entry")
                try:
                    entry = json.loads(stripped)
                except json.JSONDecodeError:
                    raise JournalError(f"{path}:{number}: unparseable entry")
                if not isinstance(entry, dict) or "check" not in entry:
                    raise JournalError(f"{path}:{number}: entry missing checksum")
                check = entry.pop("check")
                if check != _chain_check(previous, entry):
                    raise JournalError(f"{path}:{number}: checksum mismatch")
                previous = check
                yield entry, check


class CollectionCenter:
    """One collection center's lifecycle, accumulator, and signing duty.

    Submissions may arrive from many threads; the accumulator update and the
    journal append form a single critical section. Pass journal_path=None for
    an ephemeral center (simulations and bulk tests) with no durability.
    """

    def __init__(
        self,
        center_id: int,
        signing_key: str,
        journal_path: str | Path | None = None,
    ):
        if center_id < 1:
            raise ValueError("center_id must be >= 1")
        self.center_id = center_id
        self._signing_key = signing_key
        self._lock = threading.Lock()
        self._phase = PHASE_IDLE
        self._election: PublicElection | None = None
        self._sum: FieldElement | None = None
        self._seen: set[str] = set()
        self._record: FinalizationRecord | None = None
        self._journal = Journal(journal_path) if journal_path is not None else None

    @property
    def phase(self) -> str:
        return self._phase

    @property
    def election(self) -> PublicElection | None:
        return self._election

    @property
    def share_sum(self) -> FieldElement:
        if self._sum is None:
            raise PhaseError("no election open")
        return self._sum

    @property
    def received_count(self) -> int:
        return len(self._seen)

    def status(self) -> dict:
        with self._lock:
            info = {
                "center_id": self.center_id,
                "phase": self._phase,
                "received_count": len(self._seen),
            }
            if self._election is not None:
                info["election_id"] = self._election.election_id
            return info

    def open_election(self, doc: Mapping) -> None:
        """Validate the public config and enter the collecting phase.

        Centers never receive evaluation points, so validation covers
        everything except those.
        """
        with self._lock:
            if self._phase != PHASE_IDLE:
                raise PhaseError(
                    f"center {self.center_id} already opened an election"
                )
            election = parse_public_doc(doc)
            if self.center_id > election.center_count:
                raise PhaseError(
                    f"center {self.center_id} is not one of this election's "
                    f"{election.center_count} centers"
                )
            if self._journal is not None:
                self._journal.open_fresh()
                self._journal.append({"kind": "open", "election": dict(doc)})
            self._election = election
            self._sum = FieldElement(0, election.prime.value)
            self._phase = PHASE_COLLECTING

    def submit_share(self, ballot_id: str, value: FieldElement) -> None:
        """Accept one share: journal it, then fold it into the running sum.

        The journal append happens before any state change, so an
        acknowledgment always refers to a share that will survive a crash.
        """
        if not isinstance(ballot_id, str) or not ballot_id:
            raise ValueError("ballot_id must be a non-empty string")
        with self._lock:
            if self._phase != PHASE_COLLECTING:
                raise PhaseError(f"center is {self._phase}, not collecting")
            assert self._election is not None and self._sum is not None
            if value.modulus != self._election.prime.value:
                raise FieldMismatchError(
                    f"share in Z_{value.modulus}, election in Z_{self._election.prime.value}"
                )
            if ballot_id in self._seen:
                raise DuplicateBallotError(f"ballot {ballot_id} already recorded")
            if len(self._seen) >= self._election.voter_count:
                raise CapacityError(
                    f"already holding {len(self._seen)} ballots for "
                    f"{self._election.voter_count} voters"
                )
            if self._journal is not None:
                self._journal.append(
                    {"kind": "share", "ballot_id": ballot_id, "value": str(value.residue)}
                )
            self._sum = self._sum + value
            self._seen.add(ballot_id)

    def finalize(self) -> FinalizationRecord:
        """Close collection and emit the signed record; idempotent once done."""
        with self._lock:
            if self._phase == PHASE_FINALIZED:
                assert self._record is not None
                return self._record
            if self._phase != PHASE_COLLECTING:
                raise PhaseError("no election open to finalize")
            assert self._election is not None and self._sum is not None
            record = self._build_record()
            if self._journal is not None:
                self._journal.append({"kind": "finalize", "record": record.to_dict()})
            self._record = record
            self._phase = PHASE_FINALIZED
            return record

    def _build_record(self) -> FinalizationRecord:
        digest = record_digest(
            self._election.election_id,
            self.center_id,
            self._sum.residue,
            len(self._seen),
        )
        return FinalizationRecord(
            election_id=self._election.election_id,
            center_id=self.center_id,
            share_sum=self._sum.residue,
            received_count=len(self._seen),
            digest=digest.hex(),
            signature=signing.sign(self._signing_key, digest),
        )

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()

    @classmethod
    def recover(
        cls, center_id: int, signing_key: str, journal_path: str | Path
    ) -> "CollectionCenter":
        """Rebuild a center by replaying its journal.

        The recovered state is exactly the fold of the journaled accepted
        shares; any chain break or entry that contradicts the recomputed
        state halts recovery.
        """
        center = cls(center_id, signing_key, journal_path=None)
        last_check = ""
        path = Path(journal_path)
        if path.exists():
            for entry, check in Journal.replay(path):
                last_check = check
                kind = entry.get("kind")
                if kind == "open":
                    if center._phase != PHASE_IDLE:
                        raise JournalError("second open entry in journal")
                    election = parse_public_doc(entry.get("election", {}))
                    center._election = election
                    center._sum = FieldElement(0, election.prime.value)
                    center._phase = PHASE_COLLECTING
                elif kind == "share":
                    if center._phase != PHASE_COLLECTING:
                        raise JournalError("share entry outside collecting phase")
                    ballot_id = entry.get("ballot_id")
                    raw = entry.get("value")
                    if not isinstance(ballot_id, str) or ballot_id in center._seen:
                        raise JournalError(f"bad or repeated ballot id {ballot_id!r}")
                    if not isinstance(raw, str) or not raw.isdigit():
                        raise JournalError(f"bad share value {raw!r}")
                    value = int(raw)
                    if value >= center._sum.modulus:
                        raise JournalError(f"share value {value} outside the field")
                    center._sum = center._sum + FieldElement(value, center._sum.modulus)
                    center._seen.add(ballot_id)
                elif kind == "finalize":
                    if center._phase != PHASE_COLLECTING:
                        raise JournalError("finalize entry outside collecting phase")
                    recomputed = center._build_record()
                    journaled = entry.get("record")
                    if journaled != recomputed.to_dict():
                        raise JournalError(
                            "journaled record does not match recomputed state"
                        )
                    center._record = recomputed
                    center._phase = PHASE_FINALIZED
                else:
                    raise JournalError(f"unknown journal entry kind {kind!r}")
        journal = Journal(path)
        journal.open_existing(last_check)
        center._journal = journal
        return center


def open_from_docs(
    center_id: int,
    signing_key: str,
    config_doc: Mapping,
    journal_path: str | Path | None = None,
) -> CollectionCenter:
    """Convenience: construct a center and immediately open the election."""
    center = CollectionCenter(center_id, signing_key, journal_path)
    center.open_election(config_doc)
    return center
