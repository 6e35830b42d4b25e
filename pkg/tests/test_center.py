"""Collection-center state machine, journal durability, and record signing."""

import itertools
import json
import random
import threading

import pytest

from homotally import signing
from homotally.center import CollectionCenter, FinalizationRecord, record_digest
from homotally.errors import (
    CapacityError,
    DuplicateBallotError,
    FieldMismatchError,
    JournalError,
    PhaseError,
)
from homotally.field import FieldElement
from homotally.tally import verify_record

from conftest import DEMO_SHARES, DEMO_SUMS

KEY_PRIV, KEY_PUB = signing.generate_keypair(seed=bytes(range(32)))


def fe(value, p=257):
    return FieldElement(value, p)


def fold_oracle(values, p=257):
    total = 0
    for v in values:
        total = (total + v) % p
    return total


def submit_all(center, values, prefix="b"):
    for i, value in enumerate(values):
        center.submit_share(f"{prefix}{i}", fe(value))


class TestAccumulator:
    def test_running_sums(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        column = [row[0] for row in DEMO_SHARES]
        expected_running = [40, 205, 34, 96, 57, 245]
        for i, value in enumerate(column):
            center.submit_share(f"b{i}", fe(value))
            assert center.share_sum.residue == expected_running[i]
        assert center.received_count == 6

    def test_all_columns(self, demo_centers):
        for i, row in enumerate(DEMO_SHARES):
            for center, value in zip(demo_centers, row):
                center.submit_share(f"b{i}", fe(value))
        assert tuple(c.share_sum.residue for c in demo_centers) == DEMO_SUMS

    def test_order_independent(self, demo_doc):
        column = [row[1] for row in DEMO_SHARES]
        for order in ([0, 1, 2, 3, 4, 5], [5, 3, 1, 0, 2, 4]):
            center = CollectionCenter(2, KEY_PRIV)
            center.open_election(demo_doc)
            for i in order:
                center.submit_share(f"b{i}", fe(column[i]))
            assert center.share_sum.residue == fold_oracle(column)

    def test_duplicate_ballot_rejected_sum_unchanged(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        center.submit_share("b0", fe(40))
        with pytest.raises(DuplicateBallotError):
            center.submit_share("b0", fe(99))
        assert center.share_sum.residue == 40
        assert center.received_count == 1

    def test_capacity(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        submit_all(center, [1] * 7)
        with pytest.raises(CapacityError):
            center.submit_share("extra", fe(1))

    def test_field_mismatch(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        with pytest.raises(FieldMismatchError):
            center.submit_share("b0", FieldElement(1, 31))

    def test_concurrent_submissions(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        rng = random.Random(42)
        values = [rng.randrange(257) for _ in range(7)]
        errors = []

        def worker(i):
            try:
                center.submit_share(f"t{i}", fe(values[i]))
            except Exception as exc:  # surface into the main thread
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(7)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert center.share_sum.residue == fold_oracle(values)
        assert center.received_count == 7


class TestStateMachine:
    def test_exhaustive_phase_table(self, demo_doc):
        # Allowed transitions: idle -open-> collecting -finalize-> finalized.
        def fresh(phase):
            center = CollectionCenter(1, KEY_PRIV)
            if phase in ("collecting", "finalized"):
                center.open_election(demo_doc)
                center.submit_share("b0", fe(40))
            if phase == "finalized":
                center.finalize()
            return center

        # (phase, operation) -> allowed?
        table = {
            ("idle", "open"): True,
            ("idle", "submit"): False,
            ("idle", "finalize"): False,
            ("collecting", "open"): False,
            ("collecting", "submit"): True,
            ("collecting", "finalize"): True,
            ("finalized", "open"): False,
            ("finalized", "submit"): False,
            ("finalized", "finalize"): True,  # idempotent re-emission
        }
        for (phase, op), allowed in table.items():
            center = fresh(phase)
            actions = {
                "open": lambda: center.open_election(demo_doc),
                "submit": lambda: center.submit_share("bx", fe(1)),
                "finalize": center.finalize,
            }
            if allowed:
                actions[op]()
            else:
                with pytest.raises(PhaseError):
                    actions[op]()

    def test_reopen_rejected(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        with pytest.raises(PhaseError):
            center.open_election(demo_doc)

    def test_open_rejects_bad_config(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        from homotally.errors import ConfigError

        bad = dict(demo_doc)
        bad["threshold"] = 9
        with pytest.raises(ConfigError):
            center.open_election(bad)
        assert center.phase == "idle"

    def test_center_id_must_exist_in_election(self, demo_doc):
        center = CollectionCenter(9, KEY_PRIV)
        with pytest.raises(PhaseError):
            center.open_election(demo_doc)


class TestFinalization:
    def test_record_contents_and_signature(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        submit_all(center, [row[0] for row in DEMO_SHARES])
        record = center.finalize()
        assert record.share_sum == 245
        assert record.received_count == 6
        assert record.election_id == "demo-257"
        assert verify_record(record, KEY_PUB) is record

    def test_zero_share_record(self, demo_doc):
        center = CollectionCenter(2, KEY_PRIV)
        center.open_election(demo_doc)
        record = center.finalize()
        assert record.share_sum == 0
        assert record.received_count == 0
        assert verify_record(record, KEY_PUB)

    def test_refinalize_identical(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        center.submit_share("b0", fe(40))
        first = center.finalize()
        second = center.finalize()
        assert first == second
        with pytest.raises(PhaseError):
            center.submit_share("late", fe(1))

    def test_digest_layout_is_stable(self):
        digest = record_digest("demo-257", 1, 245, 6)
        assert digest == record_digest("demo-257", 1, 245, 6)
        assert digest != record_digest("demo-257", 1, 246, 6)
        assert digest != record_digest("demo-257", 2, 245, 6)
        assert digest != record_digest("demo-258", 1, 245, 6)
        assert digest != record_digest("demo-257", 1, 245, 7)

    def test_record_dict_round_trip(self, demo_doc):
        center = CollectionCenter(3, KEY_PRIV)
        center.open_election(demo_doc)
        center.submit_share("b0", fe(60))
        record = center.finalize()
        assert FinalizationRecord.from_dict(record.to_dict()) == record

    def test_record_parse_rejects_loose_hex(self, demo_doc):
        center = CollectionCenter(1, KEY_PRIV)
        center.open_election(demo_doc)
        record = center.finalize().to_dict()
        record["digest"] = record["digest"].upper()
        with pytest.raises(ValueError):
            FinalizationRecord.from_dict(record)


class TestJournal:
    def make_center(self, path, demo_doc, values):
        center = CollectionCenter(1, KEY_PRIV, journal_path=path)
        center.open_election(demo_doc)
        submit_all(center, values)
        return center

    def test_replay_reproduces_state(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        values = [row[0] for row in DEMO_SHARES]
        center = self.make_center(path, demo_doc, values)
        center.close()
        recovered = CollectionCenter.recover(1, KEY_PRIV, path)
        assert recovered.phase == "collecting"
        assert recovered.share_sum.residue == 245
        assert recovered.received_count == 6

    def test_recover_after_finalize(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        center = self.make_center(path, demo_doc, [40, 165])
        record = center.finalize()
        center.close()
        recovered = CollectionCenter.recover(1, KEY_PRIV, path)
        assert recovered.phase == "finalized"
        assert recovered.finalize() == record

    def test_recover_continues_accepting(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        center = self.make_center(path, demo_doc, [40])
        center.close()
        recovered = CollectionCenter.recover(1, KEY_PRIV, path)
        recovered.submit_share("later", fe(165))
        assert recovered.share_sum.residue == (40 + 165) % 257
        recovered.close()
        again = CollectionCenter.recover(1, KEY_PRIV, path)
        assert again.share_sum.residue == (40 + 165) % 257

    def test_every_prefix_recovers(self, tmp_path, demo_doc):
        # The journal is the durable state: killing the process after any
        # completed append must recover to exactly the acknowledged sum.
        path = tmp_path / "c1.journal"
        values = [row[0] for row in DEMO_SHARES]
        center = self.make_center(path, demo_doc, values)
        center.close()
        lines = path.read_text().splitlines(keepends=True)
        for k in range(1, len(lines) + 1):
            prefix = tmp_path / f"prefix{k}.journal"
            prefix.write_text("".join(lines[:k]))
            recovered = CollectionCenter.recover(1, KEY_PRIV, prefix)
            accepted = values[: k - 1]  # first line is the open entry
            assert recovered.share_sum.residue == fold_oracle(accepted)
            assert recovered.received_count == len(accepted)
            recovered.close()

    def test_truncated_final_entry(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        center = self.make_center(path, demo_doc, [40, 165])
        center.close()
        raw = path.read_text()
        path.write_text(raw[:-10])  # chop into the last entry
        with pytest.raises(JournalError):
            CollectionCenter.recover(1, KEY_PRIV, path)

    def test_flipped_byte_detected(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        center = self.make_center(path, demo_doc, [40, 165, 86])
        center.close()
        raw = bytearray(path.read_bytes())
        # flip a digit inside the second share value
        index = raw.find(b'"value":"165"') + len('"value":"1')
        raw[index] ^= 0x01
        path.write_bytes(bytes(raw))
        with pytest.raises(JournalError):
            CollectionCenter.recover(1, KEY_PRIV, path)

    def test_empty_journal_recovers_idle(self, tmp_path):
        path = tmp_path / "c1.journal"
        path.touch()
        recovered = CollectionCenter.recover(1, KEY_PRIV, path)
        assert recovered.phase == "idle"

    def test_fresh_center_refuses_existing_journal(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        center = self.make_center(path, demo_doc, [40])
        center.close()
        fresh = CollectionCenter(1, KEY_PRIV, journal_path=path)
        with pytest.raises(JournalError):
            fresh.open_election(demo_doc)

    def test_journal_entries_are_json_lines(self, tmp_path, demo_doc):
        path = tmp_path / "c1.journal"
        center = self.make_center(path, demo_doc, [40])
        center.finalize()
        center.close()
        entries = [json.loads(line) for line in path.read_text().splitlines()]
        assert [e["kind"] for e in entries] == ["open", "share", "finalize"]
        assert all("check" in e for e in entries)


class TestCenterViewSecrecy:
    def test_view_distribution_independent_of_votes(self):
        # Z_5, threshold 2, the center at x=2: enumerate every coefficient
        # choice for two ballots. The joint distribution of the two observed
        # shares must be identical for any two vote sequences.
        p = 5
        x = 2

        def view_histogram(votes):
            hist = {}
            for a1, a2 in itertools.product(range(p), repeat=2):
                seen = (
                    (votes[0] + a1 * x) % p,
                    (votes[1] + a2 * x) % p,
                )
                hist[seen] = hist.get(seen, 0) + 1
            return hist

        sequences = [(0, 0), (1, 3), (4, 4), (2, 1)]
        baseline = view_histogram(sequences[0])
        for votes in sequences[1:]:
            assert view_histogram(votes) == baseline
