"""Record verification, subset cross-checking, and result decoding."""

import collections
import itertools
import math
import random

import pytest

from homotally import signing
from homotally.ballot import derive_config, encode_vote, public_doc
from homotally.center import CollectionCenter, FinalizationRecord, record_digest
from homotally.errors import (
    ConfigError,
    InconsistentSharesError,
    InsufficientSharesError,
    RecordAuthenticityError,
    RecordIntegrityError,
)
from homotally.field import FieldElement
from homotally.shamir import split
from homotally.tally import (
    choose_subsets,
    compute_result,
    turnout_check,
    verify_record,
)

from conftest import DEMO_SHARES


def run_demo_election(demo_centers):
    for i, row in enumerate(DEMO_SHARES):
        for center, value in zip(demo_centers, row):
            center.submit_share(f"b{i}", FieldElement(value, 257))
    return [center.finalize() for center in demo_centers]


def make_record(key_priv, election_id="e", center_id=1, share_sum=245, count=6):
    digest = record_digest(election_id, center_id, share_sum, count)
    return FinalizationRecord(
        election_id=election_id,
        center_id=center_id,
        share_sum=share_sum,
        received_count=count,
        digest=digest.hex(),
        signature=signing.sign(key_priv, digest),
    )


class TestVerifyRecord:
    PRIV, PUB = signing.generate_keypair(seed=bytes([7] * 32))
    OTHER_PRIV, OTHER_PUB = signing.generate_keypair(seed=bytes([8] * 32))

    def test_authentic_record_verifies(self):
        record = make_record(self.PRIV)
        assert verify_record(record, self.PUB) is record

    def test_altered_residue_fails_integrity(self):
        record = make_record(self.PRIV)
        tampered = FinalizationRecord(
            election_id=record.election_id,
            center_id=record.center_id,
            share_sum=246,
            received_count=record.received_count,
            digest=record.digest,
            signature=record.signature,
        )
        with pytest.raises(RecordIntegrityError):
            verify_record(tampered, self.PUB)

    def test_wrong_key_fails_authenticity(self):
        record = make_record(self.PRIV)
        with pytest.raises(RecordAuthenticityError):
            verify_record(record, self.OTHER_PUB)

    def test_resigned_tamper_fails_under_registered_key(self):
        # Attacker recomputes digest and re-signs with their own key.
        record = make_record(self.OTHER_PRIV, share_sum=999)
        with pytest.raises(RecordAuthenticityError):
            verify_record(record, self.PUB)


class TestComputeResult:
    def test_demo_result(self, demo_config, demo_centers, demo_keys):
        records = run_demo_election(demo_centers)
        for record in records:
            verify_record(record, demo_keys[record.center_id][1])
        report = compute_result(records, demo_config)
        assert report.packed == 209
        assert report.counts == (1, 2, 3)  # Charles, Bob, Alice
        assert len(report.subsets_checked) == 3
        assert {value for _, value in report.subsets_checked} == {209}
        assert report.turnout == {1: 6, 2: 6, 3: 6}
        assert turnout_check(report, demo_config) == []

    def test_any_two_records_suffice(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        for pair in itertools.combinations(records, 2):
            report = compute_result(list(pair), demo_config)
            assert report.packed == 209
            assert report.counts == (1, 2, 3)

    def test_insufficient_records(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        with pytest.raises(InsufficientSharesError):
            compute_result(records[1:2], demo_config)

    def test_corrupted_record_detected(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        bad = records[2]
        corrupted = FinalizationRecord(
            election_id=bad.election_id,
            center_id=bad.center_id,
            share_sum=61,  # was 60
            received_count=bad.received_count,
            digest=bad.digest,
            signature=bad.signature,
        )
        with pytest.raises(InconsistentSharesError) as info:
            compute_result([records[0], records[1], corrupted], demo_config)
        divergent = info.value.divergent
        values = {entry["value"] for entry in divergent}
        assert len(values) > 1
        # the untouched pair still reconstructs the true value
        assert {"centers": [1, 2], "value": "209"} in divergent

    def test_duplicate_center_rejected(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        with pytest.raises(ConfigError):
            compute_result([records[0], records[0]], demo_config)

    def test_wrong_election_rejected(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        alien = FinalizationRecord(
            election_id="other",
            center_id=2,
            share_sum=1,
            received_count=1,
            digest="0" * 64,
            signature="0" * 128,
        )
        with pytest.raises(ConfigError):
            compute_result([records[0], alien], demo_config)


def build_election(rng, m=None, n=None, c=None, t=None):
    m = m if m is not None else rng.randrange(1, 6)
    n = n if n is not None else rng.randrange(1, 51)
    c = c if c is not None else rng.randrange(1, 8)
    t = t if t is not None else rng.randrange(1, c + 1)
    config = derive_config([f"cand{i}" for i in range(m)], n, t, c, rng=rng)
    keys = {
        cid: signing.generate_keypair(seed=bytes(rng.randrange(256) for _ in range(32)))
        for cid in range(1, c + 1)
    }
    doc = public_doc(config, {cid: pub for cid, (_, pub) in keys.items()})
    centers = [CollectionCenter(cid, keys[cid][0]) for cid in sorted(keys)]
    for center in centers:
        center.open_election(doc)
    return config, keys, centers


def run_random_votes(config, centers, rng):
    votes = [
        rng.randrange(1, config.candidate_count + 1)
        for _ in range(rng.randrange(0, config.voter_count + 1))
    ]
    for i, k in enumerate(votes):
        encoded = encode_vote(config, k)
        for center, share in zip(centers, split(encoded.value, config.policy, rng)):
            center.submit_share(f"b{i}", share.value)
    return votes


class TestRandomElections:
    def test_matches_plaintext_counter(self):
        rng = random.Random(31)
        for _ in range(40):
            config, keys, centers = build_election(rng)
            votes = run_random_votes(config, centers, rng)
            records = [center.finalize() for center in centers]
            for record in records:
                verify_record(record, keys[record.center_id][1])
            report = compute_result(records, config)
            counter = collections.Counter(votes)
            expected = tuple(
                counter.get(k, 0) for k in range(1, config.candidate_count + 1)
            )
            assert report.counts == expected
            assert sum(report.counts) == len(votes)
            assert {value for _, value in report.subsets_checked} == {report.packed}

    def test_single_perturbation_always_detected(self):
        # Needs at least two distinct t-subsets, hence t < c.
        rng = random.Random(37)
        for _ in range(30):
            c = rng.randrange(2, 8)
            t = rng.randrange(1, c)
            config, _, centers = build_election(rng, c=c, t=t)
            run_random_votes(config, centers, rng)
            records = [center.finalize() for center in centers]
            victim = rng.randrange(len(records))
            delta = rng.randrange(1, config.prime.value)
            bad = records[victim]
            records[victim] = FinalizationRecord(
                election_id=bad.election_id,
                center_id=bad.center_id,
                share_sum=(bad.share_sum + delta) % config.prime.value,
                received_count=bad.received_count,
                digest=bad.digest,
                signature=bad.signature,
            )
            with pytest.raises(InconsistentSharesError):
                compute_result(records, config)


class TestSubsetSelection:
    def test_all_subsets_when_under_cap(self):
        assert choose_subsets([3, 1, 2], 2) == [(1, 2), (1, 3), (2, 3)]

    def test_cap_respected_and_deterministic(self):
        ids = list(range(1, 9))
        first = choose_subsets(ids, 4, cap=10)
        second = choose_subsets(ids, 4, cap=10)
        assert first == second
        assert len(first) == 10
        assert math.comb(8, 4) > 10

    def test_capped_selection_covers_every_center(self):
        ids = list(range(1, 9))
        chosen = choose_subsets(ids, 4, cap=10)
        for cid in ids:
            assert any(cid in subset for subset in chosen)
            assert any(cid not in subset for subset in chosen)

    def test_capped_selection_still_detects_tampering(self):
        rng = random.Random(41)
        config, _, centers = build_election(rng, m=2, n=10, c=7, t=3)
        run_random_votes(config, centers, rng)
        records = [center.finalize() for center in centers]
        report = compute_result(records, config, subset_cap=8)
        assert len(report.subsets_checked) == 8
        for victim in range(len(records)):
            tampered = list(records)
            bad = tampered[victim]
            tampered[victim] = FinalizationRecord(
                election_id=bad.election_id,
                center_id=bad.center_id,
                share_sum=(bad.share_sum + 1) % config.prime.value,
                received_count=bad.received_count,
                digest=bad.digest,
                signature=bad.signature,
            )
            with pytest.raises(InconsistentSharesError):
                compute_result(tampered, config, subset_cap=8)


class TestTurnout:
    def test_straggler_flagged(self, demo_config, demo_centers):
        for i, row in enumerate(DEMO_SHARES):
            for center, value in zip(demo_centers, row):
                if center.center_id == 3 and i == 5:
                    continue  # drop one share at center 3
                center.submit_share(f"b{i}", FieldElement(value, 257))
        records = [center.finalize() for center in demo_centers]
        # interpolating with the short center now diverges, so tally from
        # the two consistent ones and check the turnout notes instead
        report = compute_result(records[:2], demo_config)
        report.turnout[3] = records[2].received_count
        notes = turnout_check(report, demo_config)
        assert any("center 3" in note for note in notes)

    def test_zero_ballots_clean(self, demo_config, demo_centers):
        records = [center.finalize() for center in demo_centers]
        report = compute_result(records, demo_config)
        assert report.counts == (0, 0, 0)
        assert turnout_check(report, demo_config) == []


class TestReportRendering:
    def test_table_most_votes_first(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        report = compute_result(records, demo_config)
        table = report.render_table()
        lines = table.splitlines()
        assert "Candidate" in lines[0] and "Votes Secured" in lines[0]
        names_in_order = [line.split("|")[0].strip() for line in lines[2:]]
        assert names_in_order == ["Alice", "Bob", "Charles"]

    def test_dict_shape(self, demo_config, demo_centers):
        records = run_demo_election(demo_centers)
        report = compute_result(records, demo_config)
        doc = report.to_dict()
        assert doc["packed"] == "209"
        assert doc["result"] == [
            {"candidate": "Charles", "votes": 1},
            {"candidate": "Bob", "votes": 2},
            {"candidate": "Alice", "votes": 3},
        ]
        assert len(doc["subsets_checked"]) == 3
        assert doc["turnout"] == {"1": 6, "2": 6, "3": 6}
