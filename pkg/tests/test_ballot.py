"""Config derivation, vote encoding, and tally decoding."""

import collections
import json
import random

import pytest

from homotally.ballot import (
    config_from_docs,
    decode_tally,
    derive_config,
    encode_vote,
    manual_config,
    parse_public_doc,
    public_doc,
    secrets_doc,
    window_width_for,
)
from homotally.errors import (
    ConfigError,
    CorruptedTallyError,
    ImplausibleCountError,
    InvalidCandidateError,
    UnsupportedScaleError,
)
from homotally.field import FieldElement


def small_config(**overrides):
    params = dict(
        candidates=["Charles", "Bob", "Alice"],
        voter_count=7,
        threshold=2,
        center_count=3,
        rng=random.Random(1),
    )
    params.update(overrides)
    return derive_config(**params)


class TestWindowWidth:
    def test_examples(self):
        assert window_width_for(7) == 3
        assert window_width_for(1) == 1
        assert window_width_for(8) == 4
        assert window_width_for(50) == 6


class TestDeriveConfig:
    def test_three_by_seven(self):
        config = small_config()
        assert config.window_width == 3
        assert config.packed_bits == 9
        assert config.prime.value == 521  # next prime above 2^9 - 1

    def test_degenerate_single_candidate(self):
        config = derive_config(["A"], 1, 1, 1, rng=random.Random(2))
        assert config.window_width == 1
        assert config.prime.value == 2  # smallest prime above max(1, 1)

    def test_eval_points_distinct_nonzero_and_secret(self):
        rng = random.Random(3)
        for _ in range(20):
            config = derive_config(
                ["A", "B"],
                rng.randrange(1, 40),
                2,
                5,
                rng=rng,
            )
            points = config.policy.eval_points
            residues = [pt.residue for pt in points]
            assert len(set(residues)) == len(residues) == 5
            assert all(0 < r < config.prime.value for r in residues)
            doc = public_doc(config)
            assert "eval_points" not in json.dumps(doc)

    def test_supplied_prime_below_bound_rejected(self):
        for too_small in (257, 509, 511):
            with pytest.raises(ConfigError):
                small_config(prime=too_small)

    def test_supplied_prime_above_bound_accepted(self):
        assert small_config(prime=521).prime.value == 521
        assert small_config(prime=541).prime.value == 541

    def test_supplied_composite_rejected(self):
        with pytest.raises(ConfigError):
            small_config(prime=513)

    def test_unsupported_scale(self):
        with pytest.raises(UnsupportedScaleError):
            derive_config([f"c{i}" for i in range(8)], 255, 2, 3, rng=random.Random(4))

    def test_bad_shapes(self):
        with pytest.raises(ConfigError):
            derive_config([], 7, 2, 3)
        with pytest.raises(ConfigError):
            derive_config(["A"], 0, 1, 1)
        with pytest.raises(ConfigError):
            derive_config(["A"], 7, 4, 3)  # threshold above center count
        with pytest.raises(ConfigError):
            derive_config(["A", "A"], 7, 2, 3)  # duplicate names

    def test_output_satisfies_invariants(self):
        rng = random.Random(5)
        for _ in range(30):
            m = rng.randrange(1, 6)
            n = rng.randrange(1, 51)
            c = rng.randrange(1, 8)
            t = rng.randrange(1, c + 1)
            config = derive_config([f"cand{i}" for i in range(m)], n, t, c, rng=rng)
            assert config.window_width == window_width_for(n)
            assert config.prime.value > config.max_packed
            assert config.prime.value > config.center_count
            assert config.meets_tally_bound()


class TestEncode:
    def test_demo_codes(self, demo_config):
        assert encode_vote(demo_config, 1).value.residue == 1  # Charles
        assert encode_vote(demo_config, 2).value.residue == 8  # Bob
        assert encode_vote(demo_config, 3).value.residue == 64  # Alice

    def test_out_of_range(self, demo_config):
        for bad in (0, 4, -1):
            with pytest.raises(InvalidCandidateError):
                encode_vote(demo_config, bad)

    def test_code_shape(self):
        rng = random.Random(6)
        for _ in range(20):
            config = derive_config(
                [f"c{i}" for i in range(rng.randrange(1, 6))],
                rng.randrange(1, 51),
                1,
                1,
                rng=rng,
            )
            for k in range(1, config.candidate_count + 1):
                code = encode_vote(config, k).value.residue
                assert code == 1 << ((k - 1) * config.window_width)


class TestDecode:
    def test_demo_packed(self, demo_config):
        result = decode_tally(demo_config, FieldElement(209, 257))
        assert result.counts == (1, 2, 3)

    def test_zero(self, demo_config):
        assert decode_tally(demo_config, FieldElement(0, 257)).counts == (0, 0, 0)

    def test_sum_of_four_ballots(self, demo_config):
        # two Alice votes, one Bob, one Charles
        packed = FieldElement((64 + 64 + 8 + 1) % 257, 257)
        assert decode_tally(demo_config, packed).counts == (1, 1, 2)

    def test_out_of_range_packed(self):
        config = small_config()
        with pytest.raises(CorruptedTallyError):
            decode_tally(config, FieldElement(512, 521))

    def test_window_above_voter_count(self):
        config = derive_config(["A", "B"], 5, 1, 1, rng=random.Random(7))
        # window value 6 > 5 voters
        with pytest.raises(ImplausibleCountError):
            decode_tally(config, FieldElement(6, config.prime.value))

    def test_total_above_voter_count(self):
        config = derive_config(["A", "B"], 5, 1, 1, rng=random.Random(8))
        packed = (4 << config.window_width) | 4  # 4 + 4 votes for 5 voters
        with pytest.raises(ImplausibleCountError):
            decode_tally(config, FieldElement(packed, config.prime.value))

    def test_histogram_matches_plain_counter(self):
        rng = random.Random(9)
        for _ in range(50):
            m = rng.randrange(1, 6)
            n = rng.randrange(1, 51)
            config = derive_config([f"c{i}" for i in range(m)], n, 1, 1, rng=rng)
            votes = [rng.randrange(1, m + 1) for _ in range(rng.randrange(0, n + 1))]
            packed = sum(encode_vote(config, k).value.residue for k in votes)
            packed %= config.prime.value
            counter = collections.Counter(votes)
            expected = tuple(counter.get(k, 0) for k in range(1, m + 1))
            result = decode_tally(config, FieldElement(packed, config.prime.value))
            assert result.counts == expected
            assert sum(result.counts) == len(votes)

    def test_single_ballot_round_trip(self):
        rng = random.Random(10)
        for _ in range(20):
            m = rng.randrange(1, 6)
            config = derive_config([f"c{i}" for i in range(m)], 9, 1, 1, rng=rng)
            k = rng.randrange(1, m + 1)
            counts = decode_tally(config, encode_vote(config, k).value).counts
            assert counts[k - 1] == 1
            assert sum(counts) == 1


class TestManualConfig:
    def test_small_field_allowed(self, demo_config):
        assert demo_config.prime.value == 257
        assert not demo_config.meets_tally_bound()  # 257 < 511: known trade-off

    def test_composite_rejected(self):
        with pytest.raises(ConfigError):
            manual_config("x", ["A"], 3, prime=9, threshold=1, eval_points=[1])

    def test_field_must_hold_the_codes(self):
        # largest candidate code is 64; a 61-element field cannot carry it
        with pytest.raises(ConfigError):
            manual_config(
                "x", ["A", "B", "C"], 7, prime=61, threshold=2, eval_points=[1, 2]
            )


class TestDocuments:
    def test_public_doc_field_order(self, demo_config, demo_keys):
        doc = public_doc(demo_config, {cid: pub for cid, (_, pub) in demo_keys.items()})
        assert list(doc) == [
            "election_id",
            "candidates",
            "voter_count",
            "window_width",
            "prime",
            "threshold",
            "center_count",
            "center_public_keys",
        ]
        assert doc["prime"] == "257"
        assert doc["candidates"] == ["Charles", "Bob", "Alice"]

    def test_secrets_doc(self, demo_config):
        doc = secrets_doc(demo_config)
        assert doc == {"election_id": "demo-257", "eval_points": ["1", "2", "3"]}

    def test_round_trip(self, demo_config, demo_keys):
        keys = {cid: pub for cid, (_, pub) in demo_keys.items()}
        rebuilt = config_from_docs(public_doc(demo_config, keys), secrets_doc(demo_config))
        assert rebuilt == demo_config

    def test_parse_rejects_garbage(self, demo_config):
        doc = public_doc(demo_config)
        for breakage in (
            lambda d: d.pop("prime"),
            lambda d: d.update(prime="258"),
            lambda d: d.update(prime=257),
            lambda d: d.update(window_width=4),
            lambda d: d.update(threshold=9),
            lambda d: d.update(candidates=[]),
            lambda d: d.update(election_id=""),
        ):
            broken = dict(doc)
            breakage(broken)
            with pytest.raises(ConfigError):
                parse_public_doc(broken)

    def test_secrets_cross_checks(self, demo_config):
        doc = public_doc(demo_config)
        secrets = secrets_doc(demo_config)
        with pytest.raises(ConfigError):
            config_from_docs(doc, {**secrets, "election_id": "other"})
        with pytest.raises(ConfigError):
            config_from_docs(doc, {**secrets, "eval_points": ["1", "2"]})
        with pytest.raises(ConfigError):
            config_from_docs(doc, {**secrets, "eval_points": ["1", "2", "0"]})
