"""Shared fixtures, including the hand-checked three-candidate election.

The demo election runs in Z_257 with threshold 2 of 3 centers at evaluation
points 1, 2, 3. With the scripted coefficients below, every intermediate
value (per-ballot shares, per-center sums, the reconstructed 209, the final
histogram) is known in advance and frozen in the tests.
"""

import random

import pytest

from homotally.ballot import manual_config, public_doc
from homotally import signing
from homotally.center import CollectionCenter

# Candidate list order puts Charles in the low window: vote codes are
# Charles=1, Bob=8, Alice=64.
DEMO_CANDIDATES = ("Charles", "Bob", "Alice")
DEMO_PRIME = 257
DEMO_POINTS = (1, 2, 3)

# Vote sequence (by 1-based candidate index: Alice=3, Bob=2, Charles=1)
# and the degree-1 coefficient forced for each ballot's polynomial.
DEMO_VOTES = (3, 2, 2, 3, 1, 3)
DEMO_COEFFS = (233, 157, 78, 255, 217, 124)

# shares[i][j] = share of ballot i at center j+1; verified by hand against
# s + a*x mod 257 for each (s, a) pair above.
DEMO_SHARES = (
    (40, 16, 249),
    (165, 65, 222),
    (86, 164, 242),
    (62, 60, 58),
    (218, 178, 138),
    (188, 55, 179),
)
DEMO_SUMS = (245, 24, 60)
DEMO_PACKED = 209
DEMO_COUNTS = (1, 2, 3)  # Charles, Bob, Alice


@pytest.fixture
def demo_config():
    return manual_config(
        election_id="demo-257",
        candidates=DEMO_CANDIDATES,
        voter_count=7,
        prime=DEMO_PRIME,
        threshold=2,
        eval_points=DEMO_POINTS,
    )


@pytest.fixture
def demo_keys():
    rng = random.Random(0xC0FFEE)
    return {
        center_id: signing.generate_keypair(
            seed=bytes(rng.randrange(256) for _ in range(32))
        )
        for center_id in (1, 2, 3)
    }


@pytest.fixture
def demo_doc(demo_config, demo_keys):
    return public_doc(demo_config, {cid: pub for cid, (_, pub) in demo_keys.items()})


@pytest.fixture
def demo_centers(demo_doc, demo_keys):
    centers = []
    for center_id, (private_key, _) in sorted(demo_keys.items()):
        center = CollectionCenter(center_id, private_key)
        center.open_election(demo_doc)
        centers.append(center)
    return centers
