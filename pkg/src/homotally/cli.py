"""Operator command line: setup, run-center, cast, finalize, tally, simulate.

Every verb validates its inputs before touching the network or the
filesystem. Errors exit nonzero with one machine-parsable JSON line on
stderr ({"error": <code>, "detail": <text>}), one exit code per error class.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

from . import netsvc, signing
from .ballot import (
    ElectionConfig,
    config_from_docs,
    derive_config,
    encode_vote,
    public_doc,
    secrets_doc,
)
from .center import CollectionCenter, FinalizationRecord
from .errors import (
    ConfigError,
    InsufficientSharesError,
    InvalidCandidateError,
    ProtocolError,
)
from .field import FieldElement
from .netsvc import CastOutcome, CenterService, RetryPolicy
from .shamir import Share, split
from .tally import compute_result, turnout_check, verify_record

CONFIG_ENV = "HOMOTALLY_CONFIG"
PUBLIC_CONFIG_NAME = "public_config.json"
SECRETS_NAME = "officer_secrets.json"

EXIT_PARTIAL_CAST = 30
EXIT_REJECTED_CAST = 31


def _error_line(code: str, detail: str) -> None:
    print(json.dumps({"error": code, "detail": detail}), file=sys.stderr)


def _write_json(path: Path, doc: dict, mode: int | None = None) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if mode is not None:
        os.chmod(path, mode)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")


def _rng(seed: int | None) -> random.Random:
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _rng_seed_bytes(rng: random.Random) -> bytes:
    return bytes(rng.randrange(256) for _ in range(32))


def _config_path(args) -> Path:
    raw = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if not raw:
        raise ConfigError(
            f"no config given; pass --config or set {CONFIG_ENV}"
        )
    path = Path(raw)
    if path.is_dir():
        path = path / PUBLIC_CONFIG_NAME
    return path


def _load_public_doc(args) -> dict:
    return _read_json(_config_path(args))


def _load_full_config(args) -> tuple[ElectionConfig, dict]:
    """Load public + officer-secrets documents into one config."""
    config_path = _config_path(args)
    doc = _read_json(config_path)
    secrets_path = getattr(args, "secrets", None)
    if secrets_path:
        secrets_file = Path(secrets_path)
    else:
        secrets_file = config_path.parent / SECRETS_NAME
    secrets = _read_json(secrets_file)
    return config_from_docs(doc, secrets), doc


def _parse_endpoints(raw: str, expected: int | None = None) -> list[str]:
    endpoints = [part.strip() for part in raw.split(",") if part.strip()]
    if not endpoints:
        raise ConfigError("no endpoints given")
    if expected is not None and len(endpoints) != expected:
        raise ConfigError(f"{len(endpoints)} endpoints for {expected} centers")
    return endpoints


def _resolve_candidate(config: ElectionConfig, raw: str) -> int:
    names = {name: k for k, name in enumerate(config.candidates, start=1)}
    if raw in names:
        return names[raw]
    try:
        return int(raw)
    except ValueError:
        raise InvalidCandidateError(
            f"unknown candidate {raw!r}; choose from {', '.join(config.candidates)}"
        )


def _retry_policy(args) -> RetryPolicy:
    return RetryPolicy(attempts=args.attempts, timeout=args.timeout)


# -- setup -------------------------------------------------------------------


def cmd_setup(args) -> int:
    candidates = [name.strip() for name in args.candidates.split(",") if name.strip()]
    rng = _rng(args.seed)
    config = derive_config(
        candidates,
        args.voters,
        args.threshold,
        args.centers,
        rng=rng,
        election_id=args.election_id,
        prime=args.prime,
    )

    out_dir = Path(args.out_dir)
    keys_dir = out_dir / "keys"
    keys_dir.mkdir(parents=True, exist_ok=True)

    public_keys: dict[int, str] = {}
    for center_id in range(1, config.center_count + 1):
        private_hex, public_hex = signing.generate_keypair(seed=_rng_seed_bytes(rng))
        public_keys[center_id] = public_hex
        _write_json(
            keys_dir / f"center_{center_id}.json",
            {
                "center_id": center_id,
                "algorithm": "ed25519",
                "private_key": private_hex,
                "public_key": public_hex,
            },
            mode=0o600,
        )

    _write_json(out_dir / PUBLIC_CONFIG_NAME, public_doc(config, public_keys))
    _write_json(out_dir / SECRETS_NAME, secrets_doc(config), mode=0o600)

    print(f"election {config.election_id}")
    print(
        f"  {config.candidate_count} candidates, {config.voter_count} voters, "
        f"window {config.window_width} bits, field size {config.prime}"
    )
    print(f"  threshold {config.threshold} of {config.center_count} centers")
    print(f"  public config: {out_dir / PUBLIC_CONFIG_NAME}")
    print(f"  officer secrets: {out_dir / SECRETS_NAME}")
    print(f"  center keys: {keys_dir}/center_<id>.json")
    return 0


# -- run-center --------------------------------------------------------------


def cmd_run_center(args) -> int:
    key_doc = _read_json(Path(args.key))
    if key_doc.get("center_id") not in (None, args.center_id):
        raise ConfigError(
            f"key file belongs to center {key_doc.get('center_id')}, "
            f"running center {args.center_id}"
        )
    private_key = key_doc.get("private_key")
    if not isinstance(private_key, str):
        raise ConfigError("key file carries no private_key")

    journal = Path(args.journal or f"center-{args.center_id}.journal")
    if journal.exists() and journal.stat().st_size > 0:
        center = CollectionCenter.recover(args.center_id, private_key, journal)
        print(
            f"center {args.center_id} recovered from {journal}: "
            f"phase {center.phase}, {center.received_count} shares",
            flush=True,
        )
    else:
        center = CollectionCenter(args.center_id, private_key, journal_path=journal)
        if not args.idle:
            center.open_election(_load_public_doc(args))

    service = CenterService(center, host=args.host, port=args.port)
    print(f"center {args.center_id} listening on {service.url}", flush=True)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


# -- cast --------------------------------------------------------------------


def _pending_path(args, ballot_id: str) -> Path:
    base = Path(args.pending_dir) if args.pending_dir else Path.cwd()
    return base / f"ballot-{ballot_id}.pending.json"


def _outcome_from_pending(config: ElectionConfig, doc: dict) -> CastOutcome:
    if doc.get("election_id") != config.election_id:
        raise ConfigError("pending ballot belongs to a different election")
    raw = doc.get("share_values")
    if not isinstance(raw, dict) or len(raw) != config.center_count:
        raise ConfigError("pending ballot is missing share values")
    p = config.prime.value
    shares = tuple(
        Share(int(cid), FieldElement(int(value), p))
        for cid, value in sorted(raw.items(), key=lambda kv: int(kv[0]))
    )
    return CastOutcome(
        ballot_id=doc["ballot_id"], statuses={}, overall="", shares=shares
    )


def cmd_cast(args) -> int:
    config, _ = _load_full_config(args)
    endpoints = _parse_endpoints(args.endpoints, expected=config.center_count)
    retry = _retry_policy(args)

    if args.retry:
        pending = _read_json(Path(args.retry))
        outcome = netsvc.retry_cast(
            config, endpoints, _outcome_from_pending(config, pending), retry
        )
    else:
        if not args.candidate:
            raise InvalidCandidateError("--candidate is required unless retrying")
        candidate_index = _resolve_candidate(config, args.candidate)
        outcome = netsvc.cast_ballot(
            config,
            endpoints,
            candidate_index,
            _rng(args.seed),
            ballot_id=args.ballot_id,
            retry=retry,
        )

    if args.json:
        print(json.dumps(outcome.to_dict()))
    else:
        for center_id, status in sorted(outcome.statuses.items()):
            print(f"center {center_id}: {status}")

    if outcome.overall == netsvc.OVERALL_REGISTERED:
        if args.retry:
            Path(args.retry).unlink(missing_ok=True)
        if not args.json:
            print(f"vote registered (ballot {outcome.ballot_id})")
        return 0

    pending_file = Path(args.retry) if args.retry else _pending_path(args, outcome.ballot_id)
    doc = outcome.to_dict(include_shares=True)
    doc["election_id"] = config.election_id
    _write_json(pending_file, doc, mode=0o600)
    if not args.json:
        print(f"outcome {outcome.overall}; retry with --retry {pending_file}")
    return EXIT_PARTIAL_CAST if outcome.overall == netsvc.OVERALL_PARTIAL else EXIT_REJECTED_CAST


# -- finalize ----------------------------------------------------------------


def cmd_finalize(args) -> int:
    doc = _load_public_doc(args)
    election_id = doc.get("election_id", "")
    endpoints = _parse_endpoints(args.endpoints)
    retry = _retry_policy(args)

    records: list[FinalizationRecord] = []
    failures: list[str] = []
    for endpoint in endpoints:
        try:
            records.append(
                netsvc.finalize_center(endpoint, election_id, timeout=retry.timeout)
            )
        except ProtocolError as exc:
            failures.append(f"{endpoint}: {exc}")
        except OSError as exc:
            failures.append(f"{endpoint}: unreachable ({exc})")

    for record in records:
        if args.out:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_json(out_dir / f"record_center_{record.center_id}.json", record.to_dict())
        if args.json:
            print(json.dumps(record.to_dict()))
        else:
            print(
                f"center {record.center_id}: share sum {record.share_sum}, "
                f"{record.received_count} ballots, digest {record.digest[:16]}..."
            )
    for failure in failures:
        print(f"warning: {failure}", file=sys.stderr)
    if not records:
        raise InsufficientSharesError("no center could be finalized")
    return 0


# -- tally -------------------------------------------------------------------


def cmd_tally(args) -> int:
    config, doc = _load_full_config(args)
    registered_keys = {
        int(cid): key for cid, key in doc.get("center_public_keys", {}).items()
    }
    if not registered_keys:
        raise ConfigError("public config registers no center keys; cannot verify records")

    records = [
        FinalizationRecord.from_dict(_read_json(Path(path))) for path in args.records
    ]
    verified: list[FinalizationRecord] = []
    rejected: list[dict] = []
    for record in records:
        key = registered_keys.get(record.center_id)
        if key is None:
            rejected.append(
                {"center_id": record.center_id, "error": "no registered key"}
            )
            continue
        try:
            verified.append(verify_record(record, key))
        except ProtocolError as exc:
            rejected.append({"center_id": record.center_id, "error": str(exc)})

    for bad in rejected:
        print(
            f"warning: record from center {bad['center_id']} rejected: {bad['error']}",
            file=sys.stderr,
        )
    if len(verified) < config.threshold:
        raise InsufficientSharesError(
            f"{len(verified)} verified records cannot meet threshold {config.threshold}"
        )

    report = compute_result(verified, config, subset_cap=args.subset_cap)
    notes = turnout_check(report, config)

    if args.json:
        out = report.to_dict()
        out["verification"] = {
            "verified": [record.center_id for record in verified],
            "rejected": rejected,
        }
        out["turnout_notes"] = notes
        print(json.dumps(out, indent=2))
    else:
        for centers, value in report.subsets_checked:
            print(f"centers {centers} reconstruct {value}")
        print(f"packed tally: {report.packed}")
        print()
        print(report.render_table())
        for note in notes:
            print(f"note: {note}")
    return 0


# -- simulate ----------------------------------------------------------------


def _parse_votes(args, config: ElectionConfig, rng: random.Random) -> list[int]:
    if args.votes and args.random is not None:
        raise ConfigError("give either --votes or --random, not both")
    if args.votes:
        votes = [
            _resolve_candidate(config, token.strip())
            for token in args.votes.split(",")
            if token.strip()
        ]
    elif args.random is not None:
        if args.random < 0:
            raise ConfigError("--random must be >= 0")
        votes = [
            rng.randrange(1, config.candidate_count + 1) for _ in range(args.random)
        ]
    else:
        votes = []
    if len(votes) > config.voter_count:
        raise ConfigError(
            f"{len(votes)} votes for {config.voter_count} voters"
        )
    for index in votes:
        if not 1 <= index <= config.candidate_count:
            raise InvalidCandidateError(f"candidate index {index} out of range")
    return votes


def cmd_simulate(args) -> int:
    config, _ = _load_full_config(args)
    rng = _rng(args.seed)
    votes = _parse_votes(args, config, rng)

    keys = {
        center_id: signing.generate_keypair(seed=_rng_seed_bytes(rng))
        for center_id in range(1, config.center_count + 1)
    }
    doc = public_doc(config, {cid: pub for cid, (_, pub) in keys.items()})
    centers = [
        CollectionCenter(center_id, keys[center_id][0]) for center_id in sorted(keys)
    ]
    for center in centers:
        center.open_election(doc)

    for number, candidate_index in enumerate(votes):
        ballot_id = f"sim-{number:05d}-{rng.randrange(1 << 48):012x}"
        encoded = encode_vote(config, candidate_index)
        shares = split(encoded.value, config.policy, rng)
        for center, share in zip(centers, shares):
            center.submit_share(ballot_id, share.value)

    records = [center.finalize() for center in centers]
    for record in records:
        verify_record(record, keys[record.center_id][1])
    report = compute_result(records, config, subset_cap=args.subset_cap)
    notes = turnout_check(report, config)

    if args.json:
        out = report.to_dict()
        out["votes_cast"] = len(votes)
        out["abstained"] = config.voter_count - len(votes)
        out["turnout_notes"] = notes
        print(json.dumps(out, indent=2))
        return 0

    print(
        f"election {config.election_id}: {config.candidate_count} candidates, "
        f"{config.voter_count} voters, field size {config.prime}, "
        f"threshold {config.threshold} of {config.center_count} centers"
    )
    print(f"ballots cast: {len(votes)} ({config.voter_count - len(votes)} abstained)")
    sums = ", ".join(f"{r.center_id}={r.share_sum}" for r in report.records)
    print(f"center share sums: {sums}")
    print("reconstruction subsets:")
    for centers_used, value in report.subsets_checked:
        print(f"  centers {centers_used} -> {value}")
    print(f"packed tally: {report.packed}")
    print()
    print(report.render_table())
    for note in notes:
        print(f"note: {note}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homotally",
        description="Threshold secret-sharing elections: split ballots into "
        "per-center shares, accumulate them additively, tally by interpolation.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    setup = sub.add_parser("setup", help="derive a config and issue center keys")
    setup.add_argument("--candidates", required=True, help="comma-separated names")
    setup.add_argument("--voters", type=int, required=True)
    setup.add_argument("--threshold", type=int, required=True)
    setup.add_argument("--centers", type=int, required=True)
    setup.add_argument("--out-dir", required=True)
    setup.add_argument("--election-id")
    setup.add_argument("--prime", type=int, help="pin the field size explicitly")
    setup.add_argument("--seed", type=int, help="deterministic setup (tests/fixtures)")
    setup.set_defaults(func=cmd_setup)

    runc = sub.add_parser("run-center", help="serve one collection center over HTTP")
    runc.add_argument("--center-id", type=int, required=True)
    runc.add_argument("--key", required=True, help="path to this center's key file")
    runc.add_argument("--config", help=f"public config path (default ${CONFIG_ENV})")
    runc.add_argument("--host", default="127.0.0.1")
    runc.add_argument("--port", type=int, default=0, help="0 picks a free port")
    runc.add_argument("--journal", help="journal path (default ./center-<id>.journal)")
    runc.add_argument(
        "--idle",
        action="store_true",
        help="start without opening; wait for POST /v1/elections",
    )
    runc.set_defaults(func=cmd_run_center)

    cast = sub.add_parser("cast", help="cast one ballot from this terminal")
    cast.add_argument("--config", help=f"public config path (default ${CONFIG_ENV})")
    cast.add_argument("--secrets", help="officer secrets path (default sibling file)")
    cast.add_argument("--endpoints", required=True, help="comma-separated center URLs")
    cast.add_argument("--candidate", help="candidate name or 1-based index")
    cast.add_argument("--ballot-id", help="reuse a ballot id (idempotent retries)")
    cast.add_argument("--retry", help="replay a pending ballot file")
    cast.add_argument("--pending-dir", help="where to write pending ballots")
    cast.add_argument("--seed", type=int)
    cast.add_argument("--attempts", type=int, default=4)
    cast.add_argument("--timeout", type=float, default=5.0)
    cast.add_argument("--json", action="store_true")
    cast.set_defaults(func=cmd_cast)

    fin = sub.add_parser("finalize", help="close collection at every center")
    fin.add_argument("--config", help=f"public config path (default ${CONFIG_ENV})")
    fin.add_argument("--endpoints", required=True)
    fin.add_argument("--out", help="directory to write record files into")
    fin.add_argument("--attempts", type=int, default=4)
    fin.add_argument("--timeout", type=float, default=5.0)
    fin.add_argument("--json", action="store_true")
    fin.set_defaults(func=cmd_finalize)

    tal = sub.add_parser("tally", help="verify records and compute the result")
    tal.add_argument("--config", help=f"public config path (default ${CONFIG_ENV})")
    tal.add_argument("--secrets", help="officer secrets path (default sibling file)")
    tal.add_argument("--records", nargs="+", required=True, help="record JSON files")
    tal.add_argument("--subset-cap", type=int, default=35)
    tal.add_argument("--json", action="store_true")
    tal.set_defaults(func=cmd_tally)

    sim = sub.add_parser("simulate", help="run a whole election in-process")
    sim.add_argument("--config", help=f"public config path (default ${CONFIG_ENV})")
    sim.add_argument("--secrets", help="officer secrets path (default sibling file)")
    sim.add_argument("--votes", help="comma-separated candidate names or indices")
    sim.add_argument("--random", type=int, help="cast this many uniform random votes")
    sim.add_argument("--seed", type=int, help="byte-identical reruns")
    sim.add_argument("--subset-cap", type=int, default=35)
    sim.add_argument("--json", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProtocolError as error:
        _error_line(error.code, str(error))
        return error.exit_code
    except ValueError as error:
        _error_line("invalid-value", str(error))
        return 3
    except OSError as error:
        _error_line("io", str(error))
        return 4


if __name__ == "__main__":
    sys.exit(main())
