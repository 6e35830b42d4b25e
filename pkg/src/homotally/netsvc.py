"""Wire protocol and service processes.

One HTTP service per collection center, plus the terminal-side client that
fans a ballot's shares out to every center. All payloads are JSON; field
elements travel as decimal strings so no ecosystem has to guess integer
widths.

Every message, in either direction, passes through validate_message before
it is sent. A submit carries exactly one share value and an opaque ballot
id; nothing on the wire ever names a candidate, a voter, or another
center's share.

Endpoints (protocol version "1"):
    POST /v1/elections                  open an election at this center
    POST /v1/elections/{id}/shares     submit one share
    POST /v1/elections/{id}/finalize   close and fetch the signed record
    GET  /v1/elections/{id}/record     fetch the signed record
    GET  /v1/elections/{id}/status     phase and received count
"""

from __future__ import annotations

import json
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping, Sequence

import secrets as _secrets

from .ballot import ElectionConfig, encode_vote
from .center import CollectionCenter, FinalizationRecord
from .errors import (
    CapacityError,
    ConfigError,
    DuplicateBallotError,
    FieldMismatchError,
    InsufficientSharesError,
    InvalidCandidateError,
    PhaseError,
    ProtocolError,
    ServiceError,
    UnknownElectionError,
    WireError,
)
from .field import FieldElement
from .shamir import CoefficientSource, ShareBatch, split

PROTOCOL_VERSION = "1"

MESSAGE_KINDS = ("open", "submit", "ack", "finalize-request", "record", "error")

# Keys that must never appear anywhere in a wire message: their presence
# would mean vote content or officer secrets leaked onto the wire.
FORBIDDEN_WIRE_KEYS = frozenset(
    {
        "candidate",
        "candidate_index",
        "vote",
        "encoded_vote",
        "eval_points",
        "eval_point",
        "secret",
        "shares",
        "coefficients",
        "polynomial",
    }
)

# Test/diagnostic hook: called with every message that crosses the wire.
_message_taps: list[Callable[[dict], None]] = []


def add_message_tap(tap: Callable[[dict], None]) -> None:
    _message_taps.append(tap)


def remove_message_tap(tap: Callable[[dict], None]) -> None:
    _message_taps.remove(tap)


def _tap(message: dict) -> None:
    for tap in _message_taps:
        tap(message)


def open_message(election_id: str, config_doc: Mapping) -> dict:
    return _validated(
        {
            "version": PROTOCOL_VERSION,
            "kind": "open",
            "election_id": election_id,
            "config": dict(config_doc),
        }
    )


def submit_message(election_id: str, ballot_id: str, value: FieldElement) -> dict:
    return _validated(
        {
            "version": PROTOCOL_VERSION,
            "kind": "submit",
            "election_id": election_id,
            "ballot_id": ballot_id,
            "value": str(value.residue),
        }
    )


def finalize_message(election_id: str) -> dict:
    return _validated(
        {
            "version": PROTOCOL_VERSION,
            "kind": "finalize-request",
            "election_id": election_id,
        }
    )


def ack_message(election_id: str, **payload) -> dict:
    return _validated(
        {
            "version": PROTOCOL_VERSION,
            "kind": "ack",
            "election_id": election_id,
            **payload,
        }
    )


def record_message(election_id: str, record: FinalizationRecord) -> dict:
    return _validated(
        {
            "version": PROTOCOL_VERSION,
            "kind": "record",
            "election_id": election_id,
            "record": record.to_dict(),
        }
    )


def error_message(election_id: str, code: str, detail: str | None = None) -> dict:
    message = {
        "version": PROTOCOL_VERSION,
        "kind": "error",
        "election_id": election_id,
        "error": code,
    }
    if detail:
        message["detail"] = detail
    return _validated(message)


def _scan_forbidden(value, path: str) -> None:
    if isinstance(value, Mapping):
        for key, nested in value.items():
            if key in FORBIDDEN_WIRE_KEYS:
                raise WireError(f"forbidden key {key!r} at {path}")
            _scan_forbidden(nested, f"{path}.{key}")
    elif isinstance(value, (list, tuple)):
        for index, nested in enumerate(value):
            _scan_forbidden(nested, f"{path}[{index}]")


def validate_message(message: Mapping) -> None:
    """Enforce the wire contract on one message; raises WireError."""
    if not isinstance(message, Mapping):
        raise WireError("message must be a JSON object")
    if message.get("version") != PROTOCOL_VERSION:
        raise WireError(f"unsupported protocol version {message.get('version')!r}")
    kind = message.get("kind")
    if kind not in MESSAGE_KINDS:
        raise WireError(f"unknown message kind {kind!r}")
    election_id = message.get("election_id")
    if not isinstance(election_id, str) or not election_id:
        raise WireError("every message must carry a non-empty election_id")
    _scan_forbidden(message, "$")
    if kind == "submit":
        allowed = {"version", "kind", "election_id", "ballot_id", "value"}
        if set(message) != allowed:
            raise WireError(
                f"submit carries exactly {sorted(allowed)}, got {sorted(message)}"
            )
        if not isinstance(message["ballot_id"], str) or not message["ballot_id"]:
            raise WireError("submit needs a non-empty ballot_id")
        value = message["value"]
        if not isinstance(value, str) or not value.isdigit():
            raise WireError("share value must be a decimal string")
    elif kind == "open":
        if not isinstance(message.get("config"), Mapping):
            raise WireError("open must carry a config object")
    elif kind == "record":
        if not isinstance(message.get("record"), Mapping):
            raise WireError("record message must carry a record object")
    elif kind == "error":
        if not isinstance(message.get("error"), str):
            raise WireError("error message must carry an error code")


def _validated(message: dict) -> dict:
    validate_message(message)
    _tap(message)
    return message


_HTTP_STATUS = {
    DuplicateBallotError: 409,
    PhaseError: 409,
    CapacityError: 409,
    ConfigError: 400,
    FieldMismatchError: 400,
    WireError: 400,
    UnknownElectionError: 404,
}


def _status_for(error: ProtocolError) -> int:
    for klass, status in _HTTP_STATUS.items():
        if isinstance(error, klass):
            return status
    return 500


def _make_handler(center: CollectionCenter):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "homotally"

        def log_message(self, *args):  # quiet; the journal is the record
            pass

        # -- helpers ---------------------------------------------------

        def _election_id(self, fallback: str = "") -> str:
            election = center.election
            if election is not None:
                return election.election_id
            return fallback or "unknown"

        def _send_json(self, status: int, message: dict) -> None:
            body = json.dumps(message).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self._cors()
            self.end_headers()
            self.wfile.write(body)

        def _cors(self) -> None:
            # The official dashboard calls these endpoints from a browser;
            # a deployment would pin the origin.
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _send_error_msg(self, election_id: str, error: ProtocolError) -> None:
            self._send_json(
                _status_for(error),
                error_message(election_id, error.code, str(error)),
            )

        def _read_message(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                message = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise WireError("body is not valid JSON")
            validate_message(message)
            _tap(message)
            return message

        def _route(self) -> tuple[str, ...]:
            path = urllib.parse.urlparse(self.path).path
            return tuple(
                urllib.parse.unquote(part)
                for part in path.strip("/").split("/")
                if part
            )

        def _check_election(self, election_id: str) -> None:
            election = center.election
            if election is None or election.election_id != election_id:
                raise UnknownElectionError(
                    f"center {center.center_id} holds no election {election_id!r}"
                )

        # -- verbs -----------------------------------------------------

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Content-Length", "0")
            self._cors()
            self.end_headers()

        def do_POST(self):
            route = self._route()
            eid = route[2] if len(route) > 2 else ""
            try:
                if route == ("v1", "elections"):
                    message = self._read_message()
                    if message["kind"] != "open":
                        raise WireError("this endpoint expects an open message")
                    center.open_election(message["config"])
                    self._send_json(
                        200, ack_message(message["election_id"], status="open")
                    )
                elif len(route) == 4 and route[:2] == ("v1", "elections") and route[3] == "shares":
                    message = self._read_message()
                    if message["kind"] != "submit":
                        raise WireError("this endpoint expects a submit message")
                    if message["election_id"] != eid:
                        raise WireError("election_id in body and path disagree")
                    self._check_election(eid)
                    value = int(message["value"])
                    p = center.election.prime.value
                    if value >= p:
                        raise WireError(f"share value {value} outside the field")
                    center.submit_share(message["ballot_id"], FieldElement(value, p))
                    self._send_json(200, ack_message(eid, status="accepted"))
                elif len(route) == 4 and route[:2] == ("v1", "elections") and route[3] == "finalize":
                    message = self._read_message()
                    if message["kind"] != "finalize-request":
                        raise WireError("this endpoint expects a finalize-request")
                    if message["election_id"] != eid:
                        raise WireError("election_id in body and path disagree")
                    self._check_election(eid)
                    record = center.finalize()
                    self._send_json(200, record_message(eid, record))
                else:
                    raise UnknownElectionError(f"no such endpoint {self.path}")
            except ProtocolError as error:
                self._send_error_msg(self._election_id(eid), error)

        def do_GET(self):
            route = self._route()
            eid = route[2] if len(route) > 2 else ""
            try:
                if len(route) == 4 and route[:2] == ("v1", "elections") and route[3] == "record":
                    self._check_election(eid)
                    if center.phase != "finalized":
                        raise PhaseError("center has not finalized")
                    record = center.finalize()
                    self._send_json(200, record_message(eid, record))
                elif len(route) == 4 and route[:2] == ("v1", "elections") and route[3] == "status":
                    self._check_election(eid)
                    status = center.status()
                    self._send_json(
                        200,
                        ack_message(
                            eid,
                            status=status["phase"],
                            received_count=status["received_count"],
                            center_id=status["center_id"],
                        ),
                    )
                else:
                    raise UnknownElectionError(f"no such endpoint {self.path}")
            except ProtocolError as error:
                self._send_error_msg(self._election_id(eid), error)

    return Handler


class CenterService:
    """HTTP face of one collection center."""

    def __init__(self, center: CollectionCenter, host: str = "127.0.0.1", port: int = 0):
        self.center = center
        try:
            self._httpd = ThreadingHTTPServer((host, port), _make_handler(center))
        except OSError as exc:
            raise ServiceError(f"cannot bind {host}:{port}: {exc}")
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> "CenterService":
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05), daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self.center.close()


# -- client ----------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    """Bounded exponential backoff for terminal-side requests."""

    attempts: int = 4
    base_delay: float = 0.05
    factor: float = 2.0
    timeout: float = 5.0

    def delays(self):
        delay = self.base_delay
        for _ in range(max(self.attempts - 1, 0)):
            yield delay
            delay *= self.factor


STATUS_ACKNOWLEDGED = "acknowledged"
OVERALL_REGISTERED = "registered"
OVERALL_PARTIAL = "partial"
OVERALL_REJECTED = "rejected"


@dataclass
class CastOutcome:
    """Result of fanning one ballot's shares out to every center.

    ``shares`` is kept so a partial cast can be replayed with the same
    ballot_id and the same share values; re-splitting on retry would hand
    centers shares of inconsistent polynomials and corrupt the tally. The
    shares never leave the terminal except one-per-center.
    """

    ballot_id: str
    statuses: dict[int, str]
    overall: str
    shares: ShareBatch = field(repr=False, default=())

    def to_dict(self, include_shares: bool = False) -> dict:
        doc = {
            "ballot_id": self.ballot_id,
            "overall": self.overall,
            "statuses": {str(cid): status for cid, status in sorted(self.statuses.items())},
        }
        if include_shares:
            doc["share_values"] = {
                str(share.point_index): str(share.value.residue) for share in self.shares
            }
        return doc


def _post_json(url: str, message: dict, timeout: float) -> tuple[int, dict]:
    body = json.dumps(message).encode("utf-8")
    request = urllib.request.Request(
        url,
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.status, json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        try:
            payload = json.loads(exc.read().decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            payload = {}
        return exc.code, payload


def _get_json(url: str, timeout: float) -> tuple[int, dict]:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as response:
            return response.status, json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        try:
            payload = json.loads(exc.read().decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            payload = {}
        return exc.code, payload


def _shares_url(endpoint: str, election_id: str) -> str:
    eid = urllib.parse.quote(election_id, safe="")
    return f"{endpoint.rstrip('/')}/v1/elections/{eid}/shares"


def _deliver_share(
    endpoint: str,
    election_id: str,
    ballot_id: str,
    value: FieldElement,
    retry: RetryPolicy,
) -> str:
    """Submit one share with retries; returns a per-center status string."""
    message = submit_message(election_id, ballot_id, value)
    url = _shares_url(endpoint, election_id)
    delays = list(retry.delays()) + [None]
    last = "unreachable"
    for pause in delays:
        try:
            status, payload = _post_json(url, message, retry.timeout)
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            last = f"failed: unreachable ({getattr(exc, 'reason', exc)})"
            if pause is not None:
                time.sleep(pause)
            continue
        if status == 200:
            return STATUS_ACKNOWLEDGED
        code = payload.get("error", f"http-{status}")
        # An already-seen ballot_id means this share is safely registered:
        # the retry raced an earlier delivery.
        if code == "duplicate-ballot":
            return STATUS_ACKNOWLEDGED
        if status >= 500:
            last = f"failed: {code}"
            if pause is not None:
                time.sleep(pause)
            continue
        return f"failed: {code}"
    return last


def _overall(statuses: Mapping[int, str]) -> str:
    acked = sum(1 for status in statuses.values() if status == STATUS_ACKNOWLEDGED)
    if acked == len(statuses):
        return OVERALL_REGISTERED
    if acked == 0:
        return OVERALL_REJECTED
    return OVERALL_PARTIAL


def deliver_shares(
    election_id: str,
    endpoints: Sequence[str],
    ballot_id: str,
    shares: ShareBatch,
    retry: RetryPolicy = RetryPolicy(),
) -> CastOutcome:
    """Send share i to center i, concurrently, and aggregate acknowledgments.

    Safe to call again with the same ballot_id and shares: centers that
    already accepted answer duplicate-ballot, which counts as acknowledged.
    """
    if len(shares) != len(endpoints):
        raise ConfigError(
            f"{len(shares)} shares for {len(endpoints)} endpoints"
        )
    statuses: dict[int, str] = {}
    with ThreadPoolExecutor(max_workers=len(endpoints)) as pool:
        futures = {
            share.point_index: pool.submit(
                _deliver_share,
                endpoint,
                election_id,
                ballot_id,
                share.value,
                retry,
            )
            for endpoint, share in zip(endpoints, shares)
        }
        for center_id, future in futures.items():
            statuses[center_id] = future.result()
    return CastOutcome(
        ballot_id=ballot_id,
        statuses=statuses,
        overall=_overall(statuses),
        shares=shares,
    )


def cast_ballot(
    config: ElectionConfig,
    endpoints: Sequence[str],
    candidate_index: int,
    rng: CoefficientSource,
    ballot_id: str | None = None,
    retry: RetryPolicy = RetryPolicy(),
) -> CastOutcome:
    """Encode, split, and fan out one ballot.

    Validation happens before anything touches the network; an invalid
    candidate never produces wire traffic. The returned outcome carries the
    ballot_id and shares needed to replay a partial cast.
    """
    if len(endpoints) != config.center_count:
        raise ConfigError(
            f"{len(endpoints)} endpoints for {config.center_count} centers"
        )
    if not 1 <= candidate_index <= config.candidate_count:
        raise InvalidCandidateError(
            f"candidate {candidate_index} outside 1..{config.candidate_count}"
        )
    encoded = encode_vote(config, candidate_index)
    shares = split(encoded.value, config.policy, rng)
    if ballot_id is None:
        ballot_id = _secrets.token_hex(16)
    return deliver_shares(config.election_id, endpoints, ballot_id, shares, retry)


def retry_cast(
    config: ElectionConfig,
    endpoints: Sequence[str],
    outcome: CastOutcome,
    retry: RetryPolicy = RetryPolicy(),
) -> CastOutcome:
    """Replay a partial cast: same ballot_id, same shares, all centers."""
    return deliver_shares(
        config.election_id, endpoints, outcome.ballot_id, outcome.shares, retry
    )


def open_all(
    endpoints: Sequence[str],
    config_doc: Mapping,
    retry: RetryPolicy = RetryPolicy(),
) -> dict[str, str]:
    """POST the open message to every center; returns endpoint -> status."""
    election_id = config_doc.get("election_id", "")
    message = open_message(election_id, config_doc)
    results: dict[str, str] = {}
    for endpoint in endpoints:
        url = f"{endpoint.rstrip('/')}/v1/elections"
        try:
            status, payload = _post_json(url, message, retry.timeout)
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            results[endpoint] = f"unreachable ({getattr(exc, 'reason', exc)})"
            continue
        results[endpoint] = "open" if status == 200 else payload.get("error", f"http-{status}")
    return results


def fetch_status(
    endpoint: str, election_id: str, timeout: float = 5.0
) -> dict:
    eid = urllib.parse.quote(election_id, safe="")
    status, payload = _get_json(
        f"{endpoint.rstrip('/')}/v1/elections/{eid}/status", timeout
    )
    if status != 200:
        raise UnknownElectionError(
            f"{endpoint}: {payload.get('error', f'http-{status}')}"
        )
    return payload


def finalize_center(
    endpoint: str, election_id: str, timeout: float = 5.0
) -> FinalizationRecord:
    eid = urllib.parse.quote(election_id, safe="")
    message = finalize_message(election_id)
    status, payload = _post_json(
        f"{endpoint.rstrip('/')}/v1/elections/{eid}/finalize", message, timeout
    )
    if status != 200:
        raise PhaseError(f"{endpoint}: {payload.get('error', f'http-{status}')}")
    return FinalizationRecord.from_dict(payload.get("record", {}))


def collect_records(
    endpoints: Sequence[str],
    election_id: str,
    threshold: int,
    timeout: float = 5.0,
) -> list[FinalizationRecord]:
    """Fetch finalization records from every reachable center.

    Raises if fewer than ``threshold`` records come back; below that line no
    tally is possible, which is exactly the scheme's trust property.
    """
    eid = urllib.parse.quote(election_id, safe="")
    records: list[FinalizationRecord] = []
    failures: list[str] = []
    for endpoint in endpoints:
        url = f"{endpoint.rstrip('/')}/v1/elections/{eid}/record"
        try:
            status, payload = _get_json(url, timeout)
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            failures.append(f"{endpoint}: unreachable ({getattr(exc, 'reason', exc)})")
            continue
        if status != 200:
            failures.append(f"{endpoint}: {payload.get('error', f'http-{status}')}")
            continue
        try:
            records.append(FinalizationRecord.from_dict(payload.get("record", {})))
        except ValueError as exc:
            failures.append(f"{endpoint}: bad record ({exc})")
    if len(records) < threshold:
        raise InsufficientSharesError(
            f"only {len(records)} of {len(endpoints)} centers yielded records "
            f"(threshold {threshold}); " + "; ".join(failures)
        )
    return records
