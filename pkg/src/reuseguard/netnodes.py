"""Network roles: responder service, directory daemon, requester client.

Transport is length-prefixed frames over TCP, one request and one reply
per connection.  Anonymity of the deployment models is emulated, not
implemented: a latency profile stands in for the relay chain (one sub-ms
hop when the directory is trusted to hide identities, three slower hops
when it is not), and the directory's response permutation hides which
responder said what.  Response frames carry no responder identifier and
query frames no requester identifier.
"""

from __future__ import annotations

import math
import random
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import planner, protocol, similarity, wire
from .directory import Directory, ResponderEndpoint, canonicalize
from .errors import (
    ConsentRequiredError,
    ConsentTokenError,
    FrameError,
    InsufficientRespondersError,
    InvalidCiphertextError,
    TransportError,
)
from .groups import P192

_SYSTEM_RNG = random.SystemRandom()


# -- latency emulation -----------------------------------------------------

@dataclass(frozen=True)
class LatencyProfile:
    """Per-hop delay model for one deployment's transport path."""

    name: str
    hops: int
    per_hop_median_s: float
    sigma: float


TRUSTED_PROFILE = LatencyProfile("trusted", hops=1, per_hop_median_s=0.0002, sigma=0.25)
UNTRUSTED_PROFILE = LatencyProfile("untrusted", hops=3, per_hop_median_s=0.040, sigma=0.5)

PROFILES = {"trusted": TRUSTED_PROFILE, "untrusted": UNTRUSTED_PROFILE}


def draw_latency(profile: LatencyProfile, rng=None) -> float:
    """One direction's injected delay: a lognormal draw per hop."""
    rng = rng or _SYSTEM_RNG
    mu = math.log(profile.per_hop_median_s)
    return sum(rng.lognormvariate(mu, profile.sigma) for _ in range(profile.hops))


def inject_latency(profile: Optional[LatencyProfile], direction: str,
                   rng=None) -> float:
    """Sleep for one direction's worth of emulated path delay."""
    if profile is None:
        return 0.0
    delay = draw_latency(profile, rng)
    time.sleep(delay)
    return delay


# -- decoys ----------------------------------------------------------------

@dataclass(frozen=True)
class DecoyPolicy:
    """Post-acceptance dummy runs that mask which run set the password."""

    enabled: bool = False
    min_runs: int = 2
    extra_run_probability: float = 0.5


def _decoy_password(rng) -> str:
    return "decoy-" + "".join(rng.choice("abcdefghjkmnpqrstuvwxyz23456789")
                              for _ in range(16))


# -- responder service -------------------------------------------------------

class ResponderStore:
    """Similar sets for the accounts one responder hosts."""

    def __init__(self, sets: Optional[Dict[str, similarity.SimilarSet]] = None):
        self._sets = dict(sets or {})

    def get(self, account: str) -> Optional[similarity.SimilarSet]:
        return self._sets.get(account)

    def add(self, sset: similarity.SimilarSet) -> None:
        self._sets[sset.account_id] = sset

    def accounts(self) -> List[str]:
        return sorted(self._sets)

    def save(self, directory: str) -> None:
        import hashlib
        import os
        os.makedirs(directory, exist_ok=True)
        for account, sset in self._sets.items():
            name = hashlib.sha256(account.encode()).hexdigest()[:24] + ".simset"
            similarity.save_similar_set(sset, os.path.join(directory, name))

    @classmethod
    def load(cls, path: str) -> "ResponderStore":
        import os
        store = cls()
        if os.path.isdir(path):
            for name in sorted(os.listdir(path)):
                if name.endswith(".simset"):
                    store.add(similarity.load_similar_set(os.path.join(path, name)))
        else:
            store.add(similarity.load_similar_set(path))
        return store


@dataclass
class ServiceStats:
    queries_received: int = 0
    responses_sent: int = 0
    errors_sent: int = 0


class _ResponderHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: ResponderServer = self.server  # type: ignore[assignment]
        reader = self.request.makefile("rb")
        group = P192
        try:
            opcode, payload = wire.read_frame(reader.read)
        except FrameError:
            server.stats.errors_sent += 1
            self._send(wire.OP_ERROR, wire.encode_error(
                wire.ERR_MALFORMED, wire.response_payload_size(group)))
            return
        if opcode != wire.OP_QUERY:
            server.stats.errors_sent += 1
            self._send(wire.OP_ERROR, wire.encode_error(
                wire.ERR_MALFORMED, wire.response_payload_size(group)))
            return
        server.stats.queries_received += 1
        try:
            query = wire.decode_query(payload)
            group = query.pk.group
            similar = server.store.get(query.account_id) or similarity.SimilarSet(
                query.account_id, (), 0, 0)
            response = protocol.respond(query, similar, server.rng)
        except (InvalidCiphertextError, FrameError):
            server.stats.errors_sent += 1
            self._send(wire.OP_ERROR, wire.encode_error(
                wire.ERR_INVALID_CIPHERTEXT, wire.response_payload_size(group)))
            return
        server.stats.responses_sent += 1
        inject_latency(server.reply_profile, "response", server.rng)
        self._send(wire.OP_RESPONSE, wire.encode_response(response, group))

    def _send(self, opcode: int, payload: bytes) -> None:
        try:
            self.request.sendall(wire.encode_frame(opcode, payload))
        except OSError:
            pass


class ResponderServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, listen_addr: Tuple[str, int], store: ResponderStore,
                 rng=None, reply_profile: Optional[LatencyProfile] = None):
        super().__init__(listen_addr, _ResponderHandler)
        self.store = store
        self.rng = rng or _SYSTEM_RNG
        self.stats = ServiceStats()
        self.reply_profile = reply_profile

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve_responder(store: ResponderStore, listen_addr: str, rng=None,
                    reply_profile: Optional[LatencyProfile] = None
                    ) -> ResponderServer:
    """Start a responder service in a background thread."""
    server = ResponderServer(_parse_addr(listen_addr), store, rng, reply_profile)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def _parse_addr(addr: str) -> Tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host, int(port)


# -- raw request/response over TCP -----------------------------------------

def tcp_request(address: str, opcode: int, payload: bytes, timeout: float,
                retries: int = 2) -> Tuple[int, bytes]:
    host, port = _parse_addr(address)
    last_error: Exception = TransportError("unreachable")
    for _ in range(retries + 1):
        try:
            with socket.create_connection((host, port), timeout=timeout) as sock:
                sock.settimeout(timeout)
                sock.sendall(wire.encode_frame(opcode, payload))
                reader = sock.makefile("rb")
                return wire.read_frame(reader.read)
        except socket.timeout as exc:
            raise TimeoutError(str(exc)) from exc
        except (OSError, FrameError) as exc:
            last_error = exc
    raise TransportError(f"request to {address} failed: {last_error}")


def make_tcp_responder_transport(profile: Optional[LatencyProfile] = None,
                                 rng=None, retries: int = 0):
    """Directory-side transport delivering queries to responder services."""

    def transport(endpoint: ResponderEndpoint, query: protocol.QueryMessage,
                  timeout: float) -> protocol.ResponseMessage:
        payload = wire.encode_query(query)
        inject_latency(profile, "request", rng)
        opcode, body = tcp_request(endpoint.address, wire.OP_QUERY, payload,
                                   timeout, retries)
        inject_latency(profile, "response", rng)
        if opcode == wire.OP_ERROR:
            raise InvalidCiphertextError(f"responder error {wire.decode_error(body)}")
        if opcode != wire.OP_RESPONSE:
            raise TransportError(f"unexpected opcode {opcode}")
        return wire.decode_response(body, query.pk.group)

    return transport


def make_inprocess_responder_transport(stores: Dict[str, ResponderStore],
                                       profile: Optional[LatencyProfile] = None,
                                       rng=None, wire_roundtrip: bool = True):
    """Transport for in-process responders keyed by endpoint address.

    With ``wire_roundtrip`` the query and response pass through the real
    codecs so serialization and point decompression costs are included.
    """

    def transport(endpoint: ResponderEndpoint, query: protocol.QueryMessage,
                  timeout: float) -> protocol.ResponseMessage:
        store = stores.get(endpoint.address)
        if store is None:
            raise TransportError(f"no responder at {endpoint.address}")
        inject_latency(profile, "request", rng)
        if wire_roundtrip:
            query = wire.decode_query(wire.encode_query(query))
        similar = store.get(query.account_id) or similarity.SimilarSet(
            query.account_id, (), 0, 0)
        response = protocol.respond(query, similar, rng)
        if wire_roundtrip:
            response = wire.decode_response(
                wire.encode_response(response, query.pk.group), query.pk.group)
        inject_latency(profile, "response", rng)
        return response

    return transport


# -- directory daemon --------------------------------------------------------

class _DirectoryHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: DirectoryServer = self.server  # type: ignore[assignment]
        reader = self.request.makefile("rb")
        try:
            opcode, payload = wire.read_frame(reader.read)
            out_op, out_payload = server.dispatch(opcode, payload)
        except FrameError:
            out_op = wire.OP_ERROR
            out_payload = wire.encode_error(
                wire.ERR_MALFORMED, wire.response_payload_size(P192))
        try:
            self.request.sendall(wire.encode_frame(out_op, out_payload))
        except OSError:
            pass


class DirectoryServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, listen_addr: Tuple[str, int], directory: Directory):
        super().__init__(listen_addr, _DirectoryHandler)
        self.directory = directory

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def dispatch(self, opcode: int, payload: bytes) -> Tuple[int, bytes]:
        directory = self.directory
        pad = wire.response_payload_size(P192)
        try:
            if opcode == wire.OP_REGISTER:
                account, address, transport = wire.decode_register(payload)
                ack = directory.register(account, ResponderEndpoint(address, transport))
                return wire.OP_ACK, wire.encode_ack(ack.ok, ack.warning or "")
            if opcode == wire.OP_DEREGISTER:
                account, address, transport = wire.decode_register(payload)
                ack = directory.deregister(account, ResponderEndpoint(address, transport))
                return wire.OP_ACK, wire.encode_ack(ack.ok, ack.warning or "")
            if opcode == wire.OP_BEGIN_CONSENT:
                token = directory.begin_consent(wire.decode_account(payload))
                return wire.OP_TOKEN, wire.encode_token(token)
            if opcode == wire.OP_CONFIRM_CONSENT:
                seconds = directory.confirm_consent(wire.decode_token(payload))
                return wire.OP_WINDOW, wire.encode_window(seconds)
            if opcode == wire.OP_NEGOTIATE:
                count = directory.responder_count(wire.decode_account(payload))
                return wire.OP_COUNT, wire.encode_count(count)
            if opcode == wire.OP_QUERY:
                rho, query_payload = wire.decode_directory_query(payload)
                query = wire.decode_query(query_payload)
                pad = wire.response_payload_size(query.pk.group)
                responses = directory.fanout(query, rho)
                encoded = [wire.encode_response(r, query.pk.group) for r in responses]
                return wire.OP_RESPONSES, wire.encode_responses(encoded)
            if opcode == wire.OP_AUDIT:
                account_unused, address, transport = wire.decode_register(payload)
                verdict = directory.audit_responder(
                    ResponderEndpoint(address, transport))
                return wire.OP_VERDICT, wire.encode_verdict(verdict.value)
            return wire.OP_ERROR, wire.encode_error(wire.ERR_MALFORMED, pad)
        except ConsentRequiredError:
            return wire.OP_ERROR, wire.encode_error(wire.ERR_CONSENT_REQUIRED, pad)
        except ConsentTokenError:
            return wire.OP_ERROR, wire.encode_error(wire.ERR_CONSENT_REQUIRED, pad)
        except InsufficientRespondersError:
            return wire.OP_ERROR, wire.encode_error(
                wire.ERR_INSUFFICIENT_RESPONDERS, pad)
        except (InvalidCiphertextError, FrameError):
            return wire.OP_ERROR, wire.encode_error(wire.ERR_INVALID_CIPHERTEXT, pad)
        except Exception:
            return wire.OP_ERROR, wire.encode_error(wire.ERR_INTERNAL, pad)


def serve_directory(directory: Directory, listen_addr: str) -> DirectoryServer:
    server = DirectoryServer(_parse_addr(listen_addr), directory)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


# -- requester client --------------------------------------------------------

_ERROR_EXCEPTIONS = {
    wire.ERR_CONSENT_REQUIRED: ConsentRequiredError,
    wire.ERR_INSUFFICIENT_RESPONDERS: InsufficientRespondersError,
    wire.ERR_INVALID_CIPHERTEXT: InvalidCiphertextError,
}


class DirectoryClient:
    """Blocking client for the directory's framed API."""

    def __init__(self, address: str, profile: LatencyProfile = TRUSTED_PROFILE,
                 timeout: float = 30.0, retries: int = 2, rng=None):
        self.address = address
        self.profile = profile
        self.timeout = timeout
        self.retries = retries
        self.rng = rng or _SYSTEM_RNG

    def _call(self, opcode: int, payload: bytes, expect: int) -> bytes:
        inject_latency(self.profile, "request", self.rng)
        got_op, body = tcp_request(self.address, opcode, payload,
                                   self.timeout, self.retries)
        inject_latency(self.profile, "response", self.rng)
        if got_op == wire.OP_ERROR:
            code = wire.decode_error(body)
            exc = _ERROR_EXCEPTIONS.get(code, TransportError)
            raise exc(f"directory error code {code}")
        if got_op != expect:
            raise TransportError(f"unexpected opcode {got_op}")
        return body

    def register(self, account: str, address: str, transport: str = "tcp") -> Tuple[bool, str]:
        body = self._call(wire.OP_REGISTER,
                          wire.encode_register(account, address, transport),
                          wire.OP_ACK)
        return wire.decode_ack(body)

    def deregister(self, account: str, address: str, transport: str = "tcp") -> Tuple[bool, str]:
        body = self._call(wire.OP_DEREGISTER,
                          wire.encode_register(account, address, transport),
                          wire.OP_ACK)
        return wire.decode_ack(body)

    def begin_consent(self, account: str) -> str:
        return wire.decode_token(
            self._call(wire.OP_BEGIN_CONSENT, wire.encode_account(account),
                       wire.OP_TOKEN))

    def confirm_consent(self, token: str) -> float:
        return wire.decode_window(
            self._call(wire.OP_CONFIRM_CONSENT, wire.encode_token(token),
                       wire.OP_WINDOW))

    def negotiate(self, account: str) -> int:
        return wire.decode_count(
            self._call(wire.OP_NEGOTIATE, wire.encode_account(account),
                       wire.OP_COUNT))

    def query(self, query: protocol.QueryMessage, rho: int
              ) -> List[protocol.ResponseMessage]:
        payload = wire.encode_directory_query(rho, wire.encode_query(query))
        body = self._call(wire.OP_QUERY, payload, wire.OP_RESPONSES)
        return [wire.decode_response(raw, query.pk.group)
                for raw in wire.decode_responses(body)]

    def audit(self, address: str, transport: str = "tcp") -> str:
        body = self._call(wire.OP_AUDIT,
                          wire.encode_register("", address, transport),
                          wire.OP_VERDICT)
        return wire.decode_verdict(body)


# -- the password-setting flow ----------------------------------------------

@dataclass(frozen=True)
class SetPasswordResult:
    accepted: bool
    detections: int
    responses_received: int
    runs: int
    plan: Optional[planner.PlanResult]


def requester_set_password(client: DirectoryClient, account: str,
                           password: str, t_goal: float,
                           policy: DecoyPolicy = DecoyPolicy(), *,
                           d: int = 0, group=protocol.DEFAULT_GROUP,
                           k: int = 20,
                           hash_params: similarity.SlowHashParams = similarity.DEFAULT_HASH_PARAMS,
                           model: Optional[planner.LatencyModel] = None,
                           curve: planner.ReuseCurve = planner.DEFAULT_REUSE_CURVE,
                           register_endpoint: Optional[str] = None,
                           prior_runs: int = 0,
                           rng=None) -> SetPasswordResult:
    """Run the full password-setting flow against a directory.

    Negotiates the responder count, plans (n, rho) for the response-time
    goal, queries, and rejects the password when any responder detects a
    similar one.  On acceptance, executes the decoy policy (total runs
    for the episode reach at least ``min_runs``, plus one extra run with
    the configured probability) and registers ``register_endpoint`` for
    the account when given.
    """
    rng = rng or _SYSTEM_RNG
    canonical = canonicalize(account)
    r_a = client.negotiate(canonical)
    if r_a == 0:
        # First site for this identifier: nothing to compare against.
        if register_endpoint is not None:
            client.register(canonical, register_endpoint)
        return SetPasswordResult(True, 0, 0, 0, None)
    if model is None:
        model = planner.REFERENCE_MODELS[client.profile.name]
    plan = planner.optimize(t_goal, r_a, d, model, curve)

    def one_run(candidate: str) -> Tuple[int, int]:
        query, session = protocol.build_query(
            canonical, candidate, plan.n, group=group, k=k,
            hash_params=hash_params, rng=rng)
        responses = client.query(query, plan.rho)
        hits = sum(1 for r in responses if protocol.decode_result(session, r))
        return hits, len(responses)

    detections, received = one_run(password)
    runs = 1
    if detections:
        return SetPasswordResult(False, detections, received, runs, plan)
    if policy.enabled:
        while prior_runs + runs < policy.min_runs:
            one_run(_decoy_password(rng))
            runs += 1
        if rng.random() < policy.extra_run_probability:
            one_run(_decoy_password(rng))
            runs += 1
    if register_endpoint is not None:
        client.register(canonical, register_endpoint)
    return SetPasswordResult(True, 0, received, runs, plan)
