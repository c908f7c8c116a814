"""The directory: account registry, consent gating, fan-out, and audits.

The directory maps canonical account identifiers to responder endpoints
and mediates every query: it forwards a query message to a sticky random
subset of the account's responders, collects their responses subject to a
per-responder timeout, and hands them back in a fresh random order so the
requester cannot tell which responder produced which answer.  It never
sees a password or anything derived from one — queries and responses pass
through as opaque ciphertext carriers.

Queries are only forwarded during a consent window that the account owner
opens by redeeming a single-use token (the stand-in for clicking a
confirmation link).  The directory can also audit a responder by sending
a query whose every slot is a non-identity encryption under a key the
directory itself holds; any identity answer to such a query is proof of a
fabricated "reused" verdict.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import os
import random
import secrets
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from . import bloom, elgamal, protocol
from .errors import (
    ConsentRequiredError,
    ConsentTokenError,
    InsufficientRespondersError,
    MalformedAddressError,
)
from .groups import P192

GMAIL_DOMAINS = {"gmail.com", "googlemail.com"}
_33MAIL_SUFFIX = ".33mail.com"

DEFAULT_WINDOW_SECONDS = 60.0
DEFAULT_TOKEN_TTL_SECONDS = 600.0
TIMEOUT_PROFILES = {"trusted": 2.0, "untrusted": 8.0}

_AUDIT_FILTER_LENGTH = 16
_AUDIT_NUM_HASHES = 2


def canonicalize(email: str) -> str:
    """Collapse provider aliases so one user maps to one identifier.

    Lowercases throughout; for Gmail-style domains strips dots and any
    ``+suffix`` from the local part; for 33mail-style per-user domains
    maps every alias to the user's ``you@`` address.
    """
    email = email.strip()
    if email.count("@") != 1 or any(c.isspace() for c in email):
        raise MalformedAddressError(f"not an email address: {email!r}")
    local, domain = email.split("@")
    if not local or not domain or domain.startswith(".") or domain.endswith("."):
        raise MalformedAddressError(f"not an email address: {email!r}")
    local = local.lower()
    domain = domain.lower()
    if domain in GMAIL_DOMAINS:
        local = local.split("+", 1)[0].replace(".", "")
        if not local:
            raise MalformedAddressError(f"empty local part after aliasing: {email!r}")
    elif domain.endswith(_33MAIL_SUFFIX) and domain != _33MAIL_SUFFIX.lstrip("."):
        local = "you"
    return f"{local}@{domain}"


@dataclass(frozen=True)
class ResponderEndpoint:
    """Opaque (possibly pseudonymous) address plus a transport hint."""

    address: str
    transport: str = "tcp"


@dataclass
class AccountRecord:
    canonical_id: str
    endpoints: Set[ResponderEndpoint] = field(default_factory=set)
    created: float = 0.0
    updated: float = 0.0


@dataclass(frozen=True)
class Ack:
    ok: bool = True
    warning: Optional[str] = None


@dataclass
class ConsentState:
    token: str
    account: str
    expires_at: float
    window: float
    used: bool = False


@dataclass
class _Window:
    account: str
    window_id: str
    expires_at: float
    plans: Dict[int, "FanoutPlan"] = field(default_factory=dict)


@dataclass(frozen=True)
class FanoutPlan:
    account: str
    chosen: Tuple[ResponderEndpoint, ...]
    sticky_key: str


class AuditVerdict(enum.Enum):
    HONEST = "honest"
    LYING = "lying"
    INCONCLUSIVE = "inconclusive"


Transport = Callable[[ResponderEndpoint, protocol.QueryMessage, float],
                     protocol.ResponseMessage]


class Directory:
    """In-process directory core; the network daemon wraps this.

    ``transport`` delivers one query to one endpoint within a timeout and
    returns the response message (raising ``TimeoutError`` or any other
    exception on failure).  State mutations are appended to a JSON-lines
    log under ``state_dir`` when given, with a snapshot written on
    ``close`` and replayed on startup.
    """

    def __init__(self, transport: Optional[Transport] = None, *,
                 window_seconds: float = DEFAULT_WINDOW_SECONDS,
                 token_ttl: float = DEFAULT_TOKEN_TTL_SECONDS,
                 per_responder_timeout: float = TIMEOUT_PROFILES["trusted"],
                 early_return_fraction: Optional[float] = None,
                 state_dir: Optional[str] = None,
                 audit_group=P192,
                 max_workers: int = 8,
                 clock: Callable[[], float] = time.time,
                 rng: Optional[random.Random] = None):
        self.transport = transport
        self.window_seconds = window_seconds
        self.token_ttl = token_ttl
        self.per_responder_timeout = per_responder_timeout
        self.early_return_fraction = early_return_fraction
        self.audit_group = audit_group
        self.max_workers = max_workers
        self.clock = clock
        self._rng = rng or random.SystemRandom()
        self._lock = threading.RLock()
        self._accounts: Dict[str, AccountRecord] = {}
        self._tokens: Dict[str, ConsentState] = {}
        self._windows: Dict[str, _Window] = {}
        self._flagged: Set[ResponderEndpoint] = set()
        self._state_dir = state_dir
        self._log_fh = None
        if state_dir is not None:
            os.makedirs(state_dir, exist_ok=True)
            self._load_state()
            self._log_fh = open(os.path.join(state_dir, "events.jsonl"), "a")

    # -- registry ---------------------------------------------------------

    def register(self, canonical_id: str, endpoint: ResponderEndpoint) -> Ack:
        canonical_id = canonicalize(canonical_id)
        with self._lock:
            now = self.clock()
            record = self._accounts.get(canonical_id)
            if record is None:
                record = AccountRecord(canonical_id, set(), now, now)
                self._accounts[canonical_id] = record
            already = endpoint in record.endpoints
            record.endpoints.add(endpoint)
            record.updated = now
            self._log({"op": "register", "account": canonical_id,
                       "address": endpoint.address, "transport": endpoint.transport})
            return Ack(warning="endpoint already registered" if already else None)

    def deregister(self, canonical_id: str, endpoint: ResponderEndpoint) -> Ack:
        canonical_id = canonicalize(canonical_id)
        with self._lock:
            record = self._accounts.get(canonical_id)
            if record is None or endpoint not in record.endpoints:
                return Ack(warning="endpoint was not registered")
            record.endpoints.discard(endpoint)
            record.updated = self.clock()
            self._log({"op": "deregister", "account": canonical_id,
                       "address": endpoint.address, "transport": endpoint.transport})
            return Ack()

    def responder_count(self, canonical_id: str) -> int:
        """R_a: how many responders hold an account for this identifier."""
        canonical_id = canonicalize(canonical_id)
        with self._lock:
            record = self._accounts.get(canonical_id)
            return len(record.endpoints) if record else 0

    # -- consent ----------------------------------------------------------

    def begin_consent(self, canonical_id: str) -> str:
        """Issue a single-use token the account owner must redeem."""
        canonical_id = canonicalize(canonical_id)
        with self._lock:
            token = secrets.token_hex(16)
            self._tokens[token] = ConsentState(
                token, canonical_id, self.clock() + self.token_ttl,
                self.window_seconds,
            )
            return token

    def confirm_consent(self, token: str) -> float:
        """Redeem a token, opening a query window; returns its duration."""
        with self._lock:
            state = self._tokens.get(token)
            now = self.clock()
            if state is None:
                raise ConsentTokenError("unknown token")
            if state.used:
                raise ConsentTokenError("token already used")
            if now >= state.expires_at:
                raise ConsentTokenError("token expired")
            state.used = True
            window_id = secrets.token_hex(8)
            self._windows[state.account] = _Window(
                state.account, window_id, now + state.window
            )
            return state.window

    def _open_window(self, account: str) -> _Window:
        window = self._windows.get(account)
        if window is None or self.clock() >= window.expires_at:
            raise ConsentRequiredError(
                f"no open consent window for {account!r}; query dropped"
            )
        return window

    def consent_window_open(self, account: str) -> bool:
        try:
            with self._lock:
                self._open_window(account)
            return True
        except ConsentRequiredError:
            return False

    # -- fan-out ----------------------------------------------------------

    def _plan(self, window: _Window, account: str, rho: int) -> FanoutPlan:
        record = self._accounts.get(account)
        eligible = sorted(
            (ep for ep in (record.endpoints if record else ())
             if ep not in self._flagged),
            key=lambda ep: (ep.address, ep.transport),
        )
        if rho > len(eligible):
            raise InsufficientRespondersError(
                f"{len(eligible)} responders registered, {rho} requested"
            )
        plan = window.plans.get(rho)
        if plan is None:
            sticky_key = hashlib.sha256(
                f"{account}|{window.window_id}|{rho}".encode()
            ).hexdigest()
            picker = random.Random(int(sticky_key, 16))
            chosen = tuple(picker.sample(eligible, rho))
            plan = FanoutPlan(account, chosen, sticky_key)
            window.plans[rho] = plan
        return plan

    def fanout(self, query: protocol.QueryMessage, rho: int
               ) -> List[protocol.ResponseMessage]:
        """Forward a query to rho sticky-chosen responders; permute replies.

        Requires an open consent window for the query's account.  Each
        responder gets the per-responder timeout; when an early-return
        fraction is configured, returns as soon as that share of replies
        arrived.  The reply order is freshly and uniformly permuted.
        """
        if self.transport is None:
            raise RuntimeError("directory has no transport configured")
        account = canonicalize(query.account_id)
        with self._lock:
            window = self._open_window(account)
            plan = self._plan(window, account, rho)
        responses = self._collect(plan.chosen, query)
        self._rng.shuffle(responses)
        self._log({"op": "fanout", "account": account,
                   "rho": rho, "collected": len(responses)})
        return responses

    def _collect(self, endpoints, query) -> List[protocol.ResponseMessage]:
        need = len(endpoints)
        if self.early_return_fraction is not None:
            need = max(1, math.ceil(self.early_return_fraction * len(endpoints) - 1e-9))
        timeout = self.per_responder_timeout
        if self.max_workers <= 1:
            # Serial mode: used by the benchmark harness to record
            # per-request wall clock without scheduling effects.
            out = []
            for ep in endpoints:
                try:
                    out.append(self.transport(ep, query, timeout))
                except Exception:
                    continue
                if len(out) >= need:
                    break
            return out
        out = []
        pool = ThreadPoolExecutor(max_workers=min(self.max_workers, len(endpoints)))
        try:
            pending = {pool.submit(self.transport, ep, query, timeout)
                       for ep in endpoints}
            deadline = time.monotonic() + timeout
            while pending and len(out) < need:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                done, pending = wait(pending, timeout=remaining,
                                     return_when=FIRST_COMPLETED)
                for fut in done:
                    try:
                        out.append(fut.result())
                    except Exception:
                        continue
        finally:
            # Do not wait out stragglers: early return is the whole point.
            pool.shutdown(wait=False, cancel_futures=True)
        return out

    # -- audit ------------------------------------------------------------

    def build_audit_query(self, rng=None):
        """Query whose every slot encrypts a non-identity element.

        Returns (query, keypair); any response in the identity class
        proves the responder fabricated a "reused" answer.
        """
        rng = rng or self._rng
        group = self.audit_group
        keypair = elgamal.gen(group, rng)
        params = bloom.BloomParams(
            _AUDIT_FILTER_LENGTH, _AUDIT_NUM_HASHES,
            bytes(rng.randrange(256) for _ in range(bloom.SEED_BYTES)),
        )
        slots = []
        for _ in range(params.length_ell):
            m = group.random_element(rng)
            while m == group.identity:
                m = group.random_element(rng)
            slots.append(elgamal.encrypt(keypair.pk, m, rng))
        account = f"audit-{secrets.token_hex(8)}@invalid"
        query = protocol.QueryMessage(account, keypair.pk, params, tuple(slots))
        return query, keypair

    def audit_responder(self, endpoint: ResponderEndpoint,
                        rng=None) -> AuditVerdict:
        """Probe one responder with an all-non-identity query."""
        if self.transport is None:
            raise RuntimeError("directory has no transport configured")
        query, keypair = self.build_audit_query(rng)
        try:
            response = self.transport(endpoint, query, self.per_responder_timeout)
        except Exception:
            return AuditVerdict.INCONCLUSIVE
        plaintext = elgamal.decrypt(keypair.sk, response.result_ciphertext)
        if plaintext is elgamal.BOTTOM:
            return AuditVerdict.INCONCLUSIVE
        if plaintext == keypair.group.identity:
            with self._lock:
                self._flagged.add(endpoint)
            self._log({"op": "flag", "address": endpoint.address,
                       "transport": endpoint.transport})
            return AuditVerdict.LYING
        return AuditVerdict.HONEST

    @property
    def flagged(self) -> Set[ResponderEndpoint]:
        return set(self._flagged)

    # -- persistence ------------------------------------------------------

    def _log(self, event: dict) -> None:
        if self._log_fh is not None:
            event = dict(event, ts=self.clock())
            self._log_fh.write(json.dumps(event) + "\n")
            self._log_fh.flush()

    def _snapshot_payload(self) -> dict:
        return {
            "accounts": {
                account: sorted(
                    [ep.address, ep.transport] for ep in record.endpoints
                )
                for account, record in self._accounts.items()
            },
            "flagged": sorted(
                [ep.address, ep.transport] for ep in self._flagged
            ),
        }

    def close(self) -> None:
        if self._state_dir is None:
            return
        snap_path = os.path.join(self._state_dir, "snapshot.json")
        with open(snap_path, "w") as fh:
            json.dump(self._snapshot_payload(), fh)
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None
        # The log is folded into the snapshot; start the next run clean.
        open(os.path.join(self._state_dir, "events.jsonl"), "w").close()

    def _load_state(self) -> None:
        snap_path = os.path.join(self._state_dir, "snapshot.json")
        if os.path.exists(snap_path):
            with open(snap_path) as fh:
                snap = json.load(fh)
            for account, endpoints in snap.get("accounts", {}).items():
                record = AccountRecord(account, set(), self.clock(), self.clock())
                for address, transport in endpoints:
                    record.endpoints.add(ResponderEndpoint(address, transport))
                self._accounts[account] = record
            for address, transport in snap.get("flagged", []):
                self._flagged.add(ResponderEndpoint(address, transport))
        log_path = os.path.join(self._state_dir, "events.jsonl")
        if os.path.exists(log_path):
            with open(log_path) as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    self._replay(json.loads(line))

    def _replay(self, event: dict) -> None:
        op = event.get("op")
        if op == "register":
            ep = ResponderEndpoint(event["address"], event["transport"])
            record = self._accounts.setdefault(
                event["account"],
                AccountRecord(event["account"], set(), event["ts"], event["ts"]),
            )
            record.endpoints.add(ep)
        elif op == "deregister":
            record = self._accounts.get(event["account"])
            if record is not None:
                record.endpoints.discard(
                    ResponderEndpoint(event["address"], event["transport"])
                )
        elif op == "flag":
            self._flagged.add(
                ResponderEndpoint(event["address"], event["transport"])
            )
