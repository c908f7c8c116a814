"""Desk-scale benchmark harness for the protocol and its deployments.

Spins up in-process responders behind a directory configured for serial
collection (so per-request wall clock is recorded without scheduling
effects), then times each phase of the protocol separately: query build
(including encoding), responder-side processing (decode, respond,
encode), requester-side decode, and the full round trip through the
directory.  Also reports the encoded query size and the rate of
responses that arrive within a qualifying threshold.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from . import bloom, protocol, similarity, wire
from .directory import Directory, ResponderEndpoint
from .groups import CURVES
from .netnodes import LatencyProfile, ResponderStore, make_inprocess_responder_transport

CSV_FIELDS = ("rho", "n", "curve", "phase", "time_s", "msg_bytes")


@dataclass(frozen=True)
class BenchScenario:
    curve: str = "P192"
    n_values: Tuple[int, ...] = (1, 8)
    rho_values: Tuple[int, ...] = (1, 4)
    rounds: int = 3
    k: int = bloom.DEFAULT_NUM_HASHES
    profile: Optional[LatencyProfile] = None
    qualifying_threshold_s: float = 5.0
    d: int = 0
    hash_params: similarity.SlowHashParams = similarity.CHEAP_HASH_PARAMS
    account: str = "bench@example.com"
    password: str = "benchmark1"


@dataclass(frozen=True)
class BenchRecord:
    rho: int
    n: int
    curve: str
    phase: str
    time_s: float
    msg_bytes: int


def _build_stores(scenario: BenchScenario, n: int, count: int
                  ) -> Dict[str, ResponderStore]:
    stores: Dict[str, ResponderStore] = {}
    for i in range(count):
        sset = similarity.build_similar_set(
            scenario.account, scenario.password, scenario.d,
            max(n, scenario.d + 1), scenario.hash_params, rng_seed=i)
        store = ResponderStore()
        store.add(sset)
        stores[f"bench-{i}"] = store
    return stores


def bench_run(scenario: BenchScenario) -> List[BenchRecord]:
    group = CURVES[scenario.curve]
    records: List[BenchRecord] = []
    max_rho = max(scenario.rho_values)
    for n in scenario.n_values:
        stores = _build_stores(scenario, n, max_rho)
        transport = make_inprocess_responder_transport(
            stores, scenario.profile, wire_roundtrip=True)
        directory = Directory(
            transport, window_seconds=86400.0, max_workers=1,
            per_responder_timeout=max(scenario.qualifying_threshold_s * 4, 30.0))
        for address in stores:
            directory.register(scenario.account, ResponderEndpoint(address))
        token = directory.begin_consent(scenario.account)
        directory.confirm_consent(token)

        first_store = next(iter(stores.values()))
        for rho in scenario.rho_values:
            qualifying = 0
            batch_start = time.perf_counter()
            for _ in range(scenario.rounds):
                t0 = time.perf_counter()
                query, session = protocol.build_query(
                    scenario.account, scenario.password, n, group=group,
                    k=scenario.k, hash_params=scenario.hash_params)
                payload = wire.encode_query(query)
                t_build = time.perf_counter() - t0
                msg_bytes = len(payload)
                records.append(BenchRecord(rho, n, scenario.curve,
                                           "query_build", t_build, msg_bytes))

                t0 = time.perf_counter()
                served = wire.decode_query(payload)
                similar = first_store.get(served.account_id)
                response = protocol.respond(served, similar)
                response_bytes = wire.encode_response(response, group)
                t_respond = time.perf_counter() - t0
                records.append(BenchRecord(rho, n, scenario.curve, "respond",
                                           t_respond, len(response_bytes)))

                t0 = time.perf_counter()
                responses = directory.fanout(query, rho)
                t_round = time.perf_counter() - t0
                t0 = time.perf_counter()
                for r in responses:
                    protocol.decode_result(session, r)
                t_decode = time.perf_counter() - t0
                records.append(BenchRecord(rho, n, scenario.curve, "decode",
                                           t_decode, len(response_bytes)))
                records.append(BenchRecord(rho, n, scenario.curve, "round_trip",
                                           t_round, msg_bytes))
                if t_round <= scenario.qualifying_threshold_s:
                    qualifying += len(responses)
            elapsed = time.perf_counter() - batch_start
            rate = qualifying / elapsed if elapsed > 0 else 0.0
            records.append(BenchRecord(rho, n, scenario.curve,
                                       "qualifying_per_s", rate, 0))
    return records


def mean_phase_time(records: Sequence[BenchRecord], phase: str,
                    rho: Optional[int] = None, n: Optional[int] = None) -> float:
    rows = [r.time_s for r in records
            if r.phase == phase
            and (rho is None or r.rho == rho)
            and (n is None or r.n == n)]
    if not rows:
        raise ValueError(f"no rows for phase {phase!r}")
    return sum(rows) / len(rows)


def write_csv(records: Sequence[BenchRecord], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([r.rho, r.n, r.curve, r.phase,
                         f"{r.time_s:.6f}", r.msg_bytes])


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def read_fit_samples(fh) -> List[Tuple[float, float, float]]:
    """Extract (rho, n, time) fit samples from a CSV stream.

    Accepts either the bench output (round_trip rows are used) or a bare
    three-column rho,n,time file.
    """
    rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty CSV")
    header = [h.strip().lower() for h in rows[0]]
    samples = []
    if "phase" in header:
        idx = {name: header.index(name) for name in ("rho", "n", "phase", "time_s")}
        for row in rows[1:]:
            if row and row[idx["phase"]] == "round_trip":
                samples.append((float(row[idx["rho"]]), float(row[idx["n"]]),
                                float(row[idx["time_s"]])))
    else:
        data = rows[1:] if not _numeric_row(rows[0]) else rows
        for row in data:
            if row:
                samples.append((float(row[0]), float(row[1]), float(row[2])))
    return samples


def _numeric_row(row) -> bool:
    try:
        [float(x) for x in row[:3]]
        return True
    except (ValueError, IndexError):
        return False
