"""UDP multipath testbed: sender coordinator, uplinks, relays, receiver.

The coordinator encodes each message fragment into grid cells and hands
column j to uplink agent j over a local reliable hop (a direct call in
process, a length-prefixed TCP stream between processes).  Uplink j sends
cell (i, j) to relay i, every relay forwards blindly to the receiver, and
the receiver decodes a fragment as soon as the arrived cells suffice —
for the two-layer scheme, at the fourth cell completing a 2x2 submatrix.

Nodes own their state and interact only through datagrams; `Testbed` wires
all nine paths inside one process over loopback UDP for demos and tests.
Ingest and timeout logic are plain functions over `ReceiverState`, so
experiments can drive the same code without sockets.
"""

from __future__ import annotations

import dataclasses
import json
import random
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .attacks import AttackRules, TapCapture
from .coding import (
    DEFAULT_PARAMS,
    SCHEMES,
    TWO_LAYER,
    Cell,
    SchemeParams,
    encode_for_scheme,
    try_decode_cells,
)
from .errors import DispatchError, IntegrityError, MalformedHeaderError
from .wire import (
    FragmentSet,
    PacketHeader,
    decode_packet,
    encode_packet,
    fragment_message,
    new_msg_id,
    reassemble,
)

Address = tuple[str, int]
EventSink = Callable[[dict], None]

_MAX_DATAGRAM = 65535


# ---------------------------------------------------------------------------
# topology configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TopologyConfig:
    """Declarative description of the 3 uplinks, 3 relays, and receiver."""

    receiver: Address
    relays: tuple[Address, Address, Address]
    uplinks: tuple[Address, Address, Address]  # distribution-channel listeners
    uplink_labels: tuple[str, str, str] = ("operator-0", "operator-1", "operator-2")
    payload_size: int = 1024
    timeout_s: float = 5.0
    scheme: str = TWO_LAYER
    check_consistency: bool = False

    def __post_init__(self):
        if len(self.relays) != 3 or len(self.uplinks) != 3 or len(self.uplink_labels) != 3:
            raise ValueError("topology needs exactly 3 relays, 3 uplinks, 1 receiver")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme: {self.scheme!r}")
        if self.payload_size < 1:
            raise ValueError("payload_size must be positive")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        bound = [a for a in (self.receiver, *self.relays, *self.uplinks) if a[1] != 0]
        if len(bound) != len(set(bound)):
            raise ValueError("node addresses must be distinct")

    @classmethod
    def from_dict(cls, raw: dict) -> "TopologyConfig":
        def addr(entry) -> Address:
            return (str(entry["host"]), int(entry["port"]))

        return cls(
            receiver=addr(raw["receiver"]),
            relays=tuple(addr(e) for e in raw["relays"]),
            uplinks=tuple(addr(e) for e in raw["uplinks"]),
            uplink_labels=tuple(
                str(e.get("label", f"operator-{i}")) for i, e in enumerate(raw["uplinks"])
            ),
            payload_size=int(raw.get("payload_size", 1024)),
            timeout_s=float(raw.get("timeout_s", 5.0)),
            scheme=str(raw.get("scheme", TWO_LAYER)),
            check_consistency=bool(raw.get("check_consistency", False)),
        )

    @classmethod
    def load(cls, path) -> "TopologyConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "receiver": {"host": self.receiver[0], "port": self.receiver[1]},
            "relays": [{"host": h, "port": p} for h, p in self.relays],
            "uplinks": [
                {"host": h, "port": p, "label": label}
                for (h, p), label in zip(self.uplinks, self.uplink_labels)
            ],
            "payload_size": self.payload_size,
            "timeout_s": self.timeout_s,
            "scheme": self.scheme,
            "check_consistency": self.check_consistency,
        }


def loopback_topology(
    payload_size: int = 1024,
    timeout_s: float = 5.0,
    scheme: str = TWO_LAYER,
    check_consistency: bool = False,
) -> TopologyConfig:
    """All-ephemeral loopback topology for in-process testbeds."""
    lo = ("127.0.0.1", 0)
    return TopologyConfig(
        receiver=lo,
        relays=(lo, lo, lo),
        uplinks=(lo, lo, lo),
        payload_size=payload_size,
        timeout_s=timeout_s,
        scheme=scheme,
        check_consistency=check_consistency,
    )


# ---------------------------------------------------------------------------
# receiver state machine (socket-free)
# ---------------------------------------------------------------------------

@dataclass
class MessageState:
    msg_id: int
    first_seen: float
    fragset: FragmentSet = None  # type: ignore[assignment]
    submatrices: dict[int, tuple[Cell, ...]] = field(default_factory=dict)
    completed_at: Optional[float] = None
    failed_at: Optional[float] = None
    recovered: Optional[bytes] = None

    def __post_init__(self):
        if self.fragset is None:
            self.fragset = FragmentSet(self.msg_id)

    @property
    def done(self) -> bool:
        return self.completed_at is not None or self.failed_at is not None

    def cells_received(self) -> dict[int, tuple[Cell, ...]]:
        return {
            index: tuple(sorted(buf.cells))
            for index, buf in sorted(self.fragset.fragments.items())
        }


@dataclass
class DeliveryReport:
    """Outcome of one message: recovered with a latency, or timed out.

    `latency_s` is receiver-relative (first datagram to completion) when
    produced by the ingest path; `Testbed.send_and_wait` replaces it with
    the dispatch-to-recovery time measured on its own clock.
    """

    msg_id: int
    outcome: str  # "recovered" | "timeout"
    fragments: Optional[int]
    cells_received: dict[int, tuple[Cell, ...]]
    submatrices: dict[int, tuple[Cell, ...]]
    latency_s: Optional[float]
    message: Optional[bytes] = None

    def to_dict(self) -> dict:
        return {
            "msg_id": self.msg_id,
            "outcome": self.outcome,
            "fragments": self.fragments,
            "cells_received": {
                str(k): [list(c) for c in v] for k, v in self.cells_received.items()
            },
            "submatrices": {
                str(k): [list(c) for c in v] for k, v in self.submatrices.items()
            },
            "latency_s": self.latency_s,
        }


@dataclass
class ReceiverState:
    messages: dict[int, MessageState] = field(default_factory=dict)
    reports: list[DeliveryReport] = field(default_factory=list)
    malformed: int = 0

    def prune(self, keep_done: int = 128) -> None:
        done = sorted(
            (m for m in self.messages.values() if m.done), key=lambda m: m.first_seen
        )
        for stale in done[:-keep_done] if keep_done else done:
            self.messages.pop(stale.msg_id, None)


def _recovery_report(ms: MessageState) -> DeliveryReport:
    return DeliveryReport(
        msg_id=ms.msg_id,
        outcome="recovered",
        fragments=(ms.fragset.final_index or 0) + 1,
        cells_received=ms.cells_received(),
        submatrices=dict(ms.submatrices),
        latency_s=ms.completed_at - ms.first_seen,
        message=ms.recovered,
    )


def receiver_ingest(
    datagram: bytes,
    state: ReceiverState,
    *,
    scheme: str = TWO_LAYER,
    params: SchemeParams = DEFAULT_PARAMS,
    now: float,
    check_consistency: bool = False,
) -> list[dict]:
    """Feed one datagram through parse/store/decode; returns emitted events.

    Malformed datagrams are counted and ignored; conflicting cells raise an
    integrity event rather than an exception.  A fragment decodes eagerly
    the moment the arrived cells suffice, and the message completes once
    the final fragment is known and every index up to it is decoded.
    """
    events: list[dict] = []
    try:
        header, payload = decode_packet(datagram)
    except MalformedHeaderError:
        state.malformed += 1
        return events

    ms = state.messages.get(header.msg_id)
    if ms is None:
        ms = state.messages[header.msg_id] = MessageState(header.msg_id, first_seen=now)
    if ms.done:
        return events  # late datagram after recovery or timeout

    buf = ms.fragset.buffer(header.fragment)
    if header.final:
        try:
            ms.fragset.record_final(header.fragment)
        except IntegrityError:
            events.append(
                {"event": "integrity-violation", "msg_id": ms.msg_id,
                 "fragment": header.fragment, "reason": "conflicting final index",
                 "time": now}
            )
            return events

    status = buf.add_cell(header.cell(), payload)
    if status == "conflict":
        events.append(
            {"event": "integrity-violation", "msg_id": ms.msg_id,
             "fragment": header.fragment, "row": header.row, "col": header.col,
             "time": now}
        )
        return events
    if status == "duplicate":
        return events

    events.append(
        {"event": "cell-arrived", "msg_id": ms.msg_id, "fragment": header.fragment,
         "row": header.row, "col": header.col, "time": now}
    )

    if buf.decoded is None:
        try:
            result = try_decode_cells(buf.cells, scheme, params, check_consistency)
        except IntegrityError:
            events.append(
                {"event": "integrity-violation", "msg_id": ms.msg_id,
                 "fragment": header.fragment, "reason": "inconsistent decode",
                 "time": now}
            )
            result = None
        if result is not None:
            plaintext, used = result
            ms.fragset.set_decoded(header.fragment, plaintext)
            ms.submatrices[header.fragment] = used
            events.append(
                {"event": "fragment-decoded", "msg_id": ms.msg_id,
                 "fragment": header.fragment, "cells_used": [list(c) for c in used],
                 "time": now}
            )

    message = reassemble(ms.fragset)
    if message is not None:
        ms.completed_at = now
        ms.recovered = message
        report = _recovery_report(ms)
        state.reports.append(report)
        events.append(
            {"event": "message-recovered", "msg_id": ms.msg_id,
             "fragments": report.fragments, "latency_s": report.latency_s,
             "time": now}
        )
    return events


def timeout_sweep(state: ReceiverState, now: float, timeout_s: float) -> list[DeliveryReport]:
    """Finalize overdue incomplete messages as failures, exactly once each."""
    expired: list[DeliveryReport] = []
    for ms in state.messages.values():
        if ms.done or now - ms.first_seen <= timeout_s:
            continue
        ms.failed_at = now
        report = DeliveryReport(
            msg_id=ms.msg_id,
            outcome="timeout",
            fragments=None if ms.fragset.final_index is None
            else ms.fragset.final_index + 1,
            cells_received=ms.cells_received(),
            submatrices=dict(ms.submatrices),
            latency_s=None,
        )
        state.reports.append(report)
        expired.append(report)
    return expired


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

def _udp_socket(bind: Address | None = None) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 21)
    if bind is not None:
        sock.bind(bind)
    return sock


class UplinkAgent:
    """Per-operator sender: forwards its column's cells to the row relays."""

    def __init__(
        self,
        index: int,
        relay_addrs: Sequence[Address],
        rules: AttackRules,
        events: EventSink | None = None,
        label: str | None = None,
    ):
        self.index = index
        self.label = label or f"operator-{index}"
        self._relays = list(relay_addrs)
        self._rules = rules
        self._events = events or (lambda e: None)
        self._sock = _udp_socket()
        self.tap: TapCapture | None = None
        self.sent = 0
        self.suppressed = 0

    def send_cell(self, datagram: bytes, row: int) -> bool:
        """Send one cell to relay `row`; suppressed entirely under operator DoS."""
        if self._rules.operator_blocked(self.index):
            self.suppressed += 1
            self._events({"event": "send-suppressed", "operator": self.index, "row": row})
            return False
        if self.tap is not None:
            self.tap.record(datagram)
        self._sock.sendto(datagram, self._relays[row])
        self.sent += 1
        return True

    def deliver_column(self, packets: Iterable[tuple[int, bytes]]) -> int:
        sent = 0
        for row, datagram in packets:
            sent += bool(self.send_cell(datagram, row))
        return sent

    def close(self) -> None:
        self._sock.close()


class Relay:
    """Blind forwarder for one row: bytes in, identical bytes out, or drop."""

    def __init__(
        self,
        index: int,
        listen: Address,
        receiver: Address,
        rules: AttackRules,
        events: EventSink | None = None,
    ):
        self.index = index
        self._rules = rules
        self._events = events or (lambda e: None)
        self._sock = _udp_socket(listen)
        self._sock.settimeout(0.05)
        self.receiver = receiver
        self.tap: TapCapture | None = None
        self.forwarded = 0
        self.dropped = 0
        self._running = False
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> Address:
        return self._sock.getsockname()

    def handle_datagram(self, datagram: bytes) -> bool:
        """Tap, then forward byte-identically unless the drop rule is active."""
        if self.tap is not None:
            self.tap.record(datagram)
        if self._rules.relay_blocked(self.index):
            self.dropped += 1
            self._events(
                {"event": "relay-dropped", "relay": self.index, "bytes": len(datagram)}
            )
            return False
        self._sock.sendto(datagram, self.receiver)
        self.forwarded += 1
        return True

    def start(self) -> None:
        self._running = True
        self._thread = threading.Thread(target=self._serve, name=f"relay-{self.index}", daemon=True)
        self._thread.start()

    def _serve(self) -> None:
        while self._running:
            try:
                datagram, _ = self._sock.recvfrom(_MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                break
            self.handle_datagram(datagram)

    def stop(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()


class Receiver:
    """Reassembling endpoint: parses, stores, decodes, reports, times out."""

    def __init__(
        self,
        listen: Address,
        *,
        scheme: str = TWO_LAYER,
        params: SchemeParams = DEFAULT_PARAMS,
        timeout_s: float = 5.0,
        check_consistency: bool = False,
        events: EventSink | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.state = ReceiverState()
        self.params = params
        self.timeout_s = timeout_s
        self.check_consistency = check_consistency
        self._scheme = scheme
        self._events = events or (lambda e: None)
        self._clock = clock
        self._sock = _udp_socket(listen)
        self._sock.settimeout(0.05)
        self._lock = threading.Lock()
        self._progress = threading.Condition(self._lock)
        self._running = False
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> Address:
        return self._sock.getsockname()

    @property
    def scheme(self) -> str:
        return self._scheme

    def set_scheme(self, scheme: str) -> None:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme: {scheme!r}")
        with self._lock:
            self._scheme = scheme

    def start(self) -> None:
        self._running = True
        self._thread = threading.Thread(target=self._serve, name="receiver", daemon=True)
        self._thread.start()

    def _serve(self) -> None:
        while self._running:
            try:
                datagram, _ = self._sock.recvfrom(_MAX_DATAGRAM)
            except socket.timeout:
                datagram = None
            except OSError:
                break
            now = self._clock()
            with self._progress:
                events = []
                if datagram is not None:
                    events = receiver_ingest(
                        datagram, self.state, scheme=self._scheme, params=self.params,
                        now=now, check_consistency=self.check_consistency,
                    )
                for report in timeout_sweep(self.state, now, self.timeout_s):
                    events.append(
                        {"event": "message-timeout", "msg_id": report.msg_id,
                         "missing_fragments": self.state.messages[report.msg_id]
                         .fragset.missing_indices(),
                         "time": now}
                    )
                self.state.prune()
                if events:
                    self._progress.notify_all()
            for event in events:
                self._events(event)

    def wait_for(self, msg_id: int, timeout: float | None = None) -> Optional[DeliveryReport]:
        """Block until the message completes (either way) or the wait times out."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._progress:
            while True:
                for report in self.state.reports:
                    if report.msg_id == msg_id:
                        return report
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return None
                self._progress.wait(timeout=0.1 if remaining is None else min(0.1, remaining))

    def snapshot_state(self, recent: int = 32) -> dict:
        """JSON-shaped view of the most recent messages and counters."""
        with self._lock:
            messages = sorted(self.state.messages.values(), key=lambda m: m.first_seen)
            view = []
            for ms in messages[-recent:]:
                fragments = {}
                for index, buf in sorted(ms.fragset.fragments.items()):
                    bitmap = [[(r, c) in buf.cells for c in range(3)] for r in range(3)]
                    fragments[str(index)] = {
                        "cells": bitmap,
                        "decoded": buf.decoded is not None,
                        "cells_used": [list(c) for c in ms.submatrices.get(index, ())],
                    }
                outcome = "pending"
                latency_s = None
                if ms.completed_at is not None:
                    outcome = "recovered"
                    latency_s = ms.completed_at - ms.first_seen
                elif ms.failed_at is not None:
                    outcome = "timeout"
                view.append(
                    {"msg_id": ms.msg_id, "outcome": outcome, "latency_s": latency_s,
                     "final_index": ms.fragset.final_index, "fragments": fragments}
                )
            return {
                "messages": view,
                "malformed": self.state.malformed,
                "reports": len(self.state.reports),
            }

    def reports(self) -> list[DeliveryReport]:
        with self._lock:
            return list(self.state.reports)

    def stop(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()


@dataclass(frozen=True)
class TransmissionRecord:
    msg_id: int
    scheme: str
    fragment_count: int
    datagrams_built: int
    datagrams_sent: int
    dispatched_at: float


class SenderCoordinator:
    """Encodes messages and distributes column cells to the uplink agents."""

    def __init__(
        self,
        uplinks: Sequence[UplinkAgent],
        payload_size: int,
        *,
        scheme: str = TWO_LAYER,
        params: SchemeParams = DEFAULT_PARAMS,
        rng: random.Random | None = None,
        events: EventSink | None = None,
    ):
        self.uplinks = list(uplinks)
        self.payload_size = payload_size
        self.scheme = scheme
        self.params = params
        self._rng = rng
        self._events = events or (lambda e: None)

    def dispatch(self, message: bytes, scheme: str | None = None) -> TransmissionRecord:
        """Fragment, encode, and hand each column to its uplink."""
        scheme = scheme or self.scheme
        msg_id = new_msg_id(self._rng)
        built = sent = 0
        fragments = fragment_message(message, self.payload_size)
        columns: list[list[tuple[int, bytes]]] = [[], [], []]
        for frag in fragments:
            cellmap = encode_for_scheme(scheme, frag.data, self._rng, self.params)
            for (row, col), block in sorted(cellmap.items()):
                header = PacketHeader(row, col, frag.index, frag.final, msg_id)
                columns[col].append((row, encode_packet(header, block)))
                built += 1
        for col, uplink in enumerate(self.uplinks):
            try:
                sent += uplink.deliver_column(columns[col])
            except OSError as exc:
                raise DispatchError(f"uplink {col} unreachable: {exc}") from exc
        record = TransmissionRecord(
            msg_id=msg_id,
            scheme=scheme,
            fragment_count=len(fragments),
            datagrams_built=built,
            datagrams_sent=sent,
            dispatched_at=time.monotonic(),
        )
        self._events(
            {"event": "dispatch", "msg_id": msg_id, "scheme": scheme,
             "fragments": record.fragment_count, "datagrams_sent": sent}
        )
        return record


# ---------------------------------------------------------------------------
# single-process testbed
# ---------------------------------------------------------------------------

class Testbed:
    """All nine paths in one process over loopback UDP.

    Attack toggles, taps, and scheme switches take effect immediately; the
    event log aggregates every node's events in arrival order.
    """

    __test__ = False  # not a test case despite the name

    def __init__(
        self,
        topology: TopologyConfig | None = None,
        *,
        params: SchemeParams = DEFAULT_PARAMS,
        rng: random.Random | None = None,
        events: EventSink | None = None,
    ):
        self.topology = topology or loopback_topology()
        self.params = params
        self.rules = AttackRules()
        self.events: list[dict] = []
        self._events_lock = threading.Lock()
        self._sink = events

        self.receiver = Receiver(
            self.topology.receiver,
            scheme=self.topology.scheme,
            params=params,
            timeout_s=self.topology.timeout_s,
            check_consistency=self.topology.check_consistency,
            events=self._emit,
        )
        self.relays = [
            Relay(i, self.topology.relays[i], self.receiver.address, self.rules, self._emit)
            for i in range(3)
        ]
        relay_addrs = [relay.address for relay in self.relays]
        self.uplinks = [
            UplinkAgent(j, relay_addrs, self.rules, self._emit, self.topology.uplink_labels[j])
            for j in range(3)
        ]
        self.coordinator = SenderCoordinator(
            self.uplinks,
            self.topology.payload_size,
            scheme=self.topology.scheme,
            params=params,
            rng=rng,
            events=self._emit,
        )
        self._dispatches: dict[int, float] = {}
        self._started = False

    def _emit(self, event: dict) -> None:
        with self._events_lock:
            self.events.append(event)
        if self._sink is not None:
            self._sink(event)

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "Testbed":
        if not self._started:
            self.receiver.start()
            for relay in self.relays:
                relay.start()
            self._started = True
        return self

    def stop(self) -> None:
        if self._started:
            for relay in self.relays:
                relay.stop()
            self.receiver.stop()
            for uplink in self.uplinks:
                uplink.close()
            self._started = False

    def __enter__(self) -> "Testbed":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- traffic ------------------------------------------------------------

    def send(self, message: bytes, scheme: str | None = None) -> TransmissionRecord:
        record = self.coordinator.dispatch(message, scheme)
        self._dispatches[record.msg_id] = record.dispatched_at
        return record

    def send_and_wait(
        self, message: bytes, scheme: str | None = None, timeout: float | None = None
    ) -> DeliveryReport:
        """Send and block for the outcome; latency is dispatch-to-recovery."""
        wait = timeout if timeout is not None else self.topology.timeout_s + 1.0
        t0 = time.monotonic()
        record = self.send(message, scheme)
        report = self.receiver.wait_for(record.msg_id, timeout=wait)
        if report is None:
            return DeliveryReport(
                msg_id=record.msg_id, outcome="timeout", fragments=None,
                cells_received={}, submatrices={}, latency_s=None,
            )
        if report.outcome == "recovered":
            ms = self.receiver.state.messages.get(record.msg_id)
            completed = ms.completed_at if ms is not None else time.monotonic()
            report = dataclasses.replace(report, latency_s=completed - t0)
        return report

    # -- attacks and observation --------------------------------------------

    def apply_operator_dos(self, col: int, on: bool = True) -> None:
        self.rules.apply_operator_dos(col, on)
        self._emit({"event": "attack-toggled", "kind": "operator", "index": col, "on": on})

    def apply_relay_dos(self, row: int, on: bool = True) -> None:
        self.rules.apply_relay_dos(row, on)
        self._emit({"event": "attack-toggled", "kind": "relay", "index": row, "on": on})

    def clear_attacks(self) -> None:
        for i in range(3):
            self.rules.apply_operator_dos(i, False)
            self.rules.apply_relay_dos(i, False)

    def set_tap(self, point: str, on: bool = True) -> TapCapture | None:
        """Attach or remove a passive capture at "relay-i" or "uplink-j"."""
        kind, _, raw_index = point.partition("-")
        index = int(raw_index)
        nodes = {"relay": self.relays, "uplink": self.uplinks}
        if kind not in nodes or not 0 <= index <= 2:
            raise ValueError(f"unknown capture point: {point!r}")
        node = nodes[kind][index]
        node.tap = TapCapture(point) if on else None
        self._emit({"event": "attack-toggled", "kind": "eavesdrop", "index": index,
                    "on": on, "point": point})
        return node.tap

    def set_scheme(self, scheme: str) -> None:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme: {scheme!r}")
        self.coordinator.scheme = scheme
        self.receiver.set_scheme(scheme)
        self._emit({"event": "scheme-changed", "scheme": scheme})

    @property
    def scheme(self) -> str:
        return self.coordinator.scheme


# ---------------------------------------------------------------------------
# cross-process plumbing for the CLI roles
# ---------------------------------------------------------------------------

def _read_exact(conn: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class DistributionServer:
    """Uplink-side listener for the sender's local distribution hop.

    Accepts TCP connections carrying length-prefixed datagrams; each one is
    parsed just enough to learn its destination row, then sent on.
    """

    def __init__(self, uplink: UplinkAgent, listen: Address):
        self._uplink = uplink
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(listen)
        self._sock.listen(4)
        self._sock.settimeout(0.2)
        self._running = False
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> Address:
        return self._sock.getsockname()

    def start(self) -> None:
        self._running = True
        self._thread = threading.Thread(
            target=self._serve, name=f"uplink-dist-{self._uplink.index}", daemon=True
        )
        self._thread.start()

    def _serve(self) -> None:
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                while True:
                    prefix = _read_exact(conn, 4)
                    if prefix is None:
                        break
                    (length,) = struct.unpack("!I", prefix)
                    datagram = _read_exact(conn, length)
                    if datagram is None:
                        break
                    try:
                        header, _ = decode_packet(datagram)
                    except MalformedHeaderError:
                        continue
                    self._uplink.send_cell(datagram, header.row)

    def stop(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()


def send_via_uplinks(
    message: bytes,
    topology: TopologyConfig,
    *,
    scheme: str | None = None,
    params: SchemeParams = DEFAULT_PARAMS,
    rng: random.Random | None = None,
) -> TransmissionRecord:
    """Cross-process sender: stream each column to its uplink over TCP."""
    scheme = scheme or topology.scheme
    msg_id = new_msg_id(rng)
    fragments = fragment_message(message, topology.payload_size)
    columns: list[list[bytes]] = [[], [], []]
    for frag in fragments:
        cellmap = encode_for_scheme(scheme, frag.data, rng, params)
        for (row, col), block in sorted(cellmap.items()):
            header = PacketHeader(row, col, frag.index, frag.final, msg_id)
            columns[col].append(encode_packet(header, block))
    sent = 0
    for col, datagrams in enumerate(columns):
        if not datagrams:
            continue
        try:
            with socket.create_connection(topology.uplinks[col], timeout=5.0) as conn:
                for datagram in datagrams:
                    conn.sendall(struct.pack("!I", len(datagram)) + datagram)
        except OSError as exc:
            raise DispatchError(f"uplink {col} unreachable: {exc}") from exc
        sent += len(datagrams)
    return TransmissionRecord(
        msg_id=msg_id,
        scheme=scheme,
        fragment_count=len(fragments),
        datagrams_built=sum(len(c) for c in columns),
        datagrams_sent=sent,
        dispatched_at=time.monotonic(),
    )


class ControlListener:
    """Line-JSON TCP listener so standalone CLI nodes accept attack toggles."""

    def __init__(self, rules: AttackRules, listen: Address, on_command=None):
        self._rules = rules
        self._on_command = on_command
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(listen)
        self._sock.listen(4)
        self._sock.settimeout(0.2)
        self._running = False
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> Address:
        return self._sock.getsockname()

    def start(self) -> None:
        self._running = True
        self._thread = threading.Thread(target=self._serve, name="control", daemon=True)
        self._thread.start()

    def _apply(self, command: dict) -> dict:
        verb = command.get("verb", "set-attack")
        kind = command.get("type")
        index = int(command.get("index", -1))
        on = verb == "set-attack"
        if verb not in ("set-attack", "clear-attack"):
            return {"ok": False, "reason": f"unknown verb {verb!r}"}
        try:
            if kind == "operator":
                self._rules.apply_operator_dos(index, on)
            elif kind == "relay":
                self._rules.apply_relay_dos(index, on)
            else:
                return {"ok": False, "reason": f"unknown attack type {kind!r}"}
        except ValueError as exc:
            return {"ok": False, "reason": str(exc)}
        if self._on_command is not None:
            self._on_command(command)
        return {"ok": True}

    def _serve(self) -> None:
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn, conn.makefile("rwb") as stream:
                for line in stream:
                    try:
                        reply = self._apply(json.loads(line))
                    except (ValueError, TypeError) as exc:
                        reply = {"ok": False, "reason": str(exc)}
                    stream.write(json.dumps(reply).encode() + b"\n")
                    stream.flush()

    def stop(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()


def send_control_command(address: Address, command: dict, timeout: float = 5.0) -> dict:
    with socket.create_connection(address, timeout=timeout) as conn:
        conn.sendall(json.dumps(command).encode() + b"\n")
        with conn.makefile("rb") as stream:
            line = stream.readline()
    return json.loads(line)
