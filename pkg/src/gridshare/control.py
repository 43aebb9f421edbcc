"""HTTP control plane for a live testbed: state, metrics, attacks, events.

One `Supervisor` owns the in-process testbed and is the single writer for
attack rules, taps, and sends; HTTP handlers only pass messages to it and
read snapshots.  Endpoints (JSON unless noted, documented in docs/api.md):

    GET  /state    point-in-time snapshot of messages, attacks, metrics
    GET  /metrics  rolling recovery rate, latencies, tapped-traffic entropy
    POST /attack   {"verb": "set-attack"|"clear-attack", "type", "index"}
    POST /send     {"payload_size", "count"} or {"message_hex"}
    GET  /events   server-sent event stream with contiguous sequence ids

Every state transition appears exactly once on the event feed, with a
monotonically increasing `seq`.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .coding import SCHEMES, entropy_per_bit
from .errors import GridShareError
from .transport import Testbed, TopologyConfig, loopback_topology

DEFAULT_BIND = ("127.0.0.1", 8765)


class CommandError(GridShareError):
    """Rejected control command; the reason is user-facing."""


class EventBus:
    """Ring buffer of sequence-stamped events with change notification."""

    def __init__(self, capacity: int = 4096):
        self._events: deque[dict] = deque(maxlen=capacity)
        self._seq = 0
        self._cond = threading.Condition()

    def publish(self, event: dict) -> dict:
        with self._cond:
            self._seq += 1
            stamped = {"seq": self._seq, **event}
            self._events.append(stamped)
            self._cond.notify_all()
            return stamped

    @property
    def latest_seq(self) -> int:
        with self._cond:
            return self._seq

    def since(self, seq: int) -> list[dict]:
        with self._cond:
            return [e for e in self._events if e["seq"] > seq]

    def wait_newer(self, seq: int, timeout: float) -> bool:
        with self._cond:
            if self._seq > seq:
                return True
            self._cond.wait(timeout)
            return self._seq > seq


class Supervisor:
    """Owns the testbed, the event feed, and the rolling metrics."""

    def __init__(
        self,
        topology: TopologyConfig | None = None,
        *,
        rng=None,
        history: int = 100,
    ):
        self.bus = EventBus()
        self._lock = threading.RLock()
        self._dispatched: dict[int, float] = {}
        self._latencies_ms: deque[float] = deque(maxlen=history)
        self._outcomes: deque[str] = deque(maxlen=history)
        self._taps: dict[str, object] = {}
        self._started_at = time.time()
        self.testbed = Testbed(
            topology or loopback_topology(), rng=rng, events=self._on_event
        )

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "Supervisor":
        self.testbed.start()
        return self

    def stop(self) -> None:
        self.testbed.stop()

    # -- event plumbing -----------------------------------------------------

    def _on_event(self, event: dict) -> None:
        event = {**event, "wall_time": round(time.time(), 6)}
        if event.get("event") == "message-recovered":
            with self._lock:
                t0 = self._dispatched.get(event["msg_id"])
                if t0 is not None:
                    latency_ms = (time.monotonic() - t0) * 1000.0
                    event["latency_ms"] = round(latency_ms, 3)
                    self._latencies_ms.append(latency_ms)
                self._outcomes.append("recovered")
        elif event.get("event") == "message-timeout":
            with self._lock:
                self._outcomes.append("timeout")
        self.bus.publish(event)

    # -- commands -----------------------------------------------------------

    def handle_command(self, command: dict) -> dict:
        """Validate and apply one control command; raises CommandError."""
        if not isinstance(command, dict):
            raise CommandError("command body must be a JSON object")
        verb = command.get("verb")
        with self._lock:
            if verb in ("set-attack", "clear-attack"):
                return self._attack(command, on=verb == "set-attack")
            if verb == "send-test-message":
                return self._send(command)
            if verb == "set-scheme":
                scheme = command.get("scheme")
                if scheme not in SCHEMES:
                    raise CommandError(f"unknown scheme {scheme!r}")
                self.testbed.set_scheme(scheme)
                return {"ok": True, "scheme": scheme}
            raise CommandError(f"unknown verb {verb!r}")

    def _attack(self, command: dict, on: bool) -> dict:
        kind = command.get("type")
        try:
            index = int(command.get("index"))
        except (TypeError, ValueError):
            raise CommandError("index must be an integer") from None
        if not 0 <= index <= 2:
            raise CommandError(f"index must be 0..2, got {index}")
        if kind == "operator":
            self.testbed.apply_operator_dos(index, on)
        elif kind == "relay":
            self.testbed.apply_relay_dos(index, on)
        elif kind == "eavesdrop":
            point = command.get("point", f"relay-{index}")
            tap = self.testbed.set_tap(point, on)
            if on:
                self._taps[point] = tap
            else:
                self._taps.pop(point, None)
        else:
            raise CommandError(f"unknown attack type {kind!r}")
        return {"ok": True, "type": kind, "index": index, "on": on}

    def _send(self, command: dict) -> dict:
        if "message_hex" in command:
            try:
                message = bytes.fromhex(command["message_hex"])
            except ValueError:
                raise CommandError("message_hex is not valid hex") from None
            if not message:
                raise CommandError("message must be non-empty")
            messages = [message]
        else:
            size = int(command.get("payload_size", 256))
            count = int(command.get("count", 1))
            if not 1 <= size <= 1 << 20:
                raise CommandError("payload_size must be 1..1048576")
            if not 1 <= count <= 100:
                raise CommandError("count must be 1..100")
            import secrets

            messages = [secrets.token_bytes(size) for _ in range(count)]
        msg_ids = []
        for message in messages:
            record = self.testbed.send(message)
            self._dispatched[record.msg_id] = record.dispatched_at
            msg_ids.append(record.msg_id)
        return {"ok": True, "msg_ids": msg_ids}

    # -- views --------------------------------------------------------------

    def metrics(self) -> dict:
        with self._lock:
            outcomes = list(self._outcomes)
            latencies = list(self._latencies_ms)
            tap_entropy = {}
            for point, tap in self._taps.items():
                payload = tap.payload_bytes()[-65536:]
                if payload:
                    tap_entropy[point] = round(entropy_per_bit(payload), 6)
        recovered = outcomes.count("recovered")
        return {
            "messages_recovered": recovered,
            "messages_timeout": outcomes.count("timeout"),
            "recovery_rate": (recovered / len(outcomes)) if outcomes else None,
            "recent_latencies_ms": [round(v, 3) for v in latencies[-20:]],
            "mean_latency_ms": (
                round(sum(latencies) / len(latencies), 3) if latencies else None
            ),
            "tapped_entropy": tap_entropy,
            "uptime_s": round(time.time() - self._started_at, 3),
        }

    def snapshot(self) -> dict:
        receiver_view = self.testbed.receiver.snapshot_state()
        with self._lock:
            taps = {point: True for point in self._taps}
        return {
            "scheme": self.testbed.scheme,
            "attacks": {**self.testbed.rules.active(), "taps": taps},
            "messages": receiver_view["messages"],
            "malformed_datagrams": receiver_view["malformed"],
            "metrics": self.metrics(),
            "latest_seq": self.bus.latest_seq,
            "time": round(time.time(), 6),
        }


class ControlServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, bind, supervisor: Supervisor, ui_dir: Optional[Path] = None):
        super().__init__(bind, ControlHandler)
        self.supervisor = supervisor
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.running = True

    def shutdown(self) -> None:
        self.running = False
        super().shutdown()


class ControlHandler(BaseHTTPRequestHandler):
    server: ControlServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet; the event feed is the log
        pass

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")

    def _json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/state":
            self._json(self.server.supervisor.snapshot())
        elif url.path == "/metrics":
            self._json(self.server.supervisor.metrics())
        elif url.path == "/events":
            self._stream_events(url)
        elif url.path in ("/", "/index.html") and self.server.ui_dir:
            self._static("index.html")
        elif url.path.startswith("/ui/") and self.server.ui_dir:
            self._static(url.path[len("/ui/"):])
        elif url.path == "/":
            self._json({"service": "gridshare control plane",
                        "endpoints": ["/state", "/metrics", "/attack", "/send", "/events"]})
        else:
            self._json({"ok": False, "reason": "not found"}, status=404)

    def do_POST(self):
        url = urlparse(self.path)
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, TypeError):
            self._json({"ok": False, "reason": "invalid JSON body"}, status=400)
            return
        if url.path == "/attack":
            body.setdefault("verb", "set-attack")
            allowed = ("set-attack", "clear-attack")
        elif url.path == "/send":
            body.setdefault("verb", "send-test-message")
            allowed = ("send-test-message",)
        else:
            self._json({"ok": False, "reason": "not found"}, status=404)
            return
        if body.get("verb") not in allowed:
            self._json({"ok": False, "reason": f"verb not allowed on {url.path}"},
                       status=400)
            return
        try:
            self._json(self.server.supervisor.handle_command(body))
        except CommandError as exc:
            self._json({"ok": False, "reason": str(exc)}, status=400)

    def _static(self, rel: str) -> None:
        root = self.server.ui_dir.resolve()
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._json({"ok": False, "reason": "not found"}, status=404)
            return
        mime = {
            ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
            ".map": "application/json", ".svg": "image/svg+xml",
        }.get(target.suffix, "application/octet-stream")
        body = target.read_bytes()
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", mime)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _stream_events(self, url) -> None:
        query = parse_qs(url.query)
        last = int(query.get("since", [0])[0] or 0)
        header_id = self.headers.get("Last-Event-ID")
        if header_id:
            last = max(last, int(header_id))
        bus = self.server.supervisor.bus
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "keep-alive")
        self.end_headers()
        idle = 0
        try:
            while self.server.running:
                events = bus.since(last)
                if not events:
                    if not bus.wait_newer(last, 0.5):
                        idle += 1
                        if idle >= 10:  # heartbeat roughly every 5 s
                            self.wfile.write(b": keep-alive\n\n")
                            self.wfile.flush()
                            idle = 0
                    continue
                idle = 0
                for event in events:
                    last = event["seq"]
                    payload = json.dumps(event)
                    frame = (
                        f"id: {event['seq']}\n"
                        f"event: {event.get('event', 'message')}\n"
                        f"data: {payload}\n\n"
                    )
                    self.wfile.write(frame.encode())
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass


def serve(
    topology: TopologyConfig | None = None,
    bind=DEFAULT_BIND,
    ui_dir=None,
    rng=None,
) -> tuple[ControlServer, Supervisor]:
    """Start the testbed and HTTP server; caller drives serve_forever."""
    supervisor = Supervisor(topology, rng=rng).start()
    server = ControlServer(tuple(bind), supervisor, ui_dir)
    return server, supervisor


def run_demo(
    topology: TopologyConfig | None = None,
    bind=DEFAULT_BIND,
    ui_dir=None,
    rng=None,
) -> None:
    """Blocking single-machine demo: testbed plus control plane."""
    server, supervisor = serve(topology, bind, ui_dir, rng)
    host, port = server.server_address
    print(f"gridshare control plane listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever(poll_interval=0.2)
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
        supervisor.stop()
