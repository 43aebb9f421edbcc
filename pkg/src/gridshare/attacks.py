"""DoS rules, probabilistic attack sampling, and passive eavesdrop taps.

An operator DoS silences one uplink column (the airplane-mode stand-in); a
relay DoS makes one row drop everything it receives (the firewall-rule
stand-in).  Taps copy raw datagrams at an uplink or relay without touching
forwarding, and `analyze_capture` reports how much the captured share
payloads leak.
"""

from __future__ import annotations

import random
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from .coding import entropy_per_bit
from .wire import HEADER_LEN


@dataclass(frozen=True)
class AttackModel:
    """Per-trial probabilities of a single-target DoS at each layer.

    With probability `p_operator` one uniformly chosen column is jammed;
    independently, with probability `p_relay` one uniformly chosen row
    drops.  At most one target per layer per trial.
    """

    p_operator: float
    p_relay: float

    def __post_init__(self):
        for name, p in (("p_operator", self.p_operator), ("p_relay", self.p_relay)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


@dataclass(frozen=True)
class AttackOutcome:
    """One sampled realization: the targeted column and/or row, if any."""

    operator_target: Optional[int] = None
    relay_target: Optional[int] = None

    def blocks_cell(self, row: int, col: int) -> bool:
        return row == self.relay_target or col == self.operator_target


def sample_attack(model: AttackModel, rng: random.Random) -> AttackOutcome:
    """Draw one attack realization (operator layer first, then relay layer)."""
    operator = rng.randrange(3) if rng.random() < model.p_operator else None
    relay = rng.randrange(3) if rng.random() < model.p_relay else None
    return AttackOutcome(operator, relay)


class AttackRules:
    """Mutable DoS switchboard consulted by uplinks and relays.

    Toggles are idempotent and thread-safe; data-path reads are lock-free
    single-element list reads.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._operator_down = [False, False, False]
        self._relay_down = [False, False, False]

    @staticmethod
    def _check_index(index: int) -> int:
        if not 0 <= index <= 2:
            raise ValueError(f"index must be 0..2, got {index}")
        return index

    def apply_operator_dos(self, col: int, on: bool = True) -> None:
        with self._lock:
            self._operator_down[self._check_index(col)] = bool(on)

    def apply_relay_dos(self, row: int, on: bool = True) -> None:
        with self._lock:
            self._relay_down[self._check_index(row)] = bool(on)

    def apply_outcome(self, outcome: AttackOutcome) -> None:
        """Install a sampled realization, clearing previous rules."""
        with self._lock:
            for i in range(3):
                self._operator_down[i] = outcome.operator_target == i
                self._relay_down[i] = outcome.relay_target == i

    def clear(self) -> None:
        self.apply_outcome(AttackOutcome())

    def operator_blocked(self, col: int) -> bool:
        return self._operator_down[col]

    def relay_blocked(self, row: int) -> bool:
        return self._relay_down[row]

    def active(self) -> dict:
        with self._lock:
            return {
                "operators": list(self._operator_down),
                "relays": list(self._relay_down),
            }


@dataclass
class TapCapture:
    """Passive copy of raw datagrams seen at one capture point."""

    point: str  # e.g. "relay-0" or "uplink-2"
    records: list[tuple[float, bytes]] = field(default_factory=list)

    def record(self, datagram: bytes, timestamp: float | None = None) -> None:
        self.records.append(
            (time.monotonic() if timestamp is None else timestamp, bytes(datagram))
        )

    def payload_bytes(self) -> bytes:
        """Captured share payloads with the 12-byte headers stripped."""
        return b"".join(d[HEADER_LEN:] for _, d in self.records if len(d) > HEADER_LEN)

    def save(self, path) -> None:
        """Dump as length-prefixed raw datagram records."""
        with open(path, "wb") as fh:
            for _, datagram in self.records:
                fh.write(struct.pack("!I", len(datagram)))
                fh.write(datagram)

    @classmethod
    def load(cls, path, point: str = "file") -> "TapCapture":
        capture = cls(point)
        with open(path, "rb") as fh:
            while True:
                prefix = fh.read(4)
                if not prefix:
                    break
                if len(prefix) < 4:
                    raise ValueError("truncated capture file")
                (length,) = struct.unpack("!I", prefix)
                datagram = fh.read(length)
                if len(datagram) < length:
                    raise ValueError("truncated capture file")
                capture.record(datagram, timestamp=float(len(capture.records)))
        return capture


@dataclass(frozen=True)
class ConfidentialityReport:
    """What an eavesdropper at one point could tell about the traffic."""

    capture_point: str
    datagrams: int
    payload_bits: int
    ones_fraction: float
    entropy_per_bit: float
    plaintext_found: Optional[bool]


def analyze_capture(
    capture: TapCapture, known_plaintext: bytes | None = None
) -> ConfidentialityReport:
    """Strip headers, measure bit entropy, and look for the known plaintext."""
    if not capture.records:
        raise ValueError("empty capture")
    payload = capture.payload_bytes()
    if not payload:
        raise ValueError("capture holds no payload bytes")
    ones = int.from_bytes(payload, "big").bit_count()
    return ConfidentialityReport(
        capture_point=capture.point,
        datagrams=len(capture.records),
        payload_bits=len(payload) * 8,
        ones_fraction=ones / (len(payload) * 8),
        entropy_per_bit=entropy_per_bit(payload),
        plaintext_found=(known_plaintext in payload) if known_plaintext else None,
    )
