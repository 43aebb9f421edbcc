"""Packet format and message fragmentation/reassembly for share transport.

Every share travels in a UDP datagram laid out as

    [row 1B][col 1B][seq 4B big-endian][msg_id 6B]  ||  payload

for a fixed 12-byte header.  The sequence field's top bit marks the final
fragment of a message; the low 31 bits are the fragment index.  See
docs/wire.md for a worked hex example.
"""

from __future__ import annotations

import math
import random
import secrets
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import IntegrityError, MalformedHeaderError

HEADER_LEN = 12
MAX_FRAGMENT_INDEX = 0x7FFFFFFF
_FINAL_BIT = 1 << 31
_HEADER = struct.Struct("!BBI6s")

Cell = tuple[int, int]


@dataclass(frozen=True)
class PacketHeader:
    row: int
    col: int
    fragment: int
    final: bool
    msg_id: int

    def cell(self) -> Cell:
        return (self.row, self.col)


def encode_header(header: PacketHeader) -> bytes:
    """Serialize a header to its fixed 12-byte wire form."""
    if not (0 <= header.row <= 2 and 0 <= header.col <= 2):
        raise MalformedHeaderError(f"cell index out of range: ({header.row}, {header.col})")
    if not 0 <= header.fragment <= MAX_FRAGMENT_INDEX:
        raise MalformedHeaderError(f"fragment index out of range: {header.fragment}")
    if not 0 <= header.msg_id < (1 << 48):
        raise MalformedHeaderError(f"msg_id out of range: {header.msg_id}")
    seq = header.fragment | (_FINAL_BIT if header.final else 0)
    return _HEADER.pack(header.row, header.col, seq, header.msg_id.to_bytes(6, "big"))


def decode_header(buf: bytes) -> PacketHeader:
    """Parse the first 12 bytes of a datagram; extra bytes are ignored."""
    if len(buf) < HEADER_LEN:
        raise MalformedHeaderError(f"buffer too short for header: {len(buf)} bytes")
    row, col, seq, msg_id = _HEADER.unpack_from(buf)
    if row > 2 or col > 2:
        raise MalformedHeaderError(f"cell index out of range: ({row}, {col})")
    return PacketHeader(
        row=row,
        col=col,
        fragment=seq & MAX_FRAGMENT_INDEX,
        final=bool(seq & _FINAL_BIT),
        msg_id=int.from_bytes(msg_id, "big"),
    )


def encode_packet(header: PacketHeader, payload: bytes) -> bytes:
    """Header followed by the share fragment; the payload must be non-empty."""
    if not payload:
        raise ValueError("share packets carry a non-empty payload")
    return encode_header(header) + payload


def decode_packet(datagram: bytes) -> tuple[PacketHeader, bytes]:
    header = decode_header(datagram)
    payload = datagram[HEADER_LEN:]
    if not payload:
        raise MalformedHeaderError("datagram has no payload")
    return header, payload


def new_msg_id(rng: random.Random | None = None) -> int:
    """Fresh 48-bit message identifier."""
    if rng is not None:
        return rng.getrandbits(48)
    return secrets.randbits(48)


class Fragment(NamedTuple):
    index: int
    final: bool
    data: bytes


def fragment_message(message: bytes, payload_size: int) -> list[Fragment]:
    """Slice a message into payload_size pieces; the last one is marked final."""
    if not message:
        raise ValueError("cannot fragment an empty message")
    if payload_size < 1:
        raise ValueError("payload_size must be at least 1 byte")
    count = math.ceil(len(message) / payload_size)
    if count > MAX_FRAGMENT_INDEX + 1:
        raise ValueError("message needs more fragments than the sequence field can index")
    return [
        Fragment(i, i == count - 1, message[i * payload_size : (i + 1) * payload_size])
        for i in range(count)
    ]


class FragmentBuffer:
    """Arrival table for one fragment: up to nine cells plus the decoded text."""

    __slots__ = ("cells", "decoded")

    def __init__(self):
        self.cells: dict[Cell, bytes] = {}
        self.decoded: Optional[bytes] = None

    def add_cell(self, cell: Cell, payload: bytes) -> str:
        """Record a cell arrival; returns "new", "duplicate", or "conflict"."""
        existing = self.cells.get(cell)
        if existing is None:
            self.cells[cell] = payload
            return "new"
        return "duplicate" if existing == payload else "conflict"


@dataclass
class FragmentSet:
    """Reassembly state for one message id."""

    msg_id: int
    fragments: dict[int, FragmentBuffer] = field(default_factory=dict)
    final_index: Optional[int] = None

    def buffer(self, index: int) -> FragmentBuffer:
        buf = self.fragments.get(index)
        if buf is None:
            buf = self.fragments[index] = FragmentBuffer()
        return buf

    def record_final(self, index: int) -> None:
        """Note which fragment index closes the message; settable only once."""
        if self.final_index is not None and self.final_index != index:
            raise IntegrityError(
                f"final fragment already recorded as {self.final_index}, got {index}"
            )
        self.final_index = index

    def set_decoded(self, index: int, data: bytes) -> None:
        buf = self.buffer(index)
        if buf.decoded is not None and buf.decoded != data:
            raise IntegrityError(f"fragment {index} decoded to conflicting plaintext")
        buf.decoded = data

    def decoded_count(self) -> int:
        return sum(1 for b in self.fragments.values() if b.decoded is not None)

    def missing_indices(self) -> list[int]:
        """Fragment indices still undecoded, relative to the known final index."""
        if self.final_index is None:
            return []
        return [
            i
            for i in range(self.final_index + 1)
            if i not in self.fragments or self.fragments[i].decoded is None
        ]


def reassemble(fs: FragmentSet) -> Optional[bytes]:
    """Concatenate decoded fragments once the final index and all parts are in."""
    if fs.final_index is None:
        return None
    parts = []
    for i in range(fs.final_index + 1):
        buf = fs.fragments.get(i)
        if buf is None or buf.decoded is None:
            return None
        parts.append(buf.decoded)
    return b"".join(parts)
