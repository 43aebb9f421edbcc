"""GF(4) arithmetic on 2-bit symbols and on packed byte blocks.

The field {0, 1, w, w2} with w2 = w + 1 is encoded in two bits (hi, lo):
00 -> 0, 01 -> 1, 10 -> w, 11 -> w2.  Addition is XOR.  Multiplying by w
maps (hi, lo) to (hi^lo, hi) and multiplying by w2 maps (hi, lo) to
(lo, hi^lo), so multiplication by any constant is XOR plus a fixed bit
rearrangement and never needs a lookup.

A block is a byte string holding four symbols per byte, most-significant
2-bit pair first.  Block operations apply the symbol formulas to every
2-bit lane at once via whole-block integer XOR/shift/mask.
"""

from __future__ import annotations

import functools

from .errors import LengthMismatchError

ZERO, ONE, OMEGA, OMEGA2 = 0, 1, 2, 3
SYMBOLS = (ZERO, ONE, OMEGA, OMEGA2)

# Reference product table a*b, written out from the defining relation
# w2 = w + 1 (w*w = w2, w*w2 = 1, w2*w2 = w) rather than derived from the
# bit formulas, so tests can compare the two independently.
MUL_TABLE = (
    (0, 0, 0, 0),
    (0, 1, 2, 3),
    (0, 2, 3, 1),
    (0, 3, 1, 2),
)

_INV = {ONE: ONE, OMEGA: OMEGA2, OMEGA2: OMEGA}


def sym_add(a: int, b: int) -> int:
    """Field addition (characteristic 2): plain XOR of the 2-bit codes."""
    return a ^ b


def _times_omega(s: int) -> int:
    # (hi, lo) -> (hi^lo, hi)
    hi, lo = s >> 1, s & 1
    return ((hi ^ lo) << 1) | hi


def sym_mul(a: int, b: int) -> int:
    """Field product computed from the bit-move formulas, no table lookup."""
    if a == ZERO or b == ZERO:
        return ZERO
    if b == ONE:
        return a
    a = _times_omega(a)
    if b == OMEGA:
        return a
    return _times_omega(a)  # b == OMEGA2: w2*a = w*(w*a)


def sym_inv(a: int) -> int:
    """Multiplicative inverse; zero has none."""
    if a == ZERO:
        raise ZeroDivisionError("0 has no inverse in GF(4)")
    try:
        return _INV[a]
    except KeyError:
        raise ValueError(f"not a GF(4) symbol: {a!r}") from None


@functools.lru_cache(maxsize=None)
def _hi_mask(nbytes: int) -> int:
    # 0b10 repeated across every 2-bit lane
    return int.from_bytes(b"\xaa" * nbytes, "big")


def block_xor(a: bytes, b: bytes) -> bytes:
    """Bitwise XOR of two equal-length blocks."""
    if len(a) != len(b):
        raise LengthMismatchError(f"block lengths differ: {len(a)} vs {len(b)}")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def block_scale(a: bytes, c: int) -> bytes:
    """Multiply every 2-bit symbol of a block by the constant c.

    Realized as whole-block XOR plus one-bit shifts, the wide version of
    the sym_mul formulas.
    """
    if c == ONE:
        return bytes(a)
    if c == ZERO:
        return bytes(len(a))
    v = int.from_bytes(a, "big")
    hi = _hi_mask(len(a))
    h = v & hi
    lo = v & (hi >> 1)
    if c == OMEGA:
        out = (h ^ (lo << 1)) | (h >> 1)
    elif c == OMEGA2:
        out = (lo << 1) | ((h >> 1) ^ lo)
    else:
        raise ValueError(f"not a GF(4) symbol: {c!r}")
    return out.to_bytes(len(a), "big")


def symbols_of(block: bytes) -> tuple[int, ...]:
    """Unpack a block into its GF(4) symbols, most-significant pair first."""
    out = []
    for byte in block:
        out.extend(((byte >> 6) & 3, (byte >> 4) & 3, (byte >> 2) & 3, byte & 3))
    return tuple(out)


def block_from_symbols(symbols) -> bytes:
    """Pack symbols four to a byte (MS pair first), zero-padding the tail byte."""
    syms = list(symbols)
    for s in syms:
        if s not in SYMBOLS:
            raise ValueError(f"not a GF(4) symbol: {s!r}")
    syms += [ZERO] * (-len(syms) % 4)
    out = bytearray()
    for i in range(0, len(syms), 4):
        a, b, c, d = syms[i : i + 4]
        out.append((a << 6) | (b << 4) | (c << 2) | d)
    return bytes(out)
