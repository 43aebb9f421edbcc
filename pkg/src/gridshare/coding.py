"""Two-layer 3x3 secret sharing over GF(4), baselines, and exhaustive verifiers.

The two-layer scheme splits an n-bit message S twice.  The outer layer
produces one share per column (operator) by evaluating S + K*x_j at three
distinct nonzero column points x_j; the inner layer re-splits column share
C_j across the rows (relays) as M[i][j] = C_j + K_j*y_i.  Every cell is the
same size as the message, any 2x2 submatrix recovers S exactly, and one
full row plus one full column observes only uniform noise.  Both facts are
machine-checked here by exhaustive enumeration rather than assumed
(`verify_recovery_exhaustive`, `verify_secrecy_exhaustive`).

Baselines for comparison experiments: one-layer sharing in two variants
(plain 3-way XOR needing all shares, and 2-of-3 over GF(4)) and a 9-way
repetition code.  `entropy_per_bit` measures how much an eavesdropped share
stream looks like noise.

All encode/decode work reduces to `block_xor` and `block_scale`, i.e. XOR
plus fixed bit moves.
"""

from __future__ import annotations

import itertools
import math
import random
import secrets
import time
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .errors import InsufficientSharesError, IntegrityError, LengthMismatchError
from .gf4 import (
    OMEGA,
    OMEGA2,
    ONE,
    SYMBOLS,
    block_from_symbols,
    block_scale,
    block_xor,
    sym_add,
    sym_inv,
)

Cell = tuple[int, int]  # (row, col), both 0..2

ROW_PAIRS = ((0, 1), (0, 2), (1, 2))
COL_PAIRS = ROW_PAIRS

# Scheme names used by the transport, experiments, and CLIs.
TWO_LAYER = "two-layer"
ONE_LAYER_ALL = "one-layer-all-of-3"
ONE_LAYER_TWO = "one-layer-two-of-3"
REPETITION = "repetition"
SCHEMES = (TWO_LAYER, ONE_LAYER_ALL, ONE_LAYER_TWO, REPETITION)

ALL_OF_3 = "all-of-3"
TWO_OF_3 = "two-of-3"


@dataclass(frozen=True)
class SchemeParams:
    """Evaluation points of the construction: one triple per axis.

    Each triple must be a permutation of the three nonzero symbols; the
    defaults use (1, w, w2) on both axes.
    """

    column_points: tuple[int, int, int] = (ONE, OMEGA, OMEGA2)
    row_points: tuple[int, int, int] = (ONE, OMEGA, OMEGA2)

    def validate(self) -> "SchemeParams":
        for name, points in (("column_points", self.column_points),
                             ("row_points", self.row_points)):
            if sorted(points) != [ONE, OMEGA, OMEGA2]:
                raise ValueError(
                    f"{name} must be a permutation of the three nonzero GF(4) "
                    f"symbols, got {points!r}"
                )
        return self


DEFAULT_PARAMS = SchemeParams()


@dataclass(frozen=True)
class EncodingRandomness:
    """One outer key plus one inner key per column, all message-length."""

    outer_key: bytes
    inner_keys: tuple[bytes, bytes, bytes]

    @classmethod
    def generate(cls, length: int, rng: random.Random | None = None) -> "EncodingRandomness":
        """Fresh keys: crypto-strength by default, seeded when rng is given."""
        draw = rng.randbytes if rng is not None else secrets.token_bytes
        return cls(draw(length), (draw(length), draw(length), draw(length)))


@dataclass(frozen=True)
class ShareMatrix:
    """3x3 grid of equal-length share blocks; rows are relays, columns operators."""

    rows: tuple[tuple[bytes, bytes, bytes], ...]

    def __post_init__(self):
        if len(self.rows) != 3 or any(len(r) != 3 for r in self.rows):
            raise ValueError("share matrix must be 3x3")
        n = len(self.rows[0][0])
        if any(len(cell) != n for row in self.rows for cell in row):
            raise LengthMismatchError("all nine cells must have equal length")

    def __getitem__(self, cell: Cell) -> bytes:
        row, col = cell
        return self.rows[row][col]

    def cells(self) -> Iterator[tuple[Cell, bytes]]:
        for r in range(3):
            for c in range(3):
                yield (r, c), self.rows[r][c]

    def column(self, col: int) -> tuple[bytes, bytes, bytes]:
        return tuple(self.rows[r][col] for r in range(3))

    @property
    def share_length(self) -> int:
        return len(self.rows[0][0])


@dataclass
class VerificationReport:
    """Tally from the exhaustive recovery/secrecy oracles."""

    recovery_cases_checked: int = 0
    recovery_failures: int = 0
    secrecy_cases_checked: int = 0
    secrecy_failures: int = 0
    elapsed_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.recovery_failures == 0 and self.secrecy_failures == 0

    def merged(self, other: "VerificationReport") -> "VerificationReport":
        return VerificationReport(
            self.recovery_cases_checked + other.recovery_cases_checked,
            self.recovery_failures + other.recovery_failures,
            self.secrecy_cases_checked + other.secrecy_cases_checked,
            self.secrecy_failures + other.secrecy_failures,
            self.elapsed_s + other.elapsed_s,
        )


# ---------------------------------------------------------------------------
# two-layer encode/decode
# ---------------------------------------------------------------------------

def encode_two_layer(
    message: bytes,
    randomness: EncodingRandomness,
    params: SchemeParams = DEFAULT_PARAMS,
) -> ShareMatrix:
    """Encode a message into the 3x3 share matrix.

    Outer layer: C_j = S + K*x_j per column.  Inner layer:
    M[i][j] = C_j + K_j*y_i per row.  Deterministic given the inputs.
    """
    n = len(message)
    if len(randomness.outer_key) != n or any(len(k) != n for k in randomness.inner_keys):
        raise LengthMismatchError("key lengths must equal the message length")
    columns = [
        block_xor(message, block_scale(randomness.outer_key, x))
        for x in params.column_points
    ]
    rows = tuple(
        tuple(
            block_xor(columns[j], block_scale(randomness.inner_keys[j], y))
            for j in range(3)
        )
        for y in params.row_points
    )
    return ShareMatrix(rows)


def _recover_pair(block_a: bytes, block_b: bytes, point_a: int, point_b: int) -> bytes:
    # Solve V from two evaluations V + W*point at distinct nonzero points:
    # V = (A*pb + B*pa) / (pa + pb).  Raises ZeroDivisionError if pa == pb.
    numerator = block_xor(block_scale(block_a, point_b), block_scale(block_b, point_a))
    return block_scale(numerator, sym_inv(sym_add(point_a, point_b)))


def select_decodable_submatrix(
    available: Iterable[Cell],
) -> Optional[tuple[tuple[int, int], tuple[int, int]]]:
    """Lexicographically smallest (row pair, col pair) fully covered by `available`."""
    have = set(available)
    for row_pair in ROW_PAIRS:
        for col_pair in COL_PAIRS:
            if all((r, c) in have for r in row_pair for c in col_pair):
                return row_pair, col_pair
    return None


def _iter_decodable(have) -> Iterator[tuple[tuple[int, int], tuple[int, int]]]:
    for row_pair in ROW_PAIRS:
        for col_pair in COL_PAIRS:
            if all((r, c) in have for r in row_pair for c in col_pair):
                yield row_pair, col_pair


def _decode_submatrix(
    table: Mapping[Cell, bytes],
    row_pair: tuple[int, int],
    col_pair: tuple[int, int],
    params: SchemeParams,
) -> bytes:
    a, b = row_pair
    c, d = col_pair
    ya, yb = params.row_points[a], params.row_points[b]
    col_c = _recover_pair(table[(a, c)], table[(b, c)], ya, yb)
    col_d = _recover_pair(table[(a, d)], table[(b, d)], ya, yb)
    return _recover_pair(col_c, col_d, params.column_points[c], params.column_points[d])


def _cell_table(cells) -> dict[Cell, bytes]:
    items = cells.items() if isinstance(cells, Mapping) else cells
    table: dict[Cell, bytes] = {}
    for cell, block in items:
        cell = (int(cell[0]), int(cell[1]))
        if not (0 <= cell[0] <= 2 and 0 <= cell[1] <= 2):
            raise ValueError(f"cell index out of range: {cell}")
        previous = table.get(cell)
        if previous is not None and previous != bytes(block):
            raise IntegrityError(f"conflicting payloads supplied for cell {cell}")
        table[cell] = bytes(block)
    return table


def decode_two_layer(
    cells,
    params: SchemeParams = DEFAULT_PARAMS,
    check_consistency: bool = False,
) -> bytes:
    """Recover the message from any set of cells containing a full 2x2.

    `cells` is a mapping or iterable of ((row, col), block) pairs.  The
    lexicographically smallest decodable submatrix is used.  With
    `check_consistency`, every other decodable submatrix is decoded too and
    any disagreement raises IntegrityError.
    """
    table = _cell_table(cells)
    picks = list(_iter_decodable(table))
    if not picks:
        raise InsufficientSharesError(
            "no complete 2x2 submatrix among the supplied cells"
        )
    message = _decode_submatrix(table, *picks[0], params)
    if check_consistency:
        for row_pair, col_pair in picks[1:]:
            other = _decode_submatrix(table, row_pair, col_pair, params)
            if other != message:
                raise IntegrityError(
                    f"submatrix rows={row_pair} cols={col_pair} decodes differently"
                )
    return message


# ---------------------------------------------------------------------------
# baselines: one-layer sharing and repetition
# ---------------------------------------------------------------------------

def encode_one_layer(
    message: bytes,
    variant: str = ALL_OF_3,
    rng: random.Random | None = None,
    params: SchemeParams = DEFAULT_PARAMS,
) -> tuple[bytes, bytes, bytes]:
    """Split a message into three one-layer shares.

    all-of-3: (A1, A2, A1+A2+S), all three needed.  two-of-3: S + K*x_k at
    the three column points, any two recover.
    """
    draw = rng.randbytes if rng is not None else secrets.token_bytes
    n = len(message)
    if variant == ALL_OF_3:
        a1, a2 = draw(n), draw(n)
        return (a1, a2, block_xor(block_xor(a1, a2), message))
    if variant == TWO_OF_3:
        key = draw(n)
        return tuple(block_xor(message, block_scale(key, x)) for x in params.column_points)
    raise ValueError(f"unknown one-layer variant: {variant!r}")


def decode_one_layer(
    shares: Mapping[int, bytes],
    variant: str = ALL_OF_3,
    params: SchemeParams = DEFAULT_PARAMS,
) -> bytes:
    """Recover the message from indexed one-layer shares."""
    if variant == ALL_OF_3:
        if not all(k in shares for k in (0, 1, 2)):
            raise InsufficientSharesError("all-of-3 needs every share present")
        return block_xor(block_xor(shares[0], shares[1]), shares[2])
    if variant == TWO_OF_3:
        present = sorted(k for k in shares if 0 <= k <= 2)
        if len(present) < 2:
            raise InsufficientSharesError("two-of-3 needs at least two shares")
        i, j = present[:2]
        return _recover_pair(
            shares[i], shares[j], params.column_points[i], params.column_points[j]
        )
    raise ValueError(f"unknown one-layer variant: {variant!r}")


def encode_repetition(message: bytes) -> ShareMatrix:
    """Copy the message onto all nine paths."""
    row = (bytes(message),) * 3
    return ShareMatrix((row, row, row))


def decode_repetition(cells, check_consistency: bool = False) -> bytes:
    """Any single cell is the message; optionally insist all copies agree."""
    table = _cell_table(cells)
    if not table:
        raise InsufficientSharesError("repetition decode needs at least one cell")
    first_cell = min(table)
    message = table[first_cell]
    if check_consistency:
        for cell, block in table.items():
            if block != message:
                raise IntegrityError(f"repetition copy at {cell} disagrees")
    return message


# ---------------------------------------------------------------------------
# scheme-generic helpers used by the transport and experiments
# ---------------------------------------------------------------------------

def encode_for_scheme(
    scheme: str,
    message: bytes,
    rng: random.Random | None = None,
    params: SchemeParams = DEFAULT_PARAMS,
) -> dict[Cell, bytes]:
    """Encode one fragment and place its shares on the grid.

    Two-layer and repetition fill all nine cells; the one-layer variants
    route share k diagonally through cell (k, k), i.e. operator k to relay k.
    """
    if scheme == TWO_LAYER:
        randomness = EncodingRandomness.generate(len(message), rng)
        return dict(encode_two_layer(message, randomness, params).cells())
    if scheme == ONE_LAYER_ALL:
        shares = encode_one_layer(message, ALL_OF_3, rng, params)
        return {(k, k): shares[k] for k in range(3)}
    if scheme == ONE_LAYER_TWO:
        shares = encode_one_layer(message, TWO_OF_3, rng, params)
        return {(k, k): shares[k] for k in range(3)}
    if scheme == REPETITION:
        return dict(encode_repetition(message).cells())
    raise ValueError(f"unknown scheme: {scheme!r}")


def try_decode_cells(
    cells: Mapping[Cell, bytes],
    scheme: str,
    params: SchemeParams = DEFAULT_PARAMS,
    check_consistency: bool = False,
) -> Optional[tuple[bytes, tuple[Cell, ...]]]:
    """Decode a fragment if the arrived cells suffice, else None.

    Returns the plaintext and the cells actually consumed by the decoder.
    """
    if scheme == TWO_LAYER:
        pick = select_decodable_submatrix(cells)
        if pick is None:
            return None
        row_pair, col_pair = pick
        used = tuple((r, c) for r in row_pair for c in col_pair)
        if check_consistency:
            return decode_two_layer(cells, params, check_consistency=True), used
        return _decode_submatrix(cells, row_pair, col_pair, params), used
    if scheme in (ONE_LAYER_ALL, ONE_LAYER_TWO):
        shares = {r: block for (r, c), block in cells.items() if r == c}
        variant = ALL_OF_3 if scheme == ONE_LAYER_ALL else TWO_OF_3
        try:
            message = decode_one_layer(shares, variant, params)
        except InsufficientSharesError:
            return None
        needed = (0, 1, 2) if variant == ALL_OF_3 else tuple(sorted(shares)[:2])
        return message, tuple((k, k) for k in needed)
    if scheme == REPETITION:
        if not cells:
            return None
        first = min(cells)
        return decode_repetition(cells, check_consistency), (first,)
    raise ValueError(f"unknown scheme: {scheme!r}")


# ---------------------------------------------------------------------------
# exhaustive oracles
# ---------------------------------------------------------------------------

def _authorized_sets() -> list[tuple[tuple[int, int], tuple[int, int]]]:
    return [(rp, cp) for rp in ROW_PAIRS for cp in COL_PAIRS]


def forbidden_cells(row: int, col: int) -> tuple[Cell, ...]:
    """The five cells of one full row plus one full column."""
    cells = {(row, j) for j in range(3)} | {(i, col) for i in range(3)}
    return tuple(sorted(cells))


def verify_recovery_exhaustive(
    params: SchemeParams = DEFAULT_PARAMS,
    symbol_count: int = 1,
) -> VerificationReport:
    """Check every (S, randomness) tuple against every authorized 2x2 set.

    Enumerates all 4**(5*symbol_count) encodings; a decode that raises or
    returns the wrong message counts as a failure instead of aborting, so
    non-conforming parameter choices can be diagnosed.
    """
    start = time.perf_counter()
    checked = failures = 0
    width = symbol_count
    for values in itertools.product(SYMBOLS, repeat=5 * width):
        message = block_from_symbols(values[:width])
        randomness = EncodingRandomness(
            block_from_symbols(values[width : 2 * width]),
            tuple(
                block_from_symbols(values[(2 + j) * width : (3 + j) * width])
                for j in range(3)
            ),
        )
        matrix = encode_two_layer(message, randomness, params)
        for row_pair, col_pair in _authorized_sets():
            checked += 1
            subset = {(r, c): matrix[(r, c)] for r in row_pair for c in col_pair}
            try:
                decoded = decode_two_layer(subset, params)
            except Exception:
                failures += 1
                continue
            if decoded != message:
                failures += 1
    return VerificationReport(
        recovery_cases_checked=checked,
        recovery_failures=failures,
        elapsed_s=time.perf_counter() - start,
    )


def observation_distributions(
    cells: Sequence[Cell],
    params: SchemeParams = DEFAULT_PARAMS,
    inner_keys_zero: bool = False,
) -> dict[int, Counter]:
    """Distribution of the given cells' values per secret, at one symbol.

    Tabulates the joint observation of `cells` over the full randomness
    space (or the degenerate all-zero inner keys when requested) for each of
    the four single-symbol secrets.
    """
    inner_space = (
        [(0, 0, 0)] if inner_keys_zero
        else list(itertools.product(SYMBOLS, repeat=3))
    )
    distributions: dict[int, Counter] = {}
    for secret in SYMBOLS:
        message = block_from_symbols((secret,))
        counts: Counter = Counter()
        for outer in SYMBOLS:
            outer_key = block_from_symbols((outer,))
            for inner in inner_space:
                randomness = EncodingRandomness(
                    outer_key, tuple(block_from_symbols((k,)) for k in inner)
                )
                matrix = encode_two_layer(message, randomness, params)
                counts[tuple(matrix[c] for c in cells)] += 1
        distributions[secret] = counts
    return distributions


def verify_secrecy_exhaustive(
    params: SchemeParams = DEFAULT_PARAMS,
    inner_keys_zero: bool = False,
) -> VerificationReport:
    """Check distribution-identity across secrets for all nine forbidden sets.

    For each row+column combination the full observation distribution is
    tabulated per secret over every randomness tuple; any distribution that
    differs from the others marks the set as a failure.
    """
    start = time.perf_counter()
    checked = failures = 0
    for row in range(3):
        for col in range(3):
            cells = forbidden_cells(row, col)
            dists = observation_distributions(cells, params, inner_keys_zero)
            checked += sum(sum(c.values()) for c in dists.values())
            reference = dists[SYMBOLS[0]]
            if any(dists[s] != reference for s in SYMBOLS[1:]):
                failures += 1
    return VerificationReport(
        secrecy_cases_checked=checked,
        secrecy_failures=failures,
        elapsed_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# leakage metric
# ---------------------------------------------------------------------------

def entropy_per_bit(samples: bytes) -> float:
    """Empirical Shannon entropy of a bit stream, in [0, 1] bits per bit."""
    if not samples:
        raise ValueError("empty sample")
    ones = int.from_bytes(samples, "big").bit_count()
    q = ones / (8 * len(samples))
    if q == 0.0 or q == 1.0:
        return 0.0
    return -(q * math.log2(q) + (1.0 - q) * math.log2(1.0 - q))
