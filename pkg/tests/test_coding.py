import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridshare.coding import (
    ALL_OF_3,
    DEFAULT_PARAMS,
    ONE_LAYER_ALL,
    ONE_LAYER_TWO,
    REPETITION,
    TWO_LAYER,
    TWO_OF_3,
    EncodingRandomness,
    SchemeParams,
    decode_one_layer,
    decode_repetition,
    decode_two_layer,
    encode_for_scheme,
    encode_one_layer,
    encode_repetition,
    encode_two_layer,
    entropy_per_bit,
    forbidden_cells,
    select_decodable_submatrix,
    try_decode_cells,
    verify_recovery_exhaustive,
    verify_secrecy_exhaustive,
)
from gridshare.errors import (
    InsufficientSharesError,
    IntegrityError,
    LengthMismatchError,
)
from gridshare.gf4 import OMEGA, OMEGA2, ONE, SYMBOLS, ZERO, block_from_symbols

# single GF(4) symbols embedded in the top 2-bit lane of one byte
S_0, S_1, S_W, S_W2 = (block_from_symbols((s,)) for s in SYMBOLS)


def rnd(*symbols):
    return EncodingRandomness(
        block_from_symbols((symbols[0],)),
        tuple(block_from_symbols((s,)) for s in symbols[1:]),
    )


def test_encode_worked_example():
    # S=1, K=w, inner keys zero: columns (w2, w, 0), every row identical
    matrix = encode_two_layer(S_1, rnd(OMEGA, ZERO, ZERO, ZERO))
    assert matrix.column(0) == (S_W2,) * 3
    assert matrix.column(1) == (S_W,) * 3
    assert matrix.column(2) == (S_0,) * 3


def test_encode_all_zero_is_all_zero():
    matrix = encode_two_layer(bytes(4), EncodingRandomness(bytes(4), (bytes(4),) * 3))
    assert all(cell == bytes(4) for _, cell in matrix.cells())


def test_encode_inner_layer_example():
    # column share w re-split with inner key w over row points (1, w, w2)
    # gives cells (0, 1, w2); S=0 and K=1 make column index 1 equal w
    matrix = encode_two_layer(S_0, rnd(ONE, ZERO, OMEGA, ZERO))
    assert matrix.column(1) == (S_0, S_1, S_W2)


def test_encode_length_mismatch():
    with pytest.raises(LengthMismatchError):
        encode_two_layer(b"ab", EncodingRandomness(b"a", (b"ab", b"ab", b"ab")))


def test_decode_worked_example():
    matrix = encode_two_layer(S_1, rnd(OMEGA, ZERO, ZERO, ZERO))
    cells = {(r, c): matrix[(r, c)] for r in (0, 1) for c in (0, 1)}
    assert decode_two_layer(cells) == S_1


def test_decode_all_zero():
    matrix = encode_two_layer(bytes(2), EncodingRandomness(bytes(2), (bytes(2),) * 3))
    assert decode_two_layer(dict(matrix.cells())) == bytes(2)


def test_decode_row_plus_column_is_insufficient():
    matrix = encode_two_layer(S_1, rnd(OMEGA, ONE, OMEGA, OMEGA2))
    cells = {cell: matrix[cell] for cell in forbidden_cells(1, 2)}
    assert len(cells) == 5
    with pytest.raises(InsufficientSharesError):
        decode_two_layer(cells)


def test_decode_conflicting_duplicate_cell():
    matrix = encode_two_layer(S_1, rnd(OMEGA, ZERO, ZERO, ZERO))
    pairs = [(cell, block) for cell, block in matrix.cells()]
    pairs.append(((0, 0), bytes([0xFF])))
    with pytest.raises(IntegrityError):
        decode_two_layer(pairs)


def test_decode_consistency_check_detects_corruption():
    message = random.Random(7).randbytes(32)
    matrix = encode_two_layer(message, EncodingRandomness.generate(32, random.Random(8)))
    cells = dict(matrix.cells())
    assert decode_two_layer(cells, check_consistency=True) == message
    cells[(2, 2)] = bytes(32)  # corrupt a cell outside the primary submatrix
    with pytest.raises(IntegrityError):
        decode_two_layer(cells, check_consistency=True)


def test_select_decodable_submatrix():
    every = {(r, c) for r in range(3) for c in range(3)}
    assert select_decodable_submatrix(every) == ((0, 1), (0, 1))
    lost = {(r, c) for (r, c) in every if r != 1 and c != 2}
    assert select_decodable_submatrix(lost) == ((0, 2), (0, 1))
    assert select_decodable_submatrix({(0, 0), (1, 1), (2, 2)}) is None


def test_one_layer_all_of_3():
    message = b"\xc3\x99"
    zero = bytes(2)

    class FixedRng:
        def randbytes(self, n):
            return bytes(n)

    shares = encode_one_layer(message, ALL_OF_3, FixedRng())
    assert shares == (zero, zero, message)
    rng = random.Random(5)
    s0, s1, s2 = encode_one_layer(message, ALL_OF_3, rng)
    assert bytes(a ^ b ^ c for a, b, c in zip(s0, s1, s2)) == message
    assert decode_one_layer({0: s0, 1: s1, 2: s2}, ALL_OF_3) == message
    with pytest.raises(InsufficientSharesError):
        decode_one_layer({0: s0, 1: s1}, ALL_OF_3)


def test_one_layer_two_of_3():
    class OmegaKey:
        def randbytes(self, n):
            return block_from_symbols((OMEGA,)) + bytes(n - 1)

    shares = encode_one_layer(S_1, TWO_OF_3, OmegaKey())
    assert shares == (S_W2, S_W, S_0)  # same algebra as the outer columns
    for i, j in itertools.combinations(range(3), 2):
        assert decode_one_layer({i: shares[i], j: shares[j]}, TWO_OF_3) == S_1
    with pytest.raises(InsufficientSharesError):
        decode_one_layer({1: shares[1]}, TWO_OF_3)


def test_repetition():
    message = b"again and again"
    matrix = encode_repetition(message)
    assert all(cell == message for _, cell in matrix.cells())
    assert decode_repetition({(2, 1): matrix[(2, 1)]}) == message
    with pytest.raises(InsufficientSharesError):
        decode_repetition({})


def test_try_decode_cells_two_layer_reports_used_cells():
    matrix = encode_two_layer(S_1, rnd(OMEGA, ONE, OMEGA, OMEGA2))
    cells = {(r, c): matrix[(r, c)] for (r, c) in ((0, 0), (0, 1), (2, 0))}
    assert try_decode_cells(cells, TWO_LAYER) is None
    cells[(2, 1)] = matrix[(2, 1)]
    message, used = try_decode_cells(cells, TWO_LAYER)
    assert message == S_1
    assert set(used) == {(0, 0), (0, 1), (2, 0), (2, 1)}


def test_try_decode_cells_other_schemes():
    message = b"\x42" * 8
    for scheme in (ONE_LAYER_ALL, ONE_LAYER_TWO, REPETITION):
        cellmap = encode_for_scheme(scheme, message, random.Random(3))
        assert try_decode_cells(cellmap, scheme)[0] == message
    partial = dict(
        list(encode_for_scheme(ONE_LAYER_ALL, message, random.Random(3)).items())[:2]
    )
    assert try_decode_cells(partial, ONE_LAYER_ALL) is None


# ---------------------------------------------------------------------------
# round-trip properties
# ---------------------------------------------------------------------------

messages = st.binary(min_size=1, max_size=2048)


@settings(max_examples=50, deadline=None)
@given(messages, st.integers(min_value=0, max_value=2**32))
def test_round_trip_every_submatrix_agrees(message, seed):
    rng = random.Random(seed)
    matrix = encode_two_layer(message, EncodingRandomness.generate(len(message), rng))
    decodes = [
        decode_two_layer({(r, c): matrix[(r, c)] for r in rp for c in cp})
        for rp in ((0, 1), (0, 2), (1, 2))
        for cp in ((0, 1), (0, 2), (1, 2))
    ]
    assert all(d == message for d in decodes)


def test_share_size_equals_message_size():
    message = b"sized just so"
    rng = random.Random(0)
    two = encode_two_layer(message, EncodingRandomness.generate(len(message), rng))
    assert two.share_length == len(message)
    for share in encode_one_layer(message, TWO_OF_3, rng):
        assert len(share) == len(message)
    assert encode_repetition(message).share_length == len(message)


# ---------------------------------------------------------------------------
# exhaustive oracles
# ---------------------------------------------------------------------------

def test_recovery_oracle_conforming():
    report = verify_recovery_exhaustive()
    assert report.recovery_cases_checked == 4**5 * 9 == 9216
    assert report.recovery_failures == 0


def test_recovery_oracle_flags_duplicated_points():
    bad = SchemeParams(column_points=(ONE, ONE, OMEGA2))
    report = verify_recovery_exhaustive(bad)
    assert report.recovery_failures > 0


def test_scheme_params_validation():
    with pytest.raises(ValueError):
        SchemeParams(column_points=(ONE, ONE, OMEGA2)).validate()
    with pytest.raises(ValueError):
        SchemeParams(row_points=(ZERO, ONE, OMEGA)).validate()
    assert SchemeParams().validate() is not None


def test_secrecy_oracle_conforming():
    report = verify_secrecy_exhaustive()
    assert report.secrecy_failures == 0
    assert report.secrecy_cases_checked == 9 * 4 * 4**4 == 9216


def test_forbidden_set_observations_uniform_over_256():
    # 5 cells of 4 values each give a 4**5 observation space; the 4**4
    # randomness tuples land on 256 distinct observations, each once
    from gridshare.coding import observation_distributions

    dists = observation_distributions(forbidden_cells(0, 0))
    for counter in dists.values():
        assert len(counter) == 256 <= 4**5
        assert set(counter.values()) == {1}


def test_secrecy_oracle_flags_degenerate_inner_keys():
    report = verify_secrecy_exhaustive(inner_keys_zero=True)
    assert report.secrecy_failures > 0


def test_no_small_subset_leaks():
    # distribution-identity across secrets for every 1-, 2-, and 3-cell
    # subset, including the diagonal patterns no single row+column covers
    all_cells = [(r, c) for r in range(3) for c in range(3)]
    samples = []  # (secret, matrix) over the whole randomness space
    for secret in SYMBOLS:
        message = block_from_symbols((secret,))
        for randomness in itertools.product(SYMBOLS, repeat=4):
            matrix = encode_two_layer(
                message,
                EncodingRandomness(
                    block_from_symbols((randomness[0],)),
                    tuple(block_from_symbols((k,)) for k in randomness[1:]),
                ),
            )
            samples.append((secret, matrix))
    for size in (1, 2, 3):
        for subset in itertools.combinations(all_cells, size):
            per_secret = {s: Counter() for s in SYMBOLS}
            for secret, matrix in samples:
                per_secret[secret][tuple(matrix[c] for c in subset)] += 1
            reference = per_secret[0]
            assert all(per_secret[s] == reference for s in SYMBOLS), subset


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

def test_entropy_per_bit():
    assert entropy_per_bit(bytes(1000)) == 0.0
    assert entropy_per_bit(b"\xf0" * 1000) == 1.0
    random_bits = random.Random(11).randbytes(20_000)  # 160k bits
    assert entropy_per_bit(random_bits) >= 0.99
    with pytest.raises(ValueError):
        entropy_per_bit(b"")


def test_single_share_of_fixed_message_looks_uniform():
    message = b"\x00" * 128
    rng = random.Random(13)
    stream = bytearray()
    for _ in range(100):
        matrix = encode_two_layer(message, EncodingRandomness.generate(128, rng))
        stream += matrix[(0, 0)]
    assert len(stream) * 8 >= 100_000
    assert entropy_per_bit(bytes(stream)) >= 0.99
