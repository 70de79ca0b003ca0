import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mimo_anneal.errors import DimensionError
from mimo_anneal.mimo import BPSK, QAM16, QPSK
from mimo_anneal.transforms import (
    decode_bits,
    differential_encode,
    intermediate_code,
    post_translate,
    variable_transform,
    symbols_from_qubits,
)

LEVELS = (-3, -1, 1, 3)

# 16-QAM label grids, one row per Q level (bottom -3 to top +3), columns I = -3..+3.
RECEIVER_GRID = [
    "0000 0100 1000 1100",
    "0001 0101 1001 1101",
    "0010 0110 1010 1110",
    "0011 0111 1011 1111",
]
INTERMEDIATE_GRID = [
    "0000 0111 1000 1111",
    "0001 0110 1001 1110",
    "0010 0101 1010 1101",
    "0011 0100 1011 1100",
]
GRAY_GRID = [
    "0000 0100 1100 1000",
    "0001 0101 1101 1001",
    "0011 0111 1111 1011",
    "0010 0110 1110 1010",
]


def _grid(rows):
    out = {}
    for qi, row in enumerate(rows):
        for ii, label in enumerate(row.split()):
            out[complex(LEVELS[ii], LEVELS[qi])] = tuple(int(ch) for ch in label)
    return out


def _bits(s):
    return tuple(int(ch) for ch in s)


def test_transform_examples():
    assert variable_transform((1,), BPSK) == 1
    assert variable_transform((0, 0, 1, 1), QAM16) == -3 + 3j
    assert variable_transform((1, 1, 1, 1), QAM16) == 3 + 3j


def test_transform_length_check():
    with pytest.raises(DimensionError):
        variable_transform((0, 1), QAM16)


def test_receiver_grid_matches_transform():
    for sym, q in _grid(RECEIVER_GRID).items():
        assert variable_transform(q, QAM16) == sym


def test_full_table_receiver_to_gray():
    rx, mid, gray = _grid(RECEIVER_GRID), _grid(INTERMEDIATE_GRID), _grid(GRAY_GRID)
    assert len(rx) == 16
    for sym in rx:
        assert intermediate_code(rx[sym]) == mid[sym]
        assert post_translate(rx[sym], QAM16) == gray[sym]


def test_gray_grid_is_transmit_map():
    for sym, bits in _grid(GRAY_GRID).items():
        assert QAM16.gray_map(bits) == sym


def test_quoted_examples():
    assert intermediate_code(_bits("1100")) == _bits("1111")
    assert differential_encode(_bits("1111")) == _bits("1000")
    assert post_translate(_bits("1100"), QAM16) == _bits("1000")
    assert post_translate(_bits("0000"), QAM16) == _bits("0000")
    assert post_translate((0, 1), QPSK) == (0, 1)


def test_even_columns_flip_upside_down():
    rx, mid = _grid(RECEIVER_GRID), _grid(INTERMEDIATE_GRID)
    for ii, i_level in enumerate(LEVELS):
        col_rx = [rx[complex(i_level, q)] for q in LEVELS]
        col_mid = [mid[complex(i_level, q)] for q in LEVELS]
        if ii % 2 == 1:
            assert [b[2:] for b in col_mid] == [b[2:] for b in col_rx][::-1]
        else:
            assert col_mid == col_rx


@pytest.mark.parametrize("c", [BPSK, QPSK, QAM16], ids=lambda c: c.kind.value)
def test_round_trip_all_tuples(c):
    images = set()
    for q in itertools.product((0, 1), repeat=c.Q):
        b = post_translate(q, c)
        assert c.gray_map(b) == variable_transform(q, c)
        images.add(b)
    assert len(images) == 2**c.Q


@given(st.sampled_from([BPSK, QPSK, QAM16]), st.data())
def test_decode_bits_is_per_sender(c, data):
    n = data.draw(st.integers(1, 5))
    q = data.draw(st.lists(st.integers(0, 1), min_size=n * c.Q, max_size=n * c.Q))
    out = decode_bits(q, c)
    expect = [b for k in range(n) for b in post_translate(q[k * c.Q:(k + 1) * c.Q], c)]
    assert list(out) == expect
    # decoding must reproduce the symbols the receiver-side variables encode
    assert np.allclose(symbols_from_qubits(q, c), [c.gray_map(out[k * c.Q:(k + 1) * c.Q]) for k in range(n)])


def test_decode_bits_examples():
    assert list(decode_bits([0, 1, 1], BPSK)) == [0, 1, 1]
    assert list(decode_bits([1, 1, 0, 0], QAM16)) == [1, 0, 0, 0]
    with pytest.raises(DimensionError):
        decode_bits([1, 1, 0], QAM16)
