import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mimo_anneal.errors import DimensionError, TraceError
from mimo_anneal.mimo import (
    BPSK,
    QAM16,
    QPSK,
    ChannelKind,
    ChannelModel,
    ChannelTrace,
    demodulate,
    gen_channel,
    get_constellation,
    load_trace,
    make_channel_use,
    modulate,
    save_trace,
    transmit,
)

ALL = [BPSK, QPSK, QAM16]


def test_modulate_examples():
    assert np.allclose(modulate([0, 1], BPSK), [-1, 1])
    assert np.allclose(modulate([0, 0], QPSK), [-1 - 1j])
    assert np.allclose(modulate([0, 0, 0, 0], QAM16), [-3 - 3j])


def test_modulate_length_mismatch():
    with pytest.raises(DimensionError):
        modulate([0, 1, 1], QPSK)


@pytest.mark.parametrize("c", ALL, ids=lambda c: c.kind.value)
def test_alphabet_size_and_energy(c):
    assert c.size == 2**c.Q
    assert len({complex(s) for s in c.symbols}) == c.size
    assert c.energy == pytest.approx({1: 1.0, 2: 2.0, 4: 10.0}[c.Q])


@pytest.mark.parametrize("c", ALL, ids=lambda c: c.kind.value)
def test_gray_neighbours_differ_in_one_bit(c):
    syms = c.symbols
    d = np.abs(syms[:, None] - syms[None, :])
    dmin = d[d > 0].min()
    pairs = 0
    for a in range(c.size):
        for b in range(a + 1, c.size):
            if abs(d[a, b] - dmin) < 1e-9:
                ba, bb = c.gray_demap(syms[a]), c.gray_demap(syms[b])
                assert sum(x != y for x, y in zip(ba, bb)) == 1
                pairs += 1
    assert pairs > 0


@pytest.mark.parametrize("c", ALL, ids=lambda c: c.kind.value)
def test_map_demap_identities(c):
    for bits in c.labels():
        assert c.gray_demap(c.gray_map(bits)) == bits
    for s in c.symbols:
        assert c.gray_map(c.gray_demap(s)) == s


@given(st.sampled_from(ALL), st.data())
def test_demodulate_inverts_modulate(c, data):
    n = data.draw(st.integers(1, 6))
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * c.Q, max_size=n * c.Q)), dtype=np.int8)
    assert np.array_equal(demodulate(modulate(bits, c), c), bits)


def test_constellation_aliases():
    assert get_constellation("16-QAM") is QAM16
    assert get_constellation("bpsk") is BPSK
    with pytest.raises(ValueError):
        get_constellation("64qam")


def test_random_phase_entries_unit_modulus():
    H = gen_channel(ChannelModel(ChannelKind.UNIT_GAIN_RANDOM_PHASE), 2, 2, np.random.default_rng(7))
    assert H.shape == (2, 2)
    assert np.allclose(np.abs(H), 1.0, atol=1e-15)


def test_rayleigh_unit_variance():
    rng = np.random.default_rng(3)
    m = ChannelModel(ChannelKind.RAYLEIGH_IID)
    vals = np.concatenate([np.abs(gen_channel(m, 4, 4, rng)).ravel() ** 2 for _ in range(625)])
    assert vals.size == 10**4
    assert abs(vals.mean() - 1.0) < 0.05


def test_channel_deterministic_per_seed():
    m = ChannelModel()
    a = gen_channel(m, 3, 4, np.random.default_rng(11))
    b = gen_channel(m, 3, 4, np.random.default_rng(11))
    assert np.array_equal(a, b)


def test_channel_dimension_checks():
    with pytest.raises(DimensionError):
        gen_channel(ChannelModel(), 4, 3, np.random.default_rng(0))


def test_trace_submatrix_selection():
    rng = np.random.default_rng(0)
    full = rng.normal(size=(3, 96, 8)) + 1j * rng.normal(size=(3, 96, 8))
    m = ChannelModel(ChannelKind.TRACE, ChannelTrace(full))
    H = gen_channel(m, 8, 8, np.random.default_rng(5))
    assert H.shape == (8, 8)
    # every row of H is a row of one of the trace's channel uses, in increasing antenna order
    use = [u for u in range(3) if all(any(np.array_equal(r, full[u, k]) for k in range(96)) for r in H)]
    assert len(use) == 1
    idx = [next(k for k in range(96) if np.array_equal(r, full[use[0], k])) for r in H]
    assert idx == sorted(idx) and len(set(idx)) == 8


def test_trace_too_small():
    m = ChannelModel(ChannelKind.TRACE, ChannelTrace(np.ones((1, 2, 2), dtype=complex)))
    with pytest.raises(TraceError):
        gen_channel(m, 3, 3, np.random.default_rng(0))


def test_transmit_noiseless_is_linear_map(rng):
    H = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    v = np.array([1 + 1j, -1 + 1j])
    assert np.array_equal(transmit(H, v, math.inf, rng), H @ v)


def test_transmit_snr_many_draws():
    rng = np.random.default_rng(4)
    H, v = np.eye(2), np.array([1.0, 1.0])
    n = np.array([transmit(H, v, 20.0, rng) - H @ v for _ in range(10**5)])
    ratio = np.mean(np.sum(np.abs(n) ** 2, axis=1)) / np.sum(np.abs(H @ v) ** 2)
    assert abs(ratio / 1e-2 - 1) < 0.05


def test_transmit_dimension_check(rng):
    with pytest.raises(DimensionError):
        transmit(np.eye(2), np.ones(3), 10.0, rng)


def test_transmit_repeatable():
    H, v = np.eye(2), np.array([1.0, -1.0])
    a = transmit(H, v, 5.0, np.random.default_rng(9))
    b = transmit(H, v, 5.0, np.random.default_rng(9))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("c", ALL, ids=lambda c: c.kind.value)
def test_channel_use_consistency(c):
    u = make_channel_use(ChannelModel(), c, 3, 4, 10.0, seed=21)
    assert np.array_equal(u.tx_symbols, modulate(u.tx_bits, c))
    again = make_channel_use(ChannelModel(), c, 3, 4, 10.0, seed=21)
    assert np.array_equal(u.y, again.y) and np.array_equal(u.H, again.H)
    clean = make_channel_use(ChannelModel(), c, 3, 4, 10.0, seed=21, add_noise=False)
    assert np.array_equal(clean.y, clean.H @ clean.tx_symbols)


def test_trace_round_trip(tmp_path, rng):
    H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    path = tmp_path / "t.csv"
    save_trace(H, path)
    t = load_trace(path)
    assert t.n_uses == 1 and np.array_equal(t.H[0], H)


def _write(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    return p


def test_trace_empty_file(tmp_path):
    with pytest.raises(TraceError, match="empty"):
        load_trace(_write(tmp_path, ""))


def test_trace_nan_names_field(tmp_path):
    p = _write(tmp_path, "use,rx,tx,re,im\n0,0,0,1.0,nan\n")
    with pytest.raises(TraceError, match=r":2: field 'im'"):
        load_trace(p)


@pytest.mark.parametrize(
    "body, pattern",
    [
        ("use,rx,tx,re\n", "header"),
        ("use,rx,tx,re,im\n0,0,0,1.0\n", ":2: expected 5 fields"),
        ("use,rx,tx,re,im\n0,x,0,1.0,0\n", ":2: non-integer"),
        ("use,rx,tx,re,im\n0,0,0,1,0\n0,0,0,1,0\n", ":3: duplicate"),
        ("use,rx,tx,re,im\n0,0,0,1,0\n0,1,1,1,0\n", "incomplete"),
        ("use,rx,tx,re,im\n0,0,0,abc,0\n", "field 're'"),
    ],
)
def test_trace_malformed(tmp_path, body, pattern):
    with pytest.raises(TraceError, match=pattern):
        load_trace(_write(tmp_path, body))
