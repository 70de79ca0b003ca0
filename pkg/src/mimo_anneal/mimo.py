"""Complex baseband MIMO model: constellations, Gray modulation, channels, AWGN.

Symbols are kept at their integer-lattice values (BPSK +-1, QPSK +-1+-1j,
16-QAM {+-1, +-3} per axis); the average symbol energy of each constellation
is recorded on the :class:`Constellation` and folded into the noise power.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, TraceError

__all__ = [
    "Modulation",
    "Constellation",
    "BPSK",
    "QPSK",
    "QAM16",
    "get_constellation",
    "modulate",
    "demodulate",
    "slice_symbols",
    "ChannelKind",
    "ChannelModel",
    "ChannelTrace",
    "ChannelUse",
    "gen_channel",
    "transmit",
    "load_trace",
    "save_trace",
    "make_channel_use",
]


class Modulation(str, Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"
    QAM16 = "qam16"


# Gray labels of a 4-PAM axis, indexed by amplitude level -3, -1, +1, +3.
_PAM4_GRAY = ((0, 0), (0, 1), (1, 1), (1, 0))
_PAM4_LEVELS = (-3.0, -1.0, 1.0, 3.0)


def _bits_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> (width - 1 - k)) & 1 for k in range(width))


@dataclass(frozen=True)
class Constellation:
    """A modulation alphabet with its Gray bit labelling.

    ``symbols[k]`` is the symbol whose Gray label, read MSB first, is ``k``.
    """

    kind: Modulation
    bits_per_symbol: int
    symbols: np.ndarray = field(repr=False)

    @property
    def Q(self) -> int:
        return self.bits_per_symbol

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def energy(self) -> float:
        """Average symbol energy E|v|^2 over the uniform alphabet."""
        return float(np.mean(np.abs(self.symbols) ** 2))

    def gray_map(self, bits: Sequence[int]) -> complex:
        if len(bits) != self.Q:
            raise DimensionError(f"expected {self.Q} bits, got {len(bits)}")
        return complex(self.symbols[_bits_to_int(bits)])

    def gray_demap(self, symbol: complex) -> tuple[int, ...]:
        """Bits of the alphabet point nearest to ``symbol``."""
        k = int(np.argmin(np.abs(self.symbols - symbol)))
        return _int_to_bits(k, self.Q)

    def labels(self) -> list[tuple[int, ...]]:
        return [_int_to_bits(k, self.Q) for k in range(self.size)]

    def axis_levels(self) -> np.ndarray:
        """Per-axis amplitude levels (the real alphabet on I, or on I and Q)."""
        if self.kind is Modulation.BPSK:
            return np.array([-1.0, 1.0])
        if self.kind is Modulation.QPSK:
            return np.array([-1.0, 1.0])
        return np.array(_PAM4_LEVELS)


def _build(kind: Modulation) -> Constellation:
    if kind is Modulation.BPSK:
        syms = np.array([-1.0 + 0j, 1.0 + 0j])
        return Constellation(kind, 1, syms)
    if kind is Modulation.QPSK:
        syms = np.array([complex(2 * b1 - 1, 2 * b2 - 1) for b1 in (0, 1) for b2 in (0, 1)])
        return Constellation(kind, 2, syms)
    gray_to_level = {bits: lvl for bits, lvl in zip(_PAM4_GRAY, _PAM4_LEVELS)}
    syms = []
    for k in range(16):
        b = _int_to_bits(k, 4)
        syms.append(complex(gray_to_level[b[:2]], gray_to_level[b[2:]]))
    return Constellation(kind, 4, np.array(syms))


BPSK = _build(Modulation.BPSK)
QPSK = _build(Modulation.QPSK)
QAM16 = _build(Modulation.QAM16)

_BY_KIND = {Modulation.BPSK: BPSK, Modulation.QPSK: QPSK, Modulation.QAM16: QAM16}


def get_constellation(kind: Modulation | str | Constellation) -> Constellation:
    if isinstance(kind, Constellation):
        return kind
    key = str(kind.value if isinstance(kind, Modulation) else kind).lower().replace("-", "")
    aliases = {"16qam": "qam16", "qam": "qam16"}
    key = aliases.get(key, key)
    try:
        return _BY_KIND[Modulation(key)]
    except ValueError:
        raise ValueError(f"unsupported modulation {kind!r}") from None


def modulate(bits, c: Constellation) -> np.ndarray:
    """Gray-map a flat bit vector to one symbol per ``c.Q`` bits."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % c.Q:
        raise DimensionError(f"{bits.size} bits is not a multiple of Q={c.Q}")
    groups = bits.reshape(-1, c.Q)
    weights = 1 << np.arange(c.Q - 1, -1, -1)
    return c.symbols[groups @ weights].astype(complex)


def slice_symbols(z, c: Constellation) -> np.ndarray:
    """Nearest alphabet index for each entry of ``z``."""
    z = np.asarray(z, dtype=complex).ravel()
    return np.argmin(np.abs(z[:, None] - c.symbols[None, :]), axis=1)


def demodulate(symbols, c: Constellation) -> np.ndarray:
    """Hard-decision Gray demapping (nearest point) to a flat bit vector."""
    idx = slice_symbols(symbols, c)
    shifts = np.arange(c.Q - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8).ravel()


# -- channels -----------------------------------------------------------------


class ChannelKind(str, Enum):
    UNIT_GAIN_RANDOM_PHASE = "random_phase"
    RAYLEIGH_IID = "rayleigh"
    TRACE = "trace"


@dataclass(frozen=True)
class ChannelTrace:
    """Measured channel matrices, ``H[use, rx, tx]``."""

    H: np.ndarray = field(repr=False)
    source: str = ""

    @property
    def n_uses(self) -> int:
        return self.H.shape[0]

    @property
    def n_rx(self) -> int:
        return self.H.shape[1]

    @property
    def n_tx(self) -> int:
        return self.H.shape[2]


@dataclass(frozen=True)
class ChannelModel:
    kind: ChannelKind = ChannelKind.RAYLEIGH_IID
    trace: ChannelTrace | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if self.kind is ChannelKind.TRACE and self.trace is None:
            raise TraceError("trace channel model needs a loaded trace")


def gen_channel(model: ChannelModel, n_t: int, n_r: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one ``n_r x n_t`` channel matrix.

    Trace channels pick a random channel use and ``n_r`` distinct receive
    antennas (and ``n_t`` distinct transmitters when the trace has more).
    """
    if not (n_r >= n_t >= 1):
        raise DimensionError(f"need n_r >= n_t >= 1, got n_t={n_t}, n_r={n_r}")
    if model.kind is ChannelKind.UNIT_GAIN_RANDOM_PHASE:
        return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=(n_r, n_t)))
    if model.kind is ChannelKind.RAYLEIGH_IID:
        return (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / math.sqrt(2)
    tr = model.trace
    if tr.n_rx < n_r or tr.n_tx < n_t:
        raise TraceError(
            f"trace has {tr.n_rx} rx x {tr.n_tx} tx antennas, {n_r} x {n_t} requested"
        )
    use = int(rng.integers(tr.n_uses))
    rows = np.sort(rng.choice(tr.n_rx, size=n_r, replace=False))
    cols = np.arange(n_t) if tr.n_tx == n_t else np.sort(rng.choice(tr.n_tx, size=n_t, replace=False))
    return tr.H[use][np.ix_(rows, cols)].copy()


def noise_variance(H: np.ndarray, snr_db: float, symbol_energy: float) -> float:
    """Per-receive-antenna complex noise variance for an average receive SNR.

    Signal power per receive antenna is taken as ``symbol_energy * ||H||_F^2 / n_r``.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    n_r = H.shape[0]
    signal = symbol_energy * float(np.sum(np.abs(H) ** 2)) / n_r
    return signal / 10.0 ** (snr_db / 10.0)


def transmit(
    H,
    v,
    snr_db: float,
    rng: np.random.Generator,
    symbol_energy: float | None = None,
) -> np.ndarray:
    """Return ``y = H v + n`` with complex Gaussian ``n``.

    ``symbol_energy`` defaults to the mean energy of ``v`` itself; pass the
    constellation energy to get an SNR that does not depend on the draw.
    ``snr_db = inf`` disables the noise.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    v = np.asarray(v, dtype=complex).ravel()
    if H.shape[1] != v.size:
        raise DimensionError(f"H is {H.shape}, v has {v.size} entries")
    y = H @ v
    if symbol_energy is None:
        symbol_energy = float(np.mean(np.abs(v) ** 2))
    var = noise_variance(H, snr_db, symbol_energy)
    if var > 0:
        n_r = H.shape[0]
        y = y + math.sqrt(var / 2) * (rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r))
    return y


@dataclass(frozen=True)
class ChannelUse:
    """One detection instance with its ground truth."""

    H: np.ndarray = field(repr=False)
    tx_bits: np.ndarray = field(repr=False)
    tx_symbols: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    snr_db: float
    seed: int
    modulation: Modulation = Modulation.BPSK

    @property
    def n_t(self) -> int:
        return self.H.shape[1]

    @property
    def n_r(self) -> int:
        return self.H.shape[0]


def make_channel_use(
    model: ChannelModel,
    c: Constellation,
    n_t: int,
    n_r: int | None,
    snr_db: float,
    seed: int,
    add_noise: bool = True,
) -> ChannelUse:
    """Draw channel, random bits and noise from a single seed."""
    n_r = n_t if n_r is None else n_r
    rng = np.random.default_rng(seed)
    H = gen_channel(model, n_t, n_r, rng)
    bits = rng.integers(0, 2, size=n_t * c.Q).astype(np.int8)
    v = modulate(bits, c)
    snr = snr_db if add_noise else math.inf
    y = transmit(H, v, snr, rng, symbol_energy=c.energy)
    return ChannelUse(H, bits, v, y, float(snr_db), int(seed), c.kind)


# -- trace files --------------------------------------------------------------

_TRACE_HEADER = ["use", "rx", "tx", "re", "im"]


def load_trace(path) -> ChannelTrace:
    """Parse a ``use,rx,tx,re,im`` CSV into a dense ``[use, rx, tx]`` array."""
    path = Path(path)
    entries: dict[tuple[int, int, int], complex] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError(f"{path}: empty trace file")
        if [h.strip() for h in header] != _TRACE_HEADER:
            raise TraceError(f"{path}:1: expected header {','.join(_TRACE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 5:
                raise TraceError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                key = tuple(int(row[k]) for k in range(3))
            except ValueError:
                raise TraceError(f"{path}:{lineno}: non-integer index") from None
            if min(key) < 0:
                raise TraceError(f"{path}:{lineno}: negative index")
            vals = []
            for name, cell in zip(("re", "im"), row[3:]):
                try:
                    x = float(cell)
                except ValueError:
                    raise TraceError(f"{path}:{lineno}: field '{name}' is not a number") from None
                if not math.isfinite(x):
                    raise TraceError(f"{path}:{lineno}: field '{name}' is not finite ({cell.strip()})")
                vals.append(x)
            if key in entries:
                raise TraceError(f"{path}:{lineno}: duplicate entry {key}")
            entries[key] = complex(vals[0], vals[1])
    if not entries:
        raise TraceError(f"{path}: trace has no entries")
    dims = [max(k[d] for k in entries) + 1 for d in range(3)]
    if len(entries) != dims[0] * dims[1] * dims[2]:
        raise TraceError(f"{path}: incomplete trace, {len(entries)} of {np.prod(dims)} entries")
    H = np.empty(dims, dtype=complex)
    for (u, r, t), val in entries.items():
        H[u, r, t] = val
    return ChannelTrace(H, source=str(path))


def save_trace(H, path) -> None:
    """Write ``H[use, rx, tx]`` (or a single 2-D matrix) in trace CSV form."""
    H = np.asarray(H, dtype=complex)
    if H.ndim == 2:
        H = H[None]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_TRACE_HEADER)
        for u, r, t in np.ndindex(*H.shape):
            z = H[u, r, t]
            w.writerow([u, r, t, repr(float(z.real)), repr(float(z.imag))])
