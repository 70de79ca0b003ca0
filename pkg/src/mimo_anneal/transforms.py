"""Linear bit-to-symbol transforms used by the receiver, and the bitwise
post-translation back to the transmitter's Gray labels.

The receiver represents every candidate symbol as a *linear* function of its
binary variables so that the ML norm expands to a quadratic form.  For 16-QAM
that labelling differs from Gray coding, which is repaired after solving:

1. if the second bit is set, flip bits three and four (the even columns of
   the constellation are turned upside down), giving an intermediate code;
2. differentially encode the whole 4-bit word (``b[0]`` copied,
   ``b[k] = b'[k-1] xor b'[k]``).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .mimo import Constellation, Modulation

__all__ = [
    "variable_transform",
    "affine_weights",
    "intermediate_code",
    "differential_encode",
    "post_translate",
    "decode_bits",
    "symbols_from_qubits",
]


def variable_transform(q, c: Constellation) -> complex:
    """Symbol represented by one sender's binary variables."""
    q = tuple(int(b) for b in q)
    if len(q) != c.Q:
        raise DimensionError(f"expected {c.Q} variables, got {len(q)}")
    if c.kind is Modulation.BPSK:
        return complex(2 * q[0] - 1, 0)
    if c.kind is Modulation.QPSK:
        return complex(2 * q[0] - 1, 2 * q[1] - 1)
    return complex(4 * q[0] + 2 * q[1] - 3, 4 * q[2] + 2 * q[3] - 3)


def affine_weights(c: Constellation) -> tuple[complex, np.ndarray]:
    """``(constant, weights)`` with ``T(q) = constant + weights @ q``."""
    if c.kind is Modulation.BPSK:
        return -1 + 0j, np.array([2 + 0j])
    if c.kind is Modulation.QPSK:
        return -1 - 1j, np.array([2 + 0j, 2j])
    return -3 - 3j, np.array([4 + 0j, 2 + 0j, 4j, 2j])


def symbols_from_qubits(q, c: Constellation) -> np.ndarray:
    """Apply the transform sender by sender to a flat variable vector."""
    q = np.asarray(q, dtype=np.int64).ravel()
    if q.size % c.Q:
        raise DimensionError(f"{q.size} variables is not a multiple of Q={c.Q}")
    const, w = affine_weights(c)
    return const + q.reshape(-1, c.Q) @ w


def intermediate_code(q) -> tuple[int, ...]:
    q = tuple(int(b) for b in q)
    if len(q) != 4:
        raise DimensionError("intermediate code is defined on 4-bit 16-QAM tuples")
    if q[1]:
        return (q[0], q[1], 1 - q[2], 1 - q[3])
    return q


def differential_encode(b) -> tuple[int, ...]:
    b = tuple(int(x) for x in b)
    return (b[0],) + tuple(b[k - 1] ^ b[k] for k in range(1, len(b)))


def post_translate(q, c: Constellation) -> tuple[int, ...]:
    """Gray bits of the symbol ``variable_transform(q, c)``."""
    q = tuple(int(b) for b in q)
    if len(q) != c.Q:
        raise DimensionError(f"expected {c.Q} bits, got {len(q)}")
    if c.kind in (Modulation.BPSK, Modulation.QPSK):
        return q
    if c.kind is Modulation.QAM16:
        return differential_encode(intermediate_code(q))
    raise ValueError(f"unsupported modulation {c.kind}")


def decode_bits(q, c: Constellation) -> np.ndarray:
    """Post-translate a full solution, sender by sender."""
    q = np.asarray(q, dtype=np.int64).ravel()
    if q.size % c.Q:
        raise DimensionError(f"{q.size} variables is not a multiple of Q={c.Q}")
    if c.kind is not Modulation.QAM16:
        return q.astype(np.int8)
    g = q.reshape(-1, 4)
    # Closed form of the two steps: (q1, q1^q2, q3, q3^q4).
    out = np.stack([g[:, 0], g[:, 0] ^ g[:, 1], g[:, 2], g[:, 2] ^ g[:, 3]], axis=1)
    return out.astype(np.int8).ravel()
