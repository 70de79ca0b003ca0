"""ML detection as QUBO and Ising problems.

Two independent routes are provided.  :func:`ml_to_qubo_oracle` expands
``||y - H T(q)||^2`` symbolically, one real/imaginary residual row at a time,
and is the reference.  :func:`ml_to_ising` evaluates the per-modulation closed
forms for the Ising coefficients directly from column dot products of ``H``
and ``y``.  Offsets are carried so that every reported energy equals the
Euclidean distance ``||y - H v||^2`` of the corresponding candidate.

Spin/binary convention throughout: ``q = (s + 1) / 2``.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapacityError, DimensionError
from .mimo import Constellation, Modulation
from .transforms import affine_weights

__all__ = [
    "IsingProblem",
    "QuboProblem",
    "ising_energy",
    "qubo_energy",
    "qubo_to_ising",
    "ising_to_qubo",
    "ml_to_qubo_oracle",
    "ml_to_ising",
    "euclidean_objective",
    "all_binary",
    "all_spins",
    "spins_to_bits",
    "bits_to_spins",
    "exhaustive_minimum",
]


def _upper(mat, n) -> np.ndarray:
    g = np.zeros((n, n)) if mat is None else np.array(mat, dtype=float)
    if g.shape != (n, n):
        raise DimensionError(f"coupling matrix must be {n}x{n}, got {g.shape}")
    if np.any(np.diag(g) != 0):
        raise ValueError("Ising couplings must be off-diagonal")
    # entries below the diagonal are folded onto the upper triangle
    return np.triu(g, k=1) + np.tril(g, k=-1).T


@dataclass(frozen=True)
class IsingProblem:
    """``E(s) = sum_{i<j} g_ij s_i s_j + sum_i f_i s_i + offset``.

    ``g`` is stored dense and strictly upper triangular.
    """

    f: np.ndarray
    g: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).ravel()
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", _upper(self.g, f.size))
        object.__setattr__(self, "offset", float(self.offset))
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.g))):
            raise ValueError("Ising coefficients must be finite")

    @property
    def n(self) -> int:
        return self.f.size

    def couplings(self):
        """Iterate ``(i, j, g_ij)`` over non-zero couplings, ``i < j``."""
        iu, ju = np.nonzero(self.g)
        for i, j in zip(iu, ju):
            yield int(i), int(j), float(self.g[i, j])

    def scaled(self, alpha: float) -> "IsingProblem":
        return IsingProblem(alpha * self.f, alpha * self.g, alpha * self.offset)

    def max_abs_coefficient(self) -> float:
        return float(max(np.max(np.abs(self.f), initial=0.0), np.max(np.abs(self.g), initial=0.0)))

    def normalized(self) -> tuple["IsingProblem", float]:
        """Scale so the largest |f| or |g| is 1; returns the problem and factor."""
        m = self.max_abs_coefficient()
        alpha = 1.0 / m if m > 0 else 1.0
        return self.scaled(alpha), alpha

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "f": [float(x) for x in self.f],
            "g": [[i, j, v] for i, j, v in self.couplings()],
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsingProblem":
        n = int(d["n"])
        g = np.zeros((n, n))
        for i, j, v in d.get("g", []):
            i, j = int(i), int(j)
            if i == j:
                raise ValueError("Ising couplings must be off-diagonal")
            g[min(i, j), max(i, j)] += float(v)
        f = np.asarray(d.get("f", [0.0] * n), dtype=float)
        if f.size != n:
            raise DimensionError(f"f has {f.size} entries for n={n}")
        return cls(f, g, float(d.get("offset", 0.0)))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "IsingProblem":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class QuboProblem:
    """``E(q) = sum_i Q_ii q_i + sum_{i<j} Q_ij q_i q_j + offset``."""

    Q: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"QUBO matrix must be square, got {Q.shape}")
        object.__setattr__(self, "Q", np.triu(Q) + np.tril(Q, k=-1).T)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.Q.shape[0]


def _as_batch(x, n: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != n:
        raise DimensionError(f"assignment has {arr.shape[1]} entries, problem has {n}")
    return arr, single


def ising_energy(p: IsingProblem, s):
    """Energy of one spin vector, or of each row of a 2-D batch."""
    S, single = _as_batch(s, p.n)
    e = np.einsum("ki,ij,kj->k", S, p.g, S) + S @ p.f + p.offset
    return float(e[0]) if single else e


def qubo_energy(p: QuboProblem, q):
    X, single = _as_batch(q, p.n)
    diag = np.diag(p.Q)
    off = np.triu(p.Q, k=1)
    e = X @ diag + np.einsum("ki,ij,kj->k", X, off, X) + p.offset
    return float(e[0]) if single else e


def qubo_to_ising(p: QuboProblem) -> IsingProblem:
    off = np.triu(p.Q, k=1)
    diag = np.diag(p.Q)
    g = off / 4.0
    f = diag / 2.0 + (off.sum(axis=0) + off.sum(axis=1)) / 4.0
    offset = p.offset + diag.sum() / 2.0 + off.sum() / 4.0
    return IsingProblem(f, g, offset)


def ising_to_qubo(p: IsingProblem) -> QuboProblem:
    g = p.g
    Q = 4.0 * g
    lin = 2.0 * p.f - 2.0 * (g.sum(axis=0) + g.sum(axis=1))
    Q[np.diag_indices(p.n)] = lin
    offset = p.offset - p.f.sum() + g.sum()
    return QuboProblem(Q, offset)


# -- symbolic oracle ------------------------------------------------------------


def _square_linear(lin: dict, const: float, acc: dict) -> float:
    """Accumulate ``(const + sum_k a_k q_k)^2`` into ``acc`` using q_k^2 = q_k.

    Keys of ``acc`` are ``(i,)`` for linear and ``(i, j)`` (i<j) for quadratic
    monomials.  Returns the constant part.
    """
    items = [(k, a) for k, a in lin.items() if a != 0.0]
    for k, a in items:
        acc[(k,)] += a * a + 2.0 * const * a
    for (k1, a1), (k2, a2) in itertools.combinations(items, 2):
        key = (k1, k2) if k1 < k2 else (k2, k1)
        acc[key] += 2.0 * a1 * a2
    return const * const


def ml_to_qubo_oracle(H, y, c: Constellation) -> QuboProblem:
    """Expand ``||y - H T(q)||^2`` term by term into a QUBO.

    Each receive antenna contributes a real and an imaginary residual, both
    affine in ``q``; squaring them and reducing ``q^2 = q`` gives the
    coefficients.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    y = np.asarray(y, dtype=complex).ravel()
    n_r, n_t = H.shape
    if y.size != n_r:
        raise DimensionError(f"y has {y.size} entries, H has {n_r} rows")
    t0, w = affine_weights(c)
    Q = c.Q
    acc: dict = defaultdict(float)
    offset = 0.0
    for r in range(n_r):
        re_lin: dict = {}
        im_lin: dict = {}
        re_c, im_c = y[r].real, y[r].imag
        for n in range(n_t):
            h = H[r, n]
            # residual -= h * (t0 + sum_b w_b q_b)
            re_c -= h.real * t0.real - h.imag * t0.imag
            im_c -= h.real * t0.imag + h.imag * t0.real
            for b in range(Q):
                k = n * Q + b
                re_lin[k] = -(h.real * w[b].real - h.imag * w[b].imag)
                im_lin[k] = -(h.real * w[b].imag + h.imag * w[b].real)
        offset += _square_linear(re_lin, re_c, acc)
        offset += _square_linear(im_lin, im_c, acc)
    N = n_t * Q
    mat = np.zeros((N, N))
    for key, val in acc.items():
        if len(key) == 1:
            mat[key[0], key[0]] += val
        else:
            mat[key[0], key[1]] += val
    return QuboProblem(mat, offset)


# -- closed forms --------------------------------------------------------------

# Spin weights per sender: v = sum_b w_b s_b (the constant vanishes in spins).
_SPIN_WEIGHTS = {
    Modulation.BPSK: np.array([1.0 + 0j]),
    Modulation.QPSK: np.array([1.0 + 0j, 1j]),
    Modulation.QAM16: np.array([2.0 + 0j, 1.0 + 0j, 2j, 1j]),
}

# 16-QAM couplers keyed by the positions of i and j inside their senders
# (0: I MSB, 1: I LSB, 2: Q MSB, 3: Q LSB).  "II": c1 HI_a.HI_b + c2 HQ_b.HQ_a,
# "IQ": c1 HI_a.HQ_b + c2 HI_b.HQ_a, with a = sender of i, b = sender of j.
_QAM16_G = {
    (0, 0): ("II", 8, 8), (0, 1): ("II", 4, 4), (0, 2): ("IQ", -8, 8), (0, 3): ("IQ", -4, 4),
    (1, 0): ("II", 4, 4), (1, 1): ("II", 2, 2), (1, 2): ("IQ", -4, 4), (1, 3): ("IQ", -2, 2),
    (2, 0): ("IQ", 8, -8), (2, 1): ("IQ", 4, -4), (2, 2): ("II", 8, 8), (2, 3): ("II", 4, 4),
    (3, 0): ("IQ", 4, -4), (3, 1): ("IQ", 2, -2), (3, 2): ("II", 4, 4), (3, 3): ("II", 2, 2),
}
# 16-QAM linear terms: (c1, c2, which) with which "I": c1 HI.yI + c2 HQ.yQ,
# "Q": c1 HI.yQ + c2 HQ.yI.
_QAM16_F = {0: (-4, -4, "I"), 1: (-2, -2, "I"), 2: (-4, 4, "Q"), 3: (-2, 2, "Q")}


def _check_dims(H, y):
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    y = np.asarray(y, dtype=complex).ravel()
    if y.size != H.shape[0]:
        raise DimensionError(f"y has {y.size} entries, H has {H.shape[0]} rows")
    return H, y


def _bpsk(hI, hQ, yI, yQ):
    n_t = hI.shape[1]
    f = np.array([-2 * (hI[:, i] @ yI) - 2 * (hQ[:, i] @ yQ) for i in range(n_t)])
    g = np.zeros((n_t, n_t))
    for i in range(n_t):
        for j in range(i + 1, n_t):
            g[i, j] = 2 * (hI[:, i] @ hI[:, j]) + 2 * (hQ[:, i] @ hQ[:, j])
    return f, g


def _qpsk(hI, hQ, yI, yQ):
    N = 2 * hI.shape[1]
    f = np.zeros(N)
    g = np.zeros((N, N))
    for i1 in range(1, N + 1):  # 1-based indices as in the formulas
        a = (i1 + 1) // 2 - 1
        if i1 % 2 == 0:
            f[i1 - 1] = -2 * (hI[:, a] @ yQ) + 2 * (hQ[:, a] @ yI)
        else:
            f[i1 - 1] = -2 * (hI[:, a] @ yI) - 2 * (hQ[:, a] @ yQ)
        for j1 in range(i1 + 1, N + 1):
            b = (j1 + 1) // 2 - 1
            if a == b:
                continue  # I and Q spins of one sender do not interact
            if (i1 + j1) % 2 == 0:
                val = 2 * (hI[:, a] @ hI[:, b]) + 2 * (hQ[:, a] @ hQ[:, b])
            elif i1 % 2 == 0:
                val = 2 * (hI[:, a] @ hQ[:, b]) - 2 * (hI[:, b] @ hQ[:, a])
            else:
                val = -2 * (hI[:, a] @ hQ[:, b]) + 2 * (hI[:, b] @ hQ[:, a])
            g[i1 - 1, j1 - 1] = val
    return f, g


def _qam16(hI, hQ, yI, yQ):
    N = 4 * hI.shape[1]
    f = np.zeros(N)
    g = np.zeros((N, N))
    for i in range(N):
        a, pi = divmod(i, 4)
        c1, c2, which = _QAM16_F[pi]
        if which == "I":
            f[i] = c1 * (hI[:, a] @ yI) + c2 * (hQ[:, a] @ yQ)
        else:
            f[i] = c1 * (hI[:, a] @ yQ) + c2 * (hQ[:, a] @ yI)
        for j in range(i + 1, N):
            b, pj = divmod(j, 4)
            if a == b and (pi < 2) != (pj < 2):
                continue  # I and Q parts of one sender do not interact
            kind, c1, c2 = _QAM16_G[(pi, pj)]
            if kind == "II":
                g[i, j] = c1 * (hI[:, a] @ hI[:, b]) + c2 * (hQ[:, b] @ hQ[:, a])
            else:
                g[i, j] = c1 * (hI[:, a] @ hQ[:, b]) + c2 * (hI[:, b] @ hQ[:, a])
    return f, g


_CLOSED_FORMS = {Modulation.BPSK: _bpsk, Modulation.QPSK: _qpsk, Modulation.QAM16: _qam16}


def ml_to_ising(H, y, c: Constellation) -> IsingProblem:
    """Ising coefficients of the ML problem from the closed-form tables."""
    H, y = _check_dims(H, y)
    try:
        form = _CLOSED_FORMS[c.kind]
    except KeyError:
        raise ValueError(f"unsupported modulation {c.kind}") from None
    f, g = form(H.real, H.imag, y.real, y.imag)
    w2 = np.abs(_SPIN_WEIGHTS[c.kind]) ** 2
    col_energy = np.sum(np.abs(H) ** 2, axis=0)
    offset = float(np.sum(np.abs(y) ** 2) + w2.sum() * col_energy.sum())
    return IsingProblem(f, g, offset)


def euclidean_objective(H, y, c: Constellation, q) -> np.ndarray:
    """``||y - H T(q)||^2`` for each row of a binary batch (brute-force reference)."""
    H, y = _check_dims(H, y)
    Qb, single = _as_batch(q, H.shape[1] * c.Q)
    t0, w = affine_weights(c)
    V = t0 + Qb.reshape(Qb.shape[0], -1, c.Q) @ w
    r = y[None, :] - V @ H.T
    e = np.sum(np.abs(r) ** 2, axis=1)
    return float(e[0]) if single else e


# -- exhaustive helpers -------------------------------------------------------

MAX_EXHAUSTIVE = 24


def all_binary(n: int) -> np.ndarray:
    """All 2^n assignments in lexicographic order, first variable most significant."""
    if n > MAX_EXHAUSTIVE:
        raise CapacityError(f"exhaustive enumeration limited to {MAX_EXHAUSTIVE} variables, got {n}")
    k = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1)
    return ((k[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def all_spins(n: int) -> np.ndarray:
    return (2 * all_binary(n) - 1).astype(np.int8)


def spins_to_bits(s) -> np.ndarray:
    return ((np.asarray(s) + 1) // 2).astype(np.int8)


def bits_to_spins(q) -> np.ndarray:
    return (2 * np.asarray(q) - 1).astype(np.int8)


def exhaustive_minimum(p: IsingProblem, chunk: int = 1 << 16) -> tuple[np.ndarray, float]:
    """Lowest-energy spin vector; ties go to the lexicographically smallest bits."""
    n = p.n
    if n > MAX_EXHAUSTIVE:
        raise CapacityError(f"exhaustive search limited to {MAX_EXHAUSTIVE} spins, got {n}")
    best_e, best_k = np.inf, -1
    shifts = np.arange(n - 1, -1, -1)
    for start in range(0, 2**n, chunk):
        k = np.arange(start, min(2**n, start + chunk), dtype=np.int64)
        S = 2.0 * ((k[:, None] >> shifts[None, :]) & 1) - 1.0
        e = ising_energy(p, S)
        i = int(np.argmin(e))
        if e[i] < best_e:
            best_e, best_k = float(e[i]), int(k[i])
    s = 2 * ((best_k >> shifts) & 1) - 1
    return s.astype(np.int8), best_e
