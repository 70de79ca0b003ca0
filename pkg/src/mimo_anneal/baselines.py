"""Classical reference detectors: exhaustive ML, zero-forcing, sphere decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DecodeError, DimensionError
from .mimo import Constellation, demodulate

__all__ = ["brute_force_ml", "zero_forcing", "sphere_decode", "SphereStats", "MAX_BRUTE_FORCE"]

MAX_BRUTE_FORCE = 2**20


def _check(H, y):
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    y = np.asarray(y, dtype=complex).ravel()
    if y.size != H.shape[0]:
        raise DimensionError(f"y has {y.size} entries, H has {H.shape[0]} rows")
    return H, y


def _full_rank(H):
    if np.linalg.matrix_rank(H) < H.shape[1]:
        raise DecodeError(f"channel of shape {H.shape} is rank deficient")


def brute_force_ml(H, y, c: Constellation, chunk: int = 1 << 15) -> np.ndarray:
    """Exact ML over all ``|O|^N_t`` symbol vectors.

    Candidates are scanned in lexicographic order of their Gray labels, so
    ties resolve to the smallest label.
    """
    H, y = _check(H, y)
    n_t = H.shape[1]
    M = c.size
    total = M**n_t
    if total > MAX_BRUTE_FORCE:
        raise CapacityError(f"{total} candidates exceeds the brute-force limit {MAX_BRUTE_FORCE}")
    powers = M ** np.arange(n_t - 1, -1, -1)
    best, best_k = np.inf, 0
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk))
        idx = (k[:, None] // powers[None, :]) % M
        V = c.symbols[idx]
        d = np.sum(np.abs(y[None, :] - V @ H.T) ** 2, axis=1)
        i = int(np.argmin(d))
        if d[i] < best:
            best, best_k = float(d[i]), int(k[i])
    idx = (best_k // powers) % M
    return demodulate(c.symbols[idx], c)


def zero_forcing(H, y, c: Constellation) -> np.ndarray:
    """Pseudo-inverse equalisation followed by per-sender slicing."""
    H, y = _check(H, y)
    _full_rank(H)
    z = np.linalg.pinv(H) @ y
    return demodulate(z, c)


@dataclass(frozen=True)
class SphereStats:
    visited: int  # partial metrics computed, the pruning one included
    inside: int  # nodes whose partial metric fell inside the radius
    radius_sq: float
    metric: float


def sphere_decode(H, y, c: Constellation) -> tuple[np.ndarray, SphereStats]:
    """Depth-first Schnorr-Euchner sphere decoder on the complex tree.

    ``H = QR``; level ``k`` fixes symbol ``k`` counting from the last.  The
    radius starts infinite and shrinks to each new leaf metric.  Children are
    visited in increasing partial metric and a level is abandoned at the first
    child outside the radius.
    """
    H, y = _check(H, y)
    _full_rank(H)
    n_t = H.shape[1]
    Qm, R = np.linalg.qr(H)
    yb = Qm.conj().T @ y
    syms = c.symbols
    diag2 = np.abs(np.diag(R)) ** 2

    visited = 0
    inside = 0
    radius = np.inf
    best = None
    chosen = np.zeros(n_t, dtype=np.int64)
    v = np.zeros(n_t, dtype=complex)
    # per level: children sorted by increment, cursor into them; base[k] is the partial metric above level k
    orders = [None] * n_t
    incs = [None] * n_t
    cursor = np.zeros(n_t, dtype=np.int64)
    base = np.zeros(n_t + 1)

    def expand(k):
        interf = R[k, k + 1:] @ v[k + 1:]
        center = (yb[k] - interf) / R[k, k]
        inc = diag2[k] * np.abs(syms - center) ** 2
        order = np.argsort(inc, kind="stable")
        orders[k] = order
        incs[k] = inc[order]
        cursor[k] = 0

    k = n_t - 1
    base[n_t] = 0.0
    expand(k)
    while True:
        if cursor[k] < len(syms):
            visited += 1
            m = base[k + 1] + incs[k][cursor[k]]
            if m < radius:
                inside += 1
                chosen[k] = orders[k][cursor[k]]
                v[k] = syms[chosen[k]]
                cursor[k] += 1
                if k == 0:
                    radius = m
                    best = chosen.copy()
                    continue
                base[k] = m
                k -= 1
                expand(k)
                continue
            cursor[k] = len(syms)  # remaining siblings are further away
        k += 1
        if k == n_t:
            break
    bits = demodulate(syms[best], c)
    # the tree metric omits the part of y outside the column space of H
    metric = float(radius) + float(np.sum(np.abs(y) ** 2) - np.sum(np.abs(yb) ** 2))
    return bits, SphereStats(visited, inside, float(radius), max(metric, 0.0))
