"""Decoding-quality metrics over anneal-run sample sets.

All metrics are omniscient: they compare against the transmitted bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mimo import Constellation
from .reduction import spins_to_bits
from .solver import SampleSet
from .transforms import decode_bits

__all__ = [
    "RankedSolutions",
    "rank_solutions",
    "tts",
    "expected_ber",
    "asymptotic_ber",
    "TTBResult",
    "ttb",
    "fer",
    "ber_for_fer",
    "ttf",
    "summarize",
]


@dataclass(frozen=True)
class RankedSolutions:
    """Distinct solutions, rank 1 first.

    ``errors[k]`` is the number of wrong bits of rank ``k + 1`` after
    post-translation; ``n_bits`` is the number of bits per solution.
    """

    energies: np.ndarray
    probs: np.ndarray
    errors: np.ndarray
    n_bits: int
    bits: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.size == 0:
            raise ValueError("no solutions to rank")
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("rank probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "energies", np.asarray(self.energies, dtype=float))
        object.__setattr__(self, "errors", np.asarray(self.errors, dtype=float))

    @property
    def L(self) -> int:
        return self.probs.size

    @property
    def gaps(self) -> np.ndarray:
        return self.energies - self.energies[0]

    @property
    def delta_e(self) -> np.ndarray:
        """Energy gap relative to the best energy found (absolute gap if it is 0)."""
        e0 = abs(self.energies[0])
        return self.gaps / e0 if e0 > 0 else self.gaps


def rank_solutions(s: SampleSet, truth_bits, c: Constellation) -> RankedSolutions:
    """Sort distinct solutions by energy; equal energies are split into
    consecutive ranks ordered by their binary labels."""
    if len(s) == 0:
        raise ValueError("empty sample set")
    truth = np.asarray(truth_bits, dtype=np.int8).ravel()
    q = spins_to_bits(s.spins)
    keys = [q[:, k] for k in range(q.shape[1] - 1, -1, -1)] + [s.energies]
    order = np.lexsort(keys)
    q = q[order]
    decoded = np.array([decode_bits(row, c) for row in q])
    if decoded.shape[1] != truth.size:
        raise ValueError(f"solutions carry {decoded.shape[1]} bits, truth has {truth.size}")
    errors = np.sum(decoded != truth[None, :], axis=1)
    counts = s.counts[order].astype(float)
    return RankedSolutions(s.energies[order], counts / counts.sum(), errors, truth.size, decoded)


def tts(p0: float, t_a: float, target: float = 0.99) -> float:
    """Expected time to see the ground state with probability ``target``.

    Never less than one anneal; ``inf`` when ``p0`` is 0.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must be a probability, got {p0}")
    if p0 == 0.0:
        return math.inf
    if p0 >= target:
        return float(t_a)
    return t_a * math.log(1.0 - target) / math.log(1.0 - p0)


def _tails(r: RankedSolutions) -> np.ndarray:
    # tails[k] = P(rank >= k+1); tails[L] = 0
    t = np.concatenate([np.cumsum(r.probs[::-1])[::-1], [0.0]])
    t[0] = 1.0
    return np.clip(t, 0.0, 1.0)


def expected_ber(r: RankedSolutions, n_a):
    """Expected BER of the best of ``n_a`` anneals (scalar or array of ``n_a``)."""
    n = np.asarray(n_a, dtype=float)
    if np.any(n < 1):
        raise ValueError("n_a must be >= 1")
    t = _tails(r)
    powered = t[None, :] ** n.reshape(-1, 1)
    p_best = powered[:, :-1] - powered[:, 1:]
    out = p_best @ r.errors / r.n_bits
    return float(out[0]) if n.ndim == 0 else out.reshape(n.shape)


def asymptotic_ber(r: RankedSolutions) -> float:
    """Limit of :func:`expected_ber` as ``n_a`` grows: the rank-1 error rate."""
    return float(r.errors[0] / r.n_bits)


@dataclass(frozen=True)
class TTBResult:
    target: float
    n_anneals: int | None
    time_us: float
    asymptotic_ber: float

    @property
    def reachable(self) -> bool:
        return self.n_anneals is not None

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "n_anneals": self.n_anneals,
            "value": self.time_us if self.reachable else None,
            "never": not self.reachable,
            "asymptotic_ber": self.asymptotic_ber,
        }


def _min_anneals(r: RankedSolutions, target: float) -> int | None:
    if expected_ber(r, 1) <= target:
        return 1
    if asymptotic_ber(r) > target:
        return None
    hi = 2
    while expected_ber(r, hi) > target:
        hi *= 2
        if hi > 2**62:
            return None
    lo = hi // 2  # expected_ber(lo) > target
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if expected_ber(r, mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def ttb(r: RankedSolutions, target_ber: float, t_a: float, t_p: float = 0.0, p_f: int = 1) -> TTBResult:
    """Time for the expected BER of the best-of-run to reach ``target_ber``.

    ``N_a`` is the smallest integer meeting the target; the time is
    ``N_a (t_a + t_p) / p_f`` with ``p_f`` copies running side by side.
    """
    if p_f < 1:
        raise ValueError("parallelization factor must be >= 1")
    n = _min_anneals(r, target_ber)
    if n is None:
        return TTBResult(target_ber, None, math.inf, asymptotic_ber(r))
    return TTBResult(target_ber, n, n * (t_a + t_p) / p_f, asymptotic_ber(r))


def fer(ber: float, frame_bits: int) -> float:
    """Frame error rate of independent bit errors: 1 - (1 - ber)^frame_bits."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"ber must be in [0, 1], got {ber}")
    if ber == 1.0:
        return 1.0 if frame_bits > 0 else 0.0
    return -math.expm1(frame_bits * math.log1p(-ber))


def ber_for_fer(target_fer: float, frame_bits: int) -> float:
    """Largest BER whose frame error rate does not exceed ``target_fer``."""
    return -math.expm1(math.log1p(-target_fer) / frame_bits)


def ttf(r: RankedSolutions, target_fer: float, frame_bits: int, t_a: float, t_p: float = 0.0, p_f: int = 1) -> TTBResult:
    """Time-to-FER, via the equivalent BER target."""
    return ttb(r, ber_for_fer(target_fer, frame_bits), t_a, t_p, p_f)


def summarize(values) -> dict:
    """Median, mean and 10th/90th percentiles (infinite values kept)."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return {"n": 0, "median": None, "mean": None, "p10": None, "p90": None}
    with np.errstate(invalid="ignore"):
        return {
            "n": int(v.size),
            "median": float(np.median(v)),
            "mean": float(np.mean(v)),
            "p10": float(np.percentile(v, 10)),
            "p90": float(np.percentile(v, 90)),
        }
