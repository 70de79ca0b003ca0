"""Anneal-run sampling backends.

An *anneal run* is a batch of ``n_anneals`` independent anneals with the same
parameters.  Every anneal draws its own seed, so the result does not depend
on the order or parallelism in which anneals are executed.  Samples are
always scored on the unperturbed logical problem.

Two backends:

``exact``
    exhaustive minimisation of the (optionally ICE-perturbed) logical problem.
``sa``
    Metropolis simulated annealing on the embedded (or logical) problem with
    a geometric inverse-temperature ladder.  Wall-clock anneal and pause time
    are converted to sweeps with ``sweeps_per_us``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numba
import numpy as np

from .embedding import EmbeddedIsing, Embedding, embed_ising, range_scale, unembed_batch
from .errors import CapacityError
from .reduction import MAX_EXHAUSTIVE, IsingProblem, ising_energy

__all__ = [
    "AnnealSchedule",
    "IceModel",
    "SampleSet",
    "ExactSpectrum",
    "solve_exact",
    "apply_ice",
    "anneal_run",
    "best_of_run",
    "sa_sample",
    "default_beta_range",
    "PHYSICAL_BETA_RANGE",
]


@dataclass(frozen=True)
class AnnealSchedule:
    """Anneal time ``T_a`` and pause ``T_p`` in microseconds; pause position
    ``s_p`` is a fraction of the anneal."""

    T_a: float = 1.0
    T_p: float = 1.0
    s_p: float = 0.35
    n_anneals: int = 100

    def __post_init__(self):
        if not self.T_a > 0:
            raise ValueError(f"T_a must be positive, got {self.T_a}")
        if self.T_p < 0:
            raise ValueError(f"T_p must be >= 0, got {self.T_p}")
        if self.T_p > 0 and not 0.15 <= self.s_p <= 0.55:
            raise ValueError(f"pause position s_p={self.s_p} outside [0.15, 0.55]")
        if self.n_anneals < 1:
            raise ValueError("n_anneals must be >= 1")

    @property
    def anneal_time(self) -> float:
        """Wall-clock time of one anneal, pause included."""
        return self.T_a + self.T_p


@dataclass(frozen=True)
class IceModel:
    """Per-anneal Gaussian perturbation of programmed coefficients."""

    enabled: bool = True
    f_mean: float = 0.008
    f_std: float = 0.02
    g_mean: float = -0.015
    g_std: float = 0.025

    @classmethod
    def off(cls) -> "IceModel":
        return cls(enabled=False)


@dataclass
class SampleSet:
    """Distinct logical solutions in order of first occurrence."""

    spins: np.ndarray  # (L, N) int8
    energies: np.ndarray  # (L,)
    counts: np.ndarray  # (L,)
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_samples(cls, spins: np.ndarray, energies: np.ndarray, provenance: dict | None = None) -> "SampleSet":
        spins = np.asarray(spins, dtype=np.int8)
        uniq, first, inverse, counts = np.unique(
            spins, axis=0, return_index=True, return_inverse=True, return_counts=True
        )
        order = np.argsort(first, kind="stable")
        return cls(
            spins=uniq[order],
            energies=np.asarray(energies, dtype=float)[first[order]],
            counts=counts[order].astype(np.int64),
            provenance=dict(provenance or {}),
        )

    def to_jsonl(self) -> str:
        lines = []
        for s, e, c in zip(self.spins, self.energies, self.counts):
            bits = "".join("1" if x > 0 else "0" for x in s)
            lines.append(json.dumps({"bits": bits, "energy": float(e), "count": int(c)}))
        return "\n".join(lines) + ("\n" if lines else "")


def best_of_run(s: SampleSet) -> tuple[np.ndarray, float]:
    """Lowest-energy sample; ties go to the earliest one sampled."""
    if len(s) == 0:
        raise ValueError("empty sample set")
    k = int(np.argmin(s.energies))
    return s.spins[k].copy(), float(s.energies[k])


@dataclass(frozen=True)
class ExactSpectrum:
    energies: np.ndarray  # all 2^N energies, ascending
    order: np.ndarray  # lexicographic assignment index of each energy
    n: int

    def state(self, rank: int) -> np.ndarray:
        k = int(self.order[rank])
        return (2 * ((k >> np.arange(self.n - 1, -1, -1)) & 1) - 1).astype(np.int8)

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.state(0)

    def ground_states(self, atol: float = 0.0) -> np.ndarray:
        k = int(np.searchsorted(self.energies, self.energies[0] + atol, side="right"))
        return np.array([self.state(r) for r in range(k)])


def solve_exact(p: IsingProblem) -> ExactSpectrum:
    """Enumerate all ``2^N`` energies (N <= 24); ties keep lexicographic order."""
    if p.n > MAX_EXHAUSTIVE:
        raise CapacityError(f"exact solver limited to {MAX_EXHAUSTIVE} spins, got {p.n}")
    e = _all_energies(p)
    order = np.argsort(e, kind="stable")
    return ExactSpectrum(e[order], order, p.n)


def _all_energies(p: IsingProblem, chunk: int = 1 << 16) -> np.ndarray:
    n = p.n
    out = np.empty(2**n)
    shifts = np.arange(n - 1, -1, -1)
    for start in range(0, 2**n, chunk):
        k = np.arange(start, min(2**n, start + chunk), dtype=np.int64)
        S = 2.0 * ((k[:, None] >> shifts[None, :]) & 1) - 1.0
        out[start:start + k.size] = ising_energy(p, S)
    return out


def apply_ice(p, m: IceModel, rng: np.random.Generator):
    """Fresh Gaussian perturbation of every programmed coefficient.

    For a logical :class:`IsingProblem` all pairs ``i < j`` are perturbed; for
    an :class:`EmbeddedIsing` every physical bond is.  The input is unchanged.
    """
    if not m.enabled:
        return p
    if isinstance(p, EmbeddedIsing):
        h = p.h + rng.normal(m.f_mean, m.f_std, size=p.h.size)
        keys = list(p.J)
        dg = rng.normal(m.g_mean, m.g_std, size=len(keys))
        J = {k: p.J[k] + d for k, d in zip(keys, dg)}
        return EmbeddedIsing(h, J, p.embedding, p.J_F, p.range_mode, p.offset, p.clamped, p.squeeze)
    f = p.f + rng.normal(m.f_mean, m.f_std, size=p.n)
    iu = np.triu_indices(p.n, k=1)
    g = p.g.copy()
    g[iu] += rng.normal(m.g_mean, m.g_std, size=iu[0].size)
    return IsingProblem(f, g, p.offset)


# -- simulated annealing kernel -------------------------------------------------


@numba.njit(cache=True)
def _sa_kernel(h, eu, ev, ew, nbr_ptr, nbr_idx, nbr_edge, betas, seeds, ice,
               chain_ptr, chain_idx, chain_of):
    n = h.size
    n_chains = chain_ptr.size - 1
    n_edges = ew.size
    n_anneals = seeds.size
    out = np.empty((n_anneals, n), dtype=np.int8)
    hp = np.empty(n)
    wp = np.empty(n_edges)
    s = np.empty(n, dtype=np.int8)
    for a in range(n_anneals):
        np.random.seed(seeds[a])
        if ice[0] > 0.0:
            for i in range(n):
                hp[i] = h[i] + ice[1] + ice[2] * np.random.standard_normal()
            for k in range(n_edges):
                wp[k] = ew[k] + ice[3] + ice[4] * np.random.standard_normal()
        else:
            hp[:] = h
            wp[:] = ew
        for i in range(n):
            s[i] = 1 if np.random.random() < 0.5 else -1
        for t in range(betas.size):
            beta = betas[t]
            for i in range(n):
                field = hp[i]
                for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
                    field += wp[nbr_edge[p]] * s[nbr_idx[p]]
                de = -2.0 * s[i] * field
                if de <= 0.0 or np.random.random() < math.exp(-beta * de):
                    s[i] = -s[i]
            # whole-chain flips leave intra-chain bonds intact
            for c in range(n_chains):
                de = 0.0
                for q in range(chain_ptr[c], chain_ptr[c + 1]):
                    i = chain_idx[q]
                    field = hp[i]
                    for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
                        if chain_of[nbr_idx[p]] != c:
                            field += wp[nbr_edge[p]] * s[nbr_idx[p]]
                    de -= 2.0 * s[i] * field
                if de <= 0.0 or np.random.random() < math.exp(-beta * de):
                    for q in range(chain_ptr[c], chain_ptr[c + 1]):
                        s[chain_idx[q]] = -s[chain_idx[q]]
        out[a, :] = s
    return out


def _csr(n: int, eu: np.ndarray, ev: np.ndarray):
    deg = np.zeros(n + 1, dtype=np.int64)
    np.add.at(deg, eu + 1, 1)
    np.add.at(deg, ev + 1, 1)
    ptr = np.cumsum(deg)
    idx = np.empty(ptr[-1], dtype=np.int64)
    edge = np.empty(ptr[-1], dtype=np.int64)
    fill = ptr[:-1].copy()
    for k, (u, v) in enumerate(zip(eu, ev)):
        idx[fill[u]], edge[fill[u]] = v, k
        fill[u] += 1
        idx[fill[v]], edge[fill[v]] = u, k
        fill[v] += 1
    return ptr, idx, edge


# Inverse-temperature ladder for embedded problems, in units of the hardware
# coefficient range (chain bonds at -1).
PHYSICAL_BETA_RANGE = (0.5, 30.0)


def default_beta_range(h: np.ndarray, eu: np.ndarray, ev: np.ndarray, ew: np.ndarray) -> tuple[float, float]:
    """Hot end flips the stiffest spin half the time; cold end rejects the
    softest excitation 99% of the time."""
    n = h.size
    absw = np.abs(ew)
    total = np.abs(h).copy()
    np.add.at(total, eu, absw)
    np.add.at(total, ev, absw)
    max_de = 2.0 * float(total.max()) if n else 1.0
    nz = np.concatenate([np.abs(h[h != 0]), absw[absw != 0]])
    min_de = 2.0 * float(nz.min()) if nz.size else 1.0
    max_de = max(max_de, 1e-12)
    min_de = max(min(min_de, max_de), 1e-12)
    return math.log(2.0) / max_de, math.log(100.0) / min_de


def _ladder(sched: AnnealSchedule, sweeps_per_us: float, beta_range: tuple[float, float]) -> np.ndarray:
    n_anneal = max(1, int(round(sweeps_per_us * sched.T_a)))
    n_pause = int(round(sweeps_per_us * sched.T_p))
    b0, b1 = beta_range
    ladder = np.geomspace(b0, b1, n_anneal) if n_anneal > 1 else np.array([b1])
    if n_pause == 0:
        return ladder
    k = min(n_anneal - 1, int(round(sched.s_p * (n_anneal - 1))))
    return np.concatenate([ladder[:k], np.full(n_pause, ladder[k]), ladder[k:]])


def sa_sample(
    h: np.ndarray,
    J: dict,
    sched: AnnealSchedule,
    ice: IceModel,
    seeds: Sequence[int],
    sweeps_per_us: float = 10.0,
    beta_range: tuple[float, float] | None = None,
    chains: Sequence[Sequence[int]] | None = None,
) -> np.ndarray:
    """Raw SA samples ``(len(seeds), n)`` for ``E = h.s + sum J_ab s_a s_b``.

    ``chains`` (lists of node indices) adds a whole-chain flip move after
    every single-spin sweep.
    """
    h = np.asarray(h, dtype=float)
    keys = sorted(J)
    eu = np.array([a for a, _ in keys], dtype=np.int64)
    ev = np.array([b for _, b in keys], dtype=np.int64)
    ew = np.array([J[k] for k in keys], dtype=float)
    ptr, idx, edge = _csr(h.size, eu, ev)
    if beta_range is None:
        beta_range = default_beta_range(h, eu, ev, ew)
    betas = _ladder(sched, sweeps_per_us, beta_range)
    ice_arr = np.array([1.0 if ice.enabled else 0.0, ice.f_mean, ice.f_std, ice.g_mean, ice.g_std])
    seeds = np.asarray(seeds, dtype=np.int64)
    chains = [list(ch) for ch in chains or []]
    chain_ptr = np.cumsum([0] + [len(ch) for ch in chains]).astype(np.int64)
    chain_idx = np.array([v for ch in chains for v in ch], dtype=np.int64)
    chain_of = np.full(h.size, -1, dtype=np.int64)
    for c, ch in enumerate(chains):
        chain_of[ch] = c
    return _sa_kernel(h, eu, ev, ew, ptr, idx, edge, betas, seeds, ice_arr, chain_ptr, chain_idx, chain_of)


def _dense_to_dict(g: np.ndarray) -> dict:
    iu, ju = np.triu_indices(g.shape[0], k=1)
    return {(int(i), int(j)): float(g[i, j]) for i, j in zip(iu, ju)}


def anneal_run(
    p: IsingProblem,
    embedding: Embedding | EmbeddedIsing | None = None,
    sched: AnnealSchedule = AnnealSchedule(),
    ice: IceModel = IceModel(),
    rng: np.random.Generator | int | None = None,
    backend: str = "sa",
    J_F: float = 1.0,
    range_mode: str = "improved",
    sweeps_per_us: float = 10.0,
    beta_range: tuple[float, float] | None = None,
) -> SampleSet:
    """One anneal run of ``sched.n_anneals`` anneals on ``p``.

    With an :class:`Embedding`, ``p`` is first scaled into the hardware
    range (:func:`range_scale`) and then embedded with ``J_F`` and
    ``range_mode``; an already built :class:`EmbeddedIsing` is used as is.
    ICE acts on the coefficients actually sampled (physical when embedded,
    range-scaled logical for the exact backend).  Returned energies are
    those of ``p`` itself.
    """
    rng = np.random.default_rng(rng)
    n_a = sched.n_anneals
    seeds = rng.integers(0, 2**31 - 1, size=n_a, dtype=np.int64)
    prov = {"backend": backend, "schedule": asdict(sched), "ice": asdict(ice)}

    if backend == "exact":
        spins = np.empty((n_a, p.n), dtype=np.int8)
        base = None if ice.enabled else solve_exact(p).ground_state
        # noise acts at hardware scale, so perturb the range-scaled problem
        programmed = p.scaled(range_scale(p, range_mode))
        for a in range(n_a):
            if base is not None:
                spins[a] = base
            else:
                noisy = apply_ice(programmed, ice, np.random.default_rng(int(seeds[a])))
                spins[a] = solve_exact(noisy).ground_state
        return SampleSet.from_samples(spins, ising_energy(p, spins), prov)

    if backend != "sa":
        raise ValueError(f"unknown backend {backend!r}")

    if isinstance(embedding, Embedding):
        embedding = embed_ising(p.scaled(range_scale(p, range_mode)), embedding, J_F, range_mode)
    if isinstance(embedding, EmbeddedIsing):
        bounds = np.cumsum([0] + [len(ch) for ch in embedding.embedding.chains])
        chains = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        raw = sa_sample(embedding.h, dict(embedding.J), sched, ice, seeds, sweeps_per_us,
                        beta_range or PHYSICAL_BETA_RANGE, chains)
        spins = unembed_batch(raw, embedding.embedding, rng)
        prov.update(J_F=embedding.J_F, range_mode=embedding.range_mode, n_physical=embedding.n_physical)
    else:
        spins = sa_sample(p.f, _dense_to_dict(p.g), sched, ice, seeds, sweeps_per_us, beta_range)
    prov["sweeps"] = int(_ladder(sched, sweeps_per_us, (1.0, 2.0)).size)
    return SampleSet.from_samples(spins, ising_energy(p, spins), prov)
