"""Chimera hardware graph, triangular clique embedding, embedded objective,
and majority-vote unembedding.

Chimera cells are ``K_{4,4}``: side ``u=0`` qubits couple vertically to the
same qubit in the cell below, side ``u=1`` qubits couple horizontally to the
cell on the right.

The clique embedding uses ``G = ceil(N/4)`` cells along the diagonal of a
``G x G`` block.  Logical spin ``4a + k`` runs down column ``a`` on side 0
(cells ``(0, a) .. (a, a)``), crosses to side 1 inside the diagonal cell and
continues right along row ``a`` (cells ``(a, a) .. (a, G-1)``): a path of
``G + 1`` qubits.  Cell ``(a, b)`` with ``a < b`` then holds a vertical copy of
group ``b`` and a horizontal copy of group ``a``, which couples every member
of the two groups exactly once.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import EmbeddingError, RangeWarning, SampleError
from .reduction import IsingProblem

__all__ = [
    "ChimeraGraph",
    "Embedding",
    "EmbeddedIsing",
    "chain_length",
    "physical_qubits",
    "clique_embed",
    "embed_ising",
    "embedded_energy",
    "unembed",
    "unembed_batch",
    "parallelization_factor",
    "qubit_table",
    "RANGE_LIMITS",
    "range_scale",
]


@dataclass(frozen=True)
class ChimeraGraph:
    """``rows x cols`` grid of ``K_{shore,shore}`` unit cells, minus ``defects``."""

    rows: int = 16
    cols: int = 16
    shore: int = 4
    defects: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "defects", frozenset(int(d) for d in self.defects))

    @classmethod
    def with_node_count(cls, n_nodes: int, seed: int = 0) -> "ChimeraGraph":
        """A 16x16 chip with ``2048 - n_nodes`` randomly placed defective qubits."""
        full = cls()
        missing = full.total_nodes - n_nodes
        if missing < 0:
            side = math.ceil(math.sqrt(n_nodes / 8))
            return cls(rows=side, cols=side)
        rng = np.random.default_rng(seed)
        dead = rng.choice(full.total_nodes, size=missing, replace=False)
        return cls(defects=frozenset(int(d) for d in dead))

    @property
    def total_nodes(self) -> int:
        return self.rows * self.cols * 2 * self.shore

    @property
    def num_nodes(self) -> int:
        return self.total_nodes - len(self.defects)

    def node(self, r: int, c: int, u: int, k: int) -> int:
        return ((r * self.cols + c) * 2 + u) * self.shore + k

    def coords(self, node: int) -> tuple[int, int, int, int]:
        rest, k = divmod(node, self.shore)
        rest, u = divmod(rest, 2)
        r, c = divmod(rest, self.cols)
        return r, c, u, k

    def has_node(self, node: int) -> bool:
        return 0 <= node < self.total_nodes and node not in self.defects

    def has_edge(self, a: int, b: int) -> bool:
        if a == b or not (self.has_node(a) and self.has_node(b)):
            return False
        ra, ca, ua, ka = self.coords(a)
        rb, cb, ub, kb = self.coords(b)
        if (ra, ca) == (rb, cb):
            return ua != ub
        if ua != ub or ka != kb:
            return False
        if ua == 0:
            return ca == cb and abs(ra - rb) == 1
        return ra == rb and abs(ca - cb) == 1

    def nodes(self) -> list[int]:
        return [v for v in range(self.total_nodes) if v not in self.defects]

    def edges(self) -> Iterable[tuple[int, int]]:
        for r in range(self.rows):
            for c in range(self.cols):
                for k in range(self.shore):
                    for k2 in range(self.shore):
                        a, b = self.node(r, c, 0, k), self.node(r, c, 1, k2)
                        if self.has_edge(a, b):
                            yield a, b
                    if r + 1 < self.rows:
                        a, b = self.node(r, c, 0, k), self.node(r + 1, c, 0, k)
                        if self.has_edge(a, b):
                            yield a, b
                    if c + 1 < self.cols:
                        a, b = self.node(r, c, 1, k), self.node(r, c + 1, 1, k)
                        if self.has_edge(a, b):
                            yield a, b


def chain_length(n: int) -> int:
    return math.ceil(n / 4) + 1


def physical_qubits(n: int) -> int:
    return n * chain_length(n)


def parallelization_factor(n_logical: int, n_total_nodes: int) -> int:
    """How many independent copies fit the chip; 0 means it does not fit at all."""
    if n_logical < 1:
        raise ValueError("n_logical must be >= 1")
    return n_total_nodes // physical_qubits(n_logical)


@dataclass(frozen=True)
class Embedding:
    """Logical spin ``i`` -> ordered chain of physical nodes, plus one active
    physical coupler per logical pair (``couplers[(i, j)] = (u, v)``, ``i < j``,
    ``u`` in chain ``i``)."""

    chains: tuple[tuple[int, ...], ...]
    couplers: Mapping[tuple[int, int], tuple[int, int]]
    origin: tuple[int, int] = (0, 0)

    @property
    def n_logical(self) -> int:
        return len(self.chains)

    @property
    def nodes(self) -> tuple[int, ...]:
        """All physical nodes, chain-major; defines the compact physical order."""
        return tuple(v for ch in self.chains for v in ch)

    @property
    def num_physical(self) -> int:
        return sum(len(ch) for ch in self.chains)

    def chain_bonds(self) -> list[tuple[int, int]]:
        return [(ch[k], ch[k + 1]) for ch in self.chains for k in range(len(ch) - 1)]


def _clique_chains(n: int, graph: ChimeraGraph, r0: int, c0: int):
    G = math.ceil(n / 4)
    chains = []
    for i in range(n):
        a, k = divmod(i, 4)
        vertical = [graph.node(r0 + r, c0 + a, 0, k) for r in range(a + 1)]
        horizontal = [graph.node(r0 + a, c0 + c, 1, k) for c in range(a, G)]
        chains.append(tuple(vertical + horizontal))
    couplers = {}
    for i in range(n):
        a, ki = divmod(i, 4)
        for j in range(i + 1, n):
            b, kj = divmod(j, 4)
            if a == b:
                u, v = graph.node(r0 + a, c0 + a, 0, ki), graph.node(r0 + a, c0 + a, 1, kj)
            else:  # a < b: cell (a, b) holds group b on side 0, group a on side 1
                u, v = graph.node(r0 + a, c0 + b, 1, ki), graph.node(r0 + a, c0 + b, 0, kj)
            couplers[(i, j)] = (u, v)
    return tuple(chains), couplers


def clique_embed(n: int, graph: ChimeraGraph | None = None, origin: tuple[int, int] | None = None) -> Embedding:
    """Embed ``K_n`` with chains of ``ceil(n/4) + 1`` qubits.

    Without ``origin`` the first defect-free placement in row-major order is
    used.  Defects are never routed around.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    graph = graph or ChimeraGraph()
    G = math.ceil(n / 4)
    need = physical_qubits(n)
    if need > graph.num_nodes or G > graph.rows or G > graph.cols:
        raise EmbeddingError(
            f"K_{n} needs {need} physical qubits in a {G}x{G} cell block; "
            f"chip has {graph.num_nodes} qubits in {graph.rows}x{graph.cols} cells"
        )
    if origin is not None:
        candidates = [tuple(origin)]
    else:
        candidates = [(r, c) for r in range(graph.rows - G + 1) for c in range(graph.cols - G + 1)]
    for r0, c0 in candidates:
        if r0 < 0 or c0 < 0 or r0 + G > graph.rows or c0 + G > graph.cols:
            continue
        chains, couplers = _clique_chains(n, graph, r0, c0)
        if all(graph.has_node(v) for ch in chains for v in ch):
            return Embedding(chains, couplers, (r0, c0))
    raise EmbeddingError(
        f"no defect-free {G}x{G} cell block for K_{n} ({need} qubits needed, "
        f"{graph.num_nodes} available)"
    )


# Hardware coefficient ranges: (h_min, h_max, J_min, J_max).
RANGE_LIMITS = {
    "standard": (-2.0, 2.0, -1.0, 1.0),
    "improved": (-2.0, 2.0, -2.0, 1.0),
}


def range_scale(p: IsingProblem, mode: str = "standard") -> float:
    """Largest factor that brings ``p`` inside the hardware range of ``mode``
    (linear terms against the h range, couplers against the J range)."""
    h_lo, h_hi, j_lo, j_hi = RANGE_LIMITS[mode]
    ratios = [np.max(np.abs(p.f), initial=0.0) / h_hi]
    g = p.g[np.triu_indices(p.n, k=1)]
    ratios.append(np.max(g, initial=0.0) / j_hi)
    ratios.append(np.min(g, initial=0.0) / j_lo)
    worst = float(max(ratios))
    return 1.0 / worst if worst > 0 else 1.0


@dataclass(frozen=True)
class EmbeddedIsing:
    """Physical problem in the compact order of ``embedding.nodes``.

    ``h[k]`` is the field on ``embedding.nodes[k]``; ``J`` maps compact index
    pairs ``(a, b)``, ``a < b``, to couplings (chain and problem bonds).
    """

    h: np.ndarray = field(repr=False)
    J: Mapping[tuple[int, int], float] = field(repr=False)
    embedding: Embedding = field(repr=False)
    J_F: float = 1.0
    range_mode: str = "standard"
    offset: float = 0.0
    clamped: int = 0
    squeeze: float = 1.0

    @property
    def n_physical(self) -> int:
        return self.h.size

    def as_ising(self) -> IsingProblem:
        n = self.h.size
        g = np.zeros((n, n))
        for (a, b), v in self.J.items():
            g[a, b] += v
        return IsingProblem(self.h, g, self.offset)

    def to_dict(self) -> dict:
        nodes = self.embedding.nodes
        return {
            "nodes": list(nodes),
            "h": {str(nodes[k]): float(v) for k, v in enumerate(self.h)},
            "J": {f"{nodes[a]},{nodes[b]}": float(v) for (a, b), v in self.J.items()},
            "chains": {str(i): list(ch) for i, ch in enumerate(self.embedding.chains)},
            "J_F": self.J_F,
            "range_mode": self.range_mode,
            "offset": self.offset,
        }

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def embed_ising(p: IsingProblem, e: Embedding, J_F: float = 1.0, mode: str = "standard") -> EmbeddedIsing:
    """Build the embedded objective.

    Chain bonds are ``-1``; each chain member receives ``f_i / (|J_F| L)``
    with ``L`` the chain length; the active coupler of each pair receives
    ``g_ij / |J_F|``.  Coefficients outside the hardware range of ``mode`` are
    clamped and a :class:`RangeWarning` reports the squeeze factor needed to
    avoid clamping.
    """
    if p.n != e.n_logical:
        raise ValueError(f"problem has {p.n} spins, embedding has {e.n_logical} chains")
    if not abs(J_F) > 0:
        raise ValueError("|J_F| must be positive")
    if mode not in RANGE_LIMITS:
        raise ValueError(f"unknown range mode {mode!r}")
    jf = abs(J_F)
    L = chain_length(p.n)
    index = {v: k for k, v in enumerate(e.nodes)}
    h = np.zeros(len(index))
    for i, ch in enumerate(e.chains):
        for v in ch:
            h[index[v]] = p.f[i] / (jf * L)
    J: dict[tuple[int, int], float] = {}

    def put(u, v, val):
        a, b = index[u], index[v]
        key = (a, b) if a < b else (b, a)
        J[key] = J.get(key, 0.0) + val

    for u, v in e.chain_bonds():
        put(u, v, -1.0)
    # zero couplers are kept: the physical bond exists and is still programmed
    for (i, j), (u, v) in e.couplers.items():
        put(u, v, p.g[i, j] / jf)

    h_lo, h_hi, j_lo, j_hi = RANGE_LIMITS[mode]
    ratios = [1.0]
    ratios += [x / h_hi if x > 0 else x / h_lo for x in h if x != 0]
    ratios += [x / j_hi if x > 0 else x / j_lo for x in J.values() if x != 0]
    squeeze = float(max(ratios))
    clamped = 0
    if squeeze > 1.0:
        clamped = int(np.sum((h < h_lo) | (h > h_hi)))
        clamped += sum(1 for x in J.values() if x < j_lo or x > j_hi)
        warnings.warn(
            f"{clamped} embedded coefficients outside the {mode} range were clamped; "
            f"scaling by 1/{squeeze:.4g} would avoid this",
            RangeWarning,
            stacklevel=2,
        )
        h = np.clip(h, h_lo, h_hi)
        J = {k: float(np.clip(x, j_lo, j_hi)) for k, x in J.items()}
    return EmbeddedIsing(h, J, e, float(J_F), mode, p.offset / jf, clamped, squeeze)


def _compact(sample, e: Embedding) -> np.ndarray:
    nodes = e.nodes
    if isinstance(sample, Mapping):
        missing = [v for v in nodes if v not in sample]
        if missing:
            raise SampleError(f"sample lacks values for chain nodes {missing[:5]}")
        return np.array([sample[v] for v in nodes], dtype=np.int8)
    arr = np.asarray(sample)
    if arr.shape[-1] != len(nodes):
        raise SampleError(f"sample has {arr.shape[-1]} values, embedding has {len(nodes)} nodes")
    return arr.astype(np.int8)


def embedded_energy(emb: EmbeddedIsing, sample) -> float:
    s = _compact(sample, emb.embedding).astype(float)
    e = float(emb.h @ s) + emb.offset
    for (a, b), v in emb.J.items():
        e += v * s[a] * s[b]
    return e


def unembed_batch(samples: np.ndarray, e: Embedding, rng: np.random.Generator) -> np.ndarray:
    """Majority vote per chain for each row of ``samples`` (compact order).

    Exact ties are broken by a fair coin drawn from ``rng``.
    """
    S = np.atleast_2d(np.asarray(samples))
    bounds = np.cumsum([0] + [len(ch) for ch in e.chains])
    votes = np.add.reduceat(S.astype(np.int64), bounds[:-1], axis=1)
    out = np.sign(votes).astype(np.int8)
    ties = out == 0
    if ties.any():
        out[ties] = rng.choice(np.array([-1, 1], dtype=np.int8), size=int(ties.sum()))
    return out


def unembed(sample, e: Embedding, rng: np.random.Generator) -> np.ndarray:
    """Logical spins from one physical sample (mapping node -> spin, or compact array)."""
    return unembed_batch(_compact(sample, e)[None, :], e, rng)[0]


def qubit_table(sizes=(10, 20, 40, 60), modulations=(("BPSK", 1), ("QPSK", 2), ("16-QAM", 4), ("64-QAM", 6)),
                chip_nodes: int = 2048) -> list[dict]:
    """Logical/physical qubit counts per configuration.

    ``feasible`` compares the qubit count with the chip size only;
    ``fits_clique_block`` also requires the triangular layout to fit a 16x16 grid.
    """
    rows = []
    for n_users in sizes:
        for name, bits in modulations:
            n = n_users * bits
            phys = physical_qubits(n)
            rows.append({
                "users": n_users,
                "modulation": name,
                "logical": n,
                "physical": phys,
                "feasible": phys <= chip_nodes,
                # the triangular layout also needs a ceil(N/4)-cell square block
                "fits_clique_block": math.ceil(n / 4) <= 16 and phys <= chip_nodes,
            })
    return rows
