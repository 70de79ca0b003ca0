"""Experiment driver: instance generation, the decode pipeline and grid sweeps."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .embedding import clique_embed, parallelization_factor, physical_qubits, ChimeraGraph
from .errors import CapacityError, ConfigError
from .metrics import ber_for_fer, expected_ber, fer, rank_solutions, summarize, tts, ttb
from .mimo import ChannelKind, ChannelModel, get_constellation, load_trace, make_channel_use
from .reduction import MAX_EXHAUSTIVE, ml_to_ising
from .solver import AnnealSchedule, IceModel, anneal_run, solve_exact

__all__ = ["ExperimentConfig", "GridPoint", "run_instance", "sweep", "replay", "summarize_records", "instance_seeds", "load_config", "JF_FULL_GRID"]

JF_FULL_GRID = tuple(float(x) for x in np.arange(1.0, 10.01, 0.5))


def parse_grid(text: str) -> tuple[float, ...]:
    """``"a:b:step"`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"bad grid {text!r}")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return tuple(round(a + k * step, 10) for k in range(n))
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


def _tuple(v) -> tuple:
    if isinstance(v, str):
        return parse_grid(v)
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return (float(v),)


@dataclass(frozen=True)
class ExperimentConfig:
    modulation: str = "qpsk"
    n_t: int = 4
    n_r: int | None = None
    channel: str = "rayleigh"
    trace: str | None = None
    snr_db: tuple[float, ...] = (20.0,)
    instances: int = 10
    seed: int = 0
    T_a: tuple[float, ...] = (1.0,)
    T_p: tuple[float, ...] = (1.0,)
    s_p: tuple[float, ...] = (0.35,)
    J_F: tuple[float, ...] = (1.0,)
    range_mode: str = "standard"
    backend: str = "sa"
    n_anneals: int = 100
    ice: bool = True
    sweeps_per_us: float = 10.0
    target_ber: float = 1e-6
    target_fer: float | None = None
    frame_bytes: int = 1500
    use_pf: bool = True
    chip_nodes: int = 2048

    def __post_init__(self):
        for name in ("snr_db", "T_a", "T_p", "s_p", "J_F"):
            v = _tuple(getattr(self, name))
            if not v:
                raise ConfigError(f"{name} grid is empty")
            object.__setattr__(self, name, v)
        try:
            get_constellation(self.modulation)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.n_t < 1 or self.instances < 1 or self.n_anneals < 1:
            raise ConfigError("n_t, instances and n_anneals must be >= 1")
        if self.n_r is not None and self.n_r < self.n_t:
            raise ConfigError("n_r must be >= n_t")
        if any(not 1.0 <= j <= 10.0 for j in self.J_F):
            raise ConfigError(f"J_F grid {self.J_F} outside [1, 10]")
        if self.backend not in ("sa", "exact"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.range_mode not in ("standard", "improved"):
            raise ConfigError(f"unknown range mode {self.range_mode!r}")
        if self.channel not in {k.value for k in ChannelKind}:
            raise ConfigError(f"unknown channel model {self.channel!r}")
        if self.channel == "trace" and not self.trace:
            raise ConfigError("trace channel needs a trace file")
        if not 0 < self.target_ber < 1:
            raise ConfigError("target_ber must be in (0, 1)")
        for ta, tp, sp in itertools.product(self.T_a, self.T_p, self.s_p):
            try:
                AnnealSchedule(ta, tp, sp, self.n_anneals)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @property
    def frame_bits(self) -> int:
        return 8 * self.frame_bytes

    def grid(self) -> list["GridPoint"]:
        return [GridPoint(*g) for g in itertools.product(self.J_F, self.T_a, self.T_p, self.s_p)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def load_config(path) -> dict:
    """Read a TOML or JSON config file into a plain dict."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix == ".toml":
            import tomli

            return tomli.loads(text)
        return json.loads(text)
    except Exception as exc:  # parse errors of either format
        raise ConfigError(f"cannot parse config {path}: {exc}") from None


@dataclass(frozen=True)
class GridPoint:
    J_F: float
    T_a: float
    T_p: float
    s_p: float

    def schedule(self, n_anneals: int) -> AnnealSchedule:
        return AnnealSchedule(self.T_a, self.T_p, self.s_p, n_anneals)


def instance_seeds(cfg: ExperimentConfig) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(cfg.instances, dtype=np.uint32)]


def _anneal_seed(instance_seed: int, snr_db: float, point_index: int) -> int:
    snr_key = 0 if math.isinf(snr_db) else int(round(snr_db * 1000)) + 10**6
    return int(np.random.SeedSequence([instance_seed, snr_key, point_index]).generate_state(1)[0])


def _model(cfg: ExperimentConfig) -> ChannelModel:
    kind = ChannelKind(cfg.channel)
    return ChannelModel(kind, load_trace(cfg.trace) if kind is ChannelKind.TRACE else None)


def _na_points(n_a: int) -> list[int]:
    pts = {int(round(x)) for x in np.geomspace(1, n_a, num=min(n_a, 12))}
    return sorted(pts | {1, n_a})


def _num(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def snr_field(snr_db: float):
    """JSON-safe SNR: the string ``"inf"`` stands for a noiseless link."""
    return "inf" if math.isinf(snr_db) else float(snr_db)


def run_instance(
    cfg: ExperimentConfig,
    instance_seed: int,
    snr_db: float | None = None,
    point: GridPoint | None = None,
    anneal_seed: int | None = None,
    instance_id: int = 0,
    model: ChannelModel | None = None,
) -> dict:
    """Decode one channel use end to end and score it.

    The record carries every parameter needed to regenerate it.
    """
    snr_db = cfg.snr_db[0] if snr_db is None else float(snr_db)
    point = point or cfg.grid()[0]
    anneal_seed = _anneal_seed(instance_seed, snr_db, 0) if anneal_seed is None else anneal_seed
    c = get_constellation(cfg.modulation)
    n_logical = cfg.n_t * c.Q
    rec = {
        "instance_id": instance_id,
        "instance_seed": int(instance_seed),
        "anneal_seed": int(anneal_seed),
        "modulation": c.kind.value,
        "n_t": cfg.n_t,
        "n_r": cfg.n_r or cfg.n_t,
        "channel": cfg.channel,
        "trace": cfg.trace,
        "snr_db": snr_field(snr_db),
        "backend": cfg.backend,
        "J_F": point.J_F,
        "T_a": point.T_a,
        "T_p": point.T_p,
        "s_p": point.s_p,
        "n_anneals": cfg.n_anneals,
        "range_mode": cfg.range_mode,
        "ice": cfg.ice,
        "sweeps_per_us": cfg.sweeps_per_us,
        "target_ber": cfg.target_ber,
        "target_fer": cfg.target_fer,
        "frame_bytes": cfg.frame_bytes,
        "use_pf": cfg.use_pf,
        "chip_nodes": cfg.chip_nodes,
        "n_logical": n_logical,
        "n_physical": physical_qubits(n_logical),
    }
    graph = ChimeraGraph.with_node_count(cfg.chip_nodes)
    try:
        emb = clique_embed(n_logical, graph)
    except CapacityError as exc:
        rec.update(status="non-embeddable", error=str(exc))
        return rec

    use = make_channel_use(model or _model(cfg), c, cfg.n_t, cfg.n_r, snr_db, instance_seed)
    problem = ml_to_ising(use.H, use.y, c)
    sched = point.schedule(cfg.n_anneals)
    ice = IceModel() if cfg.ice else IceModel.off()
    samples = anneal_run(
        problem,
        emb if cfg.backend == "sa" else None,
        sched,
        ice,
        rng=anneal_seed,
        backend=cfg.backend,
        J_F=point.J_F,
        range_mode=cfg.range_mode,
        sweeps_per_us=cfg.sweeps_per_us,
    )
    ranked = rank_solutions(samples, use.tx_bits, c)

    if n_logical <= MAX_EXHAUSTIVE:
        e0 = solve_exact(problem).ground_energy
        ground_known = True
    else:
        e0 = float(ranked.energies[0])
        ground_known = False
    tol = 1e-9 * max(1.0, abs(e0))
    p0 = float(ranked.probs[ranked.energies <= e0 + tol].sum())
    p_f = parallelization_factor(n_logical, graph.num_nodes) if cfg.use_pf else 1
    pts = _na_points(cfg.n_anneals)
    curve = expected_ber(ranked, pts)
    target_ber = cfg.target_ber
    if cfg.target_fer is not None:
        target_ber = ber_for_fer(cfg.target_fer, cfg.frame_bits)
    t = ttb(ranked, target_ber, point.T_a, point.T_p, max(p_f, 1))
    ber_run = float(curve[-1])
    rec.update(
        status="ok",
        p_f=p_f,
        L=ranked.L,
        p0=p0,
        ground_known=ground_known,
        rank1_errors=int(ranked.errors[0]),
        ber_curve=[[int(n), float(b)] for n, b in zip(pts, curve)],
        ber=ber_run,
        tts=_num(tts(p0, point.T_a + point.T_p)),
        ttb={"target": target_ber, "value": _num(t.time_us), "n_anneals": t.n_anneals,
             "never": not t.reachable, "asymptotic_ber": t.asymptotic_ber},
        fer={"frame_bits": cfg.frame_bits, "value": fer(ber_run, cfg.frame_bits)},
    )
    return rec


def replay(rec: dict) -> dict:
    """Regenerate a record from the parameters it carries."""
    keys = ("modulation", "n_t", "n_r", "channel", "trace", "backend", "n_anneals", "range_mode", "ice",
            "sweeps_per_us", "target_ber", "target_fer", "frame_bytes", "use_pf", "chip_nodes")
    snr = math.inf if rec["snr_db"] == "inf" else float(rec["snr_db"])
    point = GridPoint(rec["J_F"], rec["T_a"], rec["T_p"], rec["s_p"])
    cfg = ExperimentConfig(**{k: rec[k] for k in keys}, snr_db=(snr,), J_F=(point.J_F,), T_a=(point.T_a,),
                           T_p=(point.T_p,), s_p=(point.s_p,))
    out = run_instance(cfg, rec["instance_seed"], snr, point, rec["anneal_seed"], rec["instance_id"])
    if "point_index" in rec:
        out["point_index"] = rec["point_index"]
    return out


def _ttb_value(rec: dict) -> float:
    v = rec.get("ttb", {}).get("value")
    return math.inf if v is None else float(v)


def _stats(values) -> dict:
    s = summarize(values)
    return {k: (_num(v) if k != "n" else v) for k, v in s.items()}


def summarize_records(records: list[dict], cfg: ExperimentConfig) -> list[dict]:
    """Fix and Opt summary rows per SNR.

    Fix: the grid point with the lowest median TTB over the instances.
    Opt: every instance uses its own best grid point.
    """
    rows = []
    for snr in cfg.snr_db:
        recs = [r for r in records if r.get("status") == "ok" and r["snr_db"] == snr_field(snr)]
        if not recs:
            continue
        n_points = len(cfg.grid())
        by_point: dict[int, dict[int, float]] = {}
        for r in recs:
            by_point.setdefault(r["point_index"], {})[r["instance_id"]] = _ttb_value(r)
        ids = sorted({r["instance_id"] for r in recs})
        fix_idx = min(range(n_points), key=lambda k: (float(np.median([by_point.get(k, {}).get(i, math.inf) for i in ids])), k))
        fix_vals = [by_point.get(fix_idx, {}).get(i, math.inf) for i in ids]
        opt_vals = [min(by_point.get(k, {}).get(i, math.inf) for k in range(n_points)) for i in ids]
        fix_point = asdict(cfg.grid()[fix_idx])
        base = {"kind": "summary", "modulation": cfg.modulation, "n_t": cfg.n_t, "snr_db": snr_field(snr),
                "target_ber": cfg.target_ber}
        rows.append({**base, "strategy": "Fix", "point": fix_point, "ttb": _stats(fix_vals),
                     "per_instance": [_num(v) for v in fix_vals]})
        rows.append({**base, "strategy": "Opt", "ttb": _stats(opt_vals),
                     "per_instance": [_num(v) for v in opt_vals]})
    return rows


def sweep(cfg: ExperimentConfig) -> Iterator[dict]:
    """All (SNR, instance, grid point) records in key order, then the summaries."""
    seeds = instance_seeds(cfg)
    grid = cfg.grid()
    model = _model(cfg)
    records = []
    for snr in cfg.snr_db:
        for i, seed in enumerate(seeds):
            for k, point in enumerate(grid):
                rec = run_instance(cfg, seed, snr, point, _anneal_seed(seed, snr, k), i, model)
                rec["point_index"] = k
                records.append(rec)
                yield rec
    yield from summarize_records(records, cfg)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
