"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from contextlib import contextmanager

import numpy as np

from .baselines import MAX_BRUTE_FORCE, brute_force_ml, sphere_decode, zero_forcing
from .embedding import ChimeraGraph, clique_embed, embed_ising, parallelization_factor, range_scale
from .errors import CapacityError, ConfigError, DecodeError, TraceError
from .harness import (
    ExperimentConfig,
    _anneal_seed,
    _model,
    instance_seeds,
    load_config,
    parse_grid,
    run_instance,
    snr_field,
    sweep,
)
from .mimo import ChannelKind, ChannelModel, gen_channel, get_constellation, load_trace, make_channel_use, save_trace
from .reduction import ml_to_ising
from .solver import AnnealSchedule, IceModel, anneal_run

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY = 0, 2, 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--modulation", choices=["bpsk", "qpsk", "qam16"])
    p.add_argument("--users", type=int, help="number of users (= receive antennas unless --rx)")
    p.add_argument("--rx", type=int, help="receive antennas")
    p.add_argument("--snr-db", help="SNR in dB, comma list; 'inf' for noiseless")
    p.add_argument("--instances", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--channel", choices=[k.value for k in ChannelKind])
    p.add_argument("--trace", help="channel trace CSV (implies --channel trace)")
    p.add_argument("--jf-grid", help="J_F grid a:b:step or comma list")
    p.add_argument("--ta", help="anneal time(s) in microseconds")
    p.add_argument("--tp", help="pause time(s) in microseconds")
    p.add_argument("--sp", help="pause position(s)")
    p.add_argument("--backend", choices=["sa", "exact"])
    p.add_argument("--anneals", type=int, help="anneals per run")
    p.add_argument("--improved-range", action="store_true", default=None, help="allow J down to -2")
    p.add_argument("--standard-range", action="store_true", default=None)
    p.add_argument("--no-ice", action="store_true", default=None)
    p.add_argument("--sweeps-per-us", type=float)
    p.add_argument("--target-ber", type=float)
    p.add_argument("--target-fer", type=float)
    p.add_argument("--frame-bytes", type=int)
    p.add_argument("--no-pf", action="store_true", default=None, help="do not divide time by parallel copies")
    p.add_argument("--chip-nodes", type=int)
    p.add_argument("--out", help="write JSON lines here instead of stdout")
    p.add_argument("--csv", help="also write flat CSV rows here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimo-anneal", description="Annealing-based MIMO detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "reduce": "emit the Ising problem of each instance",
        "embed": "emit the embedded physical problem of each instance",
        "solve": "emit the sample set of one anneal run per instance",
        "decode": "full decode pipeline with metrics, first grid point only",
        "sweep": "full grid sweep with Fix/Opt summaries",
        "baseline": "classical detectors (ML, zero-forcing, sphere decoder)",
        "trace": "validate a channel trace, or write a synthetic one",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "trace":
            p.add_argument("--uses", type=int, default=10, help="channel uses in a synthetic trace")
    return parser


def config_from_args(args) -> ExperimentConfig:
    d = load_config(args.config) if args.config else {}
    flat = {
        "modulation": args.modulation,
        "n_t": args.users,
        "n_r": args.rx,
        "snr_db": args.snr_db,
        "instances": args.instances,
        "seed": args.seed,
        "channel": args.channel,
        "trace": args.trace,
        "J_F": args.jf_grid,
        "T_a": args.ta,
        "T_p": args.tp,
        "s_p": args.sp,
        "backend": args.backend,
        "n_anneals": args.anneals,
        "sweeps_per_us": args.sweeps_per_us,
        "target_ber": args.target_ber,
        "target_fer": args.target_fer,
        "frame_bytes": args.frame_bytes,
        "chip_nodes": args.chip_nodes,
    }
    d.update({k: v for k, v in flat.items() if v is not None})
    if args.trace and args.channel is None:
        d["channel"] = "trace"
    if args.improved_range:
        d["range_mode"] = "improved"
    if args.standard_range:
        d["range_mode"] = "standard"
    if args.no_ice:
        d["ice"] = False
    if args.no_pf:
        d["use_pf"] = False
    for key in ("snr_db", "J_F", "T_a", "T_p", "s_p"):
        if isinstance(d.get(key), str):
            d[key] = parse_grid(d[key])
    try:
        return ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@contextmanager
def _sink(path):
    if path:
        with open(path, "w") as fh:
            yield fh
    else:
        yield sys.stdout


def _instances(cfg: ExperimentConfig):
    c = get_constellation(cfg.modulation)
    model = _model(cfg)
    for snr in cfg.snr_db:
        for i, seed in enumerate(instance_seeds(cfg)):
            yield i, seed, snr, make_channel_use(model, c, cfg.n_t, cfg.n_r, snr, seed)


def _graph(cfg):
    return ChimeraGraph.with_node_count(cfg.chip_nodes)


def cmd_reduce(cfg):
    c = get_constellation(cfg.modulation)
    for i, seed, snr, use in _instances(cfg):
        p = ml_to_ising(use.H, use.y, c)
        yield {"instance_id": i, "instance_seed": seed, "snr_db": snr_field(snr), "modulation": c.kind.value,
               "n_t": cfg.n_t, "tx_bits": "".join(map(str, use.tx_bits)), "ising": p.to_dict()}


def cmd_embed(cfg):
    c = get_constellation(cfg.modulation)
    graph = _graph(cfg)
    point = cfg.grid()[0]
    for i, seed, snr, use in _instances(cfg):
        p = ml_to_ising(use.H, use.y, c)
        emb = clique_embed(p.n, graph)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            e = embed_ising(p.scaled(range_scale(p, cfg.range_mode)), emb, point.J_F, cfg.range_mode)
        yield {"instance_id": i, "instance_seed": seed, "snr_db": snr_field(snr), "n_logical": p.n,
               "n_physical": e.n_physical, "p_f": parallelization_factor(p.n, graph.num_nodes),
               "J_F": point.J_F, "range_mode": cfg.range_mode, "clamped": e.clamped,
               "warnings": [str(w.message) for w in caught], "embedded": e.to_dict()}


def cmd_solve(cfg):
    c = get_constellation(cfg.modulation)
    graph = _graph(cfg)
    point = cfg.grid()[0]
    sched = AnnealSchedule(point.T_a, point.T_p, point.s_p, cfg.n_anneals)
    ice = IceModel() if cfg.ice else IceModel.off()
    for i, seed, snr, use in _instances(cfg):
        p = ml_to_ising(use.H, use.y, c)
        emb = clique_embed(p.n, graph) if cfg.backend == "sa" else None
        s = anneal_run(p, emb, sched, ice, _anneal_seed(seed, snr, 0), cfg.backend, point.J_F,
                       cfg.range_mode, cfg.sweeps_per_us)
        for line in s.to_jsonl().splitlines():
            yield {"instance_id": i, "snr_db": snr_field(snr), **json.loads(line)}


def cmd_decode(cfg):
    n = cfg.n_t * get_constellation(cfg.modulation).Q
    clique_embed(n, _graph(cfg))  # fail early with a capacity error
    model = _model(cfg)
    point = cfg.grid()[0]
    for snr in cfg.snr_db:
        for i, seed in enumerate(instance_seeds(cfg)):
            yield run_instance(cfg, seed, snr, point, _anneal_seed(seed, snr, 0), i, model)


def cmd_baseline(cfg):
    c = get_constellation(cfg.modulation)
    for i, seed, snr, use in _instances(cfg):
        rec = {"instance_id": i, "instance_seed": seed, "snr_db": snr_field(snr), "modulation": c.kind.value,
               "n_t": cfg.n_t}
        nb = use.tx_bits.size
        if c.size**cfg.n_t <= MAX_BRUTE_FORCE:
            rec["ml_ber"] = float(np.mean(brute_force_ml(use.H, use.y, c) != use.tx_bits))
        try:
            t0 = time.perf_counter()
            zf = zero_forcing(use.H, use.y, c)
            rec["zf_ber"] = float(np.mean(zf != use.tx_bits))
            rec["zf_seconds"] = time.perf_counter() - t0
            bits, st = sphere_decode(use.H, use.y, c)
            rec["sd_ber"] = float(np.sum(bits != use.tx_bits) / nb)
            rec["sd_visited"] = st.visited
        except DecodeError as exc:
            rec["error"] = str(exc)
        yield rec


def cmd_trace(cfg, args):
    if cfg.trace:
        t = load_trace(cfg.trace)
        yield {"trace": cfg.trace, "uses": t.n_uses, "rx": t.n_rx, "tx": t.n_tx, "valid": True}
        return
    if not args.out:
        raise ConfigError("trace needs --trace FILE to validate or --out FILE to write")
    rng = np.random.default_rng(cfg.seed)
    n_r = cfg.n_r or cfg.n_t
    model = ChannelModel(ChannelKind.RAYLEIGH_IID)
    H = np.stack([gen_channel(model, cfg.n_t, n_r, rng) for _ in range(args.uses)])
    save_trace(H, args.out)
    yield {"trace": args.out, "uses": args.uses, "rx": n_r, "tx": cfg.n_t, "written": True}


def _flatten(rec: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and k not in ("ising", "embedded"):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, dict)):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def _write_csv(path, records):
    rows = [_flatten(r) for r in records]
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        runners = {
            "reduce": cmd_reduce,
            "embed": cmd_embed,
            "solve": cmd_solve,
            "decode": cmd_decode,
            "sweep": sweep,
            "baseline": cmd_baseline,
        }
        if args.command == "trace":
            records = list(cmd_trace(cfg, args))
        else:
            records = list(runners[args.command](cfg))
        # for `trace`, --out names the trace file and the summary goes to stdout
        with _sink(None if args.command == "trace" else args.out) as fh:
            for r in records:
                fh.write(json.dumps(r) + "\n")
        if args.csv:
            _write_csv(args.csv, records)
    except (ConfigError, TraceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
