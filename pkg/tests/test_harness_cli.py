import csv
import json
import math

import numpy as np
import pytest

from mimo_anneal.cli import main
from mimo_anneal.errors import ConfigError
from mimo_anneal.harness import (
    ExperimentConfig,
    GridPoint,
    parse_grid,
    replay,
    run_instance,
    summarize_records,
    sweep,
)
from mimo_anneal.metrics import summarize


def _small(**kw):
    base = dict(modulation="qpsk", n_t=3, snr_db=(20.0,), instances=3, n_anneals=20, seed=4)
    base.update(kw)
    return ExperimentConfig(**base)


# -- config ---------------------------------------------------------------------


def test_parse_grid():
    assert parse_grid("1:2:0.5") == (1.0, 1.5, 2.0)
    assert parse_grid("10,20,inf") == (10.0, 20.0, math.inf)
    with pytest.raises(ConfigError):
        parse_grid("1:x")


@pytest.mark.parametrize(
    "kw",
    [dict(J_F=(0.5,)), dict(modulation="64qam"), dict(n_t=0), dict(backend="qpu"), dict(T_p=(1.0,), s_p=(0.9,)),
     dict(channel="trace"), dict(n_r=2, n_t=3)],
)
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_round_trip():
    cfg = _small(J_F=(1.0, 2.0))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


# -- single instance ------------------------------------------------------------


def test_noiseless_exact_2x2_bpsk():
    cfg = ExperimentConfig(modulation="bpsk", n_t=2, snr_db=(math.inf,), backend="exact", ice=False, n_anneals=10)
    rec = run_instance(cfg, 11)
    assert rec["status"] == "ok" and rec["ber"] == 0 and rec["rank1_errors"] == 0
    # one anneal suffices; amortized over p_f copies
    assert rec["ttb"]["n_anneals"] == 1
    assert rec["ttb"]["value"] == pytest.approx((1.0 + 1.0) / rec["p_f"])
    assert rec["p_f"] == 2048 // 4
    assert rec["snr_db"] == "inf"


def test_sixteen_qam_4x4_sizes():
    rec = run_instance(ExperimentConfig(modulation="qam16", n_t=4, n_anneals=5), 1)
    assert rec["n_logical"] == 16 and rec["n_physical"] == 80


def test_non_embeddable_recorded():
    rec = run_instance(ExperimentConfig(modulation="qam16", n_t=40, n_anneals=1), 1)
    assert rec["status"] == "non-embeddable" and "physical qubits" in rec["error"]


def test_rerun_is_byte_identical():
    cfg = _small()
    a = json.dumps(list(sweep(cfg)), sort_keys=True)
    b = json.dumps(list(sweep(cfg)), sort_keys=True)
    assert a == b


def test_record_replays_from_its_own_parameters():
    for rec in sweep(_small(J_F=(1.0, 3.0), instances=2)):
        if rec.get("kind") != "summary":
            assert json.dumps(replay(rec), sort_keys=True) == json.dumps(rec, sort_keys=True)


def test_ber_curve_shape():
    rec = run_instance(_small(n_anneals=100), 7)
    n = [p[0] for p in rec["ber_curve"]]
    assert n[0] == 1 and n[-1] == 100 and n == sorted(set(n))
    assert rec["ber"] == rec["ber_curve"][-1][1]


@pytest.mark.parametrize(
    "modulation, sizes, channel",
    [("bpsk", (1, 4, 8, 16), "rayleigh"), ("qpsk", (1, 3, 6, 8), "random_phase"), ("qam16", (1, 2, 4), "rayleigh")],
)
def test_exact_noiseless_gate(modulation, sizes, channel):
    for n_t in sizes:
        cfg = ExperimentConfig(modulation=modulation, n_t=n_t, channel=channel, snr_db=(math.inf,),
                               backend="exact", ice=False, n_anneals=2, instances=15, seed=n_t)
        recs = [r for r in sweep(cfg) if r.get("kind") != "summary"]
        assert len(recs) == 15
        assert all(r["rank1_errors"] == 0 and r["ber"] == 0 for r in recs)


# -- sweeps and summaries -------------------------------------------------------


def test_sweep_cardinality():
    out = list(sweep(_small(J_F=(1.0, 2.0), T_a=(1.0, 10.0), snr_db=(15.0,))))
    recs = [r for r in out if r.get("kind") != "summary"]
    summ = [r for r in out if r.get("kind") == "summary"]
    assert len(recs) == 2 * 2 * 3 and len(summ) == 2
    assert {r["strategy"] for r in summ} == {"Fix", "Opt"}
    assert len({r["anneal_seed"] for r in recs}) == len(recs)


def _ttb(r):
    v = r["ttb"]["value"]
    return math.inf if v is None else v


def test_opt_never_worse_than_fix_and_recomputes():
    cfg = _small(J_F=(1.0, 4.0), T_a=(1.0, 10.0), snr_db=(8.0,), instances=6, target_ber=1e-2)
    out = list(sweep(cfg))
    recs = [r for r in out if r.get("kind") != "summary"]
    fix, opt = [r for r in out if r.get("kind") == "summary"]
    assert fix["strategy"] == "Fix" and opt["strategy"] == "Opt"
    for f, o in zip(fix["per_instance"], opt["per_instance"]):
        assert (math.inf if o is None else o) <= (math.inf if f is None else f)

    # independent recomputation from the record stream
    table = {}
    for r in recs:
        table.setdefault(r["point_index"], {})[r["instance_id"]] = _ttb(r)
    medians = {k: float(np.median([v[i] for i in sorted(v)])) for k, v in table.items()}
    best = min(medians, key=lambda k: (medians[k], k))
    fix_vals = [table[best][i] for i in range(6)]
    opt_vals = [min(table[k][i] for k in table) for i in range(6)]
    p = cfg.grid()[best]
    assert fix["point"] == {"J_F": p.J_F, "T_a": p.T_a, "T_p": p.T_p, "s_p": p.s_p}
    for row, vals in ((fix, fix_vals), (opt, opt_vals)):
        expect = summarize(vals)
        for key in ("median", "mean", "p10", "p90"):
            e = expect[key]
            got = row["ttb"][key]
            if math.isfinite(e):
                assert got == pytest.approx(e)
            else:
                assert got is None


def test_summary_skips_missing_snr():
    assert summarize_records([], _small()) == []


def test_grid_point_schedule():
    s = GridPoint(2.0, 10.0, 0.0, 0.35).schedule(7)
    assert s.T_a == 10.0 and s.n_anneals == 7


# -- command line ---------------------------------------------------------------


def _lines(capsys):
    return [json.loads(x) for x in capsys.readouterr().out.splitlines() if x.strip()]


def test_cli_decode_exact(capsys):
    rc = main(["decode", "--modulation", "bpsk", "--users", "2", "--snr-db", "inf", "--backend", "exact",
               "--instances", "2", "--no-ice"])
    assert rc == 0
    recs = _lines(capsys)
    assert len(recs) == 2 and all(r["ber"] == 0 for r in recs)


def test_cli_capacity_exit_code(capsys):
    assert main(["decode", "--modulation", "qam16", "--users", "40"]) == 3
    assert "capacity" in capsys.readouterr().err


def test_cli_config_exit_code(capsys):
    assert main(["decode", "--jf-grid", "0:2:1"]) == 2
    assert main(["decode", "--target-ber", "2"]) == 2


def test_cli_toml_config_and_csv(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('modulation = "qpsk"\nn_t = 2\nsnr_db = [10.0, 20.0]\ninstances = 2\nn_anneals = 10\n')
    out, table = tmp_path / "out.jsonl", tmp_path / "out.csv"
    assert main(["sweep", "--config", str(cfg), "--ta", "1,10", "--out", str(out), "--csv", str(table)]) == 0
    recs = [json.loads(x) for x in out.read_text().splitlines()]
    assert len(recs) == 2 * 2 * 2 + 4
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == len(recs) and "ttb.value" in rows[0]


def test_cli_json_config_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"modulation": "bpsk", "n_t": 3, "instances": 1}))
    assert main(["reduce", "--config", str(cfg), "--users", "2"]) == 0
    (rec,) = _lines(capsys)
    assert rec["n_t"] == 2 and rec["ising"]["n"] == 2


def test_cli_embed_and_solve(capsys):
    assert main(["embed", "--users", "2", "--instances", "1"]) == 0
    (rec,) = _lines(capsys)
    assert rec["n_logical"] == 4 and rec["n_physical"] == 8
    assert main(["solve", "--users", "2", "--instances", "1", "--anneals", "5"]) == 0
    recs = _lines(capsys)
    assert sum(r["count"] for r in recs) == 5


def test_cli_baseline(capsys):
    assert main(["baseline", "--users", "3", "--instances", "2", "--snr-db", "15"]) == 0
    recs = _lines(capsys)
    assert len(recs) == 2 and all({"ml_ber", "zf_ber", "sd_ber", "sd_visited"} <= set(r) for r in recs)
    assert all(r["sd_ber"] == r["ml_ber"] for r in recs)


def test_cli_trace_write_validate_decode(tmp_path, capsys):
    path = tmp_path / "trace.csv"
    assert main(["trace", "--users", "2", "--rx", "3", "--out", str(path), "--uses", "4"]) == 0
    assert _lines(capsys)[0]["written"]
    assert main(["trace", "--trace", str(path)]) == 0
    assert _lines(capsys)[0] == {"trace": str(path), "uses": 4, "rx": 3, "tx": 2, "valid": True}
    assert main(["decode", "--trace", str(path), "--users", "2", "--instances", "2", "--anneals", "5"]) == 0
    recs = _lines(capsys)
    assert all(r["channel"] == "trace" and r["status"] == "ok" for r in recs)


def test_cli_bad_trace(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("")
    assert main(["trace", "--trace", str(bad)]) == 2
