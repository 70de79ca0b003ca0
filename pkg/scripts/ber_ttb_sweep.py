"""Run a parameter sweep and print the Fix/Opt time-to-BER summaries.

Example:
    python scripts/ber_ttb_sweep.py --config scripts/configs/qpsk_4x4.toml --out sweep.jsonl
"""

import argparse
import json

from mimo_anneal.harness import ExperimentConfig, load_config, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", help="JSON lines with every record")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_dict(load_config(args.config))
    out = open(args.out, "w") if args.out else None
    for rec in sweep(cfg):
        if out:
            out.write(json.dumps(rec) + "\n")
        if rec.get("kind") == "summary":
            t = rec["ttb"]
            fmt = lambda v: "never" if v is None else f"{v:.3g} us"
            where = f" at {rec['point']}" if "point" in rec else ""
            print(f"SNR {rec['snr_db']} dB {rec['strategy']}: TTB median {fmt(t['median'])}, "
                  f"mean {fmt(t['mean'])}, p10 {fmt(t['p10'])}, p90 {fmt(t['p90'])}{where}")
    if out:
        out.close()


if __name__ == "__main__":
    main()
