"""Logical (physical) qubit counts for the clique embedding on a Chimera chip."""

import argparse

from mimo_anneal import qubit_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chip-nodes", type=int, default=2048)
    args = ap.parse_args()
    rows = qubit_table(chip_nodes=args.chip_nodes)
    mods = list(dict.fromkeys(r["modulation"] for r in rows))
    print(f"{'users':>6} " + " ".join(f"{m:>14}" for m in mods))
    for users in sorted({r["users"] for r in rows}):
        cells = []
        for m in mods:
            r = next(r for r in rows if r["users"] == users and r["modulation"] == m)
            mark = "" if r["feasible"] else "*"
            cells.append(f"{r['logical']} ({r['physical']}){mark}")
        print(f"{users:>6} " + " ".join(f"{x:>14}" for x in cells))
    print(f"* exceeds {args.chip_nodes} qubits")


if __name__ == "__main__":
    main()
