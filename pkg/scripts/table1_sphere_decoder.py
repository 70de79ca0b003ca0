"""Mean sphere-decoder visited nodes at 13 dB over Rayleigh channels."""

import argparse

import numpy as np

from mimo_anneal import BPSK, QAM16, QPSK, ChannelKind, ChannelModel, make_channel_use, sphere_decode

ROWS = [((12, 7, 4), 40), ((21, 11, 6), 270), ((30, 15, 8), 1900)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=1000)
    ap.add_argument("--snr-db", type=float, default=13.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    model = ChannelModel(ChannelKind.RAYLEIGH_IID)
    print(f"{'BPSK':>12} {'QPSK':>12} {'16-QAM':>12}   reference")
    for row, (sizes, ref) in enumerate(ROWS):
        cells = []
        for j, (c, n) in enumerate(zip((BPSK, QPSK, QAM16), sizes)):
            seeds = np.random.SeedSequence([args.seed, row, j]).generate_state(args.instances)
            v = [sphere_decode(u.H, u.y, c)[1].visited
                 for u in (make_channel_use(model, c, n, n, args.snr_db, int(s)) for s in seeds)]
            cells.append(f"{n}x{n}: {np.mean(v):.0f}")
        print(" ".join(f"{x:>12}" for x in cells), f"  ~{ref}")


if __name__ == "__main__":
    main()
