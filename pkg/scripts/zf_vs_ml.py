"""Bit error rate of zero-forcing against exact ML detection."""

import argparse

import numpy as np

from mimo_anneal import ChannelKind, ChannelModel, brute_force_ml, get_constellation, make_channel_use, zero_forcing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--modulation", default="qpsk")
    ap.add_argument("--users", type=int, default=6)
    ap.add_argument("--snr-db", type=float, nargs="+", default=[5.0, 10.0, 15.0, 20.0])
    ap.add_argument("--instances", type=int, default=1000)
    args = ap.parse_args()
    c = get_constellation(args.modulation)
    model = ChannelModel(ChannelKind.RAYLEIGH_IID)
    print(f"{'SNR dB':>7} {'ZF BER':>10} {'ML BER':>10}")
    for snr in args.snr_db:
        zf = ml = 0
        for s in range(args.instances):
            u = make_channel_use(model, c, args.users, args.users, snr, s)
            zf += int(np.sum(zero_forcing(u.H, u.y, c) != u.tx_bits))
            ml += int(np.sum(brute_force_ml(u.H, u.y, c) != u.tx_bits))
        n = args.instances * args.users * c.Q
        print(f"{snr:>7g} {zf / n:>10.2e} {ml / n:>10.2e}")


if __name__ == "__main__":
    main()
