"""Spread of the equivalence-angle estimate over independent seeds.

At n_v=60, DWR=10 dB, eps=0.01 and N_t=10^6 this measures how often a single
run lands within 1% of the closed-form angle and within 2 bits of the
closed-form key length.

    python scripts/angle_replicates.py --runs 40
"""
from __future__ import annotations

import argparse

import numpy as np

from keylength import (SpreadSpectrum, basic_keylength, equivalence_angle,
                       estimate_equivalence_angle, keylength_from_angle, make_params)
from keylength.rng import substream


def main() -> None:
    ap = argparse.ArgumentParser(description="replicate study of the angle route")
    ap.add_argument("--runs", type=int, default=40)
    ap.add_argument("--nv", type=int, default=60)
    ap.add_argument("--dwr", type=float, default=10.0)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--nt", type=int, default=10**6)
    args = ap.parse_args()

    params = make_params(args.nv, 1.0, args.dwr)
    theta = equivalence_angle(params, args.eps).theta
    bits = basic_keylength(params, args.eps).bits
    rel, dbits = [], []
    for seed in range(args.runs):
        est = estimate_equivalence_angle(SpreadSpectrum(params), args.eps, args.nt,
                                         substream(seed, "angle"))
        rel.append(est.theta_hat / theta - 1.0)
        dbits.append(keylength_from_angle(est, args.nv).bits - bits)
        print(f"seed {seed:3d}: theta error {100 * rel[-1]:+6.2f}%  bits error {dbits[-1]:+6.2f}")
    rel, dbits = np.array(rel), np.array(dbits)
    print(f"theta: mean {100 * rel.mean():+.3f}%  sd {100 * rel.std(ddof=1):.3f}%  "
          f"within 1%: {np.mean(np.abs(rel) <= 0.01):.0%}")
    print(f"bits:  mean {dbits.mean():+.3f}  sd {dbits.std(ddof=1):.3f}  "
          f"within 2 bits: {np.mean(np.abs(dbits) <= 2):.0%}")


if __name__ == "__main__":
    main()
