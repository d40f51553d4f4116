"""Security/robustness trade-off of ISS as the host rejection grows.

Prints, for each gamma, the symbol error rate under AWGN next to its
Gaussian prediction and the key length from the angle route next to the one
implied by the predicted equivalence angle.

    python scripts/iss_tradeoff.py --wnr -10 --nt 1000000
"""
from __future__ import annotations

import argparse
import math
from statistics import NormalDist

from keylength import estimate_equivalence_angle, keylength_from_angle, make_params, make_scheme, ser_mc
from keylength.estimators import EmptyRegionError
from keylength.rng import substream
from keylength.schemes import channel_from_wnr
from keylength.theory import log_cap_probability


def predicted(alpha: float, gamma: float, sigma_n: float, eps: float, n_v: int):
    """SER and key length when (-1)^m y.k and the orthogonal part are Gaussian."""
    beta = math.sqrt(alpha**2 - gamma**2)
    ser = NormalDist().cdf(-beta / math.hypot(1.0 - gamma, sigma_n))
    z = -NormalDist().inv_cdf(eps)
    denom = alpha**2 - gamma**2 + z * z * (2 * gamma - gamma**2)
    if denom <= z * z:
        return ser, math.inf
    cos = z / math.sqrt(denom)
    return ser, -log_cap_probability(cos, n_v) / math.log(2)


def main() -> None:
    ap = argparse.ArgumentParser(description="ISS gamma sweep")
    ap.add_argument("--nv", type=int, default=80)
    ap.add_argument("--dwr", type=float, default=10.0)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--wnr", type=float, default=-10.0)
    ap.add_argument("--nt", type=int, default=10**6)
    ap.add_argument("--trials", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = make_params(args.nv, 1.0, args.dwr)
    chan = channel_from_wnr(params, args.wnr)
    print("gamma    ser_mc   ser_pred   bits_angle  bits_pred")
    for i in range(10):
        g = round(0.2 * i, 10)
        scheme = make_scheme(params, "iss", g)
        ser = ser_mc(scheme, chan, args.trials, args.seed).ser
        try:
            est = estimate_equivalence_angle(scheme, args.eps, args.nt, substream(args.seed, "angle"))
            bits = keylength_from_angle(est, args.nv).bits
        except EmptyRegionError:
            bits = math.inf
        ser_p, bits_p = predicted(params.alpha, g, chan.sigma_n, args.eps, args.nv)
        print(f"{g:5.1f}  {ser:8.5f}  {ser_p:8.5f}  {bits:10.2f}  {bits_p:9.2f}")


if __name__ == "__main__":
    main()
