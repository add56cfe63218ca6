"""l_eta for uniform oracles across channel counts and confidence levels, both indexings."""

import argparse

import numpy as np

from resilient_recon import compute_l_eta, poisson_binomial_pmf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.95)
    ap.add_argument("--m", type=int, nargs="+", default=[6, 10, 18, 30, 60])
    ap.add_argument("--eta", type=float, nargs="+", default=[0.5, 0.8, 0.9, 0.95, 0.99])
    args = ap.parse_args()

    print("m    " + "  ".join(f"eta={e:<5}" for e in args.eta) + "   (exact-tail / closed-form indexing)")
    for m in args.m:
        r = poisson_binomial_pmf(np.full(m, args.p))
        cells = [f"{compute_l_eta(r, e):>3}/{compute_l_eta(r, e, 'paper'):<4}" for e in args.eta]
        print(f"{m:<4} " + "  ".join(f"{c:<9}" for c in cells))


if __name__ == "__main__":
    main()
