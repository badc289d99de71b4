"""How often a single-lag fit recovers every phi within a tolerance, per weight matrix.

Compares the empirical hit rate with the rate implied by the ordinary-least-squares
standard error, which shows how the mixing in W limits per-location precision.

    python3 scripts/phi_recovery.py --seeds 40
"""

import argparse
from math import erf, sqrt

import numpy as np

from sparsesense.dsar import DsarConfig, fit, regressor
from sparsesense.simulate import SyntheticSpec, generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--S", type=int, default=8)
    ap.add_argument("--T", type=int, default=500)
    ap.add_argument("--sigma", type=float, default=0.1)
    ap.add_argument("--tol", type=float, default=0.1)
    args = ap.parse_args()

    print(f"{'weights':<16}{'hit rate':>10}{'predicted':>11}{'mean SE':>9}{'max |bias|':>11}")
    for kind, bw in [("identity", 0.25), ("kernel", 0.05), ("kernel", 0.1), ("kernel", 0.15), ("kernel", 0.25)]:
        hits, predicted, ses, errs = 0, [], [], []
        for seed in range(args.seeds):
            spec = SyntheticSpec(S=args.S, T=args.T, noise_sigma=args.sigma, weight_kind=kind, bandwidth=bw, seed=seed)
            panel, truth = generate_synthetic(spec)
            hist = [panel.values[:, t].copy() for t in range(panel.T)]
            model = fit(hist, truth.weights, DsarConfig(p=1, window=10))
            err = model.phi[:, 0] - truth.phi[:, 0]
            hits += bool(np.abs(err).max() < args.tol)
            z = np.array([regressor(truth.weights, hist, t, 1) for t in range(1, panel.T)])
            se = args.sigma / np.sqrt((z**2).sum(axis=0))
            predicted.append(np.prod([erf(args.tol / (s * sqrt(2))) for s in se]))
            ses.append(se.mean())
            errs.append(err)
        label = kind if kind == "identity" else f"kernel bw={bw}"
        bias = np.abs(np.mean(errs, axis=0)).max()
        print(f"{label:<16}{hits / args.seeds:>10.3f}{np.mean(predicted):>11.3f}{np.mean(ses):>9.4f}{bias:>11.4f}")


if __name__ == "__main__":
    main()
