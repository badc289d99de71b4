"""RMSE of each predictor across sparsity levels on synthetic hotspot panels.

    python3 scripts/sparsity_table.py --seeds 10 --out results/sparsity
"""

import argparse
from pathlib import Path

import numpy as np

from sparsesense.fileio import write_report_csv
from sparsesense.simulate import HotspotSpec, ReportRow, SimulationConfig, SyntheticSpec, generate_synthetic, sparsity_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--S", type=int, default=16)
    ap.add_argument("--T", type=int, default=250)
    ap.add_argument("--sparsities", default="0,0.1,0.3,0.5,0.7,0.9")
    ap.add_argument("--predictors", default="dsar,ar,persistence,mean")
    ap.add_argument("--no-hotspot", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results/sparsity"))
    args = ap.parse_args()

    levels = [float(x) for x in args.sparsities.split(",")]
    predictors = args.predictors.split(",")
    hotspot = None if args.no_hotspot else HotspotSpec(amplitude=10.0, width=0.15, step=0.05)
    cells = {}
    for seed in range(args.seeds):
        panel, _ = generate_synthetic(SyntheticSpec(S=args.S, T=args.T, bandwidth=0.15, hotspot=hotspot, seed=seed))
        cfg = SimulationConfig(cycles=args.T - 50, seed=seed, pooled=True).with_alloc(hazard_threshold=10.0)
        for r in sparsity_sweep(panel, levels, cfg, predictors=predictors).rows:
            cells.setdefault((r.strategy, r.param), []).append(r.mean_rmse)

    rows = [ReportRow(name, frac, float(np.mean(v)), float(np.std(v)), len(v)) for (name, frac), v in cells.items()]
    print(f"{'predictor':<12}" + "".join(f"{s:>9.1f}" for s in levels))
    for name in predictors:
        print(f"{name:<12}" + "".join(f"{np.mean(cells[(name, s)]):>9.4f}" for s in levels))
    args.out.mkdir(parents=True, exist_ok=True)
    print("wrote", write_report_csv(rows, args.out / "report.csv"))


if __name__ == "__main__":
    main()
