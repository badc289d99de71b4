"""RMSE of each allocation strategy versus sensing budget k on synthetic hotspot panels.

    python3 scripts/allocation_budget.py --seeds 20 --out results/allocation
"""

import argparse
from pathlib import Path

import numpy as np

from sparsesense.fileio import write_report_csv
from sparsesense.simulate import HotspotSpec, ReportRow, SimulationConfig, SyntheticSpec, compare_allocations, generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--S", type=int, default=16)
    ap.add_argument("--T", type=int, default=250)
    ap.add_argument("--k", default=None, help="comma-separated budgets (default S/8, S/4, S/2, 3S/4)")
    ap.add_argument("--strategies", default="ewiem,random,static,coverage")
    ap.add_argument("--sparsity", type=float, default=0.0)
    ap.add_argument("--out", type=Path, default=Path("results/allocation"))
    args = ap.parse_args()

    ks = [int(x) for x in args.k.split(",")] if args.k else sorted({max(1, args.S * n // 8) for n in (1, 2, 4, 6)})
    strategies = args.strategies.split(",")
    cells = {}
    for seed in range(args.seeds):
        spec = SyntheticSpec(S=args.S, T=args.T, bandwidth=0.15, hotspot=HotspotSpec(10.0, 0.15, 0.05), seed=seed)
        panel, _ = generate_synthetic(spec)
        cfg = SimulationConfig(cycles=args.T - 50, seed=seed, sparsity=args.sparsity).with_alloc(hazard_threshold=10.0)
        for r in compare_allocations(panel, strategies, ks, cfg).rows:
            cells.setdefault((r.strategy, int(r.param)), []).append(r.mean_rmse)

    rows = [ReportRow(name, float(k), float(np.mean(v)), float(np.std(v)), len(v)) for (name, k), v in cells.items()]
    print(f"{'strategy':<10}" + "".join(f"{'k=' + str(k):>9}" for k in ks))
    for name in strategies:
        print(f"{name:<10}" + "".join(f"{np.mean(cells[(name, k)]):>9.4f}" for k in ks))
    args.out.mkdir(parents=True, exist_ok=True)
    print("wrote", write_report_csv(rows, args.out / "report.csv"))


if __name__ == "__main__":
    main()
