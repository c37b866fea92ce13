"""Edge strategy x neighbour-percentage grid search (fixed training budget per cell).

    python scripts/run_grid.py --out results/grid

Writes grid.csv / grid.json and heatmap.csv (strategies as rows, percentages
as columns).
"""

import argparse
import logging
from pathlib import Path

from acttend import evaluation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--n-train", type=int, default=200)
    ap.add_argument("--n-test", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/grid")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    budget = evaluation.GridBudget(n_train=args.n_train, n_test=args.n_test, epochs=args.epochs)
    report = evaluation.run_grid_search(budget=budget, master_seed=args.seed, jobs=args.jobs)
    report.config["script"] = vars(args)
    report.to_csv(out / "grid.csv")
    report.to_json(out / "grid.json")
    print(evaluation.heatmap_csv(report, out / "heatmap.csv"), end="")


if __name__ == "__main__":
    main()
