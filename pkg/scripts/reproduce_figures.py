"""Regenerate the data behind the key-length figures as CSV files.

    python scripts/reproduce_figures.py --figs 3 4 9 --threads 4
    python scripts/reproduce_figures.py --full          # large trial counts
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from keylength.harness import FIGURES, ExperimentSpec, run, to_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--figs", type=int, nargs="+", default=list(FIGURES), choices=FIGURES)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for fig in args.figs:
        spec = ExperimentSpec(command="sweep", fig=fig, threads=args.threads, seed=args.seed,
                              full=args.full, timing=True,
                              wnr_db=[-10.0] if fig == 9 else [float("inf")])
        t0 = time.perf_counter()
        _, rows = run(spec)
        path = out / f"fig{fig}.csv"
        path.write_text(to_csv(rows), encoding="utf-8")
        print(f"fig {fig}: {len(rows)} rows in {time.perf_counter() - t0:.1f}s -> {path}")


if __name__ == "__main__":
    main()
