"""Excess risk of the standard rule against n for a family of power-law
noise models, with fitted log-log slopes next to the balance-equation
prediction.  Writes rates.csv and rates.svg.
"""

import argparse
import os
from pathlib import Path

from knn_minimax import harness
from knn_minimax.analysis import rate_exponent


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--g", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--n", type=int, nargs="+", default=[100, 316, 1000, 3162, 10_000])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--b", type=float, default=0.2)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20241016)
    p.add_argument("--threads", type=int, default=int(os.environ.get("KNN_MINIMAX_THREADS", 1)))
    p.add_argument("--out", type=Path, default=Path("out"))
    a = p.parse_args(argv)

    rows = harness.run_rates(a.g, a.n, seed=a.seed, replications=a.reps, b=a.b, n_test=a.n_test, threads=a.threads)
    csv_rows = [{"g": r.g, "n": n, "excess": e, "se": s, "slope": r.slope, "predicted": -rate_exponent(1.0, 1, "upper", g=r.g)}
                for r in rows for n, e, s in zip(r.n_grid, r.excess, r.se)]
    harness.write_text(a.out / "rates.csv", harness.rows_to_csv(csv_rows, list(csv_rows[0])))
    series = {f"g={r.g:g} slope {r.slope:.2f}": (r.n_grid, r.excess) for r in rows}
    harness.write_text(a.out / "rates.svg", harness.loglog_svg(series, title="excess risk vs n"))
    for r in rows:
        print(f"g={r.g:<5g} slope={r.slope:+.3f}  predicted={-rate_exponent(1.0, 1, 'upper', g=r.g):+.3f}  r2={r.r2:.3f}")


if __name__ == "__main__":
    main()
