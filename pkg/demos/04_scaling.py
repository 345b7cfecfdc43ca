"""Build and query cost as the cohort grows (small grid, a minute or two)."""

import sys

import numpy as np

from snpvault.bench import BenchConfig, run_bench, write_csv

cfg = BenchConfig(
    records=[2000, 4000, 8000],
    snps=[40],
    query_sizes=[5, 20, 35],
    reps=3,
    seed=1,
)
rows = run_bench(cfg, progress=print)
write_csv(rows, sys.stdout)

build = [r for r in rows if r.phase == "build"]
x = np.array([r.n_records for r in build], dtype=float)
y = np.array([r.seconds for r in build])
slope, intercept = np.polyfit(x, y, 1)
print(f"build: {slope * 1e6:.2f} us per record")

for n in cfg.records:
    q = {r.query_size: r.seconds for r in rows if r.phase == "query" and r.n_records == n}
    print(n, "records, query time by size:", {k: round(v, 3) for k, v in q.items()})
