"""Conservatism of the robust gain bound as more noisy samples arrive.

Run with ``python demos/data_length.py [seeds]``, e.g. ``0-4``. Prints the
relative excess of the certified gain over the true gain for each data
length and writes ``data_length.svg`` when matplotlib is available.
"""
import sys

import numpy as np

from datadiss import experiments

spec = sys.argv[1] if len(sys.argv) > 1 else "0-2"
lo, _, hi = spec.partition("-")
seeds = range(int(lo), int(hi or lo) + 1)
records = experiments.run("ex2", seeds)

for N in experiments.EX2_LENGTHS:
    eps = [r.epsilon for r in records if r.N == N]
    print(f"N = {N:2d}  median epsilon {np.median(eps):.4f}  max {np.max(eps):.4f}")

try:
    experiments.write_svg("ex2", records, "data_length.svg")
    print("wrote data_length.svg")
except ImportError:
    print("matplotlib not installed; skipping the plot")
