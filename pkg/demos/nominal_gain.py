"""Recover the L2 gain and passivity shortage of a random system from clean data.

Run with ``python demos/nominal_gain.py``. The data-based estimates are
compared with the model-based values computed from the system matrices.
"""
import numpy as np

from datadiss import build_matrices, estimate_nominal, l2_gain, certify_nominal
from datadiss.data import Trajectory
from datadiss.model import random_system, simulate, true_gain, true_shortage
from datadiss.supply import l2_gain_family, shortage_family

sys = random_system(n=3, m=1, p=1, seed=7)
rng = np.random.default_rng(0)
N = 12
u = rng.uniform(-1, 1, (N, sys.m))
x, y = simulate(sys, rng.uniform(-1, 1, sys.n), u)
d = build_matrices(Trajectory(u, x, y))

gamma_hat, _ = estimate_nominal(d, l2_gain_family())
s_hat, _ = estimate_nominal(d, shortage_family())
print(f"L2 gain            data {gamma_hat:.6f}   model {true_gain(sys):.6f}")
print(f"shortage of pass.  data {s_hat:+.6f}   model {true_shortage(sys):+.6f}")

# a bound just below the gain is refuted, one just above is certified
for factor in (0.95, 1.05):
    v = certify_nominal(d, l2_gain(factor * gamma_hat))
    print(f"gamma = {factor:.2f} x estimate -> {v.kind.value}")
