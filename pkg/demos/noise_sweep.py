"""Shortage of passivity from square data as the noise bound grows.

Run with ``python demos/noise_sweep.py [seed]``. With N = n + m samples
every noise matrix in the ball explains the data, so the certified value
can only get worse as the bound grows; beyond some bound no certificate
exists and the estimate is reported as ``inf``.
"""
import sys

from datadiss import experiments

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
records = experiments.run("ex1", [seed])
print(f"true shortage {records[0].theta_true:+.6f}")
print(f"{'w_bar':>8}  {'s_hat':>10}  status")
for r in records:
    print(f"{r.w_bar:8.3g}  {r.theta_hat:+10.6f}  {r.status}")
