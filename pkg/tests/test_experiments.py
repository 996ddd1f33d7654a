import io
import math

import numpy as np

from datadiss import experiments
from datadiss.experiments import ExperimentRecord, excitation, generate, write_csv


def _strip(records):
    return [(r.seed, r.N, r.w_bar, r.theta_hat, r.theta_true, r.status) for r in records]


def test_generate_deterministic():
    a_sys, a = generate(3, 1, 1, 5, 8, 0.01, per_step=True)
    b_sys, b = generate(3, 1, 1, 5, 8, 0.01, per_step=True)
    assert np.array_equal(a.x, b.x) and np.array_equal(a_sys.A, b_sys.A)
    assert a.meta["noise"] == {"type": "ball", "wbar": 0.01, "per_step": True}


def test_excitation_redraw_bound():
    u, x0, redraws = excitation(3, 1, 4, 0)
    assert u.shape == (4, 1) and x0.shape == (3,) and redraws == 0
    assert np.abs(u).max() <= 1


def test_replay_and_parallel_merge():
    serial = experiments.run("ex1", [6, 4])
    assert [r.seed for r in serial][:26] == [4] * 26
    again = experiments.run("ex1", [4, 6], jobs=2)
    assert _strip(serial) == _strip(again)


def test_csv_formats():
    rec = ExperimentRecord(3, "random(6,2,2)", 8, 1e-3, "l2-gain", 2.2, 2.0, "thm3-fixedG",
                           "optimal", 12.34)
    buf = io.StringIO()
    write_csv("ex2", [rec], buf)
    head, row = buf.getvalue().splitlines()
    assert head == "seed,N,gamma_hat,gamma_true,epsilon,status,ms"
    fields = row.split(",")
    assert fields[0] == "3" and fields[1] == "8" and math.isclose(float(fields[4]), 0.1)
    inf = ExperimentRecord(1, "x", 6, 0.02, "shortage", math.inf, 1.0, "prop1", "infeasible", 1.0)
    buf = io.StringIO()
    write_csv("ex1", [inf], buf)
    assert buf.getvalue().splitlines()[1].split(",")[2] == "inf"
    assert inf.epsilon == math.inf
