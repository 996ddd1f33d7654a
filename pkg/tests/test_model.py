import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from datadiss.data import Trajectory, build_matrices
from datadiss.lmi import check_certificate
from datadiss.model import (Kind, LtiSystem, Unstable, hinf_norm_grid, is_controllable,
                            kyp_check, kyp_matrix, kyp_problem, random_system, shortage_grid,
                            simulate, true_gain, true_shortage)
from datadiss.supply import evaluate, hat_transform, l2_gain, passivity, shortage

S1 = LtiSystem(0.5, 1.0, 1.0, 0.0)
DELAY = LtiSystem(0.0, 1.0, 1.0, 0.0)
FEEDTHROUGH = LtiSystem(0.0, 1.0, 0.0, 1.0)


def test_simulate_examples():
    x, y = simulate(S1, [0.0], [[1.0], [0.0]])
    assert np.allclose(x.ravel(), [0, 1, 0.5]) and np.allclose(y.ravel(), [0, 1])
    sys = random_system(3, 2, 1, 0)
    x, y = simulate(sys, np.zeros(3), np.zeros((4, 2)))
    assert not x.any() and not y.any()
    x, _ = simulate(S1, [0.0], [[1.0]], [[0.1]])
    assert np.allclose(x.ravel(), [0, 1.1])
    with pytest.raises(ValueError):
        simulate(S1, [0.0], [[1.0]], [[0.1], [0.2]])


def test_controllability_examples():
    assert is_controllable(S1)
    assert not is_controllable(LtiSystem(np.diag([0.1, 0.2]), [[1.0], [0.0]], [[1.0, 0.0]], 0.0))
    assert is_controllable(LtiSystem([[0, 1], [0, 0]], [[0.0], [1.0]], [[1.0, 0.0]], 0.0))


def test_kyp_check_examples():
    res = kyp_check(FEEDTHROUGH, passivity())
    assert res.verdict is Kind.DISSIPATIVE
    assert kyp_check(S1, l2_gain(1.9)).verdict is Kind.NOT_DISSIPATIVE
    assert kyp_check(S1, l2_gain(2.1)).verdict is Kind.DISSIPATIVE


def test_hand_certificate_passes_check():
    # P = 1 for y = u under passivity: blocks [[-1, 0], [0, -1]]
    prob = kyp_problem(FEEDTHROUGH, passivity())
    F = kyp_matrix(0.0 * np.eye(1), np.eye(1), hat_transform(passivity(), [[0.0]], [[1.0]]),
                   np.eye(1))
    assert np.allclose(F, -np.eye(2))
    report = check_certificate(prob, {"P": np.eye(1)})
    assert all(r["lambda_max"] <= 0 for r in report) and all(r["ok"] for r in report)


def test_true_gain_examples():
    assert true_gain(S1) == pytest.approx(2.0, abs=1e-3)
    assert true_gain(DELAY) == pytest.approx(1.0, abs=1e-3)
    assert true_gain(LtiSystem(0.5, 0.0, 1.0, 0.0)) == 0.0
    assert true_gain(S1, method="bisection") == pytest.approx(2.0, rel=1e-4)
    with pytest.raises(Unstable):
        true_gain(LtiSystem(1.5, 1.0, 1.0, 0.0))


def test_true_shortage_examples():
    assert true_shortage(FEEDTHROUGH) <= 1e-6
    # Re G / |G|^2 = Re(1/G) = cos(w) - 1/2, so the shortage is max(1/2 - cos w) = 3/2
    s = true_shortage(S1)
    assert s == pytest.approx(1.5, abs=1e-4)
    assert s == pytest.approx(true_shortage(S1, method="bisection"), abs=1e-4)
    assert true_shortage(DELAY) == pytest.approx(1.0, abs=1e-4)


def test_grid_oracles_analytic():
    assert hinf_norm_grid(S1) == pytest.approx(2.0, rel=1e-9)
    assert shortage_grid(S1) == pytest.approx(1.5, rel=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_gain_and_shortage_agree_with_grid(seed):
    sys = random_system(1 + seed % 5, 1 + seed % 2, 1 + seed % 2, seed)
    g = true_gain(sys, cross_check=True)
    assert g == pytest.approx(hinf_norm_grid(sys), rel=1e-3)
    assert true_shortage(sys) == pytest.approx(shortage_grid(sys), abs=1e-3)


@given(st.integers(1, 5), st.integers(1, 2), st.integers(1, 2), st.integers(0, 10**6))
@settings(max_examples=25)
def test_random_system_contract(n, m, p, seed):
    a, b = random_system(n, m, p, seed), random_system(n, m, p, seed)
    assert all(np.array_equal(getattr(a, k), getattr(b, k)) for k in "ABCD")
    assert is_controllable(a) and a.spectral_radius() <= 0.95 + 1e-12


@given(st.integers(0, 10**6))
@settings(max_examples=20)
def test_simulate_rebuild_identity(seed):
    sys = random_system(3, 2, 1, seed)
    g = np.random.default_rng(seed)
    u = g.uniform(-1, 1, (7, 2))
    x, _ = simulate(sys, g.uniform(-1, 1, 3), u)
    d = build_matrices(Trajectory(u, x))
    assert np.abs(d.X_plus - sys.A @ d.X - sys.B @ d.U).max() <= 1e-12 * max(1, np.abs(x).max())


def test_gain_verdict_monotone_and_scale_invariant():
    sys = random_system(3, 1, 1, 4)
    g = hinf_norm_grid(sys)
    verdicts = [kyp_check(sys, l2_gain(f * g)).verdict for f in (0.8, 0.9, 0.97, 1.03, 1.1, 1.5)]
    assert verdicts == [Kind.NOT_DISSIPATIVE] * 3 + [Kind.DISSIPATIVE] * 3
    for f in (0.9, 1.1):
        assert kyp_check(sys, 10.0 * l2_gain(f * g)).verdict is kyp_check(sys, l2_gain(f * g)).verdict


def test_dissipation_inequality_along_trajectory():
    sys = random_system(3, 2, 2, 11)
    sup = shortage(true_shortage(sys) + 0.05, 2)
    res = kyp_check(sys, sup)
    assert res.verdict is Kind.DISSIPATIVE
    P = res.storage
    g = np.random.default_rng(0)
    u = g.uniform(-1, 1, (30, 2))
    x, y = simulate(sys, g.uniform(-1, 1, 3), u)
    for k in range(30):
        dv = x[k + 1] @ P @ x[k + 1] - x[k] @ P @ x[k]
        scale = max(1.0, np.abs(P).max()) * max(1.0, np.abs(x).max()) ** 2
        assert dv <= evaluate(sup, u[k], y[k]) + 1e-7 * scale


def test_system_json_roundtrip(tmp_path):
    sys = random_system(2, 1, 1, 3)
    path = tmp_path / "s.json"
    sys.save(path)
    obj = json.loads(path.read_text())
    assert set(obj) == {"n", "m", "p", "mw", "A", "B", "C", "D", "Bw"}
    back = LtiSystem.load(path)
    assert all(np.array_equal(getattr(sys, k), getattr(back, k)) for k in ("A", "B", "C", "D", "Bw"))
    with pytest.raises(ValueError):
        LtiSystem(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), 0.0)
