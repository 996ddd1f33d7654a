import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from datadiss import certify, lmi
from datadiss.certify import (LftData, PreconditionError, build_M, build_prop1, build_thm3,
                              certify_nominal, certify_robust, certify_robust_square,
                              estimate_nominal, estimate_robust, estimate_robust_square)
from datadiss.data import DataMatrices, ball_noise, sample_noise
from datadiss.model import Kind, hinf_norm_grid, random_system
from datadiss.supply import (l2_gain, l2_gain_family, passivity, shortage, shortage_family)

from helpers import DELAY, FEEDTHROUGH, S1, kyp_block, noise_free_data, noisy_data


def _rand_sym(g, n):
    a = g.standard_normal((n, n))
    return a + a.T


# ---------------------------------------------------------------- build_M

def test_build_M_without_storage():
    d = noise_free_data(S1, 4, 0)
    M = build_M(d, l2_gain(1.5), np.zeros((1, 1)))
    assert np.allclose(M, -2.25 * d.U.T @ d.U + d.Y.T @ d.Y)


def test_build_M_zero_data():
    z = DataMatrices(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((1, 3)), np.zeros((1, 3)))
    assert not np.any(build_M(z, shortage(0.3), np.eye(2)))


def test_build_M_needs_outputs():
    d = noise_free_data(S1, 3, 0)
    bare = DataMatrices(d.X, d.X_plus, d.U)
    with pytest.raises(ValueError):
        build_M(bare, passivity(), np.eye(1))


def test_build_M_prefers_model_outputs():
    d = noise_free_data(S1, 3, 0)
    wrong = DataMatrices(d.X, d.X_plus, d.U, d.Y + 1.0)
    with pytest.warns(RuntimeWarning, match="disagrees"):
        M = build_M(wrong, passivity(), np.eye(1), C=S1.C, D=S1.D)
    assert np.allclose(M, build_M(d, passivity(), np.eye(1)))


@given(st.integers(0, 10**6))
@settings(max_examples=20)
def test_M_identity(seed):
    # on noise-free data, M(P) = [X; U]' KYP(P) [X; U]
    sys = random_system(3, 2, 2, seed)
    d = noise_free_data(sys, 9, seed)
    g = np.random.default_rng(seed)
    sup = shortage(g.uniform(-1, 1), 2)
    P = _rand_sym(g, 3)
    lhs = build_M(d, sup, P, sys.C, sys.D)
    rhs = d.XU.T @ kyp_block(sys.A, sys.B, sys.C, sys.D, sup, P) @ d.XU
    scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1.0)
    assert np.abs(lhs - rhs).max() <= 1e-10 * scale


# ---------------------------------------------------------------- nominal

def test_certify_nominal_examples():
    d = noise_free_data(S1, 6, 1)
    ok = certify_nominal(d, l2_gain(2.1), S1.C, S1.D)
    assert ok.kind is Kind.DISSIPATIVE and ok.P is not None and ok.rank_ok
    no = certify_nominal(d, l2_gain(1.9), S1.C, S1.D)
    assert no.kind is Kind.NOT_DISSIPATIVE and no.outcome.status is lmi.Status.INFEASIBLE
    z = DataMatrices(np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 3)))
    assert certify_nominal(z, l2_gain(1.0)).kind is Kind.INCONCLUSIVE


def test_certify_nominal_scale_invariant():
    sys = random_system(3, 2, 2, 2)
    d = noise_free_data(sys, 12, 2)
    for s in (0.5, 3.0):
        a = certify_nominal(d, shortage(s, 2), sys.C, sys.D).kind
        b = certify_nominal(d, 10.0 * shortage(s, 2), sys.C, sys.D).kind
        assert a is b


def test_estimate_nominal_examples():
    d = noise_free_data(S1, 6, 1)
    g, v = estimate_nominal(d, l2_gain_family(), S1.C, S1.D)
    assert g == pytest.approx(2.0, abs=1e-3) and v.kind is Kind.DISSIPATIVE
    g, _ = estimate_nominal(noise_free_data(DELAY, 6, 2), l2_gain_family(), DELAY.C, DELAY.D)
    assert g == pytest.approx(1.0, abs=1e-3)
    s, v = estimate_nominal(noise_free_data(FEEDTHROUGH, 6, 3), shortage_family())
    assert s <= 1e-6


def test_estimate_nominal_rank_deficient():
    d = noise_free_data(random_system(3, 1, 1, 0), 3, 0)
    value, v = estimate_nominal(d, l2_gain_family())
    assert np.isnan(value) and v.kind is Kind.INCONCLUSIVE and not v.rank_ok


def test_verdict_json():
    d = noise_free_data(S1, 6, 1)
    _, v = estimate_nominal(d, l2_gain_family(), S1.C, S1.D)
    obj = json.loads(json.dumps(v.to_json()))
    assert {"kind", "property", "value", "P", "tau", "rank_ok", "solver", "mode"} <= set(obj)
    assert obj["mode"] == "nominal" and obj["kind"] == "Dissipative"
    assert obj["solver"]["max_violation"] <= 0


# ---------------------------------------------------------------- square data

def test_prop1_block_structure():
    sys = random_system(2, 2, 2, 0)
    d = noise_free_data(sys, 4, 0)
    nm = ball_noise(0.1, 4, 2)
    g = np.random.default_rng(0)
    P = _rand_sym(g, 2)
    F = build_prop1(d, nm, np.zeros((2, 2)), shortage(0.2, 2), P, 0.7, sys.C, sys.D)
    assert F.shape == (6, 6)
    M = build_M(d, shortage(0.2, 2), P, sys.C, sys.D)
    assert np.allclose(F[:2, :2], -0.7 * np.eye(2)) and not np.any(F[:2, 2:])
    assert np.allclose(F[2:, 2:], M + 0.7 * 0.01 * np.eye(4))
    F0 = build_prop1(d, nm, np.zeros((2, 2)), shortage(0.2, 2), P, 0.0, sys.C, sys.D)
    assert np.allclose(F0[2:, 2:], M) and not np.any(F0[:2])


def test_prop1_tiny_noise_recovers_gain():
    d = noise_free_data(S1, 2, 4)
    g, v = estimate_robust_square(d, ball_noise(1e-9, 2, 1), np.eye(1), l2_gain_family(),
                                  S1.C, S1.D)
    assert g == pytest.approx(2.0, abs=1e-3) and v.tau > 0 and v.mode == "prop1"


def test_prop1_requires_square_data():
    d = noise_free_data(S1, 4, 4)
    with pytest.raises(PreconditionError, match="N = n \\+ m .*certify_robust"):
        certify_robust_square(d, ball_noise(0.01, 4, 1), np.eye(1), passivity(), S1.C, S1.D)


def test_prop1_certificate_covers_noise_draws():
    sys = random_system(2, 1, 1, 6)
    nm = ball_noise(0.01, 3, 2)
    W = sample_noise(nm, 1)
    d = noisy_data(sys, 3, 6, W)
    s_hat, v = estimate_robust_square(d, nm, np.eye(2), shortage_family(), sys.C, sys.D)
    assert v.kind is Kind.DISSIPATIVE
    sup = shortage(s_hat)
    G = np.linalg.inv(d.XU)
    for k in range(30):
        Wk = sample_noise(nm, 100 + k)
        AB = (d.X_plus - Wk) @ G
        F = kyp_block(AB[:, :2], AB[:, 2:], sys.C, sys.D, sup, v.P)
        assert np.linalg.eigvalsh(F)[-1] <= 1e-6 * max(1.0, np.abs(v.P).max())


# ---------------------------------------------------------------- fixed G

def test_thm3_shape_and_q_condition():
    sys = random_system(2, 1, 1, 1)
    d = noise_free_data(sys, 6, 1)
    lft = LftData.from_data(d, np.eye(2))
    F = build_thm3(lft, ball_noise(0.1, 6, 2), l2_gain(2.0), np.eye(2), 1.0, sys.C, sys.D)
    assert F.shape == (5, 5)
    with pytest.raises(PreconditionError, match="Q <= 0"):
        certify_robust(d, ball_noise(0.1, 6, 2), np.eye(2), shortage(0.5), sys.C, sys.D)


def test_thm3_without_noise_channel_reduces_to_nominal():
    sys = random_system(2, 1, 1, 3)
    d = noise_free_data(sys, 7, 3)
    lft = LftData.from_data(d, np.zeros((2, 2)))
    P = _rand_sym(np.random.default_rng(3), 2)
    F = build_thm3(lft, ball_noise(0.1, 7, 2), l2_gain(1.0), P, 0.0, sys.C, sys.D)
    # with exact data, X+ G = [A B]; the (x, u) block is the KYP matrix
    assert np.allclose(F[:3, :3], kyp_block(sys.A, sys.B, sys.C, sys.D, l2_gain(1.0), P),
                       atol=1e-9)
    assert not np.any(F[3:])


@pytest.mark.parametrize("seed", range(5))
def test_square_congruence_identity(seed):
    sys = random_system(3, 2, 2, seed)
    g = np.random.default_rng(seed)
    nm = ball_noise(0.05, 5, 3)
    d = noisy_data(sys, 5, seed, sample_noise(nm, seed))
    sup = l2_gain(2.0, 2, 2)
    P, tau = _rand_sym(g, 3), g.uniform(0.1, 10)
    thm3 = build_thm3(LftData.from_data(d, np.eye(3)), nm, sup, P, tau, sys.C, sys.D)
    T = np.block([[d.XU, np.zeros((5, 3))], [np.zeros((3, 5)), np.eye(3)]])
    perm = np.r_[5:8, 0:5]
    moved = (T.T @ thm3 @ T)[np.ix_(perm, perm)]
    prop1 = build_prop1(d, nm, np.eye(3), sup, P, tau, sys.C, sys.D)
    assert np.abs(moved - prop1).max() <= 1e-9 * max(1.0, np.abs(prop1).max())


def test_square_verdicts_agree():
    sys = random_system(2, 1, 1, 9)
    nm = ball_noise(1e-4, 3, 2)
    d = noisy_data(sys, 3, 9, sample_noise(nm, 9))
    g = hinf_norm_grid(sys)
    for f in (0.8, 1.5):
        a = certify_robust(d, nm, np.eye(2), l2_gain(f * g), sys.C, sys.D).kind
        b = certify_robust_square(d, nm, np.eye(2), l2_gain(f * g), sys.C, sys.D).kind
        assert a is b
    assert a is Kind.DISSIPATIVE


def test_thm3_estimate_is_upper_bound():
    sys = random_system(2, 1, 1, 5)
    nm = ball_noise(1e-3, 10, 2, per_step=True)
    d = noisy_data(sys, 10, 5, sample_noise(nm, 5))
    g_hat, v = estimate_robust(d, nm, np.eye(2), l2_gain_family(), sys.C, sys.D)
    assert v.kind is Kind.DISSIPATIVE and v.mode == "thm3-fixedG"
    assert g_hat >= hinf_norm_grid(sys)
    assert any("sufficient" in n for n in v.notes)


def test_thm3_requires_outputs_and_rank():
    sys = random_system(2, 1, 1, 5)
    nm = ball_noise(1e-3, 2, 2)
    d = noise_free_data(sys, 2, 0)
    with pytest.raises(ValueError):
        certify_robust(d, nm, np.eye(2), l2_gain(1.0), None, None)
    with pytest.raises(PreconditionError):
        certify_robust(d, nm, np.eye(2), l2_gain(1.0), sys.C, sys.D)


def test_preconditioner_is_congruence():
    sys = random_system(2, 1, 1, 2)
    nm = ball_noise(0.01, 3, 2)
    d = noisy_data(sys, 3, 2, sample_noise(nm, 2))
    T = certify.prop1_preconditioner(d, nm)
    assert T.shape == (5, 5) and abs(np.linalg.det(T)) > 0
