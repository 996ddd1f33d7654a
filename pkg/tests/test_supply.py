import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from datadiss.supply import (evaluate, generic, hat_transform, l2_gain, l2_gain_family,
                             passivity, shortage, shortage_family, supply_from_json)

small = st.floats(-5, 5, allow_nan=False)


def test_l2_gain_blocks():
    s = l2_gain(2.0)
    assert s.R.tolist() == [[4.0]] and s.S.tolist() == [[0.0]] and s.Q.tolist() == [[-1.0]]
    z = l2_gain(0.0, 2, 3)
    assert not z.R.any() and np.array_equal(z.Q, -np.eye(3))
    u = l2_gain(1.0, 2, 2)
    assert np.array_equal(u.R, np.eye(2)) and np.array_equal(u.Q, -np.eye(2))
    with pytest.raises(ValueError):
        l2_gain(-1.0)


def test_named_supplies():
    assert evaluate(passivity(), 1.0, 3.0) == 6.0
    assert evaluate(l2_gain(2.0), 1.0, 1.0) == 3.0
    assert evaluate(shortage(0.3, 2), np.zeros(2), np.zeros(2)) == 0.0
    s0 = shortage(0.0)
    assert s0.equals(0.5 * passivity())
    assert generic(-np.eye(1), np.zeros((1, 1)), 4 * np.eye(1)).equals(l2_gain(2.0))


def test_generic_rejects_asymmetric():
    with pytest.raises(ValueError):
        generic([[0, 1], [0, 0]], np.zeros((2, 2)), np.eye(2))
    with pytest.raises(ValueError):
        generic(np.eye(2), np.zeros((2, 2)), [[1, 2], [0, 1]])


def test_supply_json():
    assert supply_from_json({"type": "l2-gain", "gamma": 2}, 1, 1).equals(l2_gain(2.0))
    assert supply_from_json({"type": "passivity"}, 2, 2).equals(passivity(2))
    assert supply_from_json({"type": "shortage", "s": 0.5}, 1, 1).equals(shortage(0.5))
    with pytest.raises(ValueError):
        supply_from_json({"type": "passivity"}, 2, 1)
    with pytest.raises(ValueError):
        supply_from_json({"type": "unknown"}, 1, 1)


def test_hat_examples():
    h = hat_transform(passivity(2), np.zeros((2, 3)), np.eye(2))
    assert not h.Q_hat.any() and not h.S_hat.any() and np.array_equal(h.R_hat, 2 * np.eye(2))
    h = hat_transform(l2_gain(1.5, 2, 2), np.eye(2), np.zeros((2, 2)))
    assert np.array_equal(h.Q_hat, -np.eye(2)) and not h.S_hat.any()
    assert np.allclose(h.R_hat, 2.25 * np.eye(2))
    g = generic([[1.0]], [[2.0]], [[3.0]])
    h = hat_transform(g, np.zeros((1, 2)), np.zeros((1, 1)))
    assert not h.Q_hat.any() and not h.S_hat.any() and h.R_hat.tolist() == [[3.0]]


def test_hat_transform_matches_quadratic_form(rng):
    # s(u, Cx + Du) must equal (x, u)' [[Qh, Sh], [Sh', Rh]] (x, u)
    C, D = rng.standard_normal((2, 3)), rng.standard_normal((2, 2))
    Q = rng.standard_normal((2, 2)); Q = Q + Q.T
    R = rng.standard_normal((2, 2)); R = R + R.T
    sup = generic(Q, rng.standard_normal((2, 2)), R)
    h = hat_transform(sup, C, D)
    for _ in range(5):
        x, u = rng.standard_normal(3), rng.standard_normal(2)
        z = np.concatenate([x, u])
        K = np.block([[h.Q_hat, h.S_hat], [h.S_hat.T, h.R_hat]])
        assert z @ K @ z == pytest.approx(evaluate(sup, u, C @ x + D @ u), rel=1e-12, abs=1e-12)


@given(a=small, b=small, seed=st.integers(0, 2**31))
def test_hat_transform_linear(a, b, seed):
    g = np.random.default_rng(seed)
    C, D = g.standard_normal((2, 3)), g.standard_normal((2, 2))
    s1, s2 = shortage(g.uniform(-1, 1), 2), l2_gain(g.uniform(0, 2), 2, 2)
    comb = a * s1 + b * s2
    h, h1, h2 = hat_transform(comb, C, D), hat_transform(s1, C, D), hat_transform(s2, C, D)
    for k in ("Q_hat", "S_hat", "R_hat"):
        assert np.allclose(getattr(h, k), a * getattr(h1, k) + b * getattr(h2, k), atol=1e-10)


def test_families():
    f = l2_gain_family(2, 1)
    assert f.at(4.0).equals(l2_gain(2.0, 2, 1))
    assert f.property_value(4.0) == 2.0 and f.theta_of(3.0) == 9.0 and f.lower == 0.0
    g = shortage_family(2)
    assert g.at(0.7).equals(shortage(0.7, 2)) and g.name == "shortage" and f.name == "l2-gain"
