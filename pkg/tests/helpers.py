"""Data generators shared by the test modules."""
import numpy as np

from datadiss.data import Trajectory, build_matrices
from datadiss.model import LtiSystem, simulate

S1 = LtiSystem(0.5, 1.0, 1.0, 0.0)
DELAY = LtiSystem(0.0, 1.0, 1.0, 0.0)
FEEDTHROUGH = LtiSystem(0.0, 1.0, 0.0, 1.0)


def noise_free_data(sys, N, seed):
    g = np.random.default_rng(seed)
    u = g.uniform(-1, 1, (N, sys.m))
    x, y = simulate(sys, g.uniform(-1, 1, sys.n), u)
    return build_matrices(Trajectory(u, x, y))


def noisy_data(sys, N, seed, W):
    g = np.random.default_rng(seed)
    u = g.uniform(-1, 1, (N, sys.m))
    x, y = simulate(sys, g.uniform(-1, 1, sys.n), u, W.T)
    return build_matrices(Trajectory(u, x, y))


def kyp_block(sys_A, sys_B, C, D, supply, P):
    """Numeric KYP matrix, written out independently of the package."""
    Q, S, R = supply.Q, supply.S, supply.R
    Qh = C.T @ Q @ C
    Sh = C.T @ S + C.T @ Q @ D
    Rh = D.T @ Q @ D + D.T @ S + S.T @ D + R
    return np.block([[sys_A.T @ P @ sys_A - P - Qh, sys_A.T @ P @ sys_B - Sh],
                     [(sys_A.T @ P @ sys_B - Sh).T, sys_B.T @ P @ sys_B - Rh]])
