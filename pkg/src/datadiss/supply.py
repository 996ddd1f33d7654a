"""Quadratic supply rates ``s(u, y) = u'Ru + 2y'Su + y'Qy``.

The supply matrix is partitioned as ``Pi = [[R, S'], [S, Q]]`` acting on the
stacked vector ``(u, y)``.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .numerics import as_matrix


def _check_symmetric(a: np.ndarray, name: str) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class SupplyRate:
    """Blocks ``R`` (m x m), ``S`` (p x m) and ``Q`` (p x p) of a supply rate."""

    R: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    name: str = "generic"

    def __post_init__(self):
        R = _check_symmetric(as_matrix(self.R, "R"), "R")
        Q = _check_symmetric(as_matrix(self.Q, "Q"), "Q")
        S = as_matrix(self.S, "S")
        if S.shape != (Q.shape[0], R.shape[0]):
            raise ValueError(f"S must be {Q.shape[0]}x{R.shape[0]}, got {S.shape}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "S", S)

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def p(self) -> int:
        return self.Q.shape[0]

    @property
    def Pi(self) -> np.ndarray:
        return np.block([[self.R, self.S.T], [self.S, self.Q]])

    def __add__(self, other: "SupplyRate") -> "SupplyRate":
        return SupplyRate(self.R + other.R, self.S + other.S, self.Q + other.Q)

    def __mul__(self, alpha: float) -> "SupplyRate":
        return SupplyRate(alpha * self.R, alpha * self.S, alpha * self.Q, self.name)

    __rmul__ = __mul__

    def equals(self, other: "SupplyRate", atol: float = 0.0) -> bool:
        return all(np.allclose(a, b, rtol=0.0, atol=atol) for a, b in
                   ((self.R, other.R), (self.S, other.S), (self.Q, other.Q)))

    def q_nonpositive(self, tol: float = 1e-12) -> bool:
        return np.linalg.eigvalsh(self.Q)[-1] <= tol * max(1.0, np.abs(self.Q).max())

    def to_json(self) -> dict:
        return {"type": "generic", "R": self.R.tolist(), "S": self.S.tolist(),
                "Q": self.Q.tolist()}


def l2_gain(gamma: float, m: int = 1, p: int = 1) -> SupplyRate:
    """``R = gamma^2 I``, ``S = 0``, ``Q = -I``."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return SupplyRate(gamma**2 * np.eye(m), np.zeros((p, m)), -np.eye(p), name="l2-gain")


def passivity(m: int = 1) -> SupplyRate:
    return SupplyRate(np.zeros((m, m)), np.eye(m), np.zeros((m, m)), name="passivity")


def shortage(s: float, m: int = 1) -> SupplyRate:
    """Passivity supply with output penalty: ``R = 0``, ``S = I/2``, ``Q = sI``."""
    return SupplyRate(np.zeros((m, m)), 0.5 * np.eye(m), s * np.eye(m), name="shortage")


def generic(Q, S, R) -> SupplyRate:
    return SupplyRate(R, S, Q)


@dataclass(frozen=True)
class HatTriple:
    Q_hat: np.ndarray
    S_hat: np.ndarray
    R_hat: np.ndarray


def hat_transform(supply: SupplyRate, C, D) -> HatTriple:
    """Pull the supply back to state/input coordinates through ``y = Cx + Du``."""
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    Q, S, R = supply.Q, supply.S, supply.R
    if C.shape[0] != supply.p or D.shape != (supply.p, supply.m):
        raise ValueError("C, D are not conformal with the supply rate")
    Q_hat = C.T @ Q @ C
    S_hat = C.T @ S + C.T @ Q @ D
    R_hat = D.T @ Q @ D + (D.T @ S + S.T @ D) + R
    return HatTriple(0.5 * (Q_hat + Q_hat.T), S_hat, 0.5 * (R_hat + R_hat.T))


def evaluate(supply: SupplyRate, u, y) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(u @ supply.R @ u + 2.0 * y @ supply.S @ u + y @ supply.Q @ y)


@dataclass(frozen=True)
class SupplyFamily:
    """Affine family ``base + theta * direction`` searched over ``theta``.

    For the L2 gain ``theta`` is ``gamma**2``; :meth:`property_value` maps it
    back to ``gamma``.
    """

    base: SupplyRate
    direction: SupplyRate
    parameter: str
    sense: str = "minimize"
    lower: float | None = None

    def at(self, theta: float) -> SupplyRate:
        return self.base + theta * self.direction

    def property_value(self, theta: float) -> float:
        if self.parameter == "gamma^2":
            return math.sqrt(max(theta, 0.0))
        return float(theta)

    def theta_of(self, value: float) -> float:
        return value**2 if self.parameter == "gamma^2" else float(value)

    @property
    def name(self) -> str:
        return {"gamma^2": "l2-gain", "s": "shortage"}.get(self.parameter, self.parameter)


def l2_gain_family(m: int = 1, p: int = 1) -> SupplyFamily:
    base = SupplyRate(np.zeros((m, m)), np.zeros((p, m)), -np.eye(p))
    direction = SupplyRate(np.eye(m), np.zeros((p, m)), np.zeros((p, p)))
    return SupplyFamily(base, direction, "gamma^2", lower=0.0)


def shortage_family(m: int = 1) -> SupplyFamily:
    base = SupplyRate(np.zeros((m, m)), 0.5 * np.eye(m), np.zeros((m, m)))
    direction = SupplyRate(np.zeros((m, m)), np.zeros((m, m)), np.eye(m))
    return SupplyFamily(base, direction, "s")


def supply_from_json(obj: dict, m: int, p: int) -> SupplyRate:
    """Build a supply from ``{"type": ..., parameters...}``."""
    kind = obj.get("type")
    if kind == "l2-gain":
        return l2_gain(float(obj["gamma"]), m, p)
    if kind in ("passivity", "shortage"):
        if m != p:
            raise ValueError(f"{kind} needs as many outputs as inputs (m={m}, p={p})")
        return passivity(m) if kind == "passivity" else shortage(float(obj["s"]), m)
    if kind == "generic":
        return generic(obj["Q"], obj["S"], obj["R"])
    raise ValueError(f"unknown supply type {kind!r}")
