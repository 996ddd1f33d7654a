"""Trajectories, data matrices, noise sets and consistent systems."""
from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .numerics import as_matrix, block_hankel, nullspace_basis, rank_tol


@dataclass(eq=False)
class Trajectory:
    """One measured run: ``u`` is ``(N, m)``, ``x`` is ``(N+1, n)``, ``y`` optional ``(N, p)``."""

    u: np.ndarray
    x: np.ndarray
    y: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(len(self.u), -1)
        self.x = np.asarray(self.x, dtype=float).reshape(len(self.x), -1)
        if self.x.shape[0] != self.u.shape[0] + 1:
            raise ValueError(f"x needs exactly one more sample than u "
                             f"({self.x.shape[0]} vs {self.u.shape[0]})")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float).reshape(len(self.y), -1)
            if self.y.shape[0] != self.u.shape[0]:
                raise ValueError("y must have as many samples as u")

    @property
    def N(self) -> int:
        return self.u.shape[0]

    def head(self, N: int) -> "Trajectory":
        """The first ``N`` steps."""
        y = None if self.y is None else self.y[:N]
        return Trajectory(self.u[:N], self.x[:N + 1], y, dict(self.meta, N=N))

    def to_json(self) -> dict:
        obj = {"u": self.u.tolist(), "x": self.x.tolist()}
        if self.y is not None:
            obj["y"] = self.y.tolist()
        for key in ("noise", "seed"):
            if key in self.meta:
                obj[key] = self.meta[key]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Trajectory":
        meta = {k: obj[k] for k in ("noise", "seed") if k in obj}
        return cls(obj["u"], obj["x"], obj.get("y"), meta)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)

    @classmethod
    def load(cls, path) -> "Trajectory":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass(frozen=True, eq=False)
class DataMatrices:
    X: np.ndarray
    X_plus: np.ndarray
    U: np.ndarray
    Y: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def XU(self) -> np.ndarray:
        return np.vstack([self.X, self.U])


def build_matrices(t: Trajectory) -> DataMatrices:
    if t.N < 1:
        raise ValueError("need at least one sample")
    Y = None if t.y is None else t.y.T.copy()
    return DataMatrices(t.x[:-1].T.copy(), t.x[1:].T.copy(), t.u.T.copy(), Y)


def pe_order(u, L: int, rtol: float | None = None) -> bool:
    """Is the input sequence persistently exciting of order ``L``?"""
    seq = np.asarray(u, dtype=float)
    m = 1 if seq.ndim == 1 else seq.shape[1]
    return rank_tol(block_hankel(seq, L), rtol) == m * L


def rank_condition(d: DataMatrices, rtol: float | None = None) -> bool:
    """Full row rank of the stacked ``[X; U]``."""
    return rank_tol(d.XU, rtol) == d.n + d.m


# --------------------------------------------------------------------------
# noise sets
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Noise matrices ``W`` (``mw x N``) with ``[W; I]' [[Qw, Sw], [Sw', Rw]] [W; I] >= 0``.

    ``kind``/``w_bar``/``per_step`` describe the norm-ball constructors and are
    used by the sampler.
    """

    Qw: np.ndarray
    Sw: np.ndarray
    Rw: np.ndarray
    kind: str = "generic"
    w_bar: float | None = None
    per_step: bool = False

    def __post_init__(self):
        Qw, Sw, Rw = as_matrix(self.Qw, "Qw"), as_matrix(self.Sw, "Sw"), as_matrix(self.Rw, "Rw")
        if Qw.shape[0] != Qw.shape[1] or Rw.shape[0] != Rw.shape[1]:
            raise ValueError("Qw and Rw must be square")
        if Sw.shape != (Qw.shape[0], Rw.shape[0]):
            raise ValueError(f"Sw must be {Qw.shape[0]}x{Rw.shape[0]}")
        if np.linalg.eigvalsh(0.5 * (Rw + Rw.T))[0] <= 0:
            raise ValueError("Rw must be positive definite")
        object.__setattr__(self, "Qw", 0.5 * (Qw + Qw.T))
        object.__setattr__(self, "Sw", Sw)
        object.__setattr__(self, "Rw", 0.5 * (Rw + Rw.T))

    @property
    def mw(self) -> int:
        return self.Qw.shape[0]

    @property
    def N(self) -> int:
        return self.Rw.shape[0]

    def qw_nonpositive(self) -> bool:
        return np.linalg.eigvalsh(self.Qw)[-1] <= 1e-12 * max(1.0, np.abs(self.Qw).max())

    def to_json(self) -> dict:
        if self.kind == "ball":
            return {"type": "ball", "wbar": self.w_bar, "per_step": self.per_step}
        return {"type": "generic", "Qw": self.Qw.tolist(), "Sw": self.Sw.tolist(),
                "Rw": self.Rw.tolist()}


def ball_noise(w_bar: float, N: int, mw: int, per_step: bool = False) -> NoiseModel:
    """Norm-ball noise set ``Qw = -I, Sw = 0, Rw = w_bar^2 I`` (times ``N`` if ``per_step``).

    ``per_step=False`` bounds the whole stacked noise, ``||W||_2 <= w_bar``;
    ``per_step=True`` comes from ``||w_k|| <= w_bar`` for every ``k``.
    """
    if not w_bar > 0:
        raise ValueError("w_bar must be positive (use a tiny positive bound to approximate "
                         "noise-free data)")
    r = w_bar**2 * (N if per_step else 1)
    return NoiseModel(-np.eye(mw), np.zeros((mw, N)), r * np.eye(N), "ball", float(w_bar),
                      bool(per_step))


def noise_form(W, nm: NoiseModel) -> np.ndarray:
    W = as_matrix(W, "W")
    if W.shape != (nm.mw, nm.N):
        raise ValueError(f"W must be {nm.mw}x{nm.N}, got {W.shape}")
    F = W.T @ nm.Qw @ W + W.T @ nm.Sw + nm.Sw.T @ W + nm.Rw
    return 0.5 * (F + F.T)


def noise_membership(W, nm: NoiseModel, tol: float = 1e-9) -> bool:
    """Is ``W`` in the noise set (up to ``tol`` times the form's largest entry)?"""
    F = noise_form(W, nm)
    return bool(np.linalg.eigvalsh(F)[0] >= -tol * max(1.0, np.abs(F).max()))


def _uniform_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    return radius * rng.uniform() ** (1.0 / dim) * direction


def sample_noise(nm: NoiseModel, seed) -> np.ndarray:
    """Uniform sample from a norm-ball noise set.

    Whole-horizon balls sample ``vec(W)`` uniformly from the Euclidean ball of
    radius ``w_bar`` in dimension ``mw*N``; per-step balls sample every column
    independently from the ball of radius ``w_bar`` in dimension ``mw``.
    """
    if nm.kind != "ball":
        raise NotImplementedError("sampling is only supported for norm-ball noise models")
    rng = np.random.default_rng(seed)
    if nm.per_step:
        return np.column_stack([_uniform_ball(rng, nm.mw, nm.w_bar) for _ in range(nm.N)])
    return _uniform_ball(rng, nm.mw * nm.N, nm.w_bar).reshape(nm.mw, nm.N, order="F")


def unit_noise(mw: int, N: int, per_step: bool, seed) -> np.ndarray:
    """Noise instance for ``w_bar = 1``; scaling it by ``w_bar`` stays uniform in the ball."""
    return sample_noise(ball_noise(1.0, N, mw, per_step), seed)


# --------------------------------------------------------------------------
# consistent systems
# --------------------------------------------------------------------------

def annihilator_residual(d: DataMatrices, Bw, W) -> float:
    """Max-abs of ``(X+ - Bw W) [X; U]^perp``; zero iff the noise can explain the data."""
    K = nullspace_basis(d.XU)
    if K.shape[1] == 0:
        return 0.0
    R = (d.X_plus - as_matrix(Bw) @ as_matrix(W)) @ K
    return float(np.abs(R).max())


def consistent_system(d: DataMatrices, Bw, W, G) -> tuple[np.ndarray, np.ndarray, float]:
    """``(A_d, B_d) = (X+ - Bw W) G`` together with the annihilator residual."""
    G = as_matrix(G, "G")
    Bw = as_matrix(Bw, "Bw")
    W = as_matrix(W, "W")
    err = np.abs(d.XU @ G - np.eye(d.n + d.m)).max()
    if err > 1e-8:
        raise ValueError(f"G is not a right inverse of [X; U] (error {err:.2e})")
    AB = (d.X_plus - Bw @ W) @ G
    return AB[:, :d.n], AB[:, d.n:], annihilator_residual(d, Bw, W)


def sample_consistent_noise(d: DataMatrices, nm: NoiseModel, Bw, W_anchor, count: int,
                            seed) -> list[np.ndarray]:
    """Random admissible noise matrices that also satisfy the annihilator condition.

    Starting from an admissible, consistent ``W_anchor`` (for example the true
    noise of a simulation), draws ``W = W_anchor - V [X; U]`` along random
    directions ``V`` with a step uniform in the admissible segment. The set is
    convex when ``Qw <= 0``, so the segment is found by bisection.
    """
    if not nm.qw_nonpositive():
        raise ValueError("sampling needs Qw <= 0 (convex noise set)")
    W_anchor = as_matrix(W_anchor, "W_anchor")
    if not noise_membership(W_anchor, nm):
        raise ValueError("anchor noise is not in the noise set")
    rng = np.random.default_rng(seed)
    Z = d.XU
    out = []
    for _ in range(count):
        V = rng.standard_normal((nm.mw, Z.shape[0]))
        step = V @ Z
        step /= np.abs(step).max()
        lo, hi = 0.0, 1.0
        while noise_membership(W_anchor - hi * step, nm, tol=0.0):
            hi *= 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if noise_membership(W_anchor - mid * step, nm, tol=0.0):
                lo = mid
            else:
                hi = mid
        out.append(W_anchor - rng.uniform(0.0, lo) * step)
    return out
