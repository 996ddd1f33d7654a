"""Ground-truth state-space systems and model-based dissipativity oracles.

The oracles answer the questions the data-based certificates are checked
against: the KYP-type LMI over a storage matrix ``P``, the L2 gain and the
shortage of passivity. Independent frequency-grid estimates of the last two
are provided for cross-validation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import enum
import json
import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.optimize

from . import lmi
from .numerics import as_matrix, rank_tol
from .supply import SupplyRate, hat_transform, l2_gain_family, shortage_family, SupplyFamily

log = logging.getLogger(__name__)


class Unstable(ValueError):
    """The system matrix ``A`` is not Schur stable."""


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """``x+ = Ax + Bu + Bw w``, ``y = Cx + Du``; ``Bw`` defaults to ``I``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Bw: np.ndarray | None = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        D = as_matrix(self.D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        Bw = np.eye(n) if self.Bw is None else as_matrix(self.Bw, "Bw")
        if Bw.shape[0] != n:
            raise ValueError(f"Bw must have {n} rows, got {Bw.shape}")
        for k, v in dict(A=A, B=B, C=C, D=D, Bw=Bw).items():
            object.__setattr__(self, k, v)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def mw(self) -> int:
        return self.Bw.shape[1]

    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.A)).max())

    def is_stable(self) -> bool:
        return self.spectral_radius() < 1.0

    def frequency_response(self, omega: float) -> np.ndarray:
        z = np.exp(1j * omega)
        return self.C @ np.linalg.solve(z * np.eye(self.n) - self.A, self.B) + self.D

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "p": self.p, "mw": self.mw,
                "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(),
                "D": self.D.tolist(), "Bw": self.Bw.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LtiSystem":
        n, m, p = int(obj["n"]), int(obj["m"]), int(obj["p"])
        mw = int(obj.get("mw", n))

        def mat(key, r, c):
            return np.asarray(obj[key], dtype=float).reshape(r, c)

        Bw = mat("Bw", n, mw) if "Bw" in obj else None
        return cls(mat("A", n, n), mat("B", n, m), mat("C", p, n), mat("D", p, m), Bw)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)

    @classmethod
    def load(cls, path) -> "LtiSystem":
        with open(path) as f:
            return cls.from_json(json.load(f))


def simulate(sys: LtiSystem, x0, u, w=None) -> tuple[np.ndarray, np.ndarray]:
    """Run the recursion for ``len(u)`` steps.

    Returns ``x`` with shape ``(N+1, n)`` and ``y`` with shape ``(N, p)``;
    inputs are given one sample per row.
    """
    u = np.asarray(u, dtype=float).reshape(len(u), -1) if len(u) else np.zeros((0, sys.m))
    N = u.shape[0]
    if u.shape[1] != sys.m:
        raise ValueError(f"u must have {sys.m} columns, got {u.shape}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 must have length {sys.n}")
    if w is not None:
        w = np.asarray(w, dtype=float).reshape(len(w), -1)
        if w.shape != (N, sys.mw):
            raise ValueError(f"w must have shape {(N, sys.mw)}, got {w.shape}")
    x = np.zeros((N + 1, sys.n))
    y = np.zeros((N, sys.p))
    x[0] = x0
    for k in range(N):
        y[k] = sys.C @ x[k] + sys.D @ u[k]
        x[k + 1] = sys.A @ x[k] + sys.B @ u[k]
        if w is not None:
            x[k + 1] += sys.Bw @ w[k]
    return x, y


def controllability_matrix(A, B) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(sys: LtiSystem) -> bool:
    return rank_tol(controllability_matrix(sys.A, sys.B)) == sys.n


# --------------------------------------------------------------------------
# KYP oracle
# --------------------------------------------------------------------------

def kyp_matrix(A, B, hat, P):
    """Block matrix of the KYP-type inequality for a given or symbolic ``P``.

    ``hat`` is a :class:`~datadiss.supply.HatTriple` or a triple of arrays /
    affine expressions ``(Q_hat, S_hat, R_hat)``.
    """
    Qh, Sh, Rh = (hat.Q_hat, hat.S_hat, hat.R_hat) if hasattr(hat, "Q_hat") else hat
    top_left = A.T @ P @ A - P - Qh
    top_right = A.T @ P @ B - Sh
    bottom = B.T @ P @ B - Rh
    return lmi.bmat([[top_left, top_right], [top_right.T, bottom]])


def _family_hat(sys: LtiSystem, family: SupplyFamily, theta):
    base = hat_transform(family.base, sys.C, sys.D)
    dirn = hat_transform(family.direction, sys.C, sys.D)
    return (base.Q_hat + theta * dirn.Q_hat, base.S_hat + theta * dirn.S_hat,
            base.R_hat + theta * dirn.R_hat)


class Kind(str, enum.Enum):
    DISSIPATIVE = "Dissipative"
    NOT_DISSIPATIVE = "NotDissipative"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class OracleResult:
    verdict: Kind
    storage: np.ndarray | None = None
    property_value: float | None = None
    outcome: lmi.SolveOutcome | None = field(default=None, repr=False)


def kyp_problem(sys: LtiSystem, supply: SupplyRate) -> lmi.LmiProblem:
    prob = lmi.LmiProblem("kyp")
    P = prob.sym("P", sys.n)
    prob.add(kyp_matrix(sys.A, sys.B, hat_transform(supply, sys.C, sys.D), P), name="kyp")
    return prob


def kyp_check(sys: LtiSystem, supply: SupplyRate,
              settings: lmi.SolverSettings | None = None) -> OracleResult:
    """Model-based dissipativity test: is there ``P = P'`` making the KYP block ``<= 0``?"""
    if not is_controllable(sys):
        warnings.warn("system is not controllable; a negative answer may not be exact",
                      RuntimeWarning, stacklevel=2)
    out = lmi.solve(kyp_problem(sys, supply), settings)
    if out.status.ok:
        return OracleResult(Kind.DISSIPATIVE, out["P"], outcome=out)
    if out.status is lmi.Status.INFEASIBLE:
        return OracleResult(Kind.NOT_DISSIPATIVE, outcome=out)
    return OracleResult(Kind.INCONCLUSIVE, outcome=out)


def _kyp_optimum(sys: LtiSystem, family: SupplyFamily, settings=None):
    prob = lmi.LmiProblem("kyp-opt")
    P = prob.sym("P", sys.n)
    theta = prob.scalar("theta", lower=family.lower)
    prob.add(kyp_matrix(sys.A, sys.B, _family_hat(sys, family, theta), P), name="kyp")
    prob.minimize(theta)
    return lmi.solve(prob, settings)


def _kyp_bisection(sys: LtiSystem, family: SupplyFamily, lo: float, hi: float,
                   tol: float, settings=None) -> float:
    def build(theta):
        return kyp_problem(sys, family.at(theta))

    # expand until the top of the bracket is feasible
    for _ in range(60):
        if lmi.solve(build(hi), settings).status.ok:
            break
        lo, hi = hi, 2 * hi if hi > 0 else 1.0
    return lmi.solve_with_bisection(build, lo, hi, tol, settings).theta


def true_gain(sys: LtiSystem, method: str = "sdp", cross_check: bool = False,
              settings: lmi.SolverSettings | None = None) -> float:
    """L2 gain (H-infinity norm) of a Schur-stable system.

    ``method="sdp"`` minimizes ``gamma^2`` subject to the KYP LMI directly;
    ``method="bisection"`` bisects on :func:`kyp_check` to relative
    tolerance ``1e-4``. With ``cross_check`` the result is compared against
    :func:`hinf_norm_grid` and a disagreement above ``1e-3`` raises.
    """
    if not sys.is_stable():
        raise Unstable(f"spectral radius {sys.spectral_radius():.6g} >= 1")
    if not np.any(sys.B) and not np.any(sys.D):
        return 0.0
    family = l2_gain_family(sys.m, sys.p)
    gamma = None
    if method == "sdp":
        out = _kyp_optimum(sys, family, settings)
        if out.status is lmi.Status.OPTIMAL:
            gamma = family.property_value(out.objective_value)
        else:
            log.warning("direct SDP for the gain returned %s; bisecting", out.status.value)
    if gamma is None:
        ref = hinf_norm_grid(sys)
        theta = _kyp_bisection(sys, family, 0.0, (1.5 * ref + 1e-3) ** 2, 1e-4, settings)
        gamma = family.property_value(theta)
    if cross_check:
        ref = hinf_norm_grid(sys)
        if abs(gamma - ref) > 1e-3 * max(ref, 1e-12):
            raise RuntimeError(f"KYP gain {gamma} disagrees with frequency grid {ref}")
    return gamma


def true_shortage(sys: LtiSystem, method: str = "sdp",
                  settings: lmi.SolverSettings | None = None) -> float:
    """Smallest ``s`` with the system dissipative for ``Q = sI, S = I/2, R = 0``."""
    if sys.m != sys.p:
        raise ValueError("shortage of passivity needs a square system")
    if not sys.is_stable():
        raise Unstable(f"spectral radius {sys.spectral_radius():.6g} >= 1")
    family = shortage_family(sys.m)
    if method == "sdp":
        out = _kyp_optimum(sys, family, settings)
        if out.status is lmi.Status.OPTIMAL:
            return float(out.objective_value)
        log.warning("direct SDP for the shortage returned %s; bisecting", out.status.value)
    ref = shortage_grid(sys)
    lo = ref - 1.0 - abs(ref)
    hi = ref + 1.0 + abs(ref)
    return _kyp_bisection(sys, family, lo, hi, 1e-4, settings)


# --------------------------------------------------------------------------
# frequency-domain oracles
# --------------------------------------------------------------------------

def _grid_max(fun, n_grid: int) -> float:
    """Maximum of ``fun`` over ``[0, pi]``: dense grid plus local refinement."""
    omegas = np.linspace(0.0, np.pi, n_grid)
    vals = np.array([fun(w) for w in omegas])
    best = float(vals.max())
    h = omegas[1] - omegas[0]
    for k in np.argsort(vals)[-5:]:
        a, b = max(0.0, omegas[k] - h), min(np.pi, omegas[k] + h)
        res = scipy.optimize.minimize_scalar(lambda w: -fun(w), bounds=(a, b), method="bounded",
                                             options={"xatol": 1e-12})
        best = max(best, float(-res.fun))
    return best


def hinf_norm_grid(sys: LtiSystem, n_grid: int = 2048) -> float:
    """``max_w sigma_max(G(e^{jw}))`` over a frequency grid with local refinement."""
    return _grid_max(lambda w: float(np.linalg.svd(sys.frequency_response(w), compute_uv=False)[0]),
                     n_grid)


def shortage_grid(sys: LtiSystem, n_grid: int = 2048) -> float:
    """Frequency-domain shortage of passivity.

    At each frequency the smallest admissible ``s`` makes
    ``(G + G^H)/2 + s G^H G`` positive semidefinite, which is the largest
    generalized eigenvalue of the pencil ``(-(G + G^H)/2, G^H G)``.
    """
    if sys.m != sys.p:
        raise ValueError("shortage of passivity needs a square system")

    def s_at(w):
        G = sys.frequency_response(w)
        H = -0.5 * (G + G.conj().T)
        return float(scipy.linalg.eigh(H, G.conj().T @ G, eigvals_only=True)[-1])

    return _grid_max(s_at, n_grid)


# --------------------------------------------------------------------------
# random systems
# --------------------------------------------------------------------------

def random_system(n: int, m: int, p: int, seed: int, spectral_radius_cap: float = 0.95,
                  max_attempts: int = 100) -> LtiSystem:
    """Seeded random stable, controllable system.

    All entries of ``A, B, C, D`` are i.i.d. standard normal; ``A`` is rescaled
    to spectral radius ``cap * r`` with ``r ~ U(0.5, 1)`` whenever its spectral
    radius exceeds the cap. Draws are repeated until ``(A, B)`` is controllable.
    """
    if min(n, m, p) < 1:
        raise ValueError("n, m, p must be positive")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        D = rng.standard_normal((p, m))
        rho = float(np.abs(np.linalg.eigvals(A)).max())
        r = rng.uniform(0.5, 1.0)
        if rho > spectral_radius_cap:
            A = A * (spectral_radius_cap * r / rho)
        sys = LtiSystem(A, B, C, D)
        if is_controllable(sys):
            return sys
    raise RuntimeError(f"no controllable system after {max_attempts} attempts")
