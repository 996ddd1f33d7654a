"""Dissipativity certificates computed from one input-state trajectory.

Three routes are available:

* ``nominal`` -- noise-free data; feasibility of ``M(P) <= 0`` is exact when
  ``[X; U]`` has full row rank.
* ``prop1`` -- noisy data with exactly ``N = n + m`` samples; one multiplier
  ``tau`` covers every system consistent with the data and the noise bound.
* ``thm3-fixedG`` -- noisy data of any length; the linear fractional
  representation of the consistent systems is built from the minimum-norm
  right inverse ``G`` of ``[X; U]`` and a strict robust LMI is solved. Sound,
  possibly conservative, and restricted to supplies with ``Q <= 0``.

Estimators minimize the family parameter (``gamma^2`` or ``s``) jointly with
the storage matrix and multiplier in a single SDP; a bisection over the
parameter is the fallback.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
import scipy.linalg as la

from . import lmi
from .data import DataMatrices, NoiseModel, rank_condition
from .model import Kind
from .numerics import as_matrix, right_inverse, NoRightInverse
from .supply import SupplyFamily, SupplyRate

log = logging.getLogger(__name__)

NOMINAL, PROP1, THM3 = "nominal", "prop1", "thm3-fixedG"


class PreconditionError(ValueError):
    """A hypothesis required by the selected certificate does not hold."""


@dataclass
class Verdict:
    kind: Kind
    mode: str
    P: np.ndarray | None = None
    tau: float | None = None
    property_name: str | None = None
    property_value: float | None = None
    theta: float | None = None
    rank_ok: bool = False
    notes: list[str] = field(default_factory=list)
    outcome: lmi.SolveOutcome | None = field(default=None, repr=False)

    @property
    def dissipative(self) -> bool:
        return self.kind is Kind.DISSIPATIVE

    def to_json(self) -> dict:
        diag = {}
        if self.outcome is not None:
            d = self.outcome.diagnostics
            diag = {"status": self.outcome.status.value,
                    **{k: d[k] for k in ("solver_status", "iterations", "phase_one_t", "reason",
                                         "unbounded", "cap_active") if k in d}}
            if "check" in d:
                diag["max_violation"] = max(r["lambda_max"] - r["tol"] for r in d["check"])
        value = self.property_value
        if value is not None and not math.isfinite(value):
            value = None
        return {"kind": self.kind.value, "property": self.property_name, "value": value,
                "P": None if self.P is None else np.asarray(self.P).tolist(),
                "tau": self.tau, "rank_ok": self.rank_ok, "solver": diag, "mode": self.mode,
                "notes": self.notes}


# --------------------------------------------------------------------------
# shared pieces
# --------------------------------------------------------------------------

def output_data(d: DataMatrices, C=None, D=None) -> np.ndarray:
    """``Y = CX + DU`` if ``(C, D)`` are known, otherwise the measured ``Y``."""
    if C is not None and D is not None:
        C, D = as_matrix(C, "C"), as_matrix(D, "D")
        Y = C @ d.X + D @ d.U
        if d.Y is not None:
            scale = max(1.0, float(np.abs(Y).max(initial=0.0)))
            if d.Y.shape != Y.shape or np.abs(d.Y - Y).max() > 1e-6 * scale:
                warnings.warn("measured Y disagrees with C X + D U; using C, D",
                              RuntimeWarning, stacklevel=3)
        return Y
    if d.Y is not None:
        return d.Y
    raise ValueError("need either (C, D) or measured outputs Y")


def supply_blocks(supply, theta=None):
    """``(R, S, Q)`` of a fixed supply, or of ``family.base + theta * family.direction``."""
    if isinstance(supply, SupplyFamily):
        if theta is None:
            raise ValueError("a supply family needs a parameter")
        b, v = supply.base, supply.direction
        return b.R + theta * v.R, b.S + theta * v.S, b.Q + theta * v.Q
    return supply.R, supply.S, supply.Q


def supply_matrix(supply, theta=None):
    R, S, Q = supply_blocks(supply, theta)
    return lmi.bmat([[R, S.T], [S, Q]])


def _dims(supply) -> tuple[int, int]:
    s = supply.base if isinstance(supply, SupplyFamily) else supply
    return s.m, s.p


def build_M(d: DataMatrices, supply, P, C=None, D=None, theta=None):
    """``X+' P X+ - X' P X - [U; Y]' Pi [U; Y]`` for numeric or symbolic ``P``."""
    Y = output_data(d, C, D)
    m, p = _dims(supply)
    if Y.shape[0] != p or d.m != m:
        raise ValueError("supply dimensions do not match the data")
    UY = np.vstack([d.U, Y])
    return d.X_plus.T @ P @ d.X_plus - d.X.T @ P @ d.X - UY.T @ supply_matrix(supply, theta) @ UY


def _probe_delta(theta: float, family: SupplyFamily, tol: float) -> float:
    # gamma^2 +- tol*gamma^2 moves gamma by about tol/2 relative
    if family.parameter == "gamma^2":
        return tol * max(abs(theta), 1e-12)
    return 0.5 * tol * max(1.0, abs(theta))


def _estimate(build, family: SupplyFamily, settings, cross_check: bool, tol: float = 1e-3):
    """Minimize the family parameter over ``build(theta_var)``.

    ``build(theta)`` returns the problem for a float parameter or, with
    ``theta=None``, a problem that declares and minimizes a scalar ``theta``. Returns ``(theta, outcome, notes)`` where ``theta`` is ``inf``
    when no parameter value is certifiable.
    """
    notes: list[str] = []
    prob = build(None)
    out = lmi.solve(prob, settings)
    if out.status is lmi.Status.OPTIMAL:
        theta = float(out["theta"])
        if cross_check:
            delta = _probe_delta(theta, family, tol)
            above = lmi.solve(build(theta + delta), settings)
            below = lmi.solve(build(theta - delta), settings) \
                if family.lower is None or theta - delta >= family.lower else None
            if not above.status.ok:
                notes.append(f"cross-check: not certified at theta*+{delta:.2e}")
            elif below is not None and below.status.ok:
                notes.append(f"cross-check: feasible at theta*-{delta:.2e}; refining by bisection")
                return _bisect(build, family, settings, theta - delta, notes, hint_lo=None)
        return theta, out, notes
    if out.status is lmi.Status.INFEASIBLE:
        notes.append("no parameter value is certifiable (certified infeasible)")
        return math.inf, out, notes
    if out.diagnostics.get("unbounded"):
        notes.append("family is unbounded below")
        return -math.inf, out, notes
    notes.append(f"joint SDP inconclusive ({out.diagnostics.get('reason')}); bisecting")
    return _bisect(build, family, settings, None, notes)


def _bisect(build, family, settings, hint_hi, notes, hint_lo=None, tol=1e-6):
    lo = family.lower if family.lower is not None else (hint_lo if hint_lo is not None else -1.0)
    hi = hint_hi if hint_hi is not None else max(1.0, lo + 1.0)
    # upper end grows x2 until feasible, lower end by -2^k until infeasible
    for _ in range(40):
        if lmi.solve(build(hi), settings).status.ok:
            break
        lo, hi = hi, hi + max(1.0, abs(hi))
    else:
        notes.append("bracket search failed: no feasible parameter found")
        return math.inf, lmi.SolveOutcome(lmi.Status.INCONCLUSIVE), notes
    if family.lower is None:
        k = 0
        while lmi.solve(build(lo), settings).status.ok and k < 40:
            hi, lo = lo, lo - 2.0**k
            k += 1
    try:
        res = lmi.solve_with_bisection(build, lo, hi, tol, settings)
    except lmi.NonMonotoneError as exc:
        notes.append(str(exc))
        return math.inf, lmi.SolveOutcome(lmi.Status.INCONCLUSIVE), notes
    if res.flag:
        notes.append(res.flag)
    res.outcome.assignment.setdefault("theta", res.theta)
    return res.theta, res.outcome, notes


# --------------------------------------------------------------------------
# nominal
# --------------------------------------------------------------------------

def _data_scale(expr: lmi.Affine, certificate_vars) -> float:
    """Largest coefficient of the certificate variables (storage, multiplier).

    Used as the tolerance unit so that problems at different values of the
    property parameter share one yardstick; the parameter's own coefficient
    and the constant part would otherwise shift the margin with the parameter.
    """
    s = max(float(np.abs(expr.terms[v]).max(initial=0.0)) for v in certificate_vars
            if v in expr.terms)
    return s or 1.0


def _add_family_lmi(prob, supply, make, strict, name, certificate_vars=("P", "tau")):
    """Add ``make(supply_or_family, theta)`` for a fixed rate or a free parameter."""
    if isinstance(supply, SupplyFamily) and prob.objective is not None:
        expr = make(supply, lmi.var_expr(prob.var("theta")))
    else:
        expr = make(supply, None)
    cvars = [v for v in prob.variables if v.name in certificate_vars]
    prob.add(expr, strict=strict, name=name, scale=_data_scale(expr, cvars))


def _parametrize(prob, supply, theta):
    """Declare and minimize ``theta`` when estimating; else fix the rate."""
    if theta is None and isinstance(supply, SupplyFamily):
        prob.minimize(prob.scalar("theta", lower=supply.lower))
        return supply
    return supply.at(theta) if isinstance(supply, SupplyFamily) else supply


def _nominal_problem(d, supply, C, D, theta):
    prob = lmi.LmiProblem("nominal")
    P = prob.sym("P", d.n)
    s = _parametrize(prob, supply, theta)
    _add_family_lmi(prob, s, lambda r, th: build_M(d, r, P, C, D, th), False, "M")
    return prob


def certify_nominal(d: DataMatrices, supply: SupplyRate, C=None, D=None,
                    settings: lmi.SolverSettings | None = None) -> Verdict:
    """Decide dissipativity from noise-free data.

    Infeasible means not dissipative; feasible means dissipative provided
    ``[X; U]`` has full row rank, otherwise the answer is inconclusive.
    """
    rank_ok = rank_condition(d)
    out = lmi.solve(_nominal_problem(d, supply, C, D, None), settings)
    v = Verdict(Kind.INCONCLUSIVE, NOMINAL, rank_ok=rank_ok, property_name=supply.name,
                outcome=out)
    if out.status is lmi.Status.INFEASIBLE:
        v.kind = Kind.NOT_DISSIPATIVE
    elif out.status.ok:
        v.P = out["P"]
        if rank_ok:
            v.kind = Kind.DISSIPATIVE
        else:
            v.notes.append("LMI feasible but [X; U] is rank deficient")
    else:
        v.notes.append(f"solver: {out.diagnostics.get('reason')}")
    return v


def estimate_nominal(d: DataMatrices, family: SupplyFamily, C=None, D=None,
                     settings: lmi.SolverSettings | None = None,
                     cross_check: bool = True) -> tuple[float, Verdict]:
    """Optimal property value (``gamma`` or ``s``) from noise-free data."""
    rank_ok = rank_condition(d)
    if not rank_ok:
        v = Verdict(Kind.INCONCLUSIVE, NOMINAL, rank_ok=False, property_name=family.name,
                    notes=["[X; U] is rank deficient; the optimum is not a system property"])
        return math.nan, v
    theta, out, notes = _estimate(lambda th: _nominal_problem(d, family, C, D, th), family,
                                  settings, cross_check)
    return _finish(theta, out, notes, family, NOMINAL, rank_ok)


def _finish(theta, out, notes, family, mode, rank_ok):
    v = Verdict(Kind.INCONCLUSIVE, mode, rank_ok=rank_ok, property_name=family.name,
                theta=theta, notes=notes, outcome=out)
    if math.isfinite(theta) and out.status.ok:
        v.kind = Kind.DISSIPATIVE
        v.property_value = family.property_value(theta)
        v.P = out.assignment.get("P")
        tau = out.assignment.get("tau")
        v.tau = None if tau is None else float(tau)
    else:
        v.property_value = math.inf if theta == math.inf else (
            -math.inf if theta == -math.inf else math.nan)
    return v.property_value, v


# --------------------------------------------------------------------------
# robust, square data
# --------------------------------------------------------------------------

def build_prop1(d: DataMatrices, nm: NoiseModel, Bw, supply, P, tau, C=None, D=None,
                theta=None):
    """Multiplier LMI for square data, coordinates ``(w, data-columns)``."""
    Bw = as_matrix(Bw, "Bw")
    if Bw.shape != (d.n, nm.mw) or nm.N != d.N:
        raise ValueError("Bw / noise model do not match the data")
    M = build_M(d, supply, P, C, D, theta)
    top = Bw.T @ P @ Bw + tau * nm.Qw
    off = -(Bw.T @ P @ d.X_plus) + tau * nm.Sw
    return lmi.bmat([[top, off], [off.T, M + tau * nm.Rw]])


def prop1_preconditioner(d: DataMatrices, nm: NoiseModel, tau: float | None = None) -> np.ndarray:
    """Congruence ``diag(a I, [X; U]^-1)`` applied before solving the square-data LMI.

    The inverse data matrix moves the data columns to ``(x, u)`` coordinates,
    which removes the conditioning of ``[X; U]``; ``a`` balances the noise
    rows (see :func:`_noise_row_scale`). The transformed LMI has the same
    feasible set in ``(P, tau)``.
    """
    a = _noise_row_scale(nm, tau)
    return la.block_diag(a * np.eye(nm.mw), right_inverse(d.XU))


def _noise_row_scale(nm: NoiseModel, tau: float | None) -> float:
    """Scale for the noise rows of a robust LMI.

    For a small noise bound the multiplier ``tau`` is huge and the noise block
    would dwarf the margins that decide feasibility. With ``tau`` fixed the
    rows are scaled by ``(tau |Qw|)^(-1/2)``; with ``tau`` free the typical
    magnitude ``lambda_max(Rw)^(-1/2)`` is assumed.
    """
    q = float(np.abs(nm.Qw).max())
    if tau is not None and q > 0:
        return 1.0 / math.sqrt(tau * q)
    return float(np.linalg.eigvalsh(nm.Rw)[-1]) ** 0.25


def _declare_tau(prob, tau):
    if tau is None:
        return prob.scalar("tau", lower=0.0, strict_lower=True)
    if not tau > 0:
        raise ValueError("tau must be positive")
    return float(tau)


def _prop1_problem(d, nm, Bw, supply, C, D, theta, tau=None):
    prob = lmi.LmiProblem("prop1")
    P = prob.sym("P", d.n)
    t = _declare_tau(prob, tau)
    s = _parametrize(prob, supply, theta)
    T = prop1_preconditioner(d, nm, tau)
    _add_family_lmi(prob, s, lambda r, th: lmi.congruence(
        T, build_prop1(d, nm, Bw, r, P, t, C, D, th)), True, "prop1")
    return prob


def _check_square(d: DataMatrices):
    if d.N != d.n + d.m:
        raise PreconditionError(f"the square-data certificate needs N = n + m = {d.n + d.m} "
                                f"samples, got N = {d.N}; use certify_robust (mode thm3) for other lengths")
    if not rank_condition(d):
        raise PreconditionError("[X; U] must have full rank")


def certify_robust_square(d: DataMatrices, nm: NoiseModel, Bw, supply: SupplyRate,
                          C=None, D=None, settings: lmi.SolverSettings | None = None) -> Verdict:
    """All systems consistent with square data are dissipative with a common storage?"""
    _check_square(d)
    out = _robust_feasibility(lambda tau: _prop1_problem(d, nm, Bw, supply, C, D, None, tau),
                              nm, settings)
    return _robust_verdict(out, PROP1, supply.name)


def estimate_robust_square(d: DataMatrices, nm: NoiseModel, Bw, family: SupplyFamily,
                           C=None, D=None, settings: lmi.SolverSettings | None = None,
                           cross_check: bool = True) -> tuple[float, Verdict]:
    """Smallest family parameter certified for every system consistent with square data."""
    _check_square(d)
    theta, out, notes = _estimate_robust(
        lambda tau: _prop1_problem(d, nm, Bw, family, C, D, None, tau), nm, settings, cross_check)
    return _finish(theta, out, notes, family, PROP1, True)


# --------------------------------------------------------------------------
# multiplier search shared by the robust routes
# --------------------------------------------------------------------------

_TAU_SPAN = 6.0      # decades searched on either side of a default guess
_TAU_SPAN_JOINT = 3.0  # ... and around the multiplier of a joint solution
_TAU_STEP = 1.0
_TAU_RESOLUTION = 0.1  # decades


def _with_tau(out: lmi.SolveOutcome, tau: float) -> lmi.SolveOutcome:
    if out.assignment:
        out.assignment.setdefault("tau", tau)
    out.diagnostics.setdefault("fixed_tau", tau)
    return out


def _tau_center(joint: lmi.SolveOutcome, nm: NoiseModel) -> float:
    tau = joint.assignment.get("tau") if joint.assignment else None
    if tau is not None and np.isfinite(tau) and tau > 0:
        return math.log10(tau)
    return -0.5 * math.log10(float(np.linalg.eigvalsh(nm.Rw)[-1]))


def _robust_feasibility(make, nm, settings) -> lmi.SolveOutcome:
    """Joint search over ``(P, tau)``; on an inconclusive answer retry on a grid of fixed ``tau``."""
    joint = lmi.solve(make(None), settings)
    if joint.status is not lmi.Status.INCONCLUSIVE:
        return joint
    c = _tau_center(joint, nm)
    for lt in c + np.arange(-_TAU_SPAN, _TAU_SPAN + 0.5, _TAU_STEP):
        out = lmi.solve(make(10.0 ** lt), settings)
        if out.status.ok:
            out.diagnostics["note"] = "certified with a fixed multiplier after an inconclusive joint solve"
            return _with_tau(out, 10.0 ** lt)
    return joint


def _estimate_robust(make, nm, settings, refine: bool):
    """Minimize the family parameter over ``(P, tau)``.

    The joint SDP gives a first answer and a multiplier magnitude. Because the
    optimum is typically flat over decades of ``tau`` (and the joint problem
    badly scaled for small noise), the parameter is then minimized for fixed
    multipliers on a logarithmic grid around it, followed by a golden-section
    refinement in ``log10(tau)``; the optimal value is convex in ``tau``. Each
    fixed-``tau`` problem is well scaled. The best certified answer wins.
    """
    notes: list[str] = []
    joint = lmi.solve(make(None), settings)
    cands: list[tuple[float, lmi.SolveOutcome]] = []
    if joint.status is lmi.Status.OPTIMAL:
        cands.append((float(joint["theta"]), joint))
        if not refine:
            return cands[0][0], joint, notes
    elif joint.diagnostics.get("unbounded"):
        notes.append("family is unbounded below")
        return -math.inf, joint, notes
    else:
        notes.append(f"joint SDP {joint.status.value.lower()} "
                     f"({joint.diagnostics.get('reason', 'no reason given')})")

    cache: dict[float, float] = {}

    def value(lt: float) -> float:
        if lt not in cache:
            out = lmi.solve(make(10.0 ** lt), settings)
            if out.status is lmi.Status.OPTIMAL:
                cands.append((float(out["theta"]), _with_tau(out, 10.0 ** lt)))
                cache[lt] = float(out["theta"])
            else:
                cache[lt] = math.inf
        return cache[lt]

    c = _tau_center(joint, nm)
    span = _TAU_SPAN_JOINT if joint.assignment and "tau" in joint.assignment else _TAU_SPAN
    grid = c + np.arange(-span, span + 0.5 * _TAU_STEP, _TAU_STEP)
    vals = [value(lt) for lt in grid]
    k = int(np.argmin(vals))
    if math.isfinite(vals[k]):
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        g = (math.sqrt(5.0) - 1.0) / 2.0
        x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
        while hi - lo > _TAU_RESOLUTION:
            if value(x1) <= value(x2):
                hi, x2 = x2, x1
                x1 = hi - g * (hi - lo)
            else:
                lo, x1 = x1, x2
                x2 = lo + g * (hi - lo)
    if not cands:
        if joint.status is lmi.Status.INFEASIBLE:
            notes.append("no parameter value is certifiable (certified infeasible)")
        else:
            notes.append("no certificate found for any parameter value")
        return math.inf, joint, notes
    theta, out = min(cands, key=lambda c_: c_[0])
    return theta, out, notes


def _robust_verdict(out: lmi.SolveOutcome, mode: str, name) -> Verdict:
    v = Verdict(Kind.INCONCLUSIVE, mode, rank_ok=True, property_name=name, outcome=out)
    if out.status.ok:
        v.kind = Kind.DISSIPATIVE
        v.P = out["P"]
        v.tau = float(out["tau"])
    elif out.status is lmi.Status.INFEASIBLE:
        v.notes.append("robust LMI certified infeasible: the property cannot be guaranteed "
                       "for every system consistent with the data")
    else:
        v.notes.append(f"solver: {out.diagnostics.get('reason')}")
    if mode == THM3:
        v.notes.append("sufficient condition only (superset of consistent systems, fixed G)")
    return v


# --------------------------------------------------------------------------
# robust, fixed right inverse
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LftData:
    """Right inverse ``G`` of ``[X; U]`` and the products the robust LMI needs."""

    G: np.ndarray
    XplusG: np.ndarray
    Bw: np.ndarray
    n: int
    m: int
    mw: int
    N: int

    @classmethod
    def from_data(cls, d: DataMatrices, Bw) -> "LftData":
        Bw = as_matrix(Bw, "Bw")
        try:
            G = right_inverse(d.XU)
        except NoRightInverse as exc:
            raise PreconditionError("[X; U] must have full row rank") from exc
        err = np.abs(d.XU @ G - np.eye(d.n + d.m)).max()
        if err > 1e-10 * max(1.0, np.linalg.cond(d.XU)):
            raise PreconditionError(f"right inverse residual too large ({err:.2e})")
        return cls(G, d.X_plus @ G, Bw, d.n, d.m, Bw.shape[1], d.N)


def build_thm3(lft: LftData, nm: NoiseModel, supply, P, tau, C, D, theta=None):
    """Robust LMI in coordinates ``(x, u, w_tilde)``; required ``< 0``."""
    C, D = as_matrix(C, "C"), as_matrix(D, "D")
    n, m = lft.n, lft.m
    p = C.shape[0]
    E = np.block([[np.zeros((m, n)), np.eye(m)], [C, D]])
    XG, G, Bw = lft.XplusG, lft.G, lft.Bw
    PP = lmi.bmat([[P, np.zeros((n, m))], [np.zeros((m, n)), np.zeros((m, m))]])
    Pi = supply_matrix(supply, theta)
    upper = XG.T @ P @ XG - PP - E.T @ Pi @ E + tau * (G.T @ nm.Rw @ G)
    off = -(XG.T @ P @ Bw) + tau * (G.T @ nm.Sw.T)
    lower = Bw.T @ P @ Bw + tau * nm.Qw
    return lmi.bmat([[upper, off], [off.T, lower]])


def _q_check(supply):
    if isinstance(supply, SupplyFamily):
        if not np.any(supply.direction.Q) and not supply.base.q_nonpositive():
            raise PreconditionError("the fixed-G robust certificate requires Q <= 0")
        return
    if not supply.q_nonpositive():
        raise PreconditionError("the fixed-G robust certificate requires Q <= 0 "
                                "(use the square-data certificate for other supplies)")


def _thm3_problem(lft, nm, supply, C, D, theta, tau=None):
    prob = lmi.LmiProblem("thm3")
    P = prob.sym("P", lft.n, positive_definite=True)
    t = _declare_tau(prob, tau)
    s = _parametrize(prob, supply, theta)
    if isinstance(s, SupplyFamily):
        if np.any(s.direction.Q):
            prob.add(supply_blocks(s, lmi.var_expr(prob.var("theta")))[2], name="Q<=0")
    elif isinstance(supply, SupplyFamily) and np.any(supply.direction.Q):
        prob.add(lmi.Affine(s.Q), name="Q<=0")
    T = la.block_diag(np.eye(lft.n + lft.m), _noise_row_scale(nm, tau) * np.eye(lft.mw))
    _add_family_lmi(prob, s, lambda r, th: lmi.congruence(
        T, build_thm3(lft, nm, r, P, t, C, D, th)), True, "thm3")
    return prob


def _thm3_inputs(d, nm, Bw, C, D):
    if C is None or D is None:
        raise ValueError("the fixed-G robust certificate needs C and D")
    if not rank_condition(d):
        raise PreconditionError("[X; U] must have full row rank")
    if not nm.qw_nonpositive():
        raise PreconditionError("the noise model must have Qw <= 0")
    return LftData.from_data(d, Bw)


def certify_robust(d: DataMatrices, nm: NoiseModel, Bw, supply: SupplyRate, C, D,
                   settings: lmi.SolverSettings | None = None) -> Verdict:
    """Sufficient robust certificate for data of any length (``Q <= 0`` only)."""
    _q_check(supply)
    lft = _thm3_inputs(d, nm, Bw, C, D)
    out = _robust_feasibility(lambda tau: _thm3_problem(lft, nm, supply, C, D, None, tau),
                              nm, settings)
    return _robust_verdict(out, THM3, supply.name)


def estimate_robust(d: DataMatrices, nm: NoiseModel, Bw, family: SupplyFamily, C, D,
                    settings: lmi.SolverSettings | None = None,
                    cross_check: bool = True) -> tuple[float, Verdict]:
    """Smallest family parameter certified by the fixed right-inverse robust LMI."""
    _q_check(family)
    lft = _thm3_inputs(d, nm, Bw, C, D)
    theta, out, notes = _estimate_robust(
        lambda tau: _thm3_problem(lft, nm, family, C, D, None, tau), nm, settings, cross_check)
    value, v = _finish(theta, out, notes, family, THM3, True)
    v.notes.append("sufficient condition only (superset of consistent systems, fixed G)")
    return value, v
