"""Small LMI modelling layer on top of a conic interior-point solver.

Expressions are affine in a handful of decision variables::

    F(x) = F0 + sum_i x_i F_i

where ``x`` stacks the free entries of every declared variable (upper
triangle of symmetric matrices, plain scalars). Constraints read
``F(x) <= 0`` in the semidefinite order. A problem is lowered to the
standard conic form ``A x + s = b, s in K`` and handed to Clarabel; every
reported solution is re-checked with an eigenvalue decomposition of the
original (unscaled, unreduced) constraint matrices.

Pure feasibility questions are always answered through the max-lambda_min
reformulation::

    minimize t  s.t.  F_j(x) - t I <= 0,  t >= -1

so a positive optimum ``t*`` is an explicit measure of infeasibility and
"infeasible" is never inferred from a solver failure.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import enum
import io
import itertools
import logging
import math
import os
import warnings
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .numerics import nullspace_basis, sym_eig_bounds

log = logging.getLogger(__name__)

_ids = itertools.count()


# --------------------------------------------------------------------------
# variables and affine expressions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Var:
    """Decision variable: a symmetric ``dim x dim`` matrix or a scalar."""

    name: str
    dim: int = 1
    symmetric: bool = False
    lower: float | None = None
    upper: float | None = None
    strict_lower: bool = False
    positive_definite: bool = False
    cap: float | None = None
    uid: int = field(default_factory=lambda: next(_ids))

    @property
    def size(self) -> int:
        return self.dim * (self.dim + 1) // 2 if self.symmetric else 1

    def basis(self) -> np.ndarray:
        if not self.symmetric:
            return np.ones((1, 1, 1))
        d = self.dim
        out = np.zeros((self.size, d, d))
        for k, (i, j) in enumerate(_triu_pairs(d)):
            out[k, i, j] = 1.0
            out[k, j, i] = 1.0
        return out

    def unpack(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        if not self.symmetric:
            return float(vec[0])
        d = self.dim
        out = np.zeros((d, d))
        for k, (i, j) in enumerate(_triu_pairs(d)):
            out[i, j] = out[j, i] = vec[k]
        return out

    def pack(self, value) -> np.ndarray:
        if not self.symmetric:
            return np.array([float(value)])
        a = np.asarray(value, dtype=float)
        return np.array([a[i, j] for i, j in _triu_pairs(self.dim)])


def _triu_pairs(d: int):
    # column-major upper triangle, the order Clarabel uses for PSD cones
    return [(i, j) for j in range(d) for i in range(j + 1)]


class Affine:
    """Matrix-valued affine function of declared variables.

    ``terms`` maps each variable to an array of shape ``(var.size, rows, cols)``
    holding the coefficient matrix of every free parameter.
    """

    __array_ufunc__ = None  # let numpy defer to our reflected operators

    def __init__(self, const, terms: Mapping[Var, np.ndarray] | None = None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.terms: dict[Var, np.ndarray] = dict(terms or {})

    @classmethod
    def of(cls, x) -> "Affine":
        return x if isinstance(x, Affine) else cls(x)

    @classmethod
    def variable(cls, var: Var) -> "Affine":
        return cls(np.zeros((var.dim, var.dim)), {var: var.basis()})

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def variables(self) -> list[Var]:
        return list(self.terms)

    def _combine(self, other, sign: float) -> "Affine":
        other = Affine.of(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms[v] + sign * c if v in terms else sign * c
        return Affine(self.const + sign * other.const, terms)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return Affine(-self.const, {v: -c for v, c in self.terms.items()})

    def __mul__(self, other):
        if np.isscalar(other):
            a = float(other)
            return Affine(a * self.const, {v: a * c for v, c in self.terms.items()})
        mat = np.atleast_2d(np.asarray(other, dtype=float))
        if self.shape != (1, 1):
            raise TypeError("only 1x1 expressions can scale a matrix")
        return Affine(self.const[0, 0] * mat,
                      {v: c[:, 0, 0][:, None, None] * mat for v, c in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Affine):
            raise TypeError("product of two affine expressions is not affine")
        m = np.atleast_2d(np.asarray(other, dtype=float))
        return Affine(self.const @ m, {v: c @ m for v, c in self.terms.items()})

    def __rmatmul__(self, other):
        m = np.atleast_2d(np.asarray(other, dtype=float))
        return Affine(m @ self.const, {v: np.matmul(m, c) for v, c in self.terms.items()})

    @property
    def T(self) -> "Affine":
        return Affine(self.const.T, {v: c.transpose(0, 2, 1) for v, c in self.terms.items()})

    def sym(self) -> "Affine":
        return 0.5 * (self + self.T)

    def is_symmetric(self, rtol: float = 1e-9) -> bool:
        mats = [self.const] + [c for c in self.terms.values()]
        for mat in mats:
            scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
            if not np.allclose(mat, np.swapaxes(mat, -1, -2), rtol=0.0, atol=rtol * scale):
                return False
        return True

    def evaluate(self, values: Mapping) -> np.ndarray:
        """Numerical value; ``values`` maps each variable (or its name) to a value."""
        out = self.const.copy()
        for v, c in self.terms.items():
            val = values[v] if v in values else values[v.name]
            out += np.tensordot(v.pack(val), c, axes=1)
        return out

    def term_scale(self, values: Mapping) -> float:
        """Largest magnitude among the summands of the evaluated expression."""
        s = float(np.abs(self.const).max(initial=0.0))
        for v, c in self.terms.items():
            val = values[v] if v in values else values[v.name]
            xv = v.pack(val)
            mags = np.abs(c).reshape(c.shape[0], -1).max(axis=1, initial=0.0) * np.abs(xv)
            s = max(s, float(mags.max(initial=0.0)))
        return s

    def row_scales(self, values: Mapping) -> np.ndarray:
        """Per-row largest summand magnitude (the row-wise analogue of :meth:`term_scale`)."""
        r = np.abs(self.const).max(axis=1, initial=0.0)
        for v, c in self.terms.items():
            val = values[v] if v in values else values[v.name]
            xv = np.abs(v.pack(val))
            r = np.maximum(r, (np.abs(c).max(axis=2, initial=0.0) * xv[:, None]).max(axis=0, initial=0.0))
        return r


def var_expr(var: Var) -> Affine:
    return Affine.variable(var)


def bmat(blocks) -> Affine | np.ndarray:
    """Assemble a block matrix from arrays and/or affine expressions.

    Returns a plain array when no block depends on a variable, mirroring
    ``np.block``.
    """
    if not any(isinstance(b, Affine) for row in blocks for b in row):
        return np.block([[np.atleast_2d(np.asarray(b, dtype=float)) for b in row]
                         for row in blocks])
    rows = [[Affine.of(b) for b in row] for row in blocks]
    const = np.block([[b.const for b in row] for row in rows])
    allvars: list[Var] = []
    for row in rows:
        for b in row:
            allvars.extend(v for v in b.terms if v not in allvars)
    terms = {}
    for v in allvars:
        row_parts = []
        for row in rows:
            parts = [b.terms.get(v, np.zeros((v.size,) + b.shape)) for b in row]
            row_parts.append(np.concatenate(parts, axis=2))
        terms[v] = np.concatenate(row_parts, axis=1)
    return Affine(const, terms)


def congruence(L, F):
    """``L' F L`` for an array or affine ``F``."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    return L.T @ F @ L


# --------------------------------------------------------------------------
# problem and outcome types
# --------------------------------------------------------------------------

class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"

    @property
    def ok(self) -> bool:
        return self in (Status.FEASIBLE, Status.OPTIMAL)


@dataclass
class Constraint:
    """``expr <= 0`` (``< 0`` if ``strict``).

    ``scale`` is the unit in which tolerances and strict margins are measured;
    by default the largest coefficient of ``expr``.
    """

    expr: Affine
    strict: bool = False
    name: str = ""
    scale: float | None = None

    def coef_scale(self) -> float:
        if self.scale is not None:
            return float(self.scale)
        e = self.expr
        s = max([float(np.abs(e.const).max(initial=0.0))] +
                [float(np.abs(c).max(initial=0.0)) for c in e.terms.values()])
        return s or 1.0


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs; ``from_env`` reads ``DATADISS_*`` overrides."""

    tol_feas: float = 1e-7
    eps_strict: float = 1e-8
    var_cap: float = 1e6
    reduce: bool = True
    max_iter: int = 200
    solver_tol: float = 1e-10
    infeas_tol: float = 1e-7
    refine_rounds: int = 3

    @classmethod
    def from_env(cls, **overrides) -> "SolverSettings":
        env = {
            "tol_feas": "DATADISS_TOL_FEAS",
            "eps_strict": "DATADISS_EPS_STRICT",
            "var_cap": "DATADISS_VAR_CAP",
            "solver_tol": "DATADISS_SOLVER_TOL",
        }
        kw = {k: float(os.environ[e]) for k, e in env.items() if e in os.environ}
        kw.update(overrides)
        return cls(**kw)


DEFAULT_SETTINGS = SolverSettings.from_env()


class LmiProblem:
    """Collection of variables, ``expr <= 0`` constraints and an optional objective.

    >>> prob = LmiProblem()
    >>> p = prob.scalar("p")
    >>> prob.add(bmat([[p - 1.0, 0.0], [0.0, -p]]))
    >>> solve(prob).status.ok
    True
    """

    def __init__(self, name: str = ""):
        self.name = name
        self.variables: list[Var] = []
        self.constraints: list[Constraint] = []
        self.objective: Affine | None = None

    def _declare(self, var: Var) -> Affine:
        if any(v.name == var.name for v in self.variables):
            raise ValueError(f"variable {var.name!r} declared twice")
        self.variables.append(var)
        return Affine.variable(var)

    def sym(self, name: str, dim: int, cap: float | None = None,
            positive_definite: bool = False) -> Affine:
        """Symmetric matrix variable; ``positive_definite`` adds ``P > 0``."""
        return self._declare(Var(name, dim, symmetric=True, cap=cap,
                                 positive_definite=positive_definite))

    def scalar(self, name: str, lower: float | None = None, upper: float | None = None,
               strict_lower: bool = False) -> Affine:
        return self._declare(Var(name, 1, lower=lower, upper=upper, strict_lower=strict_lower))

    def var(self, name: str) -> Var:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def add(self, expr, strict: bool = False, name: str | None = None,
            scale: float | None = None) -> None:
        """Require ``expr <= 0`` (``< 0`` when ``strict``).

        ``scale`` fixes the unit for tolerances and the strict margin. Pass it
        when a family of problems (say, one per value of a parameter) should be
        judged on a common footing; the default follows the coefficients.
        """
        if scale is not None and not scale > 0:
            raise ValueError("scale must be positive")
        expr = Affine.of(expr)
        r, c = expr.shape
        if r != c:
            raise ValueError(f"constraint must be square, got {expr.shape}")
        if not expr.is_symmetric():
            raise ValueError(f"constraint {name!r} is not symmetric")
        for v in expr.terms:
            if v not in self.variables:
                raise ValueError(f"constraint uses undeclared variable {v.name!r}")
        self.constraints.append(Constraint(expr.sym(), strict, name or f"c{len(self.constraints)}",
                                           scale))

    def minimize(self, expr) -> None:
        expr = Affine.of(expr)
        if expr.shape != (1, 1):
            raise ValueError("objective must be scalar")
        self.objective = expr

    def all_constraints(self) -> list[Constraint]:
        """Constraints including the implicit ``P > 0`` ones."""
        out = list(self.constraints)
        for v in self.variables:
            if v.symmetric and v.positive_definite:
                out.append(Constraint(-Affine.variable(v), True, f"{v.name}>0"))
        return out

    def dump(self, fh=None) -> str:
        """Write the problem in SDPA sparse format (``.dat-s``).

        The SDPA primal reads ``min c'x  s.t.  sum_i x_i F_i - F_0 >= 0``; each
        constraint ``G(x) <= 0`` becomes one block with ``F_i = -G_i`` and
        ``F_0 = G_0`` (plus the strictness margin). Scalar bounds go into a
        trailing diagonal block. Comment lines start with ``"``.
        """
        layout = _Layout(self.variables)
        cons = self.all_constraints()
        bounds = _scalar_bounds(self.variables, DEFAULT_SETTINGS)
        out = io.StringIO()
        out.write(f'"datadiss LMI problem {self.name}\n')
        for v in self.variables:
            kind = f"sym {v.dim}x{v.dim}" if v.symmetric else "scalar"
            out.write(f'" x[{layout.offset[v] + 1}..{layout.offset[v] + v.size}] = {v.name} ({kind})\n')
        out.write(f"{layout.n}\n")
        nblocks = len(cons) + (1 if bounds else 0)
        out.write(f"{nblocks}\n")
        sizes = [c.expr.shape[0] for c in cons] + ([-len(bounds)] if bounds else [])
        out.write(" ".join(str(s) for s in sizes) + "\n")
        c = np.zeros(layout.n)
        if self.objective is not None:
            c = layout.flat(self.objective)[1][0]
        out.write(" ".join(f"{x:.17g}" for x in c) + "\n")
        for b, con in enumerate(cons, start=1):
            F0, Fi = layout.flat(con.expr)
            d = con.expr.shape[0]
            margin = 2 * DEFAULT_SETTINGS.eps_strict if con.strict else 0.0
            mats = [F0.reshape(d, d) + margin * np.eye(d)]
            mats += [-Fi[:, k].reshape(d, d) for k in range(layout.n)]
            for k, mat in enumerate(mats):
                for i, j in zip(*np.nonzero(np.triu(mat))):
                    out.write(f"{k} {b} {i + 1} {j + 1} {mat[i, j]:.17g}\n")
        if bounds:
            b = len(cons) + 1
            for r, (idx, sign, rhs) in enumerate(bounds, start=1):
                # sign * x_idx - rhs >= 0
                out.write(f"{idx + 1} {b} {r} {r} {sign:.17g}\n")
                if rhs != 0.0:
                    out.write(f"0 {b} {r} {r} {rhs:.17g}\n")
        text = out.getvalue()
        if fh is not None:
            if isinstance(fh, (str, os.PathLike)):
                with open(fh, "w") as f:
                    f.write(text)
            else:
                fh.write(text)
        return text


@dataclass
class SolveOutcome:
    status: Status
    assignment: dict = field(default_factory=dict)
    objective_value: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name: str):
        return self.assignment[name]


# --------------------------------------------------------------------------
# lowering
# --------------------------------------------------------------------------

class _Layout:
    def __init__(self, variables: list[Var]):
        self.variables = variables
        self.offset: dict[Var, int] = {}
        n = 0
        for v in variables:
            self.offset[v] = n
            n += v.size
        self.n = n

    def flat(self, expr: Affine) -> tuple[np.ndarray, np.ndarray]:
        """``(F0, Fi)`` with ``F0`` flattened and ``Fi`` of shape ``(rows*cols, n)``."""
        r, c = expr.shape
        Fi = np.zeros((r * c, self.n))
        for v, coef in expr.terms.items():
            o = self.offset[v]
            Fi[:, o:o + v.size] = coef.reshape(v.size, r * c).T
        return expr.const.reshape(-1), Fi

    def unpack(self, x: np.ndarray) -> dict:
        return {v.name: v.unpack(x[self.offset[v]:self.offset[v] + v.size]) for v in self.variables}

    def pack(self, assignment: Mapping) -> np.ndarray:
        x = np.zeros(self.n)
        for v in self.variables:
            x[self.offset[v]:self.offset[v] + v.size] = v.pack(assignment[v.name])
        return x


def _svec_index(d: int):
    pairs = _triu_pairs(d)
    rows = np.array([i for i, _ in pairs])
    cols = np.array([j for _, j in pairs])
    w = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return rows, cols, w


def _svec_columns(mats: np.ndarray, d: int) -> np.ndarray:
    """svec of each column (a flattened d x d matrix) of ``mats``."""
    rows, cols, w = _svec_index(d)
    flat_idx = rows * d + cols
    return mats[flat_idx] * w[:, None] if mats.ndim == 2 else mats[flat_idx] * w


def _scalar_bounds(variables: list[Var], settings: SolverSettings):
    """Linear bounds as ``(index, sign, rhs)`` meaning ``sign*x - rhs >= 0``."""
    out = []
    off = 0
    for v in variables:
        if not v.symmetric:
            if v.lower is not None:
                lo = v.lower
                if v.strict_lower:
                    lo += 2 * settings.eps_strict * max(1.0, abs(lo))
                out.append((off, 1.0, lo))
            if v.upper is not None:
                out.append((off, -1.0, -v.upper))
        off += v.size
    return out


@dataclass
class _Block:
    con: Constraint
    basis: np.ndarray | None   # facial-reduction basis (d x r) or None
    scale: float
    F0: np.ndarray             # reduced, normalized, flattened
    Fi: np.ndarray
    dim: int


def _lower_constraint(con: Constraint, layout: _Layout, settings: SolverSettings) -> _Block | None:
    d = con.expr.shape[0]
    F0, Fi = layout.flat(con.expr)
    V = None
    if settings.reduce and not con.strict and d > 1:
        # common kernel of all coefficient matrices: F(x) v = 0 for every x
        stack = np.vstack([F0.reshape(d, d)] + [Fi[:, k].reshape(d, d) for k in range(layout.n)
                                                if np.any(Fi[:, k])])
        K = nullspace_basis(stack, rtol=1e-10)
        if K.shape[1] > 0:
            V = nullspace_basis(K.T)
            F0 = (V.T @ F0.reshape(d, d) @ V).reshape(-1)
            r = V.shape[1]
            Fi = np.stack([(V.T @ Fi[:, k].reshape(d, d) @ V).reshape(-1)
                           for k in range(layout.n)], axis=1) if layout.n else np.zeros((r * r, 0))
            d = r
    if d == 0:
        return None
    if con.scale is not None:
        scale = float(con.scale)
    else:
        scale = max(float(np.abs(F0).max(initial=0.0)), float(np.abs(Fi).max(initial=0.0))) or 1.0
    return _Block(con, V, scale, F0 / scale, Fi / scale, d)


# --------------------------------------------------------------------------
# solving
# --------------------------------------------------------------------------

def _clarabel_solve(q, A, b, cones, settings: SolverSettings):
    import clarabel

    n = A.shape[1]
    P = sp.csc_matrix((n, n))
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = settings.max_iter
    s.tol_gap_abs = settings.solver_tol
    s.tol_gap_rel = settings.solver_tol
    s.tol_feas = settings.solver_tol
    s.tol_ktratio = 1e-8
    solver = clarabel.DefaultSolver(P, np.asarray(q, dtype=float), sp.csc_matrix(A),
                                    np.asarray(b, dtype=float), cones, s)
    sol = solver.solve()
    return sol


def _nonneg_cone(k: int):
    import clarabel

    return clarabel.NonnegativeConeT(k)


def _refined_solve(q, A, b, cones, settings: SolverSettings, accept):
    """Interior-point solve followed by iterative refinement.

    When ``accept(x)`` rejects the returned point, the problem is solved again
    for a correction ``delta`` with ``x = x0 + delta`` (right-hand side
    ``b - A x0``). Large cancelling terms then sit in the constant, computed
    in full precision, and the solver's relative tolerance applies to the
    small correction. Returns ``(status_name, x, iterations, rounds)``.
    """
    sol = _clarabel_solve(q, A, b, cones, settings)
    name = _status_name(sol)
    iters = sol.iterations
    if name not in _SOLVED and name not in _REFINABLE:
        return name, None, iters, 0
    x = np.asarray(sol.x, dtype=float)
    if not np.all(np.isfinite(x)):
        return name, None, iters, 0
    rounds = 0
    while not accept(x) and rounds < settings.refine_rounds:
        rounds += 1
        corr = _clarabel_solve(q, A, b - A @ x, cones, settings)
        cname = _status_name(corr)
        iters += corr.iterations
        dx = np.asarray(corr.x, dtype=float)
        if cname not in _SOLVED and cname not in _REFINABLE or not np.all(np.isfinite(dx)):
            break
        x = x + dx
        name = cname if name not in _SOLVED else name
    return name, x, iters, rounds


def _assemble(problem: LmiProblem, blocks: list[_Block], layout: _Layout,
              settings: SolverSettings, phase_one: bool):
    import clarabel

    n = layout.n + (1 if phase_one else 0)
    t_idx = layout.n
    A_rows, b_rows, cones = [], [], []

    lin = []
    for idx, sign, rhs in _scalar_bounds(problem.variables, settings):
        row = np.zeros(n)
        row[idx] = -sign        # s = sign*x - rhs  ->  A = -sign, b = -rhs
        lin.append((row, -rhs))
    if phase_one:
        row = np.zeros(n)
        row[t_idx] = -1.0
        lin.append((row, 1.0))  # t + 1 >= 0
    if lin:
        A_rows.append(np.array([r for r, _ in lin]))
        b_rows.append(np.array([v for _, v in lin]))
        cones.append(clarabel.NonnegativeConeT(len(lin)))

    for blk in blocks:
        d = blk.dim
        margin = 2 * settings.eps_strict if blk.con.strict else 0.0
        eye = np.eye(d).reshape(-1)
        # -F(x) - margin I (+ t I) in PSD  ->  A = svec(Fi), b = -svec(F0) - margin svec(I)
        Ablk = np.zeros((d * (d + 1) // 2, n))
        Ablk[:, :layout.n] = _svec_columns(blk.Fi, d)
        if phase_one:
            Ablk[:, t_idx] = -_svec_columns(eye, d)
        bblk = -_svec_columns(blk.F0 + margin * eye, d)
        A_rows.append(Ablk)
        b_rows.append(bblk)
        cones.append(clarabel.PSDTriangleConeT(d))

    for v in problem.variables:
        if not v.symmetric:
            continue
        cap = v.cap if v.cap is not None else settings.var_cap
        d = v.dim
        o = layout.offset[v]
        coef = v.basis().reshape(v.size, d * d).T  # (d*d, size)
        for sign in (1.0, -1.0):
            # I - sign P / cap >= 0, kept O(1) so the cap does not inflate the solver's residual norms
            Ablk = np.zeros((d * (d + 1) // 2, n))
            Ablk[:, o:o + v.size] = sign * _svec_columns(coef, d) / cap
            A_rows.append(Ablk)
            b_rows.append(_svec_columns(np.eye(d).reshape(-1), d))
            cones.append(clarabel.PSDTriangleConeT(d))

    A = np.vstack(A_rows) if A_rows else np.zeros((0, n))
    b = np.concatenate(b_rows) if b_rows else np.zeros(0)
    return A, b, cones


_ROUNDING = 64 * np.finfo(float).eps


def _row_scaled_lambda_max(F: np.ndarray, rows: np.ndarray, floor: float) -> float:
    """``lambda_max(D F D)`` with ``D = diag(max(rows, floor))^(-1/2)``.

    ``rows[i]`` is the largest summand magnitude in row ``i``, so the scaled
    matrix has entries of order one wherever the summands are large, whatever
    the magnitudes of the decision variables. Rows below ``floor`` (the
    constraint's coefficient scale) are scaled by ``floor``; there the plain
    eigenvalue is already accurate.
    """
    dinv = 1.0 / np.sqrt(np.maximum(rows, floor))
    return sym_eig_bounds(dinv[:, None] * F * dinv[None, :])[1]


def check_certificate(problem: LmiProblem, assignment: Mapping,
                      settings: SolverSettings | None = None) -> list[dict]:
    """Re-evaluate every constraint at ``assignment`` with a dense eigensolver.

    Tolerances are tied to ``s``, the largest coefficient of the constraint
    (the normalization used by the solver), never to the size of the decision
    variables: a large storage matrix can make a violated LMI look tiny
    relative to its summands. Non-strict constraints need
    ``lambda_max <= tol_feas * s``; strict ones ``lambda_max <= -eps_strict * s``.
    Both must also pass after the diagonal congruence that normalizes every
    row by its largest summand magnitude (``<= tol_feas`` resp. clearly below
    rounding level), so huge multipliers in one block cannot mask another.
    Scalar bounds and matrix caps are reported as well.
    """
    settings = settings or DEFAULT_SETTINGS
    report = []
    for con in problem.all_constraints():
        F = con.expr.evaluate(assignment)
        lam = sym_eig_bounds(F)[1]
        scale = con.expr.term_scale(assignment)
        coef_scale = con.coef_scale()
        lam_rel = _row_scaled_lambda_max(F, con.expr.row_scales(assignment), coef_scale)
        if con.strict:
            tol = -settings.eps_strict * coef_scale
            ok = lam <= tol and lam_rel <= -_ROUNDING * F.shape[0]
        else:
            tol = settings.tol_feas * coef_scale
            ok = lam <= tol and lam_rel <= settings.tol_feas
        report.append({"name": con.name, "lambda_max": lam, "lambda_max_rel": lam_rel,
                       "scale": scale, "tol": tol, "strict": con.strict, "ok": bool(ok)})
    for v in problem.variables:
        val = assignment[v] if v in assignment else assignment[v.name]
        if v.symmetric:
            cap = v.cap if v.cap is not None else settings.var_cap
            nrm = float(np.abs(np.linalg.eigvalsh(val)).max()) if v.dim else 0.0
            report.append({"name": f"|{v.name}|<=cap", "lambda_max": nrm - cap, "scale": cap,
                           "tol": settings.tol_feas * cap, "strict": False,
                           "ok": bool(nrm <= cap * (1 + settings.tol_feas)),
                           "cap_active": bool(nrm >= 0.99 * cap)})
        else:
            if v.lower is not None:
                ok = val > v.lower if v.strict_lower else val >= v.lower - settings.tol_feas * (1 + abs(v.lower))
                report.append({"name": f"{v.name}>=lower", "lambda_max": v.lower - val, "scale": 1.0,
                               "tol": 0.0, "strict": v.strict_lower, "ok": bool(ok)})
            if v.upper is not None:
                ok = val <= v.upper + settings.tol_feas * (1 + abs(v.upper))
                report.append({"name": f"{v.name}<=upper", "lambda_max": val - v.upper, "scale": 1.0,
                               "tol": 0.0, "strict": False, "ok": bool(ok)})
    return report


_SOLVED = {"Solved", "AlmostSolved"}
_REFINABLE = {"InsufficientProgress", "MaxIterations"}


def _status_name(sol) -> str:
    return str(sol.status).split(".")[-1]


def _constant_check(problem: LmiProblem, settings: SolverSettings):
    """Constraints without variables are decided directly; returns a failing one."""
    for con in problem.all_constraints():
        if con.expr.terms:
            continue
        lam = sym_eig_bounds(con.expr.const)[1]
        scale = con.coef_scale()
        bound = -settings.eps_strict * scale if con.strict else settings.tol_feas * scale
        if lam > bound:
            return con, lam
    return None


def solve(problem: LmiProblem, settings: SolverSettings | None = None) -> SolveOutcome:
    """Solve an LMI problem (feasibility or linear objective).

    ``FEASIBLE``/``OPTIMAL`` are only returned when :func:`check_certificate`
    passes. ``INFEASIBLE`` requires a phase-one optimum ``t* > infeas_tol``
    (in normalized units) computed with bounded variables. Everything else is
    ``INCONCLUSIVE``.
    """
    settings = settings or DEFAULT_SETTINGS
    if not problem.all_constraints():
        raise ValueError("problem has no constraints")
    bad = _constant_check(problem, settings)
    if bad is not None:
        con, lam = bad
        return SolveOutcome(Status.INFEASIBLE, diagnostics={
            "reason": f"constant constraint {con.name!r} violated", "lambda_max": lam})

    layout = _Layout(problem.variables)
    blocks = [b for con in problem.all_constraints() if con.expr.terms
              for b in [_lower_constraint(con, layout, settings)] if b is not None]
    diag: dict = {"n_vars": layout.n, "blocks": [b.dim for b in blocks],
                  "reduced": [b.basis is not None for b in blocks]}

    if problem.objective is None:
        return _phase_one(problem, blocks, layout, settings, diag)

    A, b, cones = _assemble(problem, blocks, layout, settings, phase_one=False)
    c0, cflat = layout.flat(problem.objective)
    q = cflat[0]

    def accept(x):
        return all(r["ok"] for r in check_certificate(problem, layout.unpack(x), settings))

    # an optimum sits on the boundary, so refinement would only move along it; _back_off is used instead
    name, x, iters, rounds = _refined_solve(q, A, b, cones, replace(settings, refine_rounds=0), accept)
    diag.update(backend="clarabel", solver_status=name, iterations=iters, refinements=rounds)
    if x is not None:
        assignment = layout.unpack(x)
        report = check_certificate(problem, assignment, settings)
        diag["check"] = report
        obj = float(q @ x + c0[0])
        if all(r["ok"] for r in report):
            _warn_cap(report, diag)
            return SolveOutcome(Status.OPTIMAL, assignment, obj, diag)
        backed = _back_off(problem, blocks, layout, settings, diag, q, c0[0], obj)
        if backed is not None:
            return backed
        diag["reason"] = "a-posteriori check failed"
        return SolveOutcome(Status.INCONCLUSIVE, assignment, obj, diag)
    if name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        feas = _phase_one(problem, blocks, layout, settings, dict(diag))
        diag["phase_one"] = feas.diagnostics.get("phase_one_t")
        if feas.status is Status.INFEASIBLE:
            return SolveOutcome(Status.INFEASIBLE, diagnostics=diag)
        diag["reason"] = "solver reported infeasible but phase one did not confirm"
        return SolveOutcome(Status.INCONCLUSIVE, diagnostics=diag)
    if name in ("DualInfeasible", "AlmostDualInfeasible"):
        diag["unbounded"] = True
        diag["reason"] = "objective unbounded below"
    else:
        diag["reason"] = f"solver status {name}"
    return SolveOutcome(Status.INCONCLUSIVE, diagnostics=diag)


def _warn_cap(report, diag):
    active = [r["name"] for r in report if r.get("cap_active")]
    if active:
        diag["cap_active"] = active
        warnings.warn(f"solution sits at the variable cap for {active}; certificate is suspect",
                      RuntimeWarning, stacklevel=3)


_BACK_OFF = (1e-7, 1e-6, 1e-5, 1e-4)


def _back_off(problem, blocks, layout, settings, diag, q, c0, obj):
    """Certify a point with objective at most ``obj + delta`` for growing ``delta``.

    An interior-point optimum sits on the boundary of the feasible set, so
    its certificate may miss the required margin by solver noise. Maximizing
    the margin under ``objective <= obj + delta`` moves the point inside.
    """
    for rel in _BACK_OFF:
        bound = obj + rel * (1.0 + abs(obj))
        out = _phase_one(problem, blocks, layout, settings, {}, (q, c0, bound))
        if out.status is Status.FEASIBLE:
            value = float(q @ layout.pack(out.assignment) + c0)
            d = dict(diag, **out.diagnostics)
            d.update(back_off=rel, unrefined_objective=obj)
            return SolveOutcome(Status.OPTIMAL, out.assignment, value, d)
    return None


def _phase_one(problem, blocks, layout, settings, diag, objective_bound=None) -> SolveOutcome:
    A, b, cones = _assemble(problem, blocks, layout, settings, phase_one=True)
    if objective_bound is not None:
        # q x + c0 <= bound  ->  bound - c0 - q x >= 0
        qo, c0, bound = objective_bound
        row = np.zeros((1, layout.n + 1))
        row[0, :layout.n] = qo
        A = np.vstack([row, A])
        b = np.concatenate([[bound - c0], b])
        cones = [_nonneg_cone(1)] + list(cones)
    q = np.zeros(layout.n + 1)
    q[layout.n] = 1.0

    def accept(x):
        # refine until certified, or until t is clearly positive (infeasible)
        if x[layout.n] > 10 * settings.infeas_tol:
            return True
        return all(r["ok"] for r in check_certificate(problem, layout.unpack(x[:layout.n]), settings))

    name, x, iters, rounds = _refined_solve(q, A, b, cones, settings, accept)
    diag.update(backend="clarabel", solver_status=name, iterations=iters, refinements=rounds)
    if x is None or (name not in _SOLVED and not rounds):
        diag["reason"] = f"phase-one solver status {name}"
        return SolveOutcome(Status.INCONCLUSIVE, diagnostics=diag)
    t = float(x[layout.n])
    diag["phase_one_t"] = t
    assignment = layout.unpack(x[:layout.n])
    report = check_certificate(problem, assignment, settings)
    diag["check"] = report
    if all(r["ok"] for r in report):
        _warn_cap(report, diag)
        return SolveOutcome(Status.FEASIBLE, assignment, None, diag)
    if t > settings.infeas_tol:
        diag["infeasibility"] = {"phase_one_t": t}
        return SolveOutcome(Status.INFEASIBLE, diagnostics=diag)
    diag["reason"] = "phase-one optimum within tolerance band but check failed"
    return SolveOutcome(Status.INCONCLUSIVE, assignment, None, diag)


# --------------------------------------------------------------------------
# bisection driver
# --------------------------------------------------------------------------

class BracketError(RuntimeError):
    """The bracket contains no feasible parameter value."""


class NonMonotoneError(RuntimeError):
    def __init__(self, msg, probes):
        super().__init__(msg)
        self.probes = probes


@dataclass
class BisectionResult:
    theta: float
    outcome: SolveOutcome
    flag: str = ""
    probes: int = 0


def solve_with_bisection(build: Callable[[float], LmiProblem], lo: float, hi: float,
                         tol: float = 1e-4, settings: SolverSettings | None = None,
                         max_steps: int = 200, verify: bool = True) -> BisectionResult:
    """Smallest ``theta`` in ``[lo, hi]`` for which ``build(theta)`` is feasible.

    Feasibility must be monotone (feasible for every ``theta >= theta*``).
    Stops once the bracket is below ``tol * (1 + |theta|)`` and then probes
    ``theta* +- delta`` and ``theta* + 128 delta``. Inconclusive probes count as "not certified
    feasible", so the result is always a certified upper bound: the lowest
    probe with a verified certificate. ``NonMonotoneError`` is raised only for
    a clear contradiction: a certified-feasible probe more than
    ``100 * tol * (1 + |theta|)`` below a certified-infeasible one.
    """
    settings = settings or DEFAULT_SETTINGS
    probes: list[tuple[float, SolveOutcome]] = []

    def feasible(theta):
        out = solve(build(theta), settings)
        probes.append((theta, out))
        return out.status.ok, out

    ok_hi, out_hi = feasible(hi)
    if not ok_hi:
        raise BracketError(f"upper end {hi} is not feasible ({out_hi.status.value})")
    ok_lo, out_lo = feasible(lo)
    if ok_lo:
        return BisectionResult(lo, out_lo, "lower-end-feasible", len(probes))
    for _ in range(max_steps):
        if hi - lo <= tol * (1 + abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        ok, _ = feasible(mid)
        if ok:
            hi = mid
        else:
            lo = mid
    flag = ""
    if verify:
        delta = tol * (1 + abs(hi))
        ok_up, _ = feasible(hi + delta)
        ok_dn, _ = feasible(hi - delta)
        # outside the noise band, so a certified infeasibility here is a real contradiction
        feasible(hi + 128 * delta)
        if not ok_up:
            flag = "probe above theta* not certified (solver noise at the boundary)"
        if ok_dn:
            flag = "probe below theta* certified; boundary blurred by solver noise"
    feas = [(t, o) for t, o in probes if o.status.ok]
    infeas = [t for t, o in probes if o.status is Status.INFEASIBLE]
    theta, best = min(feas, key=lambda p: p[0])
    # disagreements inside a narrow band are solver noise; beyond it, a bug or a non-monotone family
    if infeas and max(infeas) - theta > 100 * tol * (1 + abs(theta)):
        raise NonMonotoneError(
            f"feasibility not monotone: certified at {theta} but infeasible at {max(infeas)}",
            dict(probes))
    return BisectionResult(theta, best, flag, len(probes))
