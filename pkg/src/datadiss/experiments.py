"""Seeded experiment harness: data generation, the two sweeps, CSV and SVG output.

``ex1`` sweeps the noise bound for square data and records the shortage of
passivity estimate; ``ex2`` grows the data length at a fixed per-step noise
bound and records the L2-gain estimate of the fixed right-inverse
certificate. Every record carries its seed and is reproducible from it.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass
import logging
import math
import time
import warnings

import numpy as np

from . import certify, lmi
from .data import Trajectory, build_matrices, ball_noise, rank_condition, unit_noise
from .model import LtiSystem, hinf_norm_grid, random_system, shortage_grid, simulate
from .supply import l2_gain_family, shortage_family

log = logging.getLogger(__name__)

EX1_HEADER = ("seed", "w_bar", "s_hat", "s_true", "status", "ms")
EX2_HEADER = ("seed", "N", "gamma_hat", "gamma_true", "epsilon", "status", "ms")

EX1_DIMS = (4, 2, 2)
EX1_GRID = tuple([1e-9] + [k * 1e-3 for k in range(1, 26)])
EX2_DIMS = (6, 2, 2)
EX2_W_BAR = 1e-3
EX2_LENGTHS = tuple(range(8, 26))

_MAX_REDRAWS = 20


@dataclass
class ExperimentRecord:
    """One certification run of a sweep."""

    seed: int
    system: str
    N: int
    w_bar: float
    property: str
    theta_hat: float
    theta_true: float
    mode: str
    status: str
    ms: float

    @property
    def epsilon(self) -> float:
        """Relative excess ``(theta_hat - theta_true) / theta_true``."""
        if not math.isfinite(self.theta_hat):
            return self.theta_hat
        return (self.theta_hat - self.theta_true) / self.theta_true

    def to_dict(self) -> dict:
        return dict(asdict(self), epsilon=self.epsilon)


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------

def excitation(n: int, m: int, N: int, seed: int, sys: LtiSystem | None = None):
    """Input ``u ~ U(-1, 1)^(N x m)`` and initial state ``x0 ~ U(-1, 1)^n``.

    Drawn from ``default_rng(seed + 100)``. When ``sys`` is given and
    ``N >= n + m``, draws are repeated (at most 20 times) until the noise-free
    ``[X; U]`` has full row rank; the number of redraws is returned.
    """
    rng = np.random.default_rng(seed + 100)
    for redraws in range(_MAX_REDRAWS + 1):
        u = rng.uniform(-1.0, 1.0, (N, m))
        x0 = rng.uniform(-1.0, 1.0, n)
        if sys is None or N < n + m:
            return u, x0, redraws
        x, _ = simulate(sys, x0, u)
        if rank_condition(build_matrices(Trajectory(u, x))):
            if redraws:
                log.info("seed %d: input redrawn %d time(s) for the rank condition", seed, redraws)
            return u, x0, redraws
    raise RuntimeError(f"seed {seed}: rank condition failed after {_MAX_REDRAWS} redraws")


def generate(n: int, m: int, p: int, seed: int, N: int, w_bar: float | None = None,
             per_step: bool = False) -> tuple[LtiSystem, Trajectory]:
    """Random system and one trajectory, deterministic in ``seed``.

    The noise, if any, is ``w_bar`` times a uniform sample of the unit ball
    seeded with ``seed``, so trajectories for different bounds share one
    noise direction.
    """
    sys = random_system(n, m, p, seed)
    u, x0, _ = excitation(n, m, N, seed, sys)
    w = None
    meta = {"seed": int(seed)}
    if w_bar is not None:
        nm = ball_noise(w_bar, N, sys.mw, per_step)
        w = (w_bar * unit_noise(sys.mw, N, per_step, seed)).T
        meta["noise"] = nm.to_json()
    x, y = simulate(sys, x0, u, w)
    return sys, Trajectory(u, x, y, meta)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

def _status(v: certify.Verdict) -> str:
    if v.outcome is None:
        return v.kind.value
    return v.outcome.status.value


def _ex1_seed(seed: int, grid=EX1_GRID, settings=None) -> list[ExperimentRecord]:
    n, m, p = EX1_DIMS
    N = n + m
    sys = random_system(n, m, p, seed)
    s_true = shortage_grid(sys)
    u, x0, _ = excitation(n, m, N, seed, sys)
    W1 = unit_noise(sys.mw, N, False, seed)
    family = shortage_family(m)
    out = []
    for w_bar in grid:
        x, y = simulate(sys, x0, u, (w_bar * W1).T)
        d = build_matrices(Trajectory(u, x, y))
        t0 = time.perf_counter()
        try:
            s_hat, v = certify.estimate_robust_square(d, ball_noise(w_bar, N, sys.mw), sys.Bw,
                                                      family, sys.C, sys.D, settings)
            status = _status(v)
        except (certify.PreconditionError, lmi.NonMonotoneError) as exc:
            s_hat, status = math.nan, f"Error: {exc}"
        ms = 1e3 * (time.perf_counter() - t0)
        out.append(ExperimentRecord(seed, f"random({n},{m},{p})", N, w_bar, "shortage", s_hat,
                                    s_true, certify.PROP1, status, ms))
    return out


def _ex2_seed(seed: int, lengths=EX2_LENGTHS, settings=None) -> list[ExperimentRecord]:
    n, m, p = EX2_DIMS
    sys, traj = generate(n, m, p, seed, max(lengths), EX2_W_BAR, per_step=True)
    g_true = hinf_norm_grid(sys)
    family = l2_gain_family(m, p)
    out = []
    for N in lengths:
        d = build_matrices(traj.head(N))
        t0 = time.perf_counter()
        try:
            g_hat, v = certify.estimate_robust(d, ball_noise(EX2_W_BAR, N, sys.mw, per_step=True),
                                               sys.Bw, family, sys.C, sys.D, settings)
            status = _status(v)
        except (certify.PreconditionError, lmi.NonMonotoneError) as exc:
            g_hat, status = math.nan, f"Error: {exc}"
        ms = 1e3 * (time.perf_counter() - t0)
        out.append(ExperimentRecord(seed, f"random({n},{m},{p})", N, EX2_W_BAR, "l2-gain",
                                    g_hat, g_true, certify.THM3, status, ms))
    return out


_RUNNERS = {"ex1": _ex1_seed, "ex2": _ex2_seed}


def _run_one(name: str, seed: int) -> list[ExperimentRecord]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return _RUNNERS[name](seed)


def run(name: str, seeds, jobs: int = 1) -> list[ExperimentRecord]:
    """Run sweep ``name`` (``"ex1"`` or ``"ex2"``) for every seed.

    Seeds are independent jobs; with ``jobs > 1`` they run in worker
    processes. Records are returned sorted by seed and sweep position, so the
    output does not depend on ``jobs``.
    """
    if name not in _RUNNERS:
        raise ValueError(f"unknown experiment {name!r} (choose ex1 or ex2)")
    seeds = [int(s) for s in seeds]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_one, [name] * len(seeds), seeds))
    else:
        chunks = [_run_one(name, s) for s in seeds]
    order = sorted(range(len(seeds)), key=lambda k: seeds[k])
    return [r for k in order for r in chunks[k]]


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(name: str, records, fh) -> None:
    """CSV with the fixed header of sweep ``name``; non-finite values print as ``inf``/``nan``."""
    w = csv.writer(fh, lineterminator="\n")
    if name == "ex1":
        w.writerow(EX1_HEADER)
        for r in records:
            w.writerow([r.seed, _fmt(r.w_bar), _fmt(r.theta_hat), _fmt(r.theta_true), r.status,
                        f"{r.ms:.1f}"])
    elif name == "ex2":
        w.writerow(EX2_HEADER)
        for r in records:
            w.writerow([r.seed, r.N, _fmt(r.theta_hat), _fmt(r.theta_true), _fmt(r.epsilon),
                        r.status, f"{r.ms:.1f}"])
    else:
        raise ValueError(f"unknown experiment {name!r}")


def write_svg(name: str, records, path) -> None:
    """Line plot with one line per seed (needs matplotlib)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for seed in sorted({r.seed for r in records}):
        rs = [r for r in records if r.seed == seed and math.isfinite(r.theta_hat)]
        if name == "ex1":
            ax.plot([r.w_bar for r in rs], [r.theta_hat for r in rs], marker=".", label=str(seed))
        else:
            ax.plot([r.N for r in rs], [r.epsilon for r in rs], marker=".", label=str(seed))
    if name == "ex1":
        ax.set_xlabel("noise bound w_bar")
        ax.set_ylabel("estimated shortage of passivity")
    else:
        ax.set_xlabel("data length N")
        ax.set_ylabel("relative gain excess epsilon")
    ax.legend(title="seed", fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
