"""Command-line interface: ``datadiss {generate,certify,estimate,oracle,experiment}``.

Exit codes: 0 dissipative (or an optimal value was found), 1 not dissipative,
2 inconclusive, 3 usage or precondition error, 4 unexpected failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from . import certify, experiments, lmi, model
from .data import NoiseModel, Trajectory, ball_noise, build_matrices
from .model import Kind, LtiSystem
from .supply import generic, l2_gain, l2_gain_family, passivity, shortage, shortage_family

EXIT = {Kind.DISSIPATIVE: 0, Kind.NOT_DISSIPATIVE: 1, Kind.INCONCLUSIVE: 2}
EXIT_USAGE, EXIT_FAILURE = 3, 4

ENV_HELP = """\
environment variables (solver tolerances):
  DATADISS_TOL_FEAS    acceptance tolerance of non-strict LMIs, relative to the
                       constraint's coefficient scale (default 1e-7)
  DATADISS_EPS_STRICT  margin required of strict LMIs (default 1e-8)
  DATADISS_VAR_CAP     bound on the spectral norm of matrix variables (default 1e6)
  DATADISS_SOLVER_TOL  interior-point gap and feasibility tolerance (default 1e-10)
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "inconclusive"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=1)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def _supply(args, m: int, p: int):
    prop = args.property
    if prop == "l2-gain":
        if args.gamma is None:
            raise UsageError("--property l2-gain needs --gamma")
        return l2_gain(args.gamma, m, p)
    if prop in ("passivity", "shortage") and m != p:
        raise UsageError(f"{prop} needs as many outputs as inputs (m={m}, p={p})")
    if prop == "passivity":
        return passivity(m)
    if prop == "shortage":
        if args.s is None:
            raise UsageError("--property shortage needs --s")
        return shortage(args.s, m)
    if args.supply is None:
        raise UsageError("--property generic needs --supply FILE with Q, S, R")
    obj = json.loads(Path(args.supply).read_text())
    return generic(obj["Q"], obj["S"], obj["R"])


def _family(args, m: int, p: int):
    if args.property == "l2-gain":
        return l2_gain_family(m, p)
    if args.property == "shortage":
        if m != p:
            raise UsageError(f"shortage needs as many outputs as inputs (m={m}, p={p})")
        return shortage_family(m)
    raise UsageError("estimate supports --property l2-gain or shortage")


def _noise(args, traj: Trajectory, mw: int) -> NoiseModel | None:
    if args.noise_bound is not None:
        return ball_noise(args.noise_bound, traj.N, mw, args.per_step)
    spec = traj.meta.get("noise")
    if spec is None:
        return None
    if spec.get("type") != "ball":
        raise UsageError(f"unsupported noise description {spec!r}")
    return ball_noise(float(spec["wbar"]), traj.N, mw, bool(spec.get("per_step", False)))


def _load_problem(args):
    traj = Trajectory.load(args.data)
    d = build_matrices(traj)
    sysm = LtiSystem.load(args.system) if args.system else None
    C = D = None
    Bw = np.eye(d.n)
    if sysm is not None:
        if sysm.n != d.n or sysm.m != d.m:
            raise UsageError("system file dimensions do not match the data")
        C, D, Bw = sysm.C, sysm.D, sysm.Bw
    p = C.shape[0] if C is not None else (d.Y.shape[0] if d.Y is not None else None)
    if p is None:
        raise UsageError("the data have no outputs; pass --system for C and D")
    return traj, d, C, D, Bw, p


def _mode(args, d) -> str:
    if not args.robust:
        return certify.NOMINAL
    if args.mode:
        return certify.PROP1 if args.mode == "prop1" else certify.THM3
    return certify.PROP1 if d.N == d.n + d.m else certify.THM3


def _robust_inputs(args, traj, d, C, D, Bw, mode):
    nm = _noise(args, traj, Bw.shape[1])
    if nm is None:
        raise UsageError("robust mode needs a noise bound (--noise-bound or a 'noise' entry "
                         "in the data file)")
    if mode == certify.THM3 and (C is None or D is None):
        raise UsageError("mode thm3 needs --system for C and D")
    return nm


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if min(args.n, args.m, args.p) < 1 or args.len < 1:
        raise UsageError("--n, --m, --p and --len must be positive")
    if args.noise_bound is not None and not args.noise_bound > 0:
        raise UsageError("--noise-bound must be positive; use a small positive bound such as "
                         "1e-9 to approximate noise-free data")
    if args.len < args.n + args.m:
        print(f"warning: --len {args.len} is below n + m = {args.n + args.m}; [X; U] cannot "
              "have full row rank and the square-data certificate needs N = n + m",
              file=sys.stderr)
    sysm, traj = experiments.generate(args.n, args.m, args.p, args.seed, args.len,
                                      args.noise_bound, args.per_step)
    out = Path(args.out)
    system_out = Path(args.system_out) if args.system_out else out.with_name(
        out.stem + ".system.json")
    traj.save(out)
    sysm.save(system_out)
    print(json.dumps({"data": str(out), "system": str(system_out)}))
    return 0


def cmd_certify(args) -> int:
    traj, d, C, D, Bw, p = _load_problem(args)
    supply = _supply(args, d.m, p)
    mode = _mode(args, d)
    if mode == certify.NOMINAL:
        v = certify.certify_nominal(d, supply, C, D)
    else:
        nm = _robust_inputs(args, traj, d, C, D, Bw, mode)
        if mode == certify.PROP1:
            v = certify.certify_robust_square(d, nm, Bw, supply, C, D)
        else:
            v = certify.certify_robust(d, nm, Bw, supply, C, D)
    _dump(v.to_json(), args.out)
    return EXIT[v.kind]


def cmd_estimate(args) -> int:
    traj, d, C, D, Bw, p = _load_problem(args)
    family = _family(args, d.m, p)
    mode = _mode(args, d)
    cc = not args.no_cross_check
    if mode == certify.NOMINAL:
        _, v = certify.estimate_nominal(d, family, C, D, cross_check=cc)
    else:
        nm = _robust_inputs(args, traj, d, C, D, Bw, mode)
        if mode == certify.PROP1:
            _, v = certify.estimate_robust_square(d, nm, Bw, family, C, D, cross_check=cc)
        else:
            _, v = certify.estimate_robust(d, nm, Bw, family, C, D, cross_check=cc)
    _dump(v.to_json(), args.out)
    return EXIT[v.kind]


def cmd_oracle(args) -> int:
    sysm = LtiSystem.load(args.system)
    result = {"property": args.property}
    kind = Kind.DISSIPATIVE
    if args.property == "l2-gain" and args.gamma is None:
        result.update(value=model.true_gain(sysm), grid_value=model.hinf_norm_grid(sysm))
    elif args.property == "shortage" and args.s is None:
        result.update(value=model.true_shortage(sysm), grid_value=model.shortage_grid(sysm))
    else:
        res = model.kyp_check(sysm, _supply(args, sysm.m, sysm.p))
        kind = res.verdict
        result.update(kind=kind.value,
                      P=None if res.storage is None else res.storage.tolist())
    _dump(result, args.out)
    return EXIT[kind]


def _seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def cmd_experiment(args) -> int:
    records = experiments.run(args.name, args.seeds, jobs=args.jobs)
    if args.out == "-":
        experiments.write_csv(args.name, records, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            experiments.write_csv(args.name, records, fh)
    if args.svg:
        experiments.write_svg(args.name, records, args.svg)
    bad = [r for r in records if math.isnan(r.theta_hat)]
    if bad:
        print(f"{len(bad)} run(s) without a result; see the status column", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _property_args(p, values: bool = True):
    p.add_argument("--property", required=True,
                   choices=["l2-gain", "passivity", "shortage", "generic"])
    if values:
        p.add_argument("--gamma", type=float, help="gain bound for l2-gain")
        p.add_argument("--s", type=float, help="shortage value for shortage")
        p.add_argument("--supply", help="JSON file with Q, S, R for generic")


def _data_args(p):
    p.add_argument("--data", required=True, help="trajectory JSON")
    p.add_argument("--system", help="system JSON supplying C, D and Bw")
    p.add_argument("--robust", action="store_true", help="treat the states as noisy")
    p.add_argument("--mode", choices=["prop1", "thm3"],
                   help="robust certificate: prop1 (square data, N = n + m) or thm3 "
                        "(fixed right inverse, any N, Q <= 0); default picks by N")
    p.add_argument("--noise-bound", type=float, help="override the noise bound w_bar")
    p.add_argument("--per-step", action="store_true", help="noise bound holds per time step")
    p.add_argument("--out", help="also write the verdict JSON here")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="datadiss", description="Dissipativity certificates from "
                     "input-state data.", epilog=ENV_HELP, formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="random system and trajectory", epilog=ENV_HELP,
                       formatter_class=fmt)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--len", type=int, required=True, help="number of samples N")
    g.add_argument("--noise-bound", type=float, help="ball noise bound w_bar > 0")
    g.add_argument("--per-step", action="store_true", help="bound every w_k instead of W")
    g.add_argument("--out", default="data.json", help="trajectory JSON (default data.json)")
    g.add_argument("--system-out", help="system JSON (default <out stem>.system.json)")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("certify", help="decide a fixed supply rate", epilog=ENV_HELP,
                       formatter_class=fmt)
    _data_args(c)
    _property_args(c)
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("estimate", help="optimal gain or shortage of passivity",
                       epilog=ENV_HELP, formatter_class=fmt)
    _data_args(e)
    e.add_argument("--property", required=True, choices=["l2-gain", "shortage"])
    e.add_argument("--no-cross-check", action="store_true",
                   help="skip the fixed-multiplier refinement and probes")
    e.set_defaults(func=cmd_estimate)

    o = sub.add_parser("oracle", help="model-based ground truth", epilog=ENV_HELP,
                       formatter_class=fmt)
    o.add_argument("--system", required=True, help="system JSON")
    _property_args(o)
    o.add_argument("--out", help="also write the JSON here")
    o.set_defaults(func=cmd_oracle)

    x = sub.add_parser("experiment", help="seeded sweeps ex1 / ex2 to CSV", epilog=ENV_HELP,
                       formatter_class=fmt)
    x.add_argument("name", choices=["ex1", "ex2"])
    x.add_argument("--seeds", type=_seeds, default=list(range(10)),
                   help="e.g. 0-9 or 1,4,7 (default 0-9)")
    x.add_argument("--out", default="-", help="CSV path (default standard output)")
    x.add_argument("--svg", help="also write a line plot (needs matplotlib)")
    x.add_argument("--jobs", type=int, default=1, help="worker processes")
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError, KeyError) as exc:
        print(f"datadiss {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (lmi.NonMonotoneError, RuntimeError) as exc:
        print(f"datadiss {args.command}: failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
