"""Command-line front end: ``attractor-lab <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import attractor as at
from .cocycle import cocycle_trace, lyapunov, tail_integral
from .errors import AttractorLabError, ConfigError
from .hull import HullPoint, parse_driver
from .io import json_text, write_csv, write_json
from .parabolic import Deadzone, Grid, PurePower, principal_eigenpair
from .scalar_ode import lemma_residual, residual_sample_times
from .scenario import bundled_scenarios, load_scenario, run_scenario

EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hull_point(args) -> HullPoint:
    d = parse_driver(args.driver)
    return HullPoint(d, limit=args.limit) if args.limit is not None else HullPoint(d, args.shift)


def _grid(args) -> Grid:
    return Grid(args.grid_n, 1.0, args.bc, args.alpha_bar)


def _problem(args) -> at.Problem:
    if args.r0 > 0:
        g = Deadzone(args.rho, args.theta, args.r0)
    else:
        g = PurePower(args.rho, args.theta)
    return at.Problem(_grid(args), parse_driver(args.driver), g, args.gamma, args.scale, args.dt)


def _ladder(horizon: float, n: int = 5) -> tuple:
    return tuple(horizon / 2.0 ** k for k in range(n - 1, -1, -1))


def _emit(args, payload: dict):
    text = json_text(payload)
    if args.out:
        write_json(args.out, payload)
    sys.stdout.write(text)


def cmd_run(args) -> int:
    if args.list:
        print("\n".join(bundled_scenarios()))
        return 0
    if not args.config:
        raise ConfigError("run needs a scenario path or bundled scenario name")
    sc = load_scenario(args.config)
    code, report = run_scenario(sc, args.out or f"out/{sc.name}", args.threads)
    for e in report["experiments"]:
        print(f"{e['status']:>12}  {e['name']}  ({e['kind']})")
    print(f"exit {code}")
    return code


def cmd_eigen(args) -> int:
    gamma0, e0 = principal_eigenpair(_grid(args))
    print(f"gamma0 = {gamma0!r}")
    if args.out:
        write_csv(args.out, e0.to_csv_rows(_grid(args)))
    return 0


def cmd_cocycle(args) -> int:
    hp = _hull_point(args)
    est = lyapunov(hp, args.horizon)
    times = np.linspace(-args.horizon, args.horizon, 2001)
    tr = cocycle_trace(hp, times)
    payload = {"hull_point": hp.label, "log_c_minus": float(tr.log_values[0]), "log_c_plus": float(tr.log_values[-1]),
               "lyapunov": dict(zip(("lambda_s_plus", "lambda_i_plus", "lambda_s_minus", "lambda_i_minus"),
                                    est.as_tuple()))}
    if args.out:
        write_csv(args.out, tr.to_csv_rows())
    sys.stdout.write(json_text(payload))
    return 0


def cmd_tail(args) -> int:
    res = tail_integral(_hull_point(args), args.theta - 1.0, args.horizon, args.tol)
    print(f"value = {res.value + res.tail_bound:.10g}  converged = {str(res.converged).lower()}  "
          f"integrable = {str(res.integrable).lower()}")
    if args.out:
        write_json(args.out, res.to_json())
    return 0


def cmd_pullback(args) -> int:
    pr = _problem(args)
    hp = _hull_point(args)
    sec = at.pullback_boundary(pr.coefficient(hp), pr.g, pr.grid, None, _ladder(args.horizon), args.tol, pr.dt)
    _emit(args, sec.to_json())
    return 0 if sec.classification != "Indeterminate" else 2


def cmd_orbit(args) -> int:
    pr = _problem(args)
    tr = at.orbit_trace(pr, _hull_point(args), args.t_min, args.t_max, args.dt_sample, _ladder(args.horizon),
                        args.tol)
    rows = list(tr.to_csv_rows())
    if args.out:
        write_csv(args.out, rows)
    else:
        for t, s in rows[1:]:
            print(f"{t!r},{s!r}")
    return 0


def cmd_trichotomy(args) -> int:
    pr = _problem(args)
    pts = [HullPoint(pr.driver, s) for s in (-10.0, 0.0, 10.0)]
    rep = at.trichotomy_report(pr, pts, _ladder(args.horizon), args.tol)
    _emit(args, rep.to_json())
    return {"consistent": 0, "inconclusive": 2}.get(rep.verdict, 1)


def cmd_verify_lemma(args) -> int:
    hp = _hull_point(args)
    ts = residual_sample_times(hp, -args.span, args.span, args.samples)
    res = lemma_residual(hp, args.theta, ts)
    print(f"max residual = {float(np.max(res)):.3e} over {len(ts)} sample times")
    if args.out:
        write_csv(args.out, [("t", "residual")] + list(zip(ts, res)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="attractor-lab", description="Pullback attractors of scalar non-autonomous "
                                                  "reaction-diffusion equations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, theta=True, grid=False, problem=False, horizon=400.0):
        sp.add_argument("--driver", default="p0", help="p0, p1, p2, constant:<c> or slowgrowth[:beta]")
        sp.add_argument("--shift", type=float, default=0.0)
        sp.add_argument("--limit", type=float, default=None, help="use the limit point with this constant value")
        sp.add_argument("--horizon", type=float, default=horizon)
        sp.add_argument("--tol", type=float, default=1e-5)
        sp.add_argument("--out", default=None)
        if theta:
            sp.add_argument("--theta", type=float, default=3.0)
        if grid:
            sp.add_argument("--grid-n", type=int, default=64)
            sp.add_argument("--bc", choices=("neumann", "robin", "dirichlet"), default="neumann")
            sp.add_argument("--alpha-bar", type=float, default=0.0)
        if problem:
            sp.add_argument("--rho", type=float, default=1.0)
            sp.add_argument("--r0", type=float, default=0.0, help="deadzone half-width; 0 gives a pure power")
            sp.add_argument("--gamma", type=float, default=None, help="offset of h (default: gamma0)")
            sp.add_argument("--scale", type=float, default=1.0, help="factor in front of a(p.t)")
            sp.add_argument("--dt", type=float, default=None)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("config", nargs="?")
    r.add_argument("--out", default=None)
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--list", action="store_true", help="list bundled scenarios")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eigen", help="principal eigenvalue gamma0 of the boundary problem")
    e.add_argument("--grid-n", type=int, default=64)
    e.add_argument("--bc", choices=("neumann", "robin", "dirichlet"), default="neumann")
    e.add_argument("--alpha-bar", type=float, default=0.0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eigen)

    c = sub.add_parser("cocycle", help="log-cocycle trace and Lyapunov exponents")
    common(c, theta=False, horizon=1000.0)
    c.set_defaults(func=cmd_cocycle)

    t = sub.add_parser("tail", help="integral of c^(theta-1) over (-inf, 0]")
    common(t)
    t.set_defaults(func=cmd_tail)

    for name, fn, hlp in (("pullback", cmd_pullback, "upper boundary b(p) by pullback"),
                          ("trichotomy", cmd_trichotomy, "spectral case and consistency report")):
        sp = sub.add_parser(name, help=hlp)
        common(sp, grid=True, problem=True)
        sp.set_defaults(func=fn)

    o = sub.add_parser("orbit", help="sup-norm of b(p.t) along the orbit")
    common(o, grid=True, problem=True)
    o.add_argument("--t-min", type=float, required=True)
    o.add_argument("--t-max", type=float, required=True)
    o.add_argument("--dt-sample", type=float, default=0.5)
    o.set_defaults(func=cmd_orbit)

    v = sub.add_parser("verify-lemma", help="residual of the closed-form scalar solution")
    common(v)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--span", type=float, default=20.0)
    v.set_defaults(func=cmd_verify_lemma)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"attractor-lab: configuration error: {exc}", file=sys.stderr)
        return 1
    except (AttractorLabError, ValueError) as exc:
        print(f"attractor-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
