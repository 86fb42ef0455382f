"""Scenario files: loading, validation and experiment execution.

A scenario is a JSON object with ``"schema": 1``, a driver, a grid, a
nonlinearity, a gamma policy and a list of experiments.  Each experiment
writes one artifact under the output directory and contributes an entry
to ``report.json``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attractor as at
from .errors import AttractorLabError, ConfigError, Unsupported
from .hull import DriverSpec, HullPoint, driver_from_json, limit_points
from .io import write_csv, write_json
from .parabolic import Deadzone, Grid, NonlinearitySpec, PurePower, evolve, principal_eigenpair
from .scalar_ode import entire_solution_w0

SCHEMA_VERSION = 1
BUNDLED_DIR = Path(__file__).with_name("scenarios")

_TOP_KEYS = {"schema", "name", "description", "driver", "grid", "nonlinearity", "gamma", "profile_scale", "dt",
             "experiments"}
_GRID_KEYS = {"n_nodes", "length", "bc", "alpha_bar"}
_NONLIN_KEYS = {"pure_power": {"rho", "theta"}, "deadzone": {"rho", "theta", "r0"}}
_COMMON = {"kind", "name", "anchor", "horizons", "tol"}
_EXPERIMENT_KEYS = {
    "theta_sweep": {"thetas", "shift", "criterion_T"},
    "orbit": {"shift", "t_min", "t_max", "dt_sample", "expect_terminal", "terminal_tol", "oracle_tol",
              "crosscheck_tol"},
    "sections": {"shifts", "include_limits", "expect"},
    "spectrum": {"lyapunov_horizons", "shifts", "expect", "spectrum_tol"},
    "trichotomy": {"shifts", "expect_case", "spectrum_horizons", "sign_tol"},
    "decay": {"shift", "t0", "t1", "expect_rate", "rate_tol"},
    "persistence": {"shift", "factors", "t_end", "expect_value", "gap_tol"},
    "equivalence": {"shifts", "include_limits", "horizon", "drivers"},
    "convergence": {"shift", "below", "above", "horizon", "gap_tol"},
}

# Default statement each experiment kind checks; a scenario may override it.
ANCHORS = {
    "theta_sweep": "b(p) is strongly positive iff c(t,p)^(theta-1) is integrable on (-inf,0]",
    "orbit": "t -> b(p.t) is an entire orbit connecting the equilibria over the limit points",
    "sections": "each section b(p) is either identically 0 or strongly positive",
    "spectrum": "principal spectrum equals the range of backward and forward Lyapunov exponents",
    "trichotomy": "the sign pattern of the principal spectrum decides the shape of the attractor",
    "decay": "negative principal spectrum gives exponential decay at the spectral rate",
    "persistence": "positive principal spectrum gives uniform persistence toward b",
    "equivalence": "with a linear zone near 0: b(p)>>0 iff sup c(t,p) over t<=0 is finite iff linear pullback "
                   "norms stay bounded below",
    "convergence": "for sublinear problems every positive solution approaches b(p.t)",
}


def _require_keys(obj: dict, allowed: set, where: str):
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in {where}")


def _number(obj, key, where, default=None, lo=-math.inf, hi=math.inf):
    v = obj.get(key, default)
    if v is None:
        raise ConfigError(f"missing key {key!r} in {where}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    if not lo <= v <= hi:
        raise ConfigError(f"{where}.{key}={v} outside [{lo}, {hi}]")
    return float(v)


def nonlinearity_from_json(obj) -> NonlinearitySpec:
    if not isinstance(obj, dict) or obj.get("kind") not in _NONLIN_KEYS:
        raise ConfigError(f"nonlinearity kind must be one of {sorted(_NONLIN_KEYS)}")
    kind = obj["kind"]
    _require_keys(obj, _NONLIN_KEYS[kind] | {"kind"}, "nonlinearity")
    rho = _number(obj, "rho", "nonlinearity", 1.0, 0.0)
    theta = _number(obj, "theta", "nonlinearity", 3.0, 1.0)
    if kind == "pure_power":
        return PurePower(rho, theta)
    return Deadzone(rho, theta, _number(obj, "r0", "nonlinearity", 0.5, 0.0))


def grid_from_json(obj) -> Grid:
    obj = obj or {}
    if not isinstance(obj, dict):
        raise ConfigError("grid must be an object")
    _require_keys(obj, _GRID_KEYS, "grid")
    n = obj.get("n_nodes", 64)
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError("grid.n_nodes must be an integer")
    return Grid(n, _number(obj, "length", "grid", 1.0, 1e-6), obj.get("bc", "neumann"),
                _number(obj, "alpha_bar", "grid", 0.0, 0.0))


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    problem: at.Problem
    experiments: tuple

    @property
    def driver(self) -> DriverSpec:
        return self.problem.driver


def scenario_from_dict(cfg: dict) -> Scenario:
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a JSON object")
    _require_keys(cfg, _TOP_KEYS, "scenario")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"scenario needs \"schema\": {SCHEMA_VERSION}")
    for key in ("name", "driver", "nonlinearity", "experiments"):
        if key not in cfg:
            raise ConfigError(f"missing key {key!r} in scenario")
    gamma = cfg.get("gamma", "auto")
    if gamma != "auto" and (isinstance(gamma, bool) or not isinstance(gamma, (int, float))):
        raise ConfigError("gamma must be \"auto\" or a number")
    dt = cfg.get("dt")
    if dt is not None:
        dt = _number(cfg, "dt", "scenario", None, 1e-6, 1.0)
    problem = at.Problem(grid_from_json(cfg.get("grid")), driver_from_json(cfg["driver"]),
                         nonlinearity_from_json(cfg["nonlinearity"]), None if gamma == "auto" else float(gamma),
                         _number(cfg, "profile_scale", "scenario", 1.0, 1e-6), dt)
    exps = cfg["experiments"]
    if not isinstance(exps, list) or not exps:
        raise ConfigError("experiments must be a nonempty list")
    names = set()
    for i, e in enumerate(exps):
        if not isinstance(e, dict) or e.get("kind") not in _EXPERIMENT_KEYS:
            raise ConfigError(f"experiments[{i}].kind must be one of {sorted(_EXPERIMENT_KEYS)}")
        _require_keys(e, _EXPERIMENT_KEYS[e["kind"]] | _COMMON, f"experiments[{i}] ({e['kind']})")
        name = e.get("name", e["kind"])
        if name in names:
            raise ConfigError(f"duplicate experiment name {name!r}")
        names.add(name)
        hz = e.get("horizons")
        if hz is not None and (not isinstance(hz, list) or len(hz) < 1
                               or any(b <= a for a, b in zip(hz, hz[1:])) or hz[0] <= 0):
            raise ConfigError(f"experiments[{i}].horizons must be an increasing list of positive numbers")
    return Scenario(str(cfg["name"]), str(cfg.get("description", "")), problem, tuple(exps))


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists() and (BUNDLED_DIR / f"{path.name}.json").exists():
        path = BUNDLED_DIR / f"{path.name}.json"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(cfg)


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.json"))


# ---------------------------------------------------------------- experiments

@dataclass
class Outcome:
    name: str
    kind: str
    anchor: str
    status: str          # "pass", "inconclusive", "fail" or "error"
    artifact: str | None
    summary: dict

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "anchor": self.anchor, "status": self.status,
                "artifact": self.artifact, **self.summary}


def _points(sc: Scenario, shifts, include_limits: bool, driver: DriverSpec | None = None) -> list[HullPoint]:
    d = sc.driver if driver is None else driver
    pts = [HullPoint(d, float(s)) for s in shifts]
    if include_limits:
        try:
            pts += [hp for hp in limit_points(d) if all(hp.label != q.label for q in pts)]
        except Unsupported:
            pass
    return pts


def _horizons(e) -> tuple:
    return tuple(e.get("horizons", at.DEFAULT_HORIZONS))


def _theta_sweep(sc, e, out: Path):
    pr = sc.problem
    if abs(pr.excess) > 1e-12:
        raise ConfigError("theta_sweep needs gamma \"auto\" so the principal cocycle is exp(int a)")
    hp = HullPoint(sc.driver, float(e.get("shift", 0.0)))
    tol = float(e.get("tol", at.DEFAULT_TOL))
    rows, entries, status = [], [], "pass"
    for th in e["thetas"]:
        g = dataclasses.replace(pr.g, theta=float(th))
        predicted = at.integrability_criterion(hp, th, float(e.get("criterion_T", 1e3)), scale=pr.profile_scale)
        sec = at.pullback_boundary(pr.coefficient(hp), g, pr.grid, None, _horizons(e), tol, pr.dt)
        combined, tie = at.combined_classification(sec, predicted)
        want = "StronglyPositive" if predicted else "Trivial"
        ok = combined == want
        if not ok:
            status = "fail"
        rows.append((th, predicted, sec.classification, combined, sec.sup_norm, sec.min_interior, sec.method))
        entries.append({"theta": th, "predicted": want, "computed": sec.classification, "combined": combined,
                        "tie_broken": tie, "sup_norm": sec.sup_norm, "consistent": ok})
    path = out / f"{e.get('name', 'theta_sweep')}.csv"
    write_csv(path, [("theta", "predicted_positive", "classification", "combined", "sup_norm", "min_interior",
                      "method")] + rows)
    return status, path, {"thetas": entries}


def _orbit_oracle(sc: Scenario, hp: HullPoint, times):
    try:
        a0, k = at.scalar_reduction(sc.problem)
    except Unsupported:
        return None
    base = HullPoint(a0, hp.shift)
    th = sc.problem.g.theta
    return np.array([k * entire_solution_w0(base, t, th, tol=1e-10) for t in times])


def _orbit(sc, e, out: Path):
    pr = sc.problem
    hp = HullPoint(sc.driver, float(e.get("shift", 0.0)))
    tr = at.orbit_trace(pr, hp, float(e["t_min"]), float(e["t_max"]), float(e.get("dt_sample", 0.5)),
                        _horizons(e), float(e.get("tol", at.DEFAULT_TOL)))
    path = out / f"{e.get('name', 'orbit')}.csv"
    write_csv(path, tr.to_csv_rows())
    status, summary = "pass", {"section": tr.section.to_json(), "terminal_sup_norm": float(tr.sup_norms[-1])}
    oracle = _orbit_oracle(sc, hp, tr.times)
    if oracle is not None:
        err = float(np.max(np.abs(oracle - tr.sup_norms)))
        summary["oracle_max_error"] = err
        if err > float(e.get("oracle_tol", 1e-2)):
            status = "fail"
    if "expect_terminal" in e:
        dev = abs(tr.sup_norms[-1] - float(e["expect_terminal"]))
        summary["terminal_error"] = dev
        if dev > float(e.get("terminal_tol", 1e-3)):
            status = "fail"
    cross = [abs(a - b) for _, a, b in tr.crosscheck]
    summary["crosscheck_max_gap"] = max(cross) if cross else 0.0
    if cross and max(cross) > float(e.get("crosscheck_tol", 1e-2)):
        status = "fail"
    return status, path, summary


def _sections(sc, e, out: Path):
    pr = sc.problem
    pts = _points(sc, e.get("shifts", [0.0]), bool(e.get("include_limits", True)))
    secs = at.sections(pr, pts, _horizons(e), float(e.get("tol", at.DEFAULT_TOL)))
    # the integrability verdict settles sections left in the gap band
    can_predict = isinstance(pr.g, PurePower) and abs(pr.excess) <= 1e-12
    want = e.get("expect")
    status, payload, classes = "pass", [], {}
    for s in secs:
        entry = s.to_json()
        cls = s.classification
        if cls == "Indeterminate" and can_predict:
            predicted = at.integrability_criterion(s.hull_point, pr.g.theta, scale=pr.profile_scale)
            cls, _ = at.combined_classification(s, predicted)
            entry["combined"] = cls
        if cls == "Indeterminate" and status == "pass":
            status = "inconclusive"
        if want and cls not in (want, "Indeterminate"):
            status = "fail"
        payload.append(entry)
        classes[s.hull_point.label] = cls
    path = out / f"{e.get('name', 'sections')}.json"
    write_json(path, payload)
    return status, path, {"classifications": classes}


def _spectrum(sc, e, out: Path):
    pr = sc.problem
    si = at.principal_interval(pr, tuple(e.get("lyapunov_horizons", (1e3, 1e4))),
                                tuple(e.get("shifts", (-10.0, 0.0, 10.0))))
    status = "pass"
    if "expect" in e:
        lo, hi = e["expect"]
        if max(abs(si.alpha_P - lo), abs(si.lambda_P - hi)) > float(e.get("spectrum_tol", 0.05)):
            status = "fail"
    path = out / f"{e.get('name', 'spectrum')}.json"
    write_json(path, si.to_json())
    return status, path, {"alpha_P": si.alpha_P, "lambda_P": si.lambda_P}


def _trichotomy(sc, e, out: Path):
    pts = _points(sc, e.get("shifts", [-10.0, 0.0, 10.0]), False)
    rep = at.trichotomy_report(sc.problem, pts, _horizons(e), float(e.get("tol", at.DEFAULT_TOL)),
                               tuple(e.get("spectrum_horizons", (1e3, 1e4))), sign_tol=float(e.get("sign_tol", 0.05)))
    status = {"consistent": "pass", "inconclusive": "inconclusive"}.get(rep.verdict, "fail")
    if e.get("expect_case") and rep.case_tag != e["expect_case"]:
        status = "fail"
    path = out / f"{e.get('name', 'trichotomy')}.json"
    write_json(path, rep.to_json())
    return status, path, {"case_tag": rep.case_tag, "verdict": rep.verdict}


def _decay(sc, e, out: Path):
    hp = HullPoint(sc.driver, float(e.get("shift", 0.0)))
    rate = at.measured_decay_rate(sc.problem, hp, float(e.get("t0", 10.0)), float(e.get("t1", 40.0)))
    status = "pass"
    if "expect_rate" in e and abs(rate - float(e["expect_rate"])) > float(e.get("rate_tol", 0.02)):
        status = "fail"
    path = out / f"{e.get('name', 'decay')}.json"
    write_json(path, {"decay_rate": rate})
    return status, path, {"decay_rate": rate}


def _persistence(sc, e, out: Path):
    pr = sc.problem
    hp = HullPoint(sc.driver, float(e.get("shift", 0.0)))
    t_end = float(e.get("t_end", 60.0))
    target = at.pullback_boundary(pr.coefficient(hp.advance(t_end)), pr.g, pr.grid, None, _horizons(e),
                                  float(e.get("tol", at.DEFAULT_TOL)), pr.dt).b_field.values
    e0 = principal_eigenpair(pr.grid)[1].values
    rows, status = [], "pass"
    tol = float(e.get("gap_tol", 1e-3))
    for f in e.get("factors", [0.01, 0.1, 1.0, 5.0]):
        c = pr.coefficient(hp)
        z = float(f) * e0
        dt = pr.dt or at.default_dt(c, pr.g, pr.grid, max(float(np.max(z)), 1.0))
        u = evolve(c, pr.g, pr.grid, z, t_end, dt).values
        gap = float(np.max(np.abs(u - target)))
        rows.append((f, gap))
        if gap > tol:
            status = "fail"
    summary = {"gaps": {str(f): g for f, g in rows}, "b_sup_norm": float(np.max(target))}
    if "expect_value" in e:
        dev = abs(float(np.max(target)) - float(e["expect_value"]))
        summary["b_error"] = dev
        if dev > tol:
            status = "fail"
    path = out / f"{e.get('name', 'persistence')}.csv"
    write_csv(path, [("factor", "gap")] + rows)
    return status, path, summary


def _equivalence(sc, e, out: Path):
    pr = sc.problem
    drivers = [driver_from_json(d) for d in e.get("drivers", [])] or [sc.driver]
    pts = [hp for d in drivers
           for hp in _points(sc, e.get("shifts", [-20.0, 0.0, 20.0]), bool(e.get("include_limits", True)), d)]
    horizon = float(e.get("horizon", 400.0))
    tol = float(e.get("tol", at.DEFAULT_TOL))
    reps = [at.equivalence_report(pr.coefficient(hp), pr.g, pr.grid, hp, horizon, tol, pr.dt) for hp in pts]
    status = "pass" if all(r.agree for r in reps) else "fail"
    path = out / f"{e.get('name', 'equivalence')}.json"
    write_json(path, [r.to_json() for r in reps])
    return status, path, {"n_points": len(reps), "disagreements": [r.hull_point.label for r in reps if not r.agree]}


def _convergence(sc, e, out: Path):
    hp = HullPoint(sc.driver, float(e.get("shift", 0.0)))
    tol = float(e.get("gap_tol", 1e-3))
    cc = at.sublinear_convergence_check(sc.problem, hp, float(e.get("below", 0.5)), float(e.get("above", 2.0)),
                                        float(e.get("horizon", 30.0)), tol, horizons=_horizons(e))
    path = out / f"{e.get('name', 'convergence')}.csv"
    write_csv(path, [("t", "gap_below", "gap_above")] + list(zip(cc.times, cc.gap_below, cc.gap_above)))
    return ("pass" if cc.passed else "fail"), path, {"final_gap_below": float(cc.gap_below[-1]),
                                                     "final_gap_above": float(cc.gap_above[-1])}


_RUNNERS = {"theta_sweep": _theta_sweep, "orbit": _orbit, "sections": _sections, "spectrum": _spectrum,
            "trichotomy": _trichotomy, "decay": _decay, "persistence": _persistence, "equivalence": _equivalence,
            "convergence": _convergence}


def run_experiment(sc: Scenario, e: dict, out: Path) -> Outcome:
    name = e.get("name", e["kind"])
    anchor = e.get("anchor", ANCHORS[e["kind"]])
    try:
        status, path, summary = _RUNNERS[e["kind"]](sc, e, out)
    except (AttractorLabError, ValueError, ArithmeticError) as exc:
        return Outcome(name, e["kind"], anchor, "error", None,
                       {"error": f"{name}: {type(exc).__name__}: {exc}"})
    return Outcome(name, e["kind"], anchor, status, path.name, summary)


def run_scenario(sc: Scenario, out, workers: int | None = None) -> tuple[int, dict]:
    """Run every experiment; returns (exit code, report)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    n = min(at.worker_count() if workers is None else workers, len(sc.experiments))
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            outcomes = list(pool.map(lambda e: run_experiment(sc, e, out), sc.experiments))
    else:
        outcomes = [run_experiment(sc, e, out) for e in sc.experiments]
    statuses = {o.status for o in outcomes}
    code = 1 if statuses & {"fail", "error"} else (2 if "inconclusive" in statuses else 0)
    report = {"scenario": sc.name, "description": sc.description, "exit_code": code,
              "experiments": [o.to_json() for o in outcomes]}
    write_json(out / "report.json", report)
    return code, report
