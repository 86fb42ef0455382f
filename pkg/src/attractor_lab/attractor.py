"""Upper boundary b(p) of the pullback attractor and the checks built on it.

b(p) is approximated by u(T, p.(-T), r e0) for T on a horizon ladder,
starting from a multiple of the principal eigenvector above the absorbing
radius.  Classification uses the ladder limit from ``ladder.ladder_limit``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cocycle import SpectralInterval, cocycle_trace, spectrum_estimate, tail_integral
from .errors import MonotonicityViolation, PreconditionFailed, Unsupported
from .hull import DriverSpec, HullPoint, Transformed, limit_points
from .ladder import EPS_POSITIVE, classify_value, ladder_limit
from .parabolic import (Deadzone, FieldState, Grid, LinearCoefficientSpec, NonlinearitySpec, PurePower,
                        evolve, evolve_trajectory, linear_log_norm, max_stable_dt, principal_eigenpair)

__all__ = [
    "DEFAULT_HORIZONS",
    "Problem",
    "AttractorSection",
    "EquivalenceReport",
    "TrichotomyReport",
    "OrbitTrace",
    "ConvergenceCurves",
    "pullback_boundary",
    "sections",
    "integrability_criterion",
    "combined_classification",
    "equivalence_report",
    "case_tag",
    "trichotomy_report",
    "orbit_trace",
    "sublinear_convergence_check",
    "pullback_exponents",
    "worker_count",
    "scalar_reduction",
    "measured_decay_rate",
    "principal_interval",
]

DEFAULT_HORIZONS = (25.0, 50.0, 100.0, 200.0, 400.0)
DEFAULT_TOL = 1e-5


def worker_count() -> int:
    env = os.environ.get("ATTRACTOR_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Problem:
    """y_t = y_xx + (offset + scale * a(p.t)) y + g(y) with a from ``driver``'s hull.

    ``gamma=None`` sets offset to the principal eigenvalue gamma0, so the
    principal cocycle is exp(scale * int a).
    """

    grid: Grid
    driver: DriverSpec
    g: NonlinearitySpec
    gamma: float | None = None
    profile_scale: float = 1.0
    dt: float | None = None

    @property
    def gamma0(self) -> float:
        return principal_eigenpair(self.grid)[0]

    @property
    def offset(self) -> float:
        return self.gamma0 if self.gamma is None else float(self.gamma)

    @property
    def excess(self) -> float:
        """offset - gamma0: constant part of the principal growth rate."""
        return self.offset - self.gamma0

    def coefficient(self, hp: HullPoint) -> LinearCoefficientSpec:
        prof = None if self.profile_scale == 1.0 else np.full(self.grid.n_nodes, float(self.profile_scale))
        return LinearCoefficientSpec(self.offset, hp, prof)

    def point(self, shift: float = 0.0) -> HullPoint:
        return HullPoint(self.driver, shift)

    def principal_log_cocycle(self, hp: HullPoint, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return self.excess * times + self.profile_scale * cocycle_trace(hp, times).log_values

    def growth_rate(self, value: float) -> float:
        """Principal growth rate for a constant driver value."""
        return self.excess + self.profile_scale * value


def scalar_reduction(problem: Problem) -> tuple[DriverSpec, float]:
    """Driver a0 and factor k with y = k w, w' = (a0 w - w^theta)/(theta-1).

    Valid for Neumann grids, spatially constant data and a pure power
    nonlinearity, where the PDE solution stays constant in space.
    """
    g = problem.g
    if problem.grid.bc != "neumann" or not isinstance(g, PurePower):
        raise Unsupported("scalar reduction needs Neumann conditions and a pure power nonlinearity")
    if abs(problem.excess) > 1e-12:
        raise Unsupported("scalar reduction needs the offset to equal gamma0")
    th = g.theta
    k = (g.rho * (th - 1.0)) ** (-1.0 / (th - 1.0))
    return Transformed(problem.driver, (th - 1.0) * problem.profile_scale), k


@dataclass(frozen=True, eq=False)
class AttractorSection:
    hull_point: HullPoint
    b_field: FieldState
    classification: str
    horizon: float
    cauchy_gap: float
    method: str
    raw_sup: float
    increment_ratio: float
    horizons: tuple
    raw_sups: tuple

    @property
    def sup_norm(self) -> float:
        return self.b_field.sup_norm

    @property
    def min_interior(self) -> float:
        return self.b_field.min_interior()

    def to_json(self) -> dict:
        return {"hull_point": self.hull_point.label, "classification": self.classification,
                "sup_norm": self.sup_norm, "min_interior": self.min_interior, "horizon": self.horizon,
                "cauchy_gap": self.cauchy_gap, "method": self.method, "raw_sup_norm": self.raw_sup,
                "raw_sup_norms": list(self.raw_sups)}


def default_dt(coeff, g, grid, r) -> float:
    return min(0.02, 0.5 * max_stable_dt(coeff, g, grid, r))


def _is_positive(b: np.ndarray, grid: Grid) -> bool:
    inner = b[1:-1]
    if grid.bc == "dirichlet":
        e0 = principal_eigenpair(grid)[1].values[1:-1]
        return bool(np.all(inner >= EPS_POSITIVE * e0))
    return bool(np.min(inner) >= EPS_POSITIVE)


def pullback_boundary(coeff: LinearCoefficientSpec, g: NonlinearitySpec, grid: Grid, r: float | None = None,
                      horizons=DEFAULT_HORIZONS, tol: float = DEFAULT_TOL, dt: float | None = None,
                      iterates: list | None = None) -> AttractorSection:
    """b(p) from u(T, p.(-T), r e0) along the horizon ladder.

    Pass a list as ``iterates`` to receive the raw field at every rung.
    """
    horizons = tuple(float(T) for T in horizons)
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be a nonempty increasing list")
    rad = g.absorbing_radius(coeff.h_sup(grid))
    r = rad if r is None else float(r)
    if r < rad:
        raise ValueError(f"r={r:g} is below the absorbing radius {rad:g}")
    e0 = principal_eigenpair(grid)[1].values
    dt = default_dt(coeff, g, grid, r) if dt is None else dt
    fields = []
    for T in horizons:
        f = evolve(coeff.advance(-T), g, grid, r * e0, T, dt).values
        if fields and np.max(f - fields[-1]) > 10 * tol:
            raise MonotonicityViolation(
                f"pullback iterate at T={T:g} exceeds the previous one by {np.max(f - fields[-1]):.3g}")
        fields.append(f)
    if iterates is not None:
        iterates.extend(fields)
    sups = [float(np.max(np.abs(f))) for f in fields]
    lim = ladder_limit(horizons, sups, g.transform_exponent, tol)
    last = fields[-1]
    b = last * (lim.estimate / sups[-1]) if sups[-1] > 0 else last
    cls = classify_value(float(np.max(np.abs(b))), _is_positive(b, grid))
    return AttractorSection(coeff.driver, FieldState(b, grid.bc), cls, horizons[-1], lim.cauchy_gap, lim.method,
                            sups[-1], lim.increment_ratio, horizons, tuple(sups))


def sections(problem: Problem, points, horizons=DEFAULT_HORIZONS, tol: float = DEFAULT_TOL,
             workers: int | None = None) -> list[AttractorSection]:
    """Pullback sections at several hull points; threads do not change the results."""
    def one(hp):
        return pullback_boundary(problem.coefficient(hp), problem.g, problem.grid, None, horizons, tol, problem.dt)

    points = list(points)
    n = min(worker_count() if workers is None else workers, len(points)) or 1
    if n == 1:
        return [one(hp) for hp in points]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(one, points))


def integrability_criterion(hp: HullPoint, theta: float, T: float = 1e3, tol: float = 1e-6,
                            scale: float = 1.0) -> bool:
    """True when c(t, hp)^(theta-1) is integrable on (-inf, 0] per the fitted decay.

    ``scale`` multiplies the driver inside the principal cocycle.
    """
    return tail_integral(hp, (theta - 1.0) * scale, T, tol).integrable


def combined_classification(section: AttractorSection, predicted_positive: bool) -> tuple[str, bool]:
    """Computed class, with Indeterminate resolved by the integrability verdict.

    Returns (classification, tie_broken).
    """
    if section.classification != "Indeterminate":
        return section.classification, False
    return ("StronglyPositive" if predicted_positive else "Trivial"), True


# ---------------------------------------------------------------- equivalences

@dataclass(frozen=True)
class EquivalenceReport:
    hull_point: HullPoint
    section_positive: bool
    cocycle_bounded: bool
    linear_persistent: bool
    classification: str
    details: dict = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return self.section_positive == self.cocycle_bounded == self.linear_persistent

    def to_json(self) -> dict:
        return {"hull_point": self.hull_point.label, "section_positive": self.section_positive,
                "cocycle_bounded": self.cocycle_bounded, "linear_persistent": self.linear_persistent,
                "classification": self.classification, "agree": self.agree, **self.details}


def equivalence_report(coeff: LinearCoefficientSpec, g: NonlinearitySpec, grid: Grid, hp: HullPoint,
                       horizon: float = 400.0, tol: float = DEFAULT_TOL, dt: float | None = None,
                       delta: float = 0.05, n_rungs: int = 5) -> EquivalenceReport:
    """Three finite-horizon verdicts that coincide for deadzone nonlinearities.

    (i)   b(hp) is strongly positive;
    (ii)  sup over t <= 0 of c(t, hp) is finite: its running maximum stops
          growing across the last ladder rung (by less than ``delta`` in log);
    (iii) inf over t >= 0 of |phi(t, hp.(-t)) e0| is positive: the log-norm at
          the last rung is not below the earlier minimum by more than ``delta``.
    """
    if not isinstance(g, Deadzone):
        raise PreconditionFailed("the equivalence only holds when g vanishes on a band around 0")
    if not coeff.is_homogeneous(grid):
        raise PreconditionFailed("the principal cocycle needs a spatially constant profile")
    ladder = tuple(horizon / 2.0 ** k for k in range(n_rungs - 1, -1, -1))
    c = coeff.at(hp)
    sec = pullback_boundary(c, g, grid, None, ladder, tol, dt)
    gamma0, e0 = principal_eigenpair(grid)
    scale = float(coeff.profile_on(grid)[0])
    # (ii) running maximum of the principal log-cocycle on [-T, 0]
    ts = np.union1d(-np.linspace(horizon, 0.0, 8001)[:-1], -np.asarray(ladder))
    L = (c.gamma_offset - gamma0) * ts + scale * cocycle_trace(hp, ts).log_values
    maxima = [max(0.0, float(np.max(L[ts >= -T]))) for T in ladder]
    bounded = maxima[-1] - maxima[-2] <= delta
    # (iii) linear pullback norms
    dtl = dt if dt is not None else min(0.02, 0.5 * max_stable_dt(c, None, grid, 1.0))
    norms = [linear_log_norm(c.advance(-T), grid, e0, T, dtl)[0] for T in ladder]
    persistent = norms[-1] >= min(norms[:-1]) - delta
    return EquivalenceReport(hp, sec.classification == "StronglyPositive", bool(bounded), bool(persistent),
                             sec.classification,
                             {"sup_norm": sec.sup_norm, "log_cocycle_maxima": maxima, "linear_log_norms": norms})


# ---------------------------------------------------------------- trichotomy

def _sign(x: float, tol: float) -> int:
    return -1 if x < -tol else (1 if x > tol else 0)


def case_tag(alpha: float, lam: float, tol: float = 0.05) -> str:
    sa, sl = _sign(alpha, tol), _sign(lam, tol)
    if sl < 0:
        return "s1"
    if sa > 0:
        return "s5"
    if sa < 0:
        return "s2" if sl == 0 else "s3"
    return "s4"


@dataclass(frozen=True)
class TrichotomyReport:
    spectral_interval: SpectralInterval
    case_tag: str
    classifications: dict
    verdict: str
    witnesses: list
    predictions: str
    decay_rate: float | None = None
    uniform_lower_bound: float | None = None

    def to_json(self) -> dict:
        return {"spectral_interval": self.spectral_interval.to_json(), "case_tag": self.case_tag,
                "classifications": self.classifications, "verdict": self.verdict, "witnesses": self.witnesses,
                "predictions": self.predictions, "decay_rate": self.decay_rate,
                "uniform_lower_bound": self.uniform_lower_bound}


def principal_interval(problem: Problem, horizons, shifts) -> SpectralInterval:
    """Spectral interval of the principal cocycle exp(excess * t + scale * int a)."""
    si = spectrum_estimate(problem.driver, horizons, shifts)
    if problem.profile_scale >= 0:
        lo, hi = problem.growth_rate(si.alpha_P), problem.growth_rate(si.lambda_P)
    else:
        lo, hi = problem.growth_rate(si.lambda_P), problem.growth_rate(si.alpha_P)
    return SpectralInterval(lo, hi, si.horizons, si.points)


def measured_decay_rate(problem: Problem, hp: HullPoint, t0: float = 10.0, t1: float = 40.0,
                        z0: float = 1.0, dt: float | None = None) -> float:
    """Slope of log sup|u(t, hp, z0)| on [t0, t1], starting from a constant field.

    The splitting error of the time scheme shifts rates by about dt * h_sup^2 / 2,
    so large offsets (Dirichlet gamma0 = pi^2) get a proportionally smaller step.
    """
    grid = problem.grid
    c = problem.coefficient(hp)
    y0 = np.full(grid.n_nodes, z0)
    if grid.bc == "dirichlet":
        y0[0] = y0[-1] = 0.0
    if dt is None:
        dt = min(0.01 / max(1.0, c.h_sup(grid) ** 2), 0.5 * max_stable_dt(c, problem.g, grid, z0))
    n = max(1, round(0.5 / dt))
    times, snaps = evolve_trajectory(c, problem.g, grid, y0, t1, 0.5 / n, record_every=n)
    sel = (times >= t0 - 1e-9) & (times <= t1 + 1e-9)
    sup = np.max(np.abs(snaps[sel]), axis=1)
    return float(np.polyfit(times[sel], np.log(sup), 1)[0])


def trichotomy_report(problem: Problem, points=None, horizons=DEFAULT_HORIZONS, tol: float = DEFAULT_TOL,
                      spectrum_horizons=(1e3, 1e4), spectrum_shifts=(-10.0, 0.0, 10.0),
                      sign_tol: float = 0.05) -> TrichotomyReport:
    """Case tag from the principal spectrum and a check of its predictions.

    Predictions that can be tested on a finite sample:
      s1  every section is trivial (and the decay rate is measured);
      s5  every section is strongly positive, with a common lower bound;
      s2-s4  at listable limit points (autonomous constant problems) the
          section is positive exactly when the constant growth rate is
          positive, or zero with a deadzone nonlinearity.  In the deadzone
          s2 case at least one sampled section must also be positive.
    """
    si = principal_interval(problem, spectrum_horizons, spectrum_shifts)
    tag = case_tag(si.alpha_P, si.lambda_P, sign_tol)
    pts = list(points) if points is not None else [problem.point(s) for s in spectrum_shifts]
    try:
        limits = limit_points(problem.driver)
    except Unsupported:
        limits = []
    all_pts = pts + [hp for hp in limits if all(hp.label != q.label for q in pts)]
    secs = sections(problem, all_pts, horizons, tol)
    classes = {s.hull_point.label: s.classification for s in secs}
    linear = isinstance(problem.g, Deadzone)
    witnesses, inconclusive = [], []
    decay = lower = None

    def expect(sec, want):
        if sec.classification == "Indeterminate":
            inconclusive.append(sec.hull_point.label)
        elif sec.classification != want:
            witnesses.append(f"{sec.hull_point.label}: expected {want}, computed {sec.classification}")

    if tag == "s1":
        preds = "all sections trivial; exponential decay"
        for s in secs:
            expect(s, "Trivial")
        decay = measured_decay_rate(problem, all_pts[0])
        if decay > si.lambda_P + sign_tol:
            witnesses.append(f"decay rate {decay:.4g} slower than lambda_P={si.lambda_P:.4g}")
    elif tag == "s5":
        preds = "all sections strongly positive with a common lower bound"
        for s in secs:
            expect(s, "StronglyPositive")
        lower = float(min(s.min_interior for s in secs))
    else:
        preds = "limit-point sections follow the sign of their constant growth rate"
        if not limits:
            inconclusive.append("hull not finitely listable")
        for s in secs:
            if s.hull_point.limit is None:
                continue
            rate = problem.growth_rate(s.hull_point.limit)
            sgn = _sign(rate, 1e-12)
            want = "StronglyPositive" if sgn > 0 or (sgn == 0 and linear) else "Trivial"
            expect(s, want)
        if linear and tag == "s2":
            preds += "; some section strongly positive"
            if not any(s.classification == "StronglyPositive" for s in secs):
                inconclusive.append("no strongly positive section found in the sample")
    if witnesses:
        verdict = "inconsistent"
    elif inconclusive:
        verdict = "inconclusive"
        witnesses = [f"undecided: {x}" for x in inconclusive]
    else:
        verdict = "consistent"
    return TrichotomyReport(si, tag, classes, verdict, witnesses, preds, decay, lower)


# ---------------------------------------------------------------- orbits

@dataclass(frozen=True, eq=False)
class OrbitTrace:
    times: np.ndarray
    sup_norms: np.ndarray
    section: AttractorSection
    fields: np.ndarray | None = None
    crosscheck: tuple = ()

    def to_csv_rows(self):
        yield ("t", "sup_norm")
        for t, s in zip(self.times, self.sup_norms):
            yield (t, s)


def orbit_trace(problem: Problem, hp: HullPoint, t_min: float, t_max: float, dt_sample: float,
                horizons=DEFAULT_HORIZONS, tol: float = DEFAULT_TOL, keep_fields: bool = False,
                crosscheck: int = 3) -> OrbitTrace:
    """b(hp.t) for t in [t_min, t_max]: one pullback at t_min, then forward evolution."""
    if t_max <= t_min or dt_sample <= 0:
        raise ValueError("need t_max > t_min and dt_sample > 0")
    start = hp.advance(t_min)
    sec = pullback_boundary(problem.coefficient(start), problem.g, problem.grid, None, horizons, tol, problem.dt)
    c = problem.coefficient(start)
    dt_max = problem.dt or default_dt(c, problem.g, problem.grid, sec.sup_norm)
    sub = max(1, math.ceil(dt_sample / dt_max - 1e-9))
    times, snaps = evolve_trajectory(c, problem.g, problem.grid, sec.b_field, t_max - t_min, dt_sample / sub,
                                     record_every=sub)
    times = times + t_min
    sups = np.max(np.abs(snaps), axis=1)
    checks = []
    if crosscheck:
        for t in np.linspace(t_min, t_max, crosscheck + 2)[1:-1]:
            k = int(np.argmin(np.abs(times - t)))
            ref = pullback_boundary(problem.coefficient(hp.advance(times[k])), problem.g, problem.grid, None,
                                    horizons, tol, problem.dt)
            checks.append((float(times[k]), float(sups[k]), ref.sup_norm))
    return OrbitTrace(times, sups, sec, snaps if keep_fields else None, tuple(checks))


@dataclass(frozen=True, eq=False)
class ConvergenceCurves:
    times: np.ndarray
    gap_below: np.ndarray
    gap_above: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.gap_below[-1] < self.tol and self.gap_above[-1] < self.tol)


def sublinear_convergence_check(problem: Problem, hp: HullPoint, z_below, z_above, horizon: float,
                                tol: float = 1e-3, dt_sample: float = 0.5,
                                horizons=DEFAULT_HORIZONS) -> ConvergenceCurves:
    """Distances from u(t, hp, z_below) and u(t, hp, z_above) to b(hp.t).

    z_below and z_above are fields or factors multiplying b(hp).
    """
    grid, g = problem.grid, problem.g
    sec = pullback_boundary(problem.coefficient(hp), g, grid, None, horizons, DEFAULT_TOL, problem.dt)
    if sec.classification != "StronglyPositive":
        raise PreconditionFailed(f"b({hp.label}) is {sec.classification}, not strongly positive")
    b = sec.b_field.values
    lo = b * z_below if np.isscalar(z_below) else np.asarray(getattr(z_below, "values", z_below), float)
    hi = b * z_above if np.isscalar(z_above) else np.asarray(getattr(z_above, "values", z_above), float)
    inner = slice(1, -1)
    if not (np.all(lo[inner] > 0) and np.all(lo <= b + 1e-12) and np.all(b <= hi + 1e-12)):
        raise PreconditionFailed("initial data must satisfy 0 < z_below <= b <= z_above")
    c = problem.coefficient(hp)
    dt_max = problem.dt or default_dt(c, g, grid, float(np.max(hi)))
    sub = max(1, math.ceil(dt_sample / dt_max - 1e-9))
    dt = dt_sample / sub
    runs = [evolve_trajectory(c, g, grid, z, horizon, dt, record_every=sub) for z in (b, lo, hi)]
    times = runs[0][0]
    ref = runs[0][1]
    tail = np.max(np.abs(ref[len(ref) // 2:]), axis=1)
    if np.max(tail) < EPS_POSITIVE:
        raise PreconditionFailed("forward sup-norms of b along the orbit vanish")
    gap_lo = np.max(np.abs(ref - runs[1][1]), axis=1)
    gap_hi = np.max(np.abs(runs[2][1] - ref), axis=1)
    return ConvergenceCurves(times, gap_lo, gap_hi, tol)


def pullback_exponents(coeff: LinearCoefficientSpec, grid: Grid, z0, horizon: float, n_window: int = 10,
                       dt: float | None = None) -> tuple[float, float]:
    """sup and inf of log|phi(t, p.(-t)) z0| / t over the ladder t = horizon / 2^k."""
    rungs = horizon / 2.0 ** np.arange(n_window)
    dt = dt if dt is not None else min(0.02, 0.5 * max_stable_dt(coeff, None, grid, 1.0))
    vals = [linear_log_norm(coeff.advance(-t), grid, z0, t, dt)[0] / t for t in rungs]
    return float(max(vals)), float(min(vals))
