"""Scalar dissipative equation w' = (a(p.t) w - w^theta) / (theta - 1).

With v = w^(1 - theta) the equation becomes linear, v' = -a v + 1, whose
bounded solution is v(t) = int_{-inf}^t exp(-int_s^t a) ds whenever that
integral converges.  This gives a closed-form entire solution used as the
oracle for the spatially homogeneous PDE.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import tail_integral
from .errors import DivergentTail, InconclusiveFit, MonotonicityViolation, NegativeInitialCondition
from .hull import HullPoint
from .ladder import EPS_POSITIVE, EPS_TRIVIAL, ladder_limit

__all__ = [
    "ScalarProblem",
    "Trajectory",
    "ScalarAttractor",
    "absorbing_radius",
    "closed_form_v",
    "entire_solution_w0",
    "integrate_scalar",
    "integrate_v",
    "pullback_bstar",
    "lemma_residual",
    "residual_sample_times",
]

DEFAULT_HORIZONS = (25.0, 50.0, 100.0, 200.0, 400.0)


@dataclass(frozen=True)
class ScalarProblem:
    theta: float
    driver: HullPoint

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError("theta must exceed 1")

    def rhs(self, t: float, w: float) -> float:
        return (self.driver.evaluate(t) * w - abs(w) ** (self.theta - 1.0) * w) / (self.theta - 1.0)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def to_csv_rows(self):
        yield ("t", "w")
        for t, w in zip(self.times, self.values):
            yield (t, w)


@dataclass(frozen=True)
class ScalarAttractor:
    hull_point: HullPoint
    b_star: float
    horizon: float
    cauchy_gap: float
    classification: str
    method: str
    horizons: tuple
    raw_values: tuple

    def to_json(self) -> dict:
        return {"hull_point": self.hull_point.label, "b_star": self.b_star, "horizon": self.horizon,
                "cauchy_gap": self.cauchy_gap, "classification": self.classification,
                "method": self.method, "raw_values": list(self.raw_values)}


def absorbing_radius(sp: ScalarProblem) -> float:
    return (2.0 * sp.driver.bound()) ** (1.0 / (sp.theta - 1.0)) + 1.0


# ---------------------------------------------------------------- closed form

def _v_and_T(hp: HullPoint, t: float, tol: float, step: float, T: float | None, T_max: float):
    hpt = hp.advance(t)
    if T is not None:
        res = tail_integral(hpt, 1.0, T, tol, step)
        if not res.integrable:
            raise DivergentTail(f"exp(int a) is not integrable on (-inf, 0] for {hpt.label}")
        return res.value + res.tail_bound, T
    T, prev, diverging = 64.0, None, 0
    while T <= T_max:
        try:
            res = tail_integral(hpt, 1.0, T, tol, step)
        except InconclusiveFit:
            res, prev = None, None
        if res is not None:
            if res.integrable:
                est = res.value + res.tail_bound
                if res.converged or (prev is not None and abs(est - prev) <= tol):
                    return est, T
                prev, diverging = est, 0
            else:
                diverging += 1
                if diverging >= 2:
                    break
        T *= 4.0
    raise DivergentTail(f"exp(int a) is not integrable on (-inf, 0] for {hpt.label}")


def closed_form_v(hp: HullPoint, t: float, tol: float = 1e-8, step: float = 0.01,
                  T: float | None = None, T_max: float = 2.0 ** 22) -> float:
    """v(t) = int_{-inf}^t exp(-int_s^t a(hp.r) dr) ds.

    The truncation T grows until the model tail is below tol or two
    successive estimates agree; pass T to pin it.
    """
    return _v_and_T(hp, t, tol, step, T, T_max)[0]


def entire_solution_w0(hp: HullPoint, t: float, theta: float, tol: float = 1e-8, **kw) -> float:
    return closed_form_v(hp, t, tol, **kw) ** (1.0 / (1.0 - theta))


def residual_sample_times(hp: HullPoint, lo: float, hi: float, n: int = 200, margin: float = 0.01) -> np.ndarray:
    """n evenly spread times in [lo, hi], nudged at least ``margin`` away from breakpoints of a.

    The finite-difference stencil loses accuracy across a kink of a.
    """
    ts = np.linspace(lo, hi, n)
    for b in _breaks(hp):
        near = np.abs(ts - b) < margin
        ts[near] = b + np.where(ts[near] >= b, margin, -margin)
    return ts


def lemma_residual(hp: HullPoint, theta: float, times, h: float = 1e-3, tol: float = 1e-10,
                   step: float = 0.01) -> np.ndarray:
    """|w0' - (a w0 - w0^theta)/(theta-1)| with w0' from a five-point central stencil."""
    out = []
    for t in np.asarray(times, dtype=float):
        _, T = _v_and_T(hp, t, tol, step, None, 2.0 ** 22)
        w = {k: closed_form_v(hp, t + k * h, tol, step, T=T) ** (1.0 / (1.0 - theta)) for k in (-2, -1, 0, 1, 2)}
        dw = (-w[2] + 8 * w[1] - 8 * w[-1] + w[-2]) / (12 * h)
        f = (hp.evaluate(t) * w[0] - w[0] ** theta) / (theta - 1.0)
        out.append(abs(dw - f))
    return np.array(out)


# ---------------------------------------------------------------- integration

def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(f, y0, t0, t1, out_times, max_step, breakpoints=(), rtol=1e-10, atol=1e-13,
               nonnegative=False):
    """Adaptive RK4 with step doubling; lands exactly on out_times and breakpoints."""
    stops = sorted(set([float(x) for x in out_times] + [b for b in breakpoints if t0 < b < t1] + [t1]))
    want = set(float(x) for x in out_times)
    res = {t0: y0} if t0 in want else {}
    t, y, h = t0, float(y0), min(max_step, max(t1 - t0, 1e-12))
    for stop in stops:
        if stop <= t:
            continue
        while t < stop:
            hs = min(h, stop - t)
            big = _rk4_step(f, t, y, hs)
            half = _rk4_step(f, t + hs / 2, _rk4_step(f, t, y, hs / 2), hs / 2)
            err = abs(half - big) / 15.0
            scale = atol + rtol * abs(half)
            new = half + (half - big) / 15.0
            sign_flip = nonnegative and y >= 0 and new < 0
            fac = 4.0 if err == 0 else min(4.0, max(0.2, 0.9 * (scale / err) ** 0.2))
            if (err <= scale and not sign_flip) or hs <= 1e-12:
                t = stop if hs >= stop - t else t + hs
                y = max(new, 0.0) if sign_flip else new
            elif sign_flip:
                fac = min(fac, 0.5)
            h = min(max_step, hs * fac)
        if stop in want:
            res[stop] = y
    ts = np.array(sorted(res))
    return ts, np.array([res[x] for x in ts])


def _breaks(hp: HullPoint) -> list[float]:
    if hp.limit is not None:
        return []
    return [b - hp.shift for b in hp.driver.breakpoints()]


def integrate_scalar(sp: ScalarProblem, r: float, t0: float, t1: float, dt: float,
                     rtol: float = 1e-10) -> Trajectory:
    """Solve from w(t0) = r to t1; samples every dt (the maximal internal step)."""
    if r < 0:
        raise NegativeInitialCondition(f"initial value {r} is negative")
    if dt <= 0 or t1 < t0:
        raise ValueError("need dt > 0 and t1 >= t0")
    n = max(1, int(round((t1 - t0) / dt)))
    out = t0 + (t1 - t0) * np.arange(n + 1) / n
    if r == 0:
        return Trajectory(out, np.zeros(out.size))
    ts, ws = _integrate(sp.rhs, float(r), float(t0), float(t1), out, dt, _breaks(sp.driver), rtol=rtol,
                        nonnegative=True)
    return Trajectory(ts, ws)


def integrate_v(hp: HullPoint, v0: float, t0: float, t1: float, dt: float) -> Trajectory:
    """Solve the linearised equation v' = -a v + 1."""
    n = max(1, int(round((t1 - t0) / dt)))
    out = t0 + (t1 - t0) * np.arange(n + 1) / n
    ts, vs = _integrate(lambda t, v: -hp.evaluate(t) * v + 1.0, float(v0), float(t0), float(t1), out, dt,
                        _breaks(hp))
    return Trajectory(ts, vs)


def pullback_bstar(sp: ScalarProblem, r: float | None = None, horizons=DEFAULT_HORIZONS,
                   tol: float = 1e-8, dt: float = 0.05) -> ScalarAttractor:
    """b*(p) as the limit of w(T, p.(-T), r) along the horizon ladder."""
    rad = absorbing_radius(sp)
    r = rad if r is None else float(r)
    if r < rad:
        raise ValueError(f"r={r:g} is below the absorbing radius {rad:g}")
    horizons = tuple(float(T) for T in horizons)
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must increase")
    vals = []
    for T in horizons:
        ts, ws = _integrate(sp.rhs, r, -T, 0.0, [0.0], dt, _breaks(sp.driver), nonnegative=True)
        vals.append(float(ws[-1]))
        if len(vals) > 1 and vals[-1] > vals[-2] + 10 * tol:
            raise MonotonicityViolation(f"pullback grew from {vals[-2]:.6g} to {vals[-1]:.6g} at T={T:g}")
    lim = ladder_limit(horizons, vals, sp.theta - 1.0, tol)
    b = lim.estimate
    if b <= EPS_TRIVIAL:
        cls = "Trivial"
    elif b > EPS_POSITIVE:
        cls = "StronglyPositive"
    else:
        cls = "Indeterminate"
    return ScalarAttractor(sp.driver, b, horizons[-1], lim.cauchy_gap, cls, lim.method, horizons, tuple(vals))
