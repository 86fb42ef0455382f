"""Scalar linear cocycle log c(t, p) = int_0^t a(p.s) ds and quantities built on it.

Integrals are computed with composite Simpson on a mesh whose nodes sit on
every branch breakpoint of the driver.  The mesh is a lattice fixed in the
driver's own time variable (uniform on bounded or oscillatory pieces,
geometric on 1/t pieces), so integrals over nested ranges share nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InconclusiveFit, Unsupported
from .hull import Branch, DriverSpec, HullPoint, limit_points

__all__ = [
    "CocycleTrace",
    "LyapunovEstimate",
    "SpectralInterval",
    "TailIntegralResult",
    "log_cocycle",
    "cocycle_trace",
    "lyapunov",
    "tail_integral",
    "spectrum_estimate",
    "is_asymptotic_at_minus_infinity",
]

_MAX_NODES = 20_000_000
# decay exponents this close to the integrability edge are treated as divergent
_EDGE_MARGIN = 1e-3


@dataclass(frozen=True)
class CocycleTrace:
    hull_point: HullPoint
    times: np.ndarray
    log_values: np.ndarray
    quadrature: dict = field(default_factory=dict)

    def to_csv_rows(self):
        yield ("t", "log_c")
        for t, v in zip(self.times, self.log_values):
            yield (t, v)


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_sup_plus: float
    lambda_inf_plus: float
    lambda_sup_minus: float
    lambda_inf_minus: float
    horizon: float

    def as_tuple(self):
        return (self.lambda_sup_plus, self.lambda_inf_plus, self.lambda_sup_minus, self.lambda_inf_minus)


@dataclass(frozen=True)
class SpectralInterval:
    alpha_P: float
    lambda_P: float
    horizons: tuple
    points: tuple

    def to_json(self) -> dict:
        return {"alpha_P": self.alpha_P, "lambda_P": self.lambda_P,
                "horizons": list(self.horizons), "points": list(self.points)}


@dataclass(frozen=True)
class TailIntegralResult:
    beta: float
    truncation_T: float
    value: float
    tail_bound: float
    converged: bool
    integrable: bool
    model: str
    decay_rate: float
    fit_residual: float

    def to_json(self) -> dict:
        return {"beta": self.beta, "T": self.truncation_T, "value": self.value,
                "tail_bound": self.tail_bound, "converged": self.converged,
                "integrable": self.integrable, "model": self.model, "decay_rate": self.decay_rate}


# ---------------------------------------------------------------- meshing

def _uniform(h: float, lo: float, hi: float) -> np.ndarray:
    k0 = math.floor(lo / h) + 1
    k1 = math.ceil(hi / h) - 1
    if k1 < k0:
        return np.empty(0)
    if k1 - k0 > _MAX_NODES:
        raise ValueError(f"mesh would need {k1 - k0} nodes; increase the step")
    pts = np.arange(k0, k1 + 1, dtype=float) * h
    return pts[(pts > lo) & (pts < hi)]


def _geometric(rho: float, lo: float, hi: float) -> np.ndarray:
    # nodes at |t| = (1 + rho)^j on a branch that does not contain 0
    sign = 1.0 if lo >= 0 else -1.0
    amin, amax = sorted((abs(lo), abs(hi)))
    m = math.log1p(rho)
    j0 = math.floor(math.log(amin) / m) + 1
    j1 = math.ceil(math.log(amax) / m) - 1
    if j1 < j0:
        return np.empty(0)
    if j1 - j0 > _MAX_NODES:
        raise ValueError("geometric mesh too fine")
    pts = np.exp(np.arange(j0, j1 + 1, dtype=float) * m)
    pts = pts[(pts > amin) & (pts < amax)]
    return sign * pts


def _branch_nodes(br: Branch, lo: float, hi: float, step: float, beta: float | None) -> np.ndarray:
    b = beta or 0.0
    if br.kind == "const":
        if b == 0.0 or br.coef == 0.0:
            return np.empty(0)  # Simpson is exact for these integrands
        return _uniform(step / max(1.0, b * abs(br.coef)), lo, hi)
    if br.kind == "linear":
        rate = abs(br.coef) * max(abs(lo), abs(hi))
        return _uniform(step / max(1.0, b * rate), lo, hi)
    if br.kind == "inverse":
        return _geometric(step / max(1.0, b * abs(br.coef)), lo, hi)
    return _uniform(step * min(1.0, br.scale) / max(1.0, b * br.coef), lo, hi)


def _branches_of(hp: HullPoint) -> tuple[list[Branch], float]:
    if hp.limit is not None:
        return [Branch(-math.inf, math.inf, "const", hp.limit)], 0.0
    return hp.driver.branches(), hp.shift


def _mesh(hp: HullPoint, u_end: float, step: float, beta: float | None = None,
          extra=None) -> np.ndarray:
    """Nodes in flow time u running monotonically from 0 to u_end."""
    if step <= 0:
        raise ValueError("step must be positive")
    if u_end == 0:
        return np.zeros(1)
    branches, tau0 = _branches_of(hp)
    tau1 = tau0 + u_end
    lo, hi = min(tau0, tau1), max(tau0, tau1)
    lattice, joints = [], []
    for br in branches:
        a, b = max(lo, br.lo), min(hi, br.hi)
        if b <= a:
            continue
        lattice.append(_branch_nodes(br, a, b, step, beta))
        joints.extend(x for x in (br.lo, br.hi) if lo < x < hi)
    lat = np.concatenate(lattice) - tau0 if lattice else np.empty(0)
    exact = [0.0, float(u_end)] + [x - tau0 for x in joints]
    if extra is not None:
        ex = np.asarray(extra, dtype=float)
        exact.extend(ex[(np.minimum(0, u_end) <= ex) & (ex <= np.maximum(0, u_end))].tolist())
    exact = np.unique(np.asarray(exact))
    if lat.size:
        lat.sort()
        # drop lattice nodes that collide with exact nodes
        idx = np.searchsorted(exact, lat)
        near = np.zeros(lat.size, dtype=bool)
        scale = 1e-11 * np.maximum(1.0, np.abs(lat))
        for shift in (0, -1):
            j = np.clip(idx + shift, 0, exact.size - 1)
            near |= np.abs(exact[j] - lat) <= scale
        lat = lat[~near]
        lat = lat[(lat > min(0, u_end)) & (lat < max(0, u_end))]
    nodes = np.union1d(exact, lat)
    return nodes if u_end > 0 else nodes[::-1]


def _integrate(hp: HullPoint, u: np.ndarray, with_midpoints: bool = False):
    """Cumulative Simpson integral of a(p.s) at the nodes (and interval midpoints)."""
    if u.size == 1:
        return np.zeros(1), np.empty(0)
    h = np.diff(u)
    left = u[:-1]
    a = hp.values(u)
    am = hp.values(left + 0.5 * h)
    L = np.empty(u.size)
    L[0] = 0.0
    np.cumsum(h / 6.0 * (a[:-1] + 4.0 * am + a[1:]), out=L[1:])
    if not with_midpoints:
        return L, np.empty(0)
    aq = hp.values(left + 0.25 * h)
    Lm = L[:-1] + h / 12.0 * (a[:-1] + 4.0 * aq + am)
    return L, Lm


def _lookup(nodes: np.ndarray, values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    order = np.argsort(nodes)
    s = nodes[order]
    idx = np.clip(np.searchsorted(s, targets), 0, s.size - 1)
    if not np.all(s[idx] == targets):
        raise RuntimeError("requested sample time missing from mesh")
    return values[order][idx]


# ---------------------------------------------------------------- public API

def log_cocycle(hp: HullPoint, t: float, step: float = 0.01) -> float:
    """int_0^t a(hp.s) ds."""
    if t == 0:
        return 0.0
    L, _ = _integrate(hp, _mesh(hp, float(t), step))
    return float(L[-1])


def cocycle_trace(hp: HullPoint, times, step: float = 0.01) -> CocycleTrace:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a strictly increasing, nonempty grid")
    out = np.zeros(times.size)
    for sel in (times > 0, times < 0):
        if not np.any(sel):
            continue
        ts = times[sel]
        end = ts.max() if ts[0] > 0 else ts.min()
        nodes = _mesh(hp, end, step, extra=ts)
        L, _ = _integrate(hp, nodes)
        out[sel] = _lookup(nodes, L, ts)
    return CocycleTrace(hp, times, out, {"rule": "composite simpson", "step": step})


def lyapunov(hp: HullPoint, horizon: float, step: float = 0.01, n_window: int = 10,
             ratio: float = 2.0, t_min: float = 1.0) -> LyapunovEstimate:
    """Finite-horizon Lyapunov exponents on the ladder |t| = horizon / ratio^k.

    sup and inf of log c(t)/t over the ladder, separately for t > 0 and t < 0.
    """
    rungs = horizon / ratio ** np.arange(n_window, dtype=float)
    if n_window < 2 or rungs[-1] < t_min:
        raise ValueError(f"horizon {horizon:g} too short for {n_window} ladder rungs above {t_min:g}")
    res = []
    for sign in (1.0, -1.0):
        ts = sign * rungs
        nodes = _mesh(hp, sign * horizon, step, extra=ts)
        L, _ = _integrate(hp, nodes)
        ex = _lookup(nodes, L, ts) / ts
        res.append((float(ex.max()), float(ex.min())))
    (sp, ip), (sm, im) = res
    return LyapunovEstimate(sp, ip, sm, im, float(horizon))


def _fit_tail(hp, u, L, T, beta):
    """Fit log c on the last decade; return (model, rate, residual, tail estimate)."""
    tau0 = 0.0 if hp.limit is not None else hp.shift
    graded = hp.limit is None and hp.driver.is_graded() and tau0 - T / 10.0 <= -1.0
    if graded:
        x, x_end = np.log(np.abs(tau0 + u)), abs(tau0 - T)
    else:
        x, x_end = np.log(np.abs(u)), T
    fits = []
    # power law: log c = kappa - m log|t|
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, L, rcond=None)
    kappa, m = coef[0], -coef[1]
    res_p = float(np.sqrt(np.mean((A @ coef - L) ** 2)))
    with np.errstate(over="ignore", divide="ignore"):
        if m * beta > 1.0 + _EDGE_MARGIN:
            tail = math.exp(min(beta * kappa, 700.0)) * x_end ** (1.0 - m * beta) / (m * beta - 1.0)
        else:
            tail = math.inf
    fits.append((res_p, "power", float(m), tail))
    # exponential: log c = kappa + lam * u, decaying backward when lam > 0
    B = np.vstack([np.ones_like(u), u]).T
    coef, *_ = np.linalg.lstsq(B, L, rcond=None)
    kappa, lam = coef
    res_e = float(np.sqrt(np.mean((B @ coef - L) ** 2)))
    if lam * beta > _EDGE_MARGIN:
        tail = math.exp(min(beta * (kappa - lam * T), 700.0)) / (beta * lam)
    else:
        tail = math.inf
    fits.append((res_e, "exponential", float(lam), tail))
    return min(fits, key=lambda f: f[0])


def tail_integral(hp: HullPoint, beta: float, T: float, tol: float = 1e-6, step: float = 0.01,
                  fit_tol: float = 0.05, n_fit: int = 64) -> TailIntegralResult:
    """int_{-T}^0 c(t)^beta dt plus a model estimate of the remaining tail.

    The decay of log c over the last decade [-T, -T/10] is fitted by a power
    law and by an exponential; the better fit supplies the tail estimate.
    """
    if beta <= 0 or T <= 0:
        raise ValueError("beta and T must be positive")
    u_fit = -np.geomspace(T / 10.0, T, n_fit)
    nodes = _mesh(hp, -float(T), step, beta=beta, extra=u_fit)
    L, Lm = _integrate(hp, nodes, with_midpoints=True)
    with np.errstate(over="ignore"):
        f = np.exp(beta * L)
        fm = np.exp(beta * Lm)
        value = float(np.sum(np.abs(np.diff(nodes)) / 6.0 * (f[:-1] + 4.0 * fm + f[1:])))
    Lfit = _lookup(nodes, L, u_fit)
    residual, model, rate, tail = _fit_tail(hp, u_fit, Lfit, float(T), beta)
    if residual > fit_tol:
        raise InconclusiveFit(
            f"decay of log c for {hp.label} fits neither model on [-{T:g}, -{T / 10:g}] (rms residual {residual:.3g})")
    integrable = math.isfinite(tail) and math.isfinite(value)
    return TailIntegralResult(beta=float(beta), truncation_T=float(T), value=value,
                              tail_bound=float(tail) if integrable else math.inf,
                              converged=bool(integrable and tail < tol), integrable=bool(integrable),
                              model=model, decay_rate=rate, fit_residual=residual)


def spectrum_estimate(d: DriverSpec, horizons, shifts, step: float = 0.01) -> SpectralInterval:
    """[min, max] of finite-horizon exponents over orbit shifts and listable limit points."""
    horizons, shifts = list(horizons), list(shifts)
    if not horizons or not shifts:
        raise ValueError("need at least one horizon and one shift")
    points = [HullPoint(d, s) for s in shifts]
    try:
        points += limit_points(d)
    except Unsupported:
        pass
    vals = []
    for hp in points:
        for H in horizons:
            vals.extend(lyapunov(hp, H, step).as_tuple())
    return SpectralInterval(float(min(vals)), float(max(vals)), tuple(horizons),
                            tuple(hp.label for hp in points))


def is_asymptotic_at_minus_infinity(hp: HullPoint, beta: float, T: float, tol: float = 1e-3,
                                    step: float = 0.01) -> bool:
    """True when c(t)^beta stays below tol over the last decade [-T, -T/10]."""
    ts = -np.geomspace(T, T / 10.0, 64)
    tr = cocycle_trace(hp, ts, step)
    return bool(np.max(beta * tr.log_values) < math.log(tol))
