"""Finite-difference solver for y_t = y_xx + h(p.t, x) y + g(y) on [0, L].

Space: second-order centred differences; Neumann and Robin conditions are
closed with ghost nodes.  Time: explicit SSP Heun step for the reaction
followed by a backward-Euler diffusion solve.  Both stages are order
preserving as long as dt * max(|h| + |g'|) <= 1, which ``evolve`` enforces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .errors import ConfigError, HeterogeneousProfile, StepTooLarge
from .hull import HullPoint

__all__ = [
    "Grid",
    "FieldState",
    "NonlinearitySpec",
    "PurePower",
    "Deadzone",
    "LinearCoefficientSpec",
    "principal_eigenpair",
    "evolve",
    "evolve_trajectory",
    "evolve_linear",
    "linear_log_norm",
    "pde_log_cocycle",
    "pde_cocycle",
    "max_stable_dt",
    "trajectory_csv_rows",
]

BC_KINDS = ("neumann", "robin", "dirichlet")


@dataclass(frozen=True)
class Grid:
    n_nodes: int = 64
    length: float = 1.0
    bc: str = "neumann"
    alpha_bar: float = 0.0

    def __post_init__(self):
        if self.bc not in BC_KINDS:
            raise ConfigError(f"boundary condition must be one of {BC_KINDS}")
        if self.n_nodes < 16:
            raise ConfigError("grid needs at least 16 nodes")
        if self.length <= 0:
            raise ConfigError("interval length must be positive")
        if self.alpha_bar < 0:
            raise ConfigError("Robin coefficient must be nonnegative")
        if self.bc != "robin" and self.alpha_bar != 0:
            raise ConfigError("alpha_bar is only meaningful for Robin conditions")

    @property
    def dx(self) -> float:
        return self.length / (self.n_nodes - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)

    @property
    def interior(self) -> slice:
        return slice(1, self.n_nodes - 1)


@dataclass(frozen=True, eq=False)
class FieldState:
    values: np.ndarray
    bc: str = "neumann"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.bc == "dirichlet":
            edge = max(abs(v[0]), abs(v[-1]))
            if edge > 1e-12 * max(1.0, float(np.max(np.abs(v)))):
                raise ValueError("Dirichlet fields must vanish at the boundary nodes")

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min_interior(self) -> float:
        return float(np.min(self.values[1:-1]))

    def to_csv_rows(self, grid: Grid):
        yield ("x", "value")
        for xi, vi in zip(grid.x, self.values):
            yield (xi, vi)


class NonlinearitySpec:
    """Odd dissipative nonlinearity g with g = 0 exactly on [-r0, r0]."""

    kind_code = 0
    rho: float
    theta: float
    r0: float = 0.0

    def __call__(self, y):
        raise NotImplementedError

    def max_derivative(self, R: float) -> float:
        """max |g'(y)| over |y| <= R."""
        raise NotImplementedError

    def absorbing_radius(self, h_sup: float) -> float:
        return self.r0 + (2.0 * h_sup / self.rho) ** (1.0 / (self.theta - 1.0)) + 1.0

    @property
    def transform_exponent(self) -> float:
        """Power q = |b|^-k that turns slow pullback decay into additive growth."""
        raise NotImplementedError

    def kernel_args(self):
        return (self.kind_code, float(self.rho), float(self.theta), float(self.r0))

    def _check(self):
        if not self.rho > 0 or not self.theta > 1:
            raise ConfigError("nonlinearity needs rho > 0 and theta > 1")
        ys = np.concatenate([np.linspace(0.0, self.r0, 5), self.r0 + np.geomspace(1e-6, 10.0, 200)])
        g = self(ys)
        small = np.geomspace(1e-9, 1e-3, 7)
        slope = np.abs(self(small)) / small
        big = self.r0 + np.array([1e2, 1e3, 1e4])
        checks = {
            "g(0) = 0 and g'(0) = 0": g[0] == 0.0 and np.all(np.diff(slope) >= 0) and slope[0] < slope[-1] + 1e-300,
            "y g(y) <= 0": np.all(ys * g <= 0),
            "odd": np.array_equal(self(-ys), -g),
            "zero set is [-r0, r0]": np.all(g[ys <= self.r0] == 0) and np.all(g[ys > self.r0] < 0),
            "g(y)/y decreasing without bound": np.all(np.diff(self(big) / big) < 0),
            "strict sublinearity": all(np.all(self(lam * ys[ys > self.r0]) < lam * g[ys > self.r0])
                                       for lam in (1.5, 2.0, 5.0)),
        }
        failed = [k for k, ok in checks.items() if not ok]
        if failed:
            raise ConfigError(f"nonlinearity violates: {', '.join(failed)}")

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PurePower(NonlinearitySpec):
    """g(y) = -rho |y|^(theta-1) y."""

    rho: float = 1.0
    theta: float = 3.0
    kind_code = 1

    def __post_init__(self):
        self._check()

    @property
    def r0(self) -> float:  # type: ignore[override]
        return 0.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return -self.rho * np.abs(y) ** (self.theta - 1.0) * y

    def max_derivative(self, R):
        return self.rho * self.theta * R ** (self.theta - 1.0)

    @property
    def transform_exponent(self):
        return self.theta - 1.0

    def to_json(self):
        return {"kind": "pure_power", "rho": self.rho, "theta": self.theta}


@dataclass(frozen=True)
class Deadzone(NonlinearitySpec):
    """g(y) = -rho sign(y) (|y| - r0)_+^theta."""

    rho: float = 1.0
    theta: float = 3.0
    r0: float = 0.5
    kind_code = 2

    def __post_init__(self):
        if not self.r0 > 0:
            raise ConfigError("deadzone half-width r0 must be positive")
        self._check()

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return -self.rho * np.sign(y) * np.maximum(np.abs(y) - self.r0, 0.0) ** self.theta

    def max_derivative(self, R):
        return self.rho * self.theta * max(R - self.r0, 0.0) ** (self.theta - 1.0)

    @property
    def transform_exponent(self):
        # near zero the dynamics are linear, so b decays like 1/c
        return 1.0

    def to_json(self):
        return {"kind": "deadzone", "rho": self.rho, "theta": self.theta, "r0": self.r0}


@dataclass(frozen=True, eq=False)
class LinearCoefficientSpec:
    """h(p.t, x) = gamma_offset + a(p.t) * profile(x); profile defaults to ones."""

    gamma_offset: float
    driver: HullPoint
    profile: np.ndarray | None = None

    def profile_on(self, grid: Grid) -> np.ndarray:
        if self.profile is None:
            return np.ones(grid.n_nodes)
        p = np.asarray(self.profile, dtype=float)
        if p.ndim == 0:
            return np.full(grid.n_nodes, float(p))
        if p.shape != (grid.n_nodes,):
            raise ConfigError("profile length must match the grid")
        return p

    def is_homogeneous(self, grid: Grid) -> bool:
        p = self.profile_on(grid)
        return bool(np.all(p == p[0]))

    def h_sup(self, grid: Grid) -> float:
        return abs(self.gamma_offset) + self.driver.bound() * float(np.max(np.abs(self.profile_on(grid))))

    def advance(self, t: float) -> "LinearCoefficientSpec":
        return replace(self, driver=self.driver.advance(t))

    def at(self, hp: HullPoint) -> "LinearCoefficientSpec":
        return replace(self, driver=hp)


# ---------------------------------------------------------------- operators

def _laplacian_bands(grid: Grid):
    n, dx2 = grid.n_nodes, grid.dx ** 2
    sub = np.full(n, 1.0 / dx2)
    sup = np.full(n, 1.0 / dx2)
    diag = np.full(n, -2.0 / dx2)
    sub[0] = sup[-1] = 0.0
    if grid.bc == "dirichlet":
        diag[0] = diag[-1] = 0.0
        sup[0] = sub[-1] = 0.0
    else:
        # ghost node y_{-1} = y_1 - 2 dx alpha y_0, symmetric at x = L
        edge = -(2.0 + 2.0 * grid.dx * grid.alpha_bar) / dx2
        diag[0] = diag[-1] = edge
        sup[0] = sub[-1] = 2.0 / dx2
    return sub, diag, sup


@lru_cache(maxsize=64)
def _eigenpair(grid: Grid):
    n, dx2 = grid.n_nodes, grid.dx ** 2
    if grid.bc == "neumann":
        # rows of the discrete Laplacian sum to zero, so constants are exact
        return 0.0, np.ones(n)
    if grid.bc == "dirichlet":
        m = n - 2
        lam, vec = eigh_tridiagonal(np.full(m, 2.0 / dx2), np.full(m - 1, -1.0 / dx2),
                                    select="i", select_range=(0, 0))
        v = np.zeros(n)
        v[1:-1] = vec[:, 0]
    else:
        sub, diag, sup = _laplacian_bands(grid)
        d = -diag
        # symmetrise with weights (1/2, 1, ..., 1, 1/2)
        e = -np.sqrt(sup[:-1] * sub[1:])
        lam, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        v = vec[:, 0] / np.sqrt(w)
    v = v * np.sign(v[n // 2])
    return float(lam[0]), v / np.max(np.abs(v))


def principal_eigenpair(grid: Grid) -> tuple[float, FieldState]:
    """Smallest eigenvalue of the discrete -Laplacian and its positive eigenvector (sup-norm 1)."""
    lam, v = _eigenpair(grid)
    return lam, FieldState(v.copy(), grid.bc)


def max_stable_dt(coeff: LinearCoefficientSpec, g: NonlinearitySpec | None, grid: Grid, z_sup: float) -> float:
    """Largest dt keeping both stages order preserving for states with |y| <= max(z_sup, r_abs)."""
    h_sup = coeff.h_sup(grid)
    if g is None:
        rate = h_sup
    else:
        R = max(z_sup, g.absorbing_radius(h_sup))
        rate = h_sup + g.max_derivative(R)
    return math.inf if rate == 0 else 1.0 / rate


def _as_values(z0, grid: Grid) -> np.ndarray:
    v = z0.values if isinstance(z0, FieldState) else np.asarray(z0, dtype=float)
    if v.shape != (grid.n_nodes,):
        raise ValueError("initial field does not match the grid")
    return v


def _run(coeff, g, grid, z0, t, dt, record_every=0, backend=None):
    if t < 0:
        raise ValueError("evolution time must be nonnegative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    y0 = np.array(_as_values(z0, grid), dtype=float)
    if grid.bc == "dirichlet":
        y0[0] = y0[-1] = 0.0
    nsteps = max(1, math.ceil(t / dt - 1e-9)) if t > 0 else 0
    dt_eff = t / nsteps if nsteps else dt
    limit = max_stable_dt(coeff, g, grid, float(np.max(np.abs(y0))))
    if dt_eff > limit * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt_eff:.4g} exceeds the order-preserving bound {limit:.4g}")
    a_vals = coeff.driver.values(np.arange(nsteps + 1, dtype=float) * dt_eff)
    sub, diag, sup = _laplacian_bands(grid)
    msub, mdiag, msup = -dt_eff * sub, 1.0 - dt_eff * diag, -dt_eff * sup
    if grid.bc == "dirichlet":
        mdiag[0] = mdiag[-1] = 1.0
    kind, rho, theta, r0 = g.kernel_args() if g is not None else (0, 0.0, 2.0, 0.0)
    nrec = nsteps // record_every + 1 if record_every else 0
    out = np.zeros((max(nrec, 1), grid.n_nodes))
    run = kernels.backends()[backend] if backend else kernels.run
    y = run(y0, a_vals, coeff.profile_on(grid).astype(float), float(coeff.gamma_offset),
            msub, mdiag, msup, grid.bc == "dirichlet", kind, rho, theta, r0, dt_eff,
            int(record_every), out)
    y = np.asarray(y)
    times = np.arange(nrec, dtype=float) * record_every * dt_eff
    return y, times, out[:nrec]


def evolve(coeff: LinearCoefficientSpec, g: NonlinearitySpec | None, grid: Grid, z0, t: float,
           dt: float, backend: str | None = None) -> FieldState:
    """u(t, p, z0) for the nonlinear problem (g=None gives the linear one)."""
    y, _, _ = _run(coeff, g, grid, z0, t, dt, backend=backend)
    return FieldState(y, grid.bc)


def evolve_trajectory(coeff, g, grid, z0, t, dt, record_every: int = 1, backend=None):
    """Snapshots every ``record_every`` steps: (times, array of shape (k, n_nodes))."""
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    _, times, snaps = _run(coeff, g, grid, z0, t, dt, record_every, backend)
    return times, snaps


def trajectory_csv_rows(times, snaps, grid: Grid):
    """Rows ``t,x,value`` with time as the outer index."""
    yield ("t", "x", "value")
    for t, row in zip(times, snaps):
        for x, v in zip(grid.x, row):
            yield (float(t), float(x), float(v))


def evolve_linear(coeff: LinearCoefficientSpec, grid: Grid, z0, t: float, dt: float,
                  backend: str | None = None) -> FieldState:
    return evolve(coeff, None, grid, z0, t, dt, backend)


def linear_log_norm(coeff: LinearCoefficientSpec, grid: Grid, z0, t: float, dt: float,
                    chunk: float = 20.0) -> tuple[float, FieldState]:
    """log of the sup-norm of phi(t, p) z0, renormalising between chunks to avoid overflow."""
    v = np.array(_as_values(z0, grid), dtype=float)
    s0 = float(np.max(np.abs(v)))
    if s0 == 0:
        return -math.inf, FieldState(v, grid.bc)
    logn, v = math.log(s0), v / s0
    done = 0.0
    c = coeff
    while done < t:
        span = min(chunk, t - done)
        v = evolve_linear(c, grid, v, span, dt).values
        s = float(np.max(np.abs(v)))
        if s == 0:
            return -math.inf, FieldState(v, grid.bc)
        logn += math.log(s)
        v = v / s
        c = c.advance(span)
        done += span
    return logn, FieldState(v, grid.bc)


def pde_log_cocycle(coeff: LinearCoefficientSpec, grid: Grid, t: float, dt: float) -> float:
    """log c(t, p) read off from phi(t, p) e0 (spatially homogeneous profiles only)."""
    if not coeff.is_homogeneous(grid):
        raise HeterogeneousProfile("the principal direction is only known for spatially constant profiles")
    if t == 0:
        return 0.0
    if t < 0:
        return -pde_log_cocycle(coeff.advance(t), grid, -t, dt)
    _, e0 = principal_eigenpair(grid)
    logn, _ = linear_log_norm(coeff, grid, e0, t, dt)
    return logn


def pde_cocycle(coeff: LinearCoefficientSpec, grid: Grid, t: float, dt: float) -> float:
    return math.exp(pde_log_cocycle(coeff, grid, t, dt))
