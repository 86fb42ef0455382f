import math

import numpy as np
import pytest

from attractor_lab import kernels
from attractor_lab.cocycle import log_cocycle
from attractor_lab.errors import ConfigError, HeterogeneousProfile, StepTooLarge
from attractor_lab.hull import Constant, HullPoint, NamedPiecewise
from attractor_lab.parabolic import (Deadzone, FieldState, Grid, LinearCoefficientSpec, PurePower, evolve,
                                     evolve_linear, evolve_trajectory, max_stable_dt, pde_cocycle, pde_log_cocycle,
                                     principal_eigenpair, trajectory_csv_rows)

# root of k tan(k/2) = 1 squared (mpmath, 30 digits): Robin alpha_bar = 1 on [0, 1]
ROBIN_GAMMA0 = 1.7070529755509225
BCS = [Grid(33, bc="neumann"), Grid(33, bc="dirichlet"), Grid(33, bc="robin", alpha_bar=1.0)]
P1 = NamedPiecewise("p1")


def coeff(grid, driver=P1, shift=0.0, offset=None):
    off = principal_eigenpair(grid)[0] if offset is None else offset
    return LinearCoefficientSpec(off, HullPoint(driver, shift))


def safe_dt(c, g, grid, zmax):
    return 0.5 * max_stable_dt(c, g, grid, zmax)


def test_neumann_eigenpair():
    gamma0, e0 = principal_eigenpair(Grid(64))
    assert gamma0 == 0.0
    assert np.all(e0.values == 1.0)


def test_dirichlet_eigenpair():
    grid = Grid(257, bc="dirichlet")
    gamma0, e0 = principal_eigenpair(grid)
    assert gamma0 == pytest.approx(math.pi ** 2, abs=0.01)
    np.testing.assert_allclose(e0.values, np.sin(math.pi * grid.x), atol=1e-12)


def test_robin_eigenpair():
    gamma0, e0 = principal_eigenpair(Grid(257, bc="robin", alpha_bar=1.0))
    assert 0 < gamma0 < math.pi ** 2
    assert gamma0 == pytest.approx(ROBIN_GAMMA0, abs=1e-4)
    assert np.min(e0.values) > 0 and e0.sup_norm == pytest.approx(1.0)


def test_dirichlet_second_order():
    errs = [abs(principal_eigenpair(Grid(n, bc="dirichlet"))[0] - math.pi ** 2) for n in (17, 33, 65, 129)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(abs(r - 4.0) < 0.5 for r in ratios)


def test_field_state_checks():
    with pytest.raises(ValueError):
        FieldState(np.ones(20), "dirichlet")
    f = FieldState(np.array([0.0, 2.0, -3.0, 0.0]), "dirichlet")
    assert f.sup_norm == 3.0 and f.min_interior() == -3.0
    with pytest.raises(ValueError):
        f.values[1] = 5.0


def test_grid_validation():
    with pytest.raises(ConfigError):
        Grid(8)
    with pytest.raises(ConfigError):
        Grid(64, bc="periodic")
    with pytest.raises(ConfigError):
        Grid(64, bc="robin", alpha_bar=-1.0)


@pytest.mark.parametrize("bad", [dict(rho=0.0), dict(theta=1.0), dict(rho=-1.0)])
def test_nonlinearity_validation(bad):
    with pytest.raises(ConfigError):
        PurePower(**{"rho": 1.0, "theta": 3.0, **bad})


def test_nonlinearity_values():
    y = np.array([-2.0, -0.25, 0.0, 0.25, 2.0])
    np.testing.assert_allclose(PurePower(1.0, 3.0)(y), -y ** 3)
    np.testing.assert_allclose(Deadzone(1.0, 2.0, 0.5)(y), [2.25, 0.0, 0.0, 0.0, -2.25])


@pytest.mark.parametrize("backend", sorted(kernels.backends()))
def test_constant_state_is_invariant(backend):
    grid = Grid(64)
    c = LinearCoefficientSpec(0.0, HullPoint(Constant(0.0)))
    out = evolve(c, None, grid, np.full(64, 3.5), 5.0, 0.01, backend=backend)
    # 500 solves with dt/dx^2 ~ 40: only round-off may accumulate
    np.testing.assert_allclose(out.values, 3.5, rtol=0, atol=1e-12)


def test_dirichlet_heat_mode():
    grid = Grid(129, bc="dirichlet")
    c = LinearCoefficientSpec(0.0, HullPoint(Constant(0.0)))
    z0 = np.sin(math.pi * grid.x)
    out = evolve(c, None, grid, z0, 0.1, 1e-4)
    exact = math.exp(-math.pi ** 2 * 0.1) * z0
    assert np.max(np.abs(out.values - exact)) < 2e-3


def test_homogeneous_neumann_relaxes_to_one():
    grid = Grid(64)
    c = LinearCoefficientSpec(1.0, HullPoint(Constant(0.0)))
    out = evolve(c, PurePower(1.0, 3.0), grid, np.full(64, 2.0), 20.0, 0.01)
    assert np.max(np.abs(out.values - 1.0)) < 1e-4


def test_step_bound_enforced():
    grid = Grid(64)
    c = LinearCoefficientSpec(1.0, HullPoint(Constant(0.0)))
    g = PurePower(1.0, 3.0)
    with pytest.raises(StepTooLarge):
        evolve(c, g, grid, np.full(64, 2.0), 1.0, 2.0 * max_stable_dt(c, g, grid, 2.0))


@pytest.mark.parametrize("grid", BCS, ids=lambda g: g.bc)
def test_monotonicity_random_pairs(grid):
    rng = np.random.default_rng(11)
    g = PurePower(1.0, 3.0)
    violations = 0
    for _ in range(50 // len(BCS) + 1):
        c = coeff(grid, shift=rng.uniform(-20, 20))
        z1 = rng.uniform(-2, 2, grid.n_nodes)
        z2 = z1 + rng.uniform(0, 1, grid.n_nodes)
        dt = safe_dt(c, g, grid, 3.0)
        u1 = evolve(c, g, grid, z1, 1.0, dt).values
        u2 = evolve(c, g, grid, z2, 1.0, dt).values
        violations += int(np.any(u1 > u2 + 1e-14))
    assert violations == 0


@pytest.mark.parametrize("grid", BCS, ids=lambda g: g.bc)
def test_strong_monotonicity(grid):
    g = PurePower(1.0, 3.0)
    c = coeff(grid)
    z1 = np.zeros(grid.n_nodes)
    z2 = z1.copy()
    z2[grid.n_nodes // 3] = 0.5
    dt = safe_dt(c, g, grid, 1.0)
    u1 = evolve(c, g, grid, z1, 0.1, dt).values
    u2 = evolve(c, g, grid, z2, 0.1, dt).values
    assert np.all(u2[1:-1] > u1[1:-1])


@pytest.mark.parametrize("grid", BCS, ids=lambda g: g.bc)
def test_oddness(grid):
    rng = np.random.default_rng(5)
    g = Deadzone(1.0, 3.0, 0.2)
    c = coeff(grid, shift=-3.0)
    z = rng.uniform(-2, 2, grid.n_nodes)
    dt = safe_dt(c, g, grid, 2.0)
    a = evolve(c, g, grid, z, 2.0, dt).values
    b = evolve(c, g, grid, -z, 2.0, dt).values
    assert np.max(np.abs(a + b)) < 1e-10


@pytest.mark.parametrize("lam", [1.5, 2.0, 5.0])
def test_sublinearity(lam):
    rng = np.random.default_rng(int(lam * 10))
    g = PurePower(1.0, 3.0)
    violations = 0
    for grid in BCS:
        c = coeff(grid, shift=rng.uniform(-10, 10))
        z = rng.uniform(0, 1.5, grid.n_nodes)
        dt = safe_dt(c, g, grid, lam * 1.5)
        scaled = evolve(c, g, grid, lam * z, 2.0, dt).values
        base = evolve(c, g, grid, z, 2.0, dt).values
        violations += int(np.any(scaled > lam * base + 1e-12))
    assert violations == 0


@pytest.mark.parametrize("grid", BCS, ids=lambda g: g.bc)
def test_superposition(grid):
    rng = np.random.default_rng(3)
    c = coeff(grid, shift=-8.0)
    z1, z2 = rng.normal(size=(2, grid.n_nodes))
    dt = safe_dt(c, None, grid, 1.0)
    lhs = evolve_linear(c, grid, z1 + z2, 3.0, dt).values
    rhs = evolve_linear(c, grid, z1, 3.0, dt).values + evolve_linear(c, grid, z2, 3.0, dt).values
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_linear_zone_agreement():
    grid = Grid(33)
    g = Deadzone(1.0, 3.0, 0.5)
    c = LinearCoefficientSpec(-0.2, HullPoint(NamedPiecewise("p2")))
    z = 0.4 * np.cos(math.pi * grid.x)
    dt = safe_dt(c, g, grid, 1.0)
    times, snaps = evolve_trajectory(c, g, grid, z, 3.0, dt)
    assert np.max(np.abs(snaps)) <= 0.5
    lin = evolve_linear(c, grid, z, 3.0, dt).values
    assert np.max(np.abs(snaps[-1] - lin)) < 1e-10


def test_linear_flow_follows_cocycle():
    grid = Grid(64)
    hp = HullPoint(P1, -6.0)
    c = LinearCoefficientSpec(0.0, hp)
    dt = 0.001
    assert pde_log_cocycle(c, grid, 5.0, dt) == pytest.approx(log_cocycle(hp, 5.0), abs=1e-4)


def test_pde_cocycle_examples():
    grid = Grid(64)
    c = LinearCoefficientSpec(0.0, HullPoint(Constant(0.3)))
    assert pde_cocycle(c, grid, 4.0, 0.01) == pytest.approx(math.exp(1.2), rel=1e-4)
    p0 = LinearCoefficientSpec(0.0, HullPoint(NamedPiecewise("p0")))
    assert pde_cocycle(p0, grid, -1.0, 0.001) == pytest.approx(math.exp(-1.0), abs=1e-4)


def test_pde_cocycle_identity():
    grid = Grid(64)
    c = LinearCoefficientSpec(0.0, HullPoint(P1, -4.0))
    t, s, dt = 2.0, 1.5, 0.002
    lhs = pde_log_cocycle(c, grid, t + s, dt)
    rhs = pde_log_cocycle(c.advance(s), grid, t, dt) + pde_log_cocycle(c, grid, s, dt)
    assert lhs == pytest.approx(rhs, abs=1e-6)


def test_pde_cocycle_rejects_heterogeneous_profile():
    grid = Grid(32)
    c = LinearCoefficientSpec(0.0, HullPoint(P1), np.linspace(1, 2, 32))
    with pytest.raises(HeterogeneousProfile):
        pde_cocycle(c, grid, 1.0, 0.01)


@pytest.mark.skipif(len(kernels.backends()) < 2, reason="compiled kernel not built")
@pytest.mark.parametrize("grid", BCS, ids=lambda g: g.bc)
def test_backends_agree(grid):
    rng = np.random.default_rng(1)
    g = Deadzone(0.7, 2.5, 0.1)
    c = coeff(grid, shift=-2.0)
    z = rng.uniform(-1, 1, grid.n_nodes)
    dt = safe_dt(c, g, grid, 1.0)
    a = evolve(c, g, grid, z, 3.0, dt, backend="cython").values
    b = evolve(c, g, grid, z, 3.0, dt, backend="python").values
    assert np.max(np.abs(a - b)) < 1e-12


def test_trajectory_records_initial_state():
    grid = Grid(16)
    c = coeff(grid)
    times, snaps = evolve_trajectory(c, PurePower(), grid, np.ones(16), 1.0, 0.01, record_every=25)
    np.testing.assert_allclose(times, [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_array_equal(snaps[0], np.ones(16))
    rows = list(trajectory_csv_rows(times, snaps, grid))
    assert rows[0] == ("t", "x", "value") and len(rows) == 1 + 5 * 16
    assert rows[1][:2] == (0.0, 0.0) and rows[17][0] == 0.25
