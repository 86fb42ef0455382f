"""End-to-end acceptance checks; each prints a PASS/FAIL line with the measured numbers."""
import math
import time

import numpy as np

from attractor_lab import attractor as at
from attractor_lab.cocycle import log_cocycle, spectrum_estimate
from attractor_lab.hull import Constant, HullPoint, NamedPiecewise, limit_points
from attractor_lab.parabolic import (Deadzone, Grid, LinearCoefficientSpec, PurePower, evolve, evolve_linear,
                                     evolve_trajectory, max_stable_dt, principal_eigenpair)
from attractor_lab.scalar_ode import ScalarProblem, integrate_scalar, lemma_residual, residual_sample_times
from attractor_lab.scenario import bundled_scenarios, load_scenario

P0, P1, P2 = (NamedPiecewise(n) for n in ("p0", "p1", "p2"))
GRID = Grid(64, bc="neumann")


def w0_heteroclinic(t: float) -> float:
    """Closed-form entire solution for a = p1, theta = 3."""
    if t <= -1.0:
        v = -t
    else:
        e = math.exp(-2.0 * (t + 1.0))
        v = e + (1.0 - e) / 2.0
    return v ** -0.5


def test_criterion_1_theta_threshold(record_criterion):
    start = time.perf_counter()
    hp = HullPoint(P0)
    c = LinearCoefficientSpec(principal_eigenpair(GRID)[0], hp)
    ok, parts = True, []
    for theta, want in ((1.2, False), (1.4, False), (1.6, True), (2.0, True), (3.0, True)):
        predicted = at.integrability_criterion(hp, theta)
        sec = at.pullback_boundary(c, PurePower(1.0, theta), GRID, horizons=(25, 50, 100, 200, 400))
        combined, tie = at.combined_classification(sec, predicted)
        expected = "StronglyPositive" if want else "Trivial"
        good = predicted is want and combined == expected and (not tie or theta == 1.6)
        ok &= good
        parts.append(f"theta={theta}: criterion={predicted} section={sec.classification} ({sec.sup_norm:.4g})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    assert record_criterion(1, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_2_heteroclinic(record_criterion):
    start = time.perf_counter()
    pr = at.Problem(GRID, P1, PurePower(0.5, 3.0), profile_scale=0.5)
    tr = at.orbit_trace(pr, HullPoint(P1), -100.0, 10.0, 0.5, horizons=(200, 400, 800, 1600, 3200))
    oracle = np.array([w0_heteroclinic(t) for t in tr.times])
    err = float(np.max(np.abs(tr.sup_norms - oracle)))
    terminal = abs(float(tr.sup_norms[-1]) - math.sqrt(2.0))
    elapsed = time.perf_counter() - start
    ok = err < 1e-2 and terminal < 1e-3 and elapsed < 60
    assert record_criterion(2, ok, f"max |b - w0| on [-100,10] = {err:.2e}; |b(10) - sqrt2| = {terminal:.2e}; "
                                   f"{elapsed:.1f}s")


def test_criterion_3_trivial_attractor(record_criterion):
    start = time.perf_counter()
    pr = at.Problem(GRID, P2, PurePower(1.0, 3.0))
    pts = [HullPoint(P2, s) for s in (-20.0, -10.0, 0.0, 10.0, 20.0)] + limit_points(P2)
    secs = at.sections(pr, pts, horizons=(25, 50, 100, 200))
    si = spectrum_estimate(P2, [1e3, 1e4], [-10.0, 0.0, 10.0])
    elapsed = time.perf_counter() - start
    trivial = all(s.classification == "Trivial" and s.sup_norm <= 1e-6 for s in secs)
    spec_ok = abs(si.alpha_P + 1.0) <= 0.05 and abs(si.lambda_P) <= 0.05
    ok = trivial and spec_ok and elapsed < 60
    raw = ", ".join(f"{s.hull_point.label}: b={s.sup_norm:.1e} (raw T=200 {s.raw_sup:.1e}, {s.method})"
                    for s in secs)
    assert record_criterion(3, ok, f"{raw}; spectrum [{si.alpha_P:.4f}, {si.lambda_P:.4f}]; {elapsed:.1f}s")


def test_criterion_4_lemma_residual(record_criterion):
    worst = {}
    for driver in (Constant(1.0), P1):
        hp = HullPoint(driver)
        ts = residual_sample_times(hp, -20.0, 20.0, 200)
        for theta in (2.0, 3.0):
            worst[(hp.label, theta)] = float(np.max(lemma_residual(hp, theta, ts)))
    ok = max(worst.values()) < 1e-6
    detail = ", ".join(f"{k[0]} theta={k[1]:g}: {v:.1e}" for k, v in worst.items())
    assert record_criterion(4, ok, f"max residual over 200 times: {detail}")


def test_criterion_5_decay_rate(record_criterion):
    pr = at.Problem(GRID, Constant(0.0), PurePower(1.0, 3.0), gamma=-0.5)
    rate = at.measured_decay_rate(pr, pr.point(), 10.0, 40.0, z0=1.0)
    ok = abs(rate + 0.5) <= 0.02
    assert record_criterion(5, ok, f"decay rate on [10,40] = {rate:.6f}")


def test_criterion_6_uniform_persistence(record_criterion):
    pr = at.Problem(GRID, Constant(0.0), PurePower(1.0, 3.0), gamma=0.5)
    e0 = principal_eigenpair(GRID)[1].values
    c = pr.coefficient(pr.point())
    gaps = {}
    for f in (0.01, 0.1, 1.0, 5.0):
        dt = 0.5 * max_stable_dt(c, pr.g, GRID, 5.0)
        u = evolve(c, pr.g, GRID, f * e0, 60.0, dt).values
        gaps[f] = float(np.max(np.abs(u - math.sqrt(0.5))))
    ok = max(gaps.values()) < 1e-3
    assert record_criterion(6, ok, "gap to sqrt(0.5) at t=60: " + ", ".join(f"{f}e0: {g:.1e}" for f, g in gaps.items()))


def test_criterion_7_deadzone_equivalences(record_criterion):
    g = Deadzone(1.0, 3.0, 0.5)
    reps = []
    for d in (P0, P1, P2):
        pts = [HullPoint(d, s) for s in (-20.0, 0.0, 20.0)] + limit_points(d)
        reps += [at.equivalence_report(LinearCoefficientSpec(0.0, hp), g, GRID, hp, horizon=400.0) for hp in pts]
    agree = [r.agree for r in reps]
    ok = all(agree) and len(reps) >= 6
    detail = ", ".join(f"{r.hull_point.label}:{''.join('T' if x else 'F' for x in (r.section_positive, r.cocycle_bounded, r.linear_persistent))}"
                       for r in reps)
    assert record_criterion(7, ok, f"{sum(agree)}/{len(reps)} points agree ({detail})")


def _monotonicity_violations(rng) -> int:
    g = PurePower(1.0, 3.0)
    grids = [Grid(33, bc="neumann"), Grid(33, bc="dirichlet"), Grid(33, bc="robin", alpha_bar=1.0)]
    bad = 0
    for i in range(50):
        grid = grids[i % 3]
        c = LinearCoefficientSpec(principal_eigenpair(grid)[0], HullPoint(P1, rng.uniform(-20, 20)))
        z1 = rng.uniform(-2, 2, grid.n_nodes)
        z2 = z1 + rng.uniform(0, 1, grid.n_nodes)
        dt = 0.5 * max_stable_dt(c, g, grid, 3.0)
        bad += int(np.any(evolve(c, g, grid, z1, 1.0, dt).values > evolve(c, g, grid, z2, 1.0, dt).values + 1e-14))
    return bad


def test_criterion_8_property_suites(record_criterion):
    rng = np.random.default_rng(2024)
    results = {}
    results["monotonicity violations"] = _monotonicity_violations(rng)

    worst = 0.0
    for _ in range(100):
        t, s = rng.uniform(-50, 50, 2)
        for d in (P0, P1, P2):
            hp = HullPoint(d)
            worst = max(worst, abs(log_cocycle(hp, t + s) - log_cocycle(hp.advance(s), t) - log_cocycle(hp, s)))
    results["cocycle identity"] = worst

    g = PurePower(1.0, 3.0)
    sub_bad = 0
    for lam in (1.5, 2.0, 5.0):
        for _ in range(5):
            c = LinearCoefficientSpec(0.0, HullPoint(P1, rng.uniform(-10, 10)))
            z = rng.uniform(0, 1.5, 33)
            grid = Grid(33)
            dt = 0.5 * max_stable_dt(c, g, grid, lam * 1.5)
            sub_bad += int(np.any(evolve(c, g, grid, lam * z, 2.0, dt).values
                                  > lam * evolve(c, g, grid, z, 2.0, dt).values + 1e-12))
    results["sublinearity violations"] = sub_bad

    grid = Grid(33, bc="robin", alpha_bar=0.5)
    c = LinearCoefficientSpec(principal_eigenpair(grid)[0], HullPoint(P2, -3.0))
    z1, z2 = rng.normal(size=(2, 33))
    dz = Deadzone(1.0, 3.0, 0.2)
    dt = 0.5 * max_stable_dt(c, dz, grid, 4.0)
    results["oddness"] = float(np.max(np.abs(evolve(c, dz, grid, z1, 2.0, dt).values
                                             + evolve(c, dz, grid, -z1, 2.0, dt).values)))
    results["linearity"] = float(np.max(np.abs(evolve_linear(c, grid, z1 + z2, 2.0, dt).values
                                                - evolve_linear(c, grid, z1, 2.0, dt).values
                                                - evolve_linear(c, grid, z2, 2.0, dt).values)))

    errs = [abs(principal_eigenpair(Grid(n, bc="dirichlet"))[0] - math.pi ** 2) for n in (17, 33, 65, 129)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    results["dirichlet ratios"] = ratios

    ladder_bad = []
    for name in bundled_scenarios():
        pr = load_scenario(name).problem
        it = []
        at.pullback_boundary(pr.coefficient(pr.point()), pr.g, pr.grid, iterates=it)
        if any(np.any(b > a + 10 * at.DEFAULT_TOL) for a, b in zip(it, it[1:])):
            ladder_bad.append(name)
    results["non-monotone ladders"] = ladder_bad

    ok = (results["monotonicity violations"] == 0 and results["cocycle identity"] < 1e-8
          and sub_bad == 0 and results["oddness"] < 1e-10 and results["linearity"] < 1e-10
          and all(abs(r - 4.0) <= 0.5 for r in ratios) and not ladder_bad)
    detail = (f"monotone pairs bad={results['monotonicity violations']}/50; cocycle identity {worst:.1e}; "
              f"sublinear bad={sub_bad}; oddness {results['oddness']:.1e}; linearity {results['linearity']:.1e}; "
              f"Dirichlet ratios {', '.join(f'{r:.3f}' for r in ratios)}; "
              f"ladders monotone in {len(bundled_scenarios()) - len(ladder_bad)}/{len(bundled_scenarios())} scenarios")
    assert record_criterion(8, ok, detail)


def test_criterion_9_pde_matches_scalar(record_criterion):
    rng = np.random.default_rng(9)
    problems = [at.Problem(GRID, P1, PurePower(0.5, 3.0), profile_scale=0.5),
                at.Problem(GRID, P0, PurePower(1.0, 3.0)),
                at.Problem(GRID, P2, PurePower(1.0, 2.0))]
    worst = 0.0
    dt = 0.0025
    for i, z in enumerate(rng.uniform(0.05, 3.0, 10)):
        pr = problems[i % len(problems)]
        a0, k = at.scalar_reduction(pr)
        shift = float(rng.uniform(-20, 5))
        hp = HullPoint(pr.driver, shift)
        times, snaps = evolve_trajectory(pr.coefficient(hp), pr.g, GRID, np.full(64, z), 40.0, dt,
                                         record_every=int(round(0.5 / dt)))
        spread = float(np.max(np.ptp(snaps, axis=1)))
        tr = integrate_scalar(ScalarProblem(pr.g.theta, HullPoint(a0, shift)), z / k, 0.0, 40.0, 0.5)
        worst = max(worst, float(np.max(np.abs(snaps.max(axis=1) - k * tr.values))), spread)
    ok = worst < 1e-4
    assert record_criterion(9, ok, f"max |PDE - ODE| over 10 initial constants on [0,40] = {worst:.2e} (dt={dt})")
