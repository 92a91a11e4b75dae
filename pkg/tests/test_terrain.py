import math

import numpy as np
import pytest

from infothermo.terrain import (
    DomainExit,
    Path,
    PlanError,
    RobotParams,
    TerrainError,
    TerrainField,
    brute_force_path,
    dump_grid,
    entropy_functional,
    flow_invariant,
    free_energy,
    harmonic_boundary_solution,
    integrate,
    load_grid,
    max_drift,
    next_step,
    path_csv,
    plan,
    plan_legs,
)

FREE = TerrainField.constant(0.0)
HARM = TerrainField.harmonic(1.0)


def straight(x0, x1, n, t=1.0):
    return Path(0.0, t / n, np.linspace(x0, x1, n + 1))


def test_entropy_functional_examples():
    p = RobotParams(mu=1.0, eps=1.0)
    assert entropy_functional(Path(0, 0.1, np.zeros(11)), FREE, p) == 0.0
    assert entropy_functional(straight(0.0, 2.0, 50), FREE, p) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(TerrainError):
        entropy_functional(Path(0, 0.1, [0.0]), FREE, p)


def test_pocket_solution_beats_straight_crossing():
    pocket = TerrainField.harmonic(-2.0)  # V = -x^2
    p = RobotParams(dt=1e-2)
    r = plan(-1.0, 1.0, 0.0, 2.0, pocket, p)
    s_plan = entropy_functional(r.path, pocket, p)
    s_line = entropy_functional(straight(-1.0, 1.0, r.path.n - 1, 2.0), pocket, p)
    assert s_plan <= s_line


def test_free_energy_identity():
    p = RobotParams(T=2.5, U0=10.0)
    path = straight(0.0, 1.0, 10)
    assert free_energy(path, FREE, p) == pytest.approx(10.0 - 2.5 * entropy_functional(path, FREE, p))


def test_next_step_examples():
    p = RobotParams(dt=1.0)
    assert next_step(0.0, 1.0, FREE, p) == pytest.approx([2.0])
    g = 0.7
    assert next_step(0.0, 0.0, TerrainField.linear([g]), p) == pytest.approx([-g])


def test_harmonic_against_fine_reference():
    p = RobotParams(dt=1e-3)
    coarse = integrate(1.0, math.cos(1e-3), 10_000, HARM, p)
    fine = integrate(1.0, math.cos(1e-5), 1_000_000, HARM, RobotParams(dt=1e-5))
    assert np.max(np.abs(coarse.xs[:, 0] - fine.xs[::100, 0])) < 1e-3


def test_reversibility():
    rng = np.random.default_rng(0)
    f = TerrainField.gaussian([(1.0, [0.3, -0.2], 0.5), (-0.5, [-1.0, 1.0], 0.8)], dim=2)
    p = RobotParams(dt=1e-2)
    for _ in range(10):
        a, b = rng.normal(size=2), rng.normal(size=2)
        c = next_step(a, b, f, p)
        assert np.array_equal(next_step(c, b, f, p), a) or np.allclose(next_step(c, b, f, p), a, rtol=0, atol=1e-15)
    path = integrate([0.1, 0.2], [0.11, 0.19], 500, f, p)
    back = integrate(path.xs[-1], path.xs[-2], 500, f, p)
    assert np.max(np.abs(back.xs[::-1] - path.xs)) < 1e-11


def test_flow_invariant_free_motion_exact():
    p = RobotParams()
    e = flow_invariant(Path(0.0, 0.25, 0.5 * np.arange(41)), FREE, p)
    assert np.all(e == e[0])
    assert max_drift(e) == 0.0


def test_flow_drift_second_order():
    drifts = []
    for dt in (1e-3, 5e-4):
        p = RobotParams(dt=dt)
        n = int(round(10 / dt))
        drifts.append(max_drift(flow_invariant(integrate(1.0, math.cos(dt), n, HARM, p), HARM, p)))
    assert drifts[0] < 1e-4
    assert 3 <= drifts[0] / drifts[1] <= 5


def test_flow_drift_flags_non_solutions():
    p = RobotParams(dt=1e-3)
    good = integrate(1.0, math.cos(1e-3), 2000, HARM, p)
    noisy = Path(good.t0, good.dt, good.xs + np.random.default_rng(1).normal(0, 1e-4, good.xs.shape))
    assert max_drift(flow_invariant(noisy, HARM, p)) > 100 * max_drift(flow_invariant(good, HARM, p))


def test_plan_free_is_straight_line():
    p = RobotParams(dt=1e-2)
    r = plan([0.0, 1.0], [2.0, -1.0], 0.0, 1.0, TerrainField.constant(0.0, dim=2), p)
    line = np.linspace([0.0, 1.0], [2.0, -1.0], r.path.n)
    assert np.max(np.abs(r.path.xs - line)) < 1e-9


def test_plan_matches_harmonic_closed_form():
    p = RobotParams(mu=2.0, eps=0.5, dt=1e-3)
    omega = math.sqrt(p.eps / p.mu)
    r = plan(0.4, -0.7, 1.0, 3.5, HARM, p)
    exact = harmonic_boundary_solution(0.4, -0.7, 1.0, 3.5, omega, r.path.times)
    assert np.max(np.abs(r.path.xs[:, 0] - exact)) < 1e-4
    assert abs(r.path.xs[-1, 0] + 0.7) <= 1e-6


def test_plan_is_local_minimum():
    p = RobotParams(dt=1e-2)
    f = TerrainField.gaussian([(0.8, [0.5], 0.4)])
    r = plan(0.0, 1.0, 0.0, 1.5, f, p)
    s = entropy_functional(r.path, f, p)
    rng = np.random.default_rng(3)
    n = r.path.n
    for _ in range(100):
        bump = np.zeros((n, 1))
        bump[1:-1, 0] = rng.normal(0, 1e-2, n - 2) * np.sin(np.linspace(0, math.pi, n))[1:-1]
        assert entropy_functional(Path(0, r.path.dt, r.path.xs + bump), f, p) >= s


def test_scale_gauge():
    f = TerrainField.gaussian([(1.0, [0.2], 0.3)])
    a = integrate(0.0, 0.01, 300, f, RobotParams(mu=1.0, eps=2.0, dt=1e-2))
    b = integrate(0.0, 0.01, 300, f, RobotParams(mu=3.0, eps=6.0, dt=1e-2))
    assert np.allclose(a.xs, b.xs, rtol=0, atol=1e-12)


def test_chained_legs_conserve_flow_per_leg():
    p = RobotParams(dt=1e-3)
    legs = plan_legs([0.0, 1.0, 0.5, -0.5], [1.0, 0.8, 1.2], HARM, p)
    assert legs[0].path.xs[-1, 0] == pytest.approx(1.0, abs=1e-6)
    assert legs[1].path.xs[0, 0] == legs[0].path.xs[-1, 0] or abs(legs[1].path.xs[0, 0] - 1.0) < 1e-12
    for leg in legs:
        assert max_drift(leg.flow) < 1e-4


def test_linear_field_slows_in_rich_region():
    f = TerrainField.linear([4.0])
    cands = [np.linspace(-0.5, 1.5, 9)] * 3
    p = RobotParams()
    path, _ = brute_force_path(0.0, 1.0, 0.0, 1.0, f, p, cands)
    line = straight(0.0, 1.0, 4)
    assert np.sum(f.V_many(path.xs)) > np.sum(f.V_many(line.xs))


def test_brute_force_free_is_straight():
    cands = [np.linspace(-0.5, 1.5, 9)] * 3
    path, s = brute_force_path(0.0, 1.0, 0.0, 1.0, FREE, RobotParams(), cands)
    assert np.allclose(path.xs[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])


def test_brute_force_never_beats_plan():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        dur = float(rng.uniform(0.5, 1.5))
        kind = rng.integers(3)
        if kind == 0:
            f = TerrainField.linear([rng.normal()])
        elif kind == 1:
            f = TerrainField.harmonic(float(rng.uniform(-2, 1)))
        else:
            f = TerrainField.gaussian([(float(rng.normal()), [float(rng.normal())], 0.7)])
        x0, x1 = rng.normal(size=2)
        p = RobotParams(dt=dur / (m + 1))
        r = plan(x0, x1, 0.0, dur, f, p)
        s_plan = entropy_functional(r.path, f, p)
        lo, hi = min(x0, x1) - 1, max(x0, x1) + 1
        path, s_brute = brute_force_path(x0, x1, 0.0, dur, f, p, [np.linspace(lo, hi, 9)] * m)
        assert s_brute >= s_plan - 1e-9
        assert s_brute == pytest.approx(entropy_functional(path, f, p))


def test_brute_force_limits():
    with pytest.raises(TerrainError):
        brute_force_path(0, 1, 0, 1, FREE, RobotParams(), [[0.0]] * 6)
    with pytest.raises(TerrainError):
        brute_force_path(0, 1, 0, 1, FREE, RobotParams(), [list(range(10))])


def test_grid_field_bilinear_and_exit():
    xs = np.linspace(0, 2, 21)
    ys = np.linspace(-1, 1, 11)
    vals = np.array([[x * x + 2 * y for x in xs] for y in ys])
    f = TerrainField.grid(vals, (0.0, -1.0), (0.1, 0.2))
    assert f.V([1.0, 0.2]) == pytest.approx(1.4)
    h = 1e-4
    pt = np.array([1.03, 0.05])
    fd = [(f.V(pt + h * e) - f.V(pt - h * e)) / (2 * h) for e in np.eye(2)]
    assert np.allclose(f.grad(pt), fd, atol=1e-6)
    assert f.grad(pt)[0] == pytest.approx(2 * 1.03, abs=0.1)
    with pytest.raises(DomainExit):
        f.V([2.5, 0.0])
    with pytest.raises(DomainExit):
        integrate([1.9, 0.0], [1.95, 0.0], 10, f, RobotParams(dt=1.0, eps=1e-9))


def test_grid_file_roundtrip():
    vals = np.arange(12, dtype=float).reshape(3, 4)
    f = TerrainField.grid(vals, (0.5, -1.0), (0.25, 0.5))
    g = load_grid(dump_grid(f))
    assert np.array_equal(g.values, vals) and g.origin == f.origin and g.spacing == f.spacing
    with pytest.raises(TerrainError):
        load_grid("2 2 0 0 1 1\n1 2 3\n")


def test_plan_reports_domain_exit():
    f = TerrainField.grid(np.zeros((2, 5)), (0.0, 0.0), (1.0, 1.0))
    with pytest.raises(PlanError) as e:
        plan([0.0, 0.0], [9.0, 0.0], 0.0, 1.0, f, RobotParams(dt=0.1))
    assert math.isinf(e.value.best_miss) or e.value.best_miss >= 0


def test_params_and_path_csv():
    with pytest.raises(TerrainError):
        RobotParams(mu=0)
    with pytest.raises(TerrainError):
        RobotParams(U0=-1)
    p = RobotParams(dt=0.5)
    text = path_csv(straight(0.0, 1.0, 2), FREE, p)
    lines = text.splitlines()
    assert lines[0] == "t,x,E_flow"
    assert lines[1].endswith(",") and lines[2] == "0.5,0.5,0.5"
