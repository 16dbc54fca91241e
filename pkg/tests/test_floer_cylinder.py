import numpy as np
import pytest

import Models.CriticalPoints as CriticalPoints
import Models.FloerCylinder as FloerCylinder
import Models.HeatFlow as HeatFlow
import Models.Potentials as Potentials
import Models.TorusLoops as TorusLoops
from Models.Errors import AnchorInfeasible
from Models.FloerCylinder import CylinderGrid, WeightedNorm
from Models.TorusLoops import TWO_PI


def _ansatz_grid(epsilon, S=21.0, Ns=800, Nt=16):
    # u = 2pi t + 2 arctan(e^-s), v = 2pi: the pendulum cylinder from x^(1) to x^(0)
    s = np.linspace(-S, S, Ns + 1)
    sigma = 2.0 * np.arctan(np.exp(-s))
    u = np.broadcast_to(sigma[:, None, None], (Ns + 1, Nt, 1)).copy()
    v = np.full((Ns + 1, Nt, 1), TWO_PI)
    return CylinderGrid(TorusLoops.as_winding((1,)), S, epsilon, u, v)


def test_s_differences_are_exact_on_quadratics():
    Ns, S = 20, 1.0
    s = np.linspace(-S, S, Ns + 1)
    D = FloerCylinder.s_difference_matrix(Ns, 2.0 * S / Ns)
    assert np.allclose(D @ (s ** 2 - s), 2.0 * s - 1.0, atol=1e-12)
    cubic = D @ (s ** 3 - 2.0 * s)
    assert np.allclose(cubic[2:-2], 3.0 * s[2:-2] ** 2 - 2.0, atol=1e-12)


def test_grid_validation():
    alpha = TorusLoops.as_winding((1,))
    with pytest.raises(ValueError):
        CylinderGrid(alpha, 1.0, 1.0, np.zeros((10, 16, 1)), np.zeros((10, 16, 1)))
    with pytest.raises(ValueError):
        CylinderGrid(alpha, 1.0, 0.0, np.zeros((9, 16, 1)), np.zeros((9, 16, 1)))
    with pytest.raises(ValueError):
        CylinderGrid(alpha, 1.0, 1.0, np.zeros((9, 16, 1)), np.zeros((9, 8, 1)))


def test_weighted_norms():
    with pytest.raises(NotImplementedError):
        WeightedNorm(1.0, p=3)
    with pytest.raises(ValueError):
        WeightedNorm(0.0)
    ones = np.ones((11, 16, 1))
    norm = WeightedNorm(0.5)
    assert norm.zero(ones, ones, 0.2) == pytest.approx(np.sqrt(2.0 * 1.25))
    # Constant fields have no derivatives, so both norms agree
    assert norm.one(ones, ones, 0.2) == pytest.approx(norm.zero(ones, ones, 0.2))


def test_symplectic_action_on_the_graph_of_the_velocity(pendulum_1d):
    V, points = pendulum_1d
    for cp in points:
        velocity = TorusLoops.differentiate(cp.loop).xi
        assert FloerCylinder.symplectic_action(cp.loop, velocity, V) == pytest.approx(cp.action, abs=1e-10)


def test_truncation_length(pendulum_1d):
    _, points = pendulum_1d
    assert FloerCylinder.truncation_length(points[1], points[0]) == 21.0


def test_anchor_and_endpoint_checks(pendulum_1d):
    V, points = pendulum_1d
    with pytest.raises(AnchorInfeasible):
        FloerCylinder.solve_cylinder(points[1], points[1], V, 1.0)
    with pytest.raises(ValueError):
        FloerCylinder.solve_cylinder(points[0], points[1], V, 1.0)
    with pytest.raises(ValueError):
        FloerCylinder.solve_cylinder(points[1], points[0], V, 0.0)


def test_boundary_grid_pins_the_ends(pendulum_1d):
    _, points = pendulum_1d
    grid = FloerCylinder.boundary_grid(points[1], points[0], 0.5, 10.0, 40, 16, target_lift=(0,))
    assert grid.Ns == 40 and grid.Nt == 16 and grid.h == pytest.approx(0.5)
    assert np.allclose(grid.u[0], np.pi) and np.allclose(grid.u[-1], 0.0)
    assert np.allclose(grid.v, TWO_PI)
    with pytest.raises(ValueError):
        FloerCylinder.boundary_grid(points[1], points[0], 0.5, 10.0, 41, 16)


@pytest.mark.parametrize("epsilon", [1.0, 0.25])
def test_ansatz_solves_the_discrete_system(pendulum_1d, epsilon):
    V, _ = pendulum_1d
    grid = _ansatz_grid(epsilon)
    (f1, f2), residual = FloerCylinder.floer_residual(grid, V)
    assert f1.shape == (799, 16, 1)
    assert residual < 1e-4
    assert np.max(np.abs(f2)) < 1e-12
    assert FloerCylinder.energy(grid, V) == pytest.approx(2.0, abs=1e-5)
    assert FloerCylinder.ansatz_deviation(grid) < 1e-12


def test_unit_epsilon_is_the_plain_floer_system(pendulum_1d):
    V, _ = pendulum_1d
    grid = _ansatz_grid(1.0, Ns=200)
    grid = grid.with_fields(grid.u + 0.01 * np.sin(TWO_PI * grid.t)[None, :, None], grid.v)
    (f1, f2), _ = FloerCylinder.floer_residual(grid, V)
    g1, g2 = FloerCylinder.plain_floer_residual(grid, V)
    assert np.allclose(f1, g1, atol=1e-12)
    assert np.allclose(f2, g2, atol=1e-12)
    assert np.max(np.abs(g2)) > 1e-3


def test_slice_actions_decrease_along_the_ansatz(pendulum_1d):
    V, _ = pendulum_1d
    actions = FloerCylinder.slice_actions(_ansatz_grid(1.0), V)
    assert actions[0] == pytest.approx(2.0 * np.pi ** 2 + 1.0, abs=1e-12)
    assert actions[-1] == pytest.approx(2.0 * np.pi ** 2 - 1.0, abs=1e-12)
    assert np.all(np.diff(actions) <= 1e-14)
    assert actions[400] == pytest.approx(2.0 * np.pi ** 2, abs=1e-12)


def test_cylinder_table():
    grid = _ansatz_grid(1.0, Ns=20)
    table = FloerCylinder.cylinder_table(grid)
    assert sorted(table) == ["s", "t", "u_1", "v_1"]
    assert len(table["s"]) == 21 * 16


@pytest.mark.slow
def test_pendulum_cylinders_match_the_ansatz(pendulum_1d):
    V, points = pendulum_1d
    grids = {eps: FloerCylinder.solve_cylinder(points[1], points[0], V, eps, Ns=800, Nt=16, target_lift=(0,))
             for eps in (1.0, 0.25)}
    for grid in grids.values():
        assert FloerCylinder.energy(grid, V) == pytest.approx(2.0, abs=1e-4)
        sigma = 2.0 * np.arctan(np.exp(-grid.s))
        assert np.max(np.abs(grid.u - sigma[:, None, None])) < 1e-5
        assert np.max(np.abs(grid.v - TWO_PI)) < 1e-5
        assert grid.metadata["residual"] < 1e-8
    assert np.max(np.abs(grids[1.0].u - grids[0.25].u)) < 1e-5


@pytest.mark.slow
def test_adiabatic_residual_scaling():
    V = Potentials.Potential(1, [((1,), -1, 1.0, 0.0), ((1,), 0, 0.3, 0.0)])
    points = CriticalPoints.enumerate_critical(V, (1,), N=128, workers=1)
    source = next(cp for cp in points if cp.index == 1)
    line = HeatFlow.trace_flow_line(source, (1.0,), V, points, ds_max=0.02, record_every=1)
    target = points[line.target_id]
    epsilons = [0.4, 0.2, 0.1]
    rows = FloerCylinder.adiabatic_compare(line, source, target, V, epsilons, Ns=800, Nt=16, solve=False)
    for a, b in zip(rows[:-1], rows[1:]):
        assert a["residual"] / b["residual"] == pytest.approx(2.0, rel=0.1)
        assert 2.0 <= a["correction"] / b["correction"] <= 8.0


@pytest.mark.slow
def test_pendulum_line_already_solves_every_cylinder(pendulum_1d):
    V, points = pendulum_1d
    line = HeatFlow.trace_flow_line(points[1], (1.0,), V, points, ds_max=0.02, record_every=1)
    rows = FloerCylinder.adiabatic_compare(line, points[1], points[line.target_id], V, [1.0, 0.25], Ns=800, Nt=16)
    assert rows[0]["residual"] == pytest.approx(rows[0]["plain_residual"], rel=1e-12)
    for row in rows:
        assert np.isfinite(row["distance"])
        assert row["distance"] < 1e-4
        assert row["correction"] < 1e-4
        assert row["residual"] < 1e-4
        assert row["heat_defect"] == pytest.approx(row["residual"], rel=1e-9)
