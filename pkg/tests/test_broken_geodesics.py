import numpy as np
import pytest

import Models.BrokenGeodesics as BrokenGeodesics
import Models.CriticalPoints as CriticalPoints
import Models.Potentials as Potentials
import Models.TorusLoops as TorusLoops
from Models.BrokenGeodesics import BrokenFlowSystem, BrokenLoop
from Models.Errors import DegenerateCritical, GapViolated


def _straight(alpha, r, offset=0.0):
    alpha = TorusLoops.as_winding(alpha)
    return BrokenGeodesics.from_displacement(alpha, np.full((r, alpha.n), offset))


def _perturbed(alpha=(1,)):
    return Potentials.Potential(1, [((1,), -alpha[0], 1.0, 0.0), ((1,), 0, 0.3, 0.0)])


def test_straight_configurations():
    b = _straight((1,), 8)
    assert np.allclose(b.gaps(), np.pi / 4.0)
    assert BrokenGeodesics.broken_energy(b, Potentials.zero_potential(1)) == pytest.approx(2.0 * np.pi ** 2,
                                                                                         abs=1e-12)
    V = Potentials.pendulum_potential((1,))
    assert BrokenGeodesics.broken_energy(b, V) == pytest.approx(2.0 * np.pi ** 2 - 1.0, abs=1e-12)
    assert BrokenGeodesics.broken_energy(_straight((1,), 8, np.pi), V) == pytest.approx(2.0 * np.pi ** 2 + 1.0,
                                                                                        abs=1e-12)
    assert np.max(np.abs(BrokenGeodesics.broken_gradient(b, V))) < 1e-12


def test_gap_bound():
    with pytest.raises(GapViolated):
        BrokenGeodesics.broken_energy(_straight((3,), 8), Potentials.zero_potential(1))
    assert BrokenGeodesics.broken_energy(_straight((3,), 8), Potentials.zero_potential(1), gap_bound=3.0) == \
        pytest.approx(18.0 * np.pi ** 2)


def test_vertex_validation():
    with pytest.raises(ValueError):
        BrokenLoop(TorusLoops.as_winding((1,)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        BrokenLoop(TorusLoops.as_winding((1,)), np.zeros((8, 2)))
    with pytest.raises(ValueError):
        BrokenGeodesics.sample_loop(TorusLoops.straight_loop((1,), 128), 12)
    sampled = BrokenGeodesics.sample_loop(TorusLoops.straight_loop((1,), 128, offset=0.2), 16)
    assert sampled.r == 16
    assert np.allclose(sampled.y, 0.2)


def test_gradient_matches_finite_differences(rng):
    V = _perturbed()
    b = BrokenGeodesics.from_displacement((1,), 0.1 * rng.standard_normal((8, 1)))
    gradient = BrokenGeodesics.broken_gradient(b, V)
    h = 1e-5
    for j in range(b.r):
        step = np.zeros_like(b.q)
        step[j, 0] = h
        plus = BrokenGeodesics.broken_energy(BrokenLoop(b.alpha, b.q + step), V)
        minus = BrokenGeodesics.broken_energy(BrokenLoop(b.alpha, b.q - step), V)
        assert (plus - minus) / (2.0 * h) == pytest.approx(gradient[j, 0], abs=1e-7)


def test_hessian_matches_finite_differences(rng):
    V = _perturbed()
    b = BrokenGeodesics.from_displacement((1,), 0.1 * rng.standard_normal((8, 1)))
    H = BrokenGeodesics.broken_hessian(b, V)
    assert H.shape == (8, 8)
    h = 1e-5
    for j in range(b.r):
        step = np.zeros_like(b.q)
        step[j, 0] = h
        plus = BrokenGeodesics.broken_gradient(BrokenLoop(b.alpha, b.q + step), V)
        minus = BrokenGeodesics.broken_gradient(BrokenLoop(b.alpha, b.q - step), V)
        assert np.allclose((plus - minus).reshape(-1) / (2.0 * h), H[:, j], atol=1e-6)


def test_pendulum_configurations():
    V = Potentials.pendulum_potential((1,))
    points = BrokenGeodesics.enumerate_broken(V, (1,), r=8, workers=1)
    assert [cp.index for cp in points] == [0, 1]
    assert [cp.label for cp in points] == [(0,), (1,)]
    assert [cp.action for cp in points] == pytest.approx([2.0 * np.pi ** 2 - 1.0, 2.0 * np.pi ** 2 + 1.0],
                                                         abs=1e-9)
    assert points[1].unstable.shape == (1, 8, 1)
    assert points[1].to_dict()["loop"]["alpha"] == [1]


def test_zero_potential_is_degenerate():
    with pytest.raises(DegenerateCritical):
        BrokenGeodesics.enumerate_broken(Potentials.zero_potential(1), (1,), r=8, workers=1)


def test_too_few_vertices():
    with pytest.raises(ValueError):
        BrokenGeodesics.enumerate_broken(Potentials.pendulum_potential((1,)), (1,), r=6, workers=1)


def test_flow_decreases_the_energy(rng):
    V = Potentials.pendulum_potential((1,))
    system = BrokenFlowSystem(V, (1,), 8)
    y = np.pi + 0.05 * rng.standard_normal((8, 1))
    frame = np.zeros((0, 8, 1))
    energies = [system.energy(y)]
    for _ in range(10):
        y, frame = system.step(y, frame, 0.01)
        energies.append(system.energy(y))
    assert np.all(np.diff(energies) < 0.0)
    assert frame.shape == (0, 8, 1)


def test_pendulum_broken_homology():
    result = BrokenGeodesics.broken_homology(Potentials.pendulum_potential((1,)), (1,), r=8, workers=1)
    assert result.betti == (1, 1)


def test_broken_configurations_approach_the_continuum():
    V = _perturbed()
    continuum = CriticalPoints.enumerate_critical(V, (1,), N=128, workers=1)
    assert sorted(cp.label for cp in continuum) == [(0,), (1,)]
    distances = {label: [] for label in [(0,), (1,)]}
    for r in (8, 16, 32):
        broken = BrokenGeodesics.enumerate_broken(V, (1,), r=r, workers=1)
        for cp in continuum:
            match = next(b for b in broken if b.label == cp.label)
            assert match.index == cp.index
            distances[cp.label].append(BrokenGeodesics.continuum_distance(match, cp))
    for values in distances.values():
        assert values[0] / values[1] > 2.5
        assert values[1] / values[2] > 2.5


@pytest.mark.slow
def test_two_torus_broken_homology():
    result = BrokenGeodesics.broken_homology(Potentials.pendulum_potential((1, 1)), (1, 1), r=8, workers=1)
    assert result.betti == (1, 2, 1)
    assert not any(result.torsion[k] for k in range(3))
