import numpy as np
import pytest

import Models.CriticalPoints as CriticalPoints
import Models.Potentials as Potentials
import Models.TorusLoops as TorusLoops
from Models.Errors import DegenerateCritical
from Models.TorusLoops import TWO_PI


def test_pendulum_critical_points(pendulum_1d):
    _, points = pendulum_1d
    assert [cp.label for cp in points] == [(0,), (1,)]
    assert [cp.index for cp in points] == [0, 1]
    assert points[0].action == pytest.approx(2.0 * np.pi ** 2 - 1.0, abs=1e-8)
    assert points[1].action == pytest.approx(2.0 * np.pi ** 2 + 1.0, abs=1e-8)
    for cp in points:
        assert cp.residual < 1e-10
        assert cp.gap == pytest.approx(1.0, abs=1e-8)
        assert np.ptp(cp.loop.y) < 1e-10


@pytest.mark.parametrize("label, shift", [((0,), 1.0), ((1,), -1.0)])
def test_pendulum_spectra(pendulum_1d, label, shift):
    cp = CriticalPoints.find_by_label(pendulum_1d[1], label)
    ks = [0] + [k for k in range(1, 6) for _ in range(2)]
    expected = [4.0 * np.pi ** 2 * k ** 2 + shift for k in ks]
    assert np.allclose(cp.spectrum_head[:11], expected, atol=1e-6)


def test_unstable_direction_is_the_constant_field(pendulum_1d):
    cp = CriticalPoints.find_by_label(pendulum_1d[1], (1,))
    assert cp.unstable.shape == (1, 128, 1)
    assert np.allclose(cp.unstable[0], 1.0, atol=1e-8)
    assert CriticalPoints.find_by_label(pendulum_1d[1], (0,)).unstable.shape == (0, 128, 1)


@pytest.mark.parametrize("a", [0, 2])
def test_other_classes_have_two_points(a):
    V = Potentials.pendulum_potential((a,))
    points = CriticalPoints.enumerate_critical(V, (a,), N=64, workers=1)
    assert len(points) == 2
    assert [cp.action for cp in points] == pytest.approx([2.0 * np.pi ** 2 * a ** 2 - 1.0,
                                                          2.0 * np.pi ** 2 * a ** 2 + 1.0], abs=1e-8)


def test_zero_potential_is_degenerate():
    seed = TorusLoops.straight_loop((1,), 32, offset=0.3)
    with pytest.raises(DegenerateCritical) as info:
        CriticalPoints.find_critical(seed, Potentials.zero_potential(1))
    assert info.value.gap < 1e-6


def test_newton_converges_from_a_wavy_seed():
    t = np.arange(64) / 64.0
    seed = TorusLoops.make_loop((1,), np.pi + 0.3 * np.sin(TWO_PI * t) + 0.2)
    cp = CriticalPoints.find_critical(seed, Potentials.pendulum_potential((1,)))
    assert cp.label == (1,)
    assert cp.index == 1
    assert np.linalg.norm(CriticalPoints.euler_lagrange_residual(cp.loop, Potentials.pendulum_potential((1,))).xi) < 1e-8


def test_hessian_operator_is_symmetric(pendulum_1d):
    V, points = pendulum_1d
    A = CriticalPoints.hessian_operator(TorusLoops.resample(points[1].loop, 16), V)
    assert A.shape == (16, 16)
    assert np.array_equal(A, A.T)


def test_orient_fixes_the_sign():
    t = np.arange(16) / 16.0
    v = np.stack([np.sin(TWO_PI * t), np.cos(TWO_PI * t)], axis=1)
    assert np.array_equal(CriticalPoints.orient(v), CriticalPoints.orient(-v))
    assert np.array_equal(CriticalPoints.orient(np.zeros((16, 1))), np.zeros((16, 1)))


def test_seed_lattice():
    seeds = CriticalPoints.seed_lattice((1, 1), 32, per_axis=3)
    assert len(seeds) == 9
    assert all(np.all(np.ptp(seed.y, axis=0) < 1e-12) for seed in seeds)


def test_filters(pendulum_1d):
    _, points = pendulum_1d
    below = CriticalPoints.filter_by_action(points, 2.0 * np.pi ** 2)
    assert [cp.label for cp in below] == [(0,)]
    assert CriticalPoints.filter_by_action(points, np.inf) == points
    with pytest.raises(KeyError):
        CriticalPoints.find_by_label(points, (2,))


def test_critical_point_record(pendulum_1d):
    record = pendulum_1d[1][1].to_dict()
    assert record["index"] == 1
    assert record["label"] == [1]
    assert len(record["loop"]["samples"]) == 128


def test_three_torus_indices():
    V = Potentials.pendulum_potential((1, 1, 1))
    points = CriticalPoints.enumerate_critical(V, (1, 1, 1), N=32, per_axis=2, workers=1)
    assert sorted(cp.index for cp in points) == [0, 1, 1, 1, 2, 2, 2, 3]
    assert all(cp.index == sum(cp.label) for cp in points)


def test_small_perturbations_keep_the_critical_set(rng):
    V = Potentials.pendulum_potential((1, 1)) + Potentials.random_perturbation(2, rng, amplitude=1e-3)
    points = CriticalPoints.enumerate_critical(V, (1, 1), N=64, workers=1)
    assert sorted(cp.index for cp in points) == [0, 1, 1, 2]
    assert sorted(cp.label for cp in points) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_jittered_seeds():
    with pytest.raises(ValueError):
        CriticalPoints.seed_lattice((1,), 32, jitter=0.2)
    with pytest.raises(ValueError):
        CriticalPoints.seed_lattice((1,), 32, jitter=-0.1, rng=np.random.default_rng(0))
    a = CriticalPoints.seed_lattice((1,), 32, jitter=0.2, rng=np.random.default_rng(7))
    b = CriticalPoints.seed_lattice((1,), 32, jitter=0.2, rng=np.random.default_rng(7))
    assert all(np.array_equal(x.y, y.y) for x, y in zip(a, b))
    assert all(0.0 < np.ptp(seed.y) <= 0.8 for seed in a)


def test_jittered_enumeration_finds_the_same_points(pendulum_1d, rng):
    V, plain = pendulum_1d
    points = CriticalPoints.enumerate_critical(V, (1,), N=128, jitter=0.3, rng=rng, workers=1)
    assert [cp.label for cp in points] == [cp.label for cp in plain]
    assert [cp.action for cp in points] == pytest.approx([cp.action for cp in plain], abs=1e-8)
