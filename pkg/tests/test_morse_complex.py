from types import SimpleNamespace

import numpy as np
import pytest
from sympy import Matrix
from sympy.matrices.normalforms import smith_normal_form as sympy_smith_normal_form
from sympy.polys.domains import ZZ

import Models.CriticalPoints as CriticalPoints
import Models.HeatFlow as HeatFlow
import Models.MorseComplex as MorseComplex
import Models.Potentials as Potentials
from Models.Errors import BoundaryNotSquareZero
from Models.HeatFlow import FlowLine
from Models.TorusLoops import WindingClass

ALPHA = WindingClass((1,))


def _point(index, action):
    return SimpleNamespace(index=index, action=action, alpha=ALPHA)


def _line(source, target, sign, drop=1):
    return FlowLine(s_grid=np.zeros(1), slices=np.zeros((1, 16, 1)), actions=np.zeros(1), source_id=source,
                    target_id=target, sign=sign, direction_label=(float(sign),), index_drop=drop)


@pytest.fixture
def torus_like():
    # One minimum, two saddles, one maximum; every line has a partner of opposite sign
    points = [_point(0, 0.0), _point(1, 1.0), _point(1, 1.5), _point(2, 3.0)]
    lines = [_line(1, 0, 1), _line(1, 0, -1), _line(2, 0, 1), _line(2, 0, -1),
             _line(3, 1, 1), _line(3, 1, -1), _line(3, 2, 1), _line(3, 2, -1)]
    return points, lines


def _verify_snf(matrix, diagonal, L, R):
    m, n = matrix.shape
    D = np.zeros((m, n), dtype=object)
    for i, d in enumerate(diagonal):
        D[i, i] = d
    L, R = np.array(L, dtype=object).reshape(m, m), np.array(R, dtype=object).reshape(n, n)
    assert np.array_equal(L.dot(matrix.astype(object)).dot(R), D)
    nonzero = [d for d in diagonal if d != 0]
    assert diagonal[:len(nonzero)] == nonzero
    for a, b in zip(nonzero[:-1], nonzero[1:]):
        assert b % a == 0
    for U in (L, R):
        assert abs(Matrix(U.tolist()).det()) == 1


@pytest.mark.parametrize("seed", range(12))
def test_smith_normal_form_decomposition(seed):
    rng = np.random.default_rng(seed)
    shape = [(3, 3), (4, 4), (5, 5), (3, 4), (4, 3), (2, 6)][seed % 6]
    matrix = rng.integers(-6, 7, size=shape)
    diagonal, L, R = MorseComplex.smith_normal_form(matrix)
    _verify_snf(matrix, diagonal, L, R)
    if shape[0] == shape[1]:
        reference = sympy_smith_normal_form(Matrix(matrix.tolist()), domain=ZZ)
        expected = sorted(abs(int(reference[i, i])) for i in range(shape[0]) if reference[i, i] != 0)
        assert sorted(abs(d) for d in diagonal if d != 0) == expected


def test_smith_normal_form_known_case():
    matrix = np.array([[12, 6, 4, 8], [3, 9, 6, 12], [2, 16, 14, 28], [20, 10, 10, 20]])
    diagonal, L, R = MorseComplex.smith_normal_form(matrix)
    assert diagonal == [1, 10, 30, 0]
    _verify_snf(matrix, diagonal, L, R)


def test_smith_normal_form_budget():
    with pytest.raises(OverflowError):
        MorseComplex.smith_normal_form(np.array([[100, 3]]), budget=10)


def test_empty_matrices():
    assert MorseComplex.smith_normal_form(np.zeros((0, 3), dtype=int))[0] == []
    assert MorseComplex.integer_rank(np.zeros((2, 0), dtype=int)) == 0
    assert MorseComplex.rank_mod2(np.zeros((0, 0), dtype=int)) == 0


def test_ranks():
    assert MorseComplex.integer_rank([[2, 0], [0, 3]]) == 2
    assert MorseComplex.rank_mod2([[2, 0], [0, 3]]) == 1
    assert MorseComplex.rank_mod2([[1, 1], [1, 1]]) == 1
    assert MorseComplex.rank_mod2([[1, 1, 0], [0, 1, 1], [1, 0, 1]]) == 2


def test_kernel_basis():
    matrix = np.array([[1, 2, 3], [2, 4, 6]])
    K = MorseComplex.kernel_basis(matrix)
    assert K.shape == (3, 2)
    assert not np.any(matrix.astype(object).dot(K))
    assert MorseComplex.integer_rank(K) == 2


def test_torsion():
    complex_ = MorseComplex.ChainComplex(alpha=ALPHA, cutoff=np.inf, generators={0: (0,), 1: (1,)},
                                         boundary={1: np.array([[2]])}, actions={0: 0.0, 1: 1.0})
    result = MorseComplex.homology(complex_)
    assert result.betti == (0, 0)
    assert result.torsion == ((2,), ())
    assert result.describe(0) == "Z/2"
    assert result.describe(1) == "0"
    mod2 = MorseComplex.ChainComplex(alpha=ALPHA, cutoff=np.inf, generators={0: (0,), 1: (1,)},
                                     boundary={1: np.array([[0]])}, actions={0: 0.0, 1: 1.0}, coefficients="Z2")
    assert MorseComplex.homology(mod2).describe(1) == "Z2"


def test_torus_like_complex(torus_like):
    points, lines = torus_like
    complex_ = MorseComplex.build_complex(points, lines)
    assert complex_.generators == {0: (0,), 1: (1, 2), 2: (3,)}
    result = MorseComplex.homology(complex_)
    assert result.betti == (1, 2, 1)
    assert result.describe(1) == "Z^2"
    assert MorseComplex.homology(MorseComplex.build_complex(points, lines, coefficients="Z2")).betti == (1, 2, 1)


def test_uncancelled_line(torus_like):
    points, lines = torus_like
    lines = [line for line in lines if not (line.source_id == 2 and line.sign == -1)]
    complex_ = MorseComplex.build_complex(points, lines)
    assert complex_.boundary_matrix(1).tolist() == [[0, 1]]
    assert MorseComplex.homology(complex_).betti == (0, 1, 1)
    with pytest.raises(BoundaryNotSquareZero):
        MorseComplex.homology(MorseComplex.ChainComplex(
            alpha=ALPHA, cutoff=np.inf, generators=complex_.generators,
            boundary={1: np.array([[0, 1]]), 2: np.array([[0], [1]])}, actions=complex_.actions))


def test_boundary_not_square_zero():
    points = [_point(0, 0.0), _point(1, 1.0), _point(2, 2.0)]
    lines = [_line(2, 1, 1), _line(1, 0, 1)]
    with pytest.raises(BoundaryNotSquareZero):
        MorseComplex.build_complex(points, lines)


def test_lines_of_larger_index_drop_are_ignored(torus_like):
    points, lines = torus_like
    complex_ = MorseComplex.build_complex(points, lines + [_line(3, 0, 1, drop=2)])
    assert MorseComplex.homology(complex_).betti == (1, 2, 1)


def test_action_filtration(torus_like):
    points, lines = torus_like
    lower = MorseComplex.build_complex(points, lines, cutoff=2.0)
    upper = MorseComplex.build_complex(points, lines)
    assert [lower.rank(k) for k in range(3)] == [1, 2, 0]
    assert MorseComplex.homology(lower).betti == (1, 2, 0)
    maps = MorseComplex.filtered_map(lower, upper)
    assert maps[1].tolist() == [[1, 0], [0, 1]]
    for k in (0, 1):
        induced = MorseComplex.induced_homology_map(lower, upper, k)
        assert induced["isomorphism"]
    assert MorseComplex.induced_homology_map(lower, upper, 2) == {"source_rank": 0, "target_rank": 1, "rank": 0,
                                                                   "isomorphism": False}
    with pytest.raises(ValueError):
        MorseComplex.filtered_map(upper, lower)


def test_empty_sublevel_set(torus_like):
    points, lines = torus_like
    complex_ = MorseComplex.build_complex(points, lines, cutoff=-1.0)
    assert MorseComplex.homology(complex_).betti == (0, 0, 0)


def test_unknown_coefficients(torus_like):
    with pytest.raises(ValueError):
        MorseComplex.build_complex(*torus_like, coefficients="Q")


def test_matrix_text():
    matrix = np.array([[1, -2, 0], [0, 3, 4]])
    text = MorseComplex.matrix_to_text(matrix)
    assert text == "1 -2 0\n0 3 4"
    assert np.array_equal(MorseComplex.matrix_from_text(text), matrix)
    assert MorseComplex.matrix_from_text("", columns=2).shape == (0, 2)


def test_pendulum_homology(pendulum_lines_1d):
    _, points, lines = pendulum_lines_1d
    assert MorseComplex.homology(MorseComplex.build_complex(points, lines)).betti == (1, 1)
    below = MorseComplex.build_complex(points, lines, cutoff=2.0 * np.pi ** 2)
    assert MorseComplex.homology(below).betti == (1, 0)
    record = below.to_dict()
    assert record["generators"] == {"0": [0], "1": []}


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [(3,), (2, 1)])
def test_homology_of_other_classes(alpha):
    V = Potentials.pendulum_potential(alpha)
    N = 128 if len(alpha) == 1 else 64
    points = CriticalPoints.enumerate_critical(V, alpha, N=N, workers=1)
    lines = HeatFlow.trace_all_lines(points, V, workers=1)
    n = len(alpha)
    assert sum(line.counted and points[line.source_id].index == n for line in lines) == 2 * n
    result = MorseComplex.homology(MorseComplex.build_complex(points, lines))
    assert result.betti == ((1, 1) if n == 1 else (1, 2, 1))
    assert not any(result.torsion)
