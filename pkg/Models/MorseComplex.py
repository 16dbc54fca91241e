'''
Action-filtered Morse complexes of one winding class: chain groups generated by critical points,
signed counts of isolated flow lines as boundary operator, homology by Smith normal form.
'''
from dataclasses import dataclass

import numpy as np

import Utils
from Models.Errors import BoundaryNotSquareZero
from Models.HeatFlow import characteristic_sign

log = Utils.get_logger("morse_complex")

INTEGER_BUDGET = 10 ** 18


@dataclass(frozen=True, eq=False)
class ChainComplex:
    alpha: object # WindingClass
    cutoff: float
    generators: dict # degree -> tuple of point ids, sorted by action
    boundary: dict # degree k >= 1 -> integer matrix [len(generators[k-1]), len(generators[k])]
    actions: dict # point id -> action
    coefficients: str = "Z"

    @property
    def top_degree(self):
        return max(self.generators) if self.generators else -1

    def rank(self, k):
        return len(self.generators.get(k, ()))

    def boundary_matrix(self, k):
        if k in self.boundary:
            return self.boundary[k]
        return np.zeros((self.rank(k - 1), self.rank(k)), dtype=np.int64)

    def to_dict(self):
        return {"alpha": list(self.alpha.alpha), "cutoff": Utils.to_jsonable(float(self.cutoff)),
                "coefficients": self.coefficients,
                "generators": {str(k): list(ids) for k, ids in sorted(self.generators.items())},
                "actions": {str(i): a for i, a in sorted(self.actions.items())},
                "boundary": {str(k): m.tolist() for k, m in sorted(self.boundary.items())}}


@dataclass(frozen=True)
class HomologyResult:
    betti: tuple
    torsion: tuple # per degree, tuple of invariant factors > 1 in divisibility order
    coefficients: str = "Z"

    def describe(self, k):
        '''
        Human-readable group, e.g. "Z", "0", "Z^2 + Z/2"
        '''
        ring = "Z" if self.coefficients == "Z" else "Z2"
        parts = []
        if self.betti[k] == 1:
            parts.append(ring)
        elif self.betti[k] > 1:
            parts.append(ring + "^" + str(self.betti[k]))
        parts += ["Z/" + str(d) for d in self.torsion[k]]
        return " + ".join(parts) if parts else "0"

    def to_dict(self):
        return {"coefficients": self.coefficients, "betti": list(self.betti),
                "torsion": [list(t) for t in self.torsion],
                "groups": [self.describe(k) for k in range(len(self.betti))]}


def _check_budget(row, budget):
    if any(abs(x) > budget for x in row):
        raise OverflowError("Smith normal form entry exceeds the integer budget " + str(budget))


def smith_normal_form(matrix, budget=INTEGER_BUDGET):
    '''
    Smith normal form over the integers with exact Python integers, D = L A R with L, R unimodular.
    Pivots are chosen of minimal absolute value and rows/columns are reduced by Euclidean division
    until the pivot divides every remaining entry.
    :param matrix: Integer matrix [m, n]
    :param budget: Largest absolute value allowed for any intermediate entry
    :return: Tuple (diagonal invariant factors (length min(m, n), nonzero ones first), L, R) as lists of lists
    '''
    shape = np.shape(matrix)
    m, n = (shape[0], shape[1]) if len(shape) == 2 else (0, 0)
    A = [[int(x) for x in row] for row in np.asarray(matrix).reshape(m, n).tolist()]
    L = [[int(i == j) for j in range(m)] for i in range(m)]
    R = [[int(i == j) for j in range(n)] for i in range(n)]
    for row in A:
        _check_budget(row, budget)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        L[i], L[j] = L[j], L[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in R:
            row[i], row[j] = row[j], row[i]

    def add_row(target, source, k):
        A[target] = [a + k * b for a, b in zip(A[target], A[source])]
        L[target] = [a + k * b for a, b in zip(L[target], L[source])]
        _check_budget(A[target], budget)

    def add_col(target, source, k):
        for row in A:
            row[target] += k * row[source]
        for row in R:
            row[target] += k * row[source]
        _check_budget([row[target] for row in A], budget)

    def smallest(s, cross_only):
        best, best_val = None, None
        if cross_only:
            candidates = [(i, s) for i in range(s, m)] + [(s, j) for j in range(s + 1, n)]
        else:
            candidates = [(i, j) for i in range(s, m) for j in range(s, n)]
        for i, j in candidates:
            if A[i][j] != 0 and (best_val is None or abs(A[i][j]) < best_val):
                best, best_val = (i, j), abs(A[i][j])
        return best

    for s in range(min(m, n)):
        pivot = smallest(s, cross_only=False)
        if pivot is None:
            break
        while True:
            swap_rows(s, pivot[0])
            swap_cols(s, pivot[1])
            for i in range(s + 1, m):
                q = A[i][s] // A[s][s]
                if q:
                    add_row(i, s, -q)
            for j in range(s + 1, n):
                q = A[s][j] // A[s][s]
                if q:
                    add_col(j, s, -q)
            if any(A[i][s] for i in range(s + 1, m)) or any(A[s][j] for j in range(s + 1, n)):
                pivot = smallest(s, cross_only=True)
                continue
            offender = next(((i, j) for i in range(s + 1, m) for j in range(s + 1, n) if A[i][j] % A[s][s]), None)
            if offender is None:
                break
            add_row(s, offender[0], 1)
            pivot = (s, s)
        if A[s][s] < 0:
            A[s] = [-a for a in A[s]]
            L[s] = [-a for a in L[s]]
    return [A[i][i] for i in range(min(m, n))], L, R


def integer_rank(matrix):
    diagonal, _, _ = smith_normal_form(matrix)
    return sum(1 for d in diagonal if d != 0)


def rank_mod2(matrix):
    '''
    Rank over the field with two elements by Gaussian elimination
    '''
    A = (np.asarray(matrix, dtype=np.int64) % 2).astype(np.uint8)
    if A.ndim != 2 or A.size == 0:
        return 0
    rank = 0
    for col in range(A.shape[1]):
        rows = np.flatnonzero(A[rank:, col]) + rank
        if len(rows) == 0:
            continue
        A[[rank, rows[0]]] = A[[rows[0], rank]]
        for i in np.flatnonzero(A[:, col]):
            if i != rank:
                A[i] ^= A[rank]
        rank += 1
        if rank == A.shape[0]:
            break
    return rank


def kernel_basis(matrix):
    '''
    Integer basis of the kernel of an integer matrix (columns), read off the column transform of the SNF
    :return: Array [n, dim ker]
    '''
    m, n = np.shape(matrix)
    diagonal, _, R = smith_normal_form(matrix)
    rank = sum(1 for d in diagonal if d != 0)
    R = np.array(R, dtype=object).reshape(n, n)
    return R[:, rank:]


def build_complex(points, lines, cutoff=np.inf, coefficients="Z", orientations=None, alpha=None):
    '''
    Chain groups C_k^a generated by critical points of index k with action at most the cutoff; entry (y, x)
    of the boundary is the signed count of isolated lines from x to y
    :param points: Enumerated critical points of one class
    :param lines: FlowLine list referencing positions in points
    :param cutoff: Action cutoff a (may be +inf)
    :param coefficients: "Z" or "Z2"
    :param orientations: Optional map point id -> +1/-1 flipping orientation conventions
    :return: ChainComplex
    '''
    if coefficients not in ("Z", "Z2"):
        raise ValueError("Coefficients must be Z or Z2, got " + str(coefficients))
    if alpha is None:
        if not points:
            raise ValueError("The winding class of an empty point list must be given")
        alpha = points[0].alpha
    top = max([cp.index for cp in points], default=0)
    included = [i for i, cp in enumerate(points) if cp.action <= cutoff]
    generators = {k: tuple(sorted((i for i in included if points[i].index == k), key=lambda i: (points[i].action, i)))
                  for k in range(top + 1)}
    position = {i: generators[points[i].index].index(i) for i in included}

    boundary = {k: np.zeros((len(generators[k - 1]), len(generators[k])), dtype=np.int64) for k in range(1, top + 1)}
    for line in lines:
        if not line.counted or line.source_id not in position:
            continue
        source, target = points[line.source_id], points[line.target_id]
        if source.index != target.index + 1:
            raise ValueError("Counted line " + str(line.source_id) + " -> " + str(line.target_id) +
                             " does not drop the index by one")
        if line.target_id not in position:
            raise ValueError("Line target " + str(line.target_id) + " lies above the cutoff of its source")
        boundary[source.index][position[line.target_id], position[line.source_id]] += \
            characteristic_sign(line, orientations)
    if coefficients == "Z2":
        boundary = {k: m % 2 for k, m in boundary.items()}

    for k in range(2, top + 1):
        square = boundary[k - 1] @ boundary[k]
        if coefficients == "Z2":
            square = square % 2
        if np.any(square):
            raise BoundaryNotSquareZero("Boundary composition in degree " + str(k) + " is nonzero: " +
                                        str(square.tolist()))
    complex_ = ChainComplex(alpha=alpha, cutoff=float(cutoff), generators=generators, boundary=boundary,
                            actions={i: points[i].action for i in included}, coefficients=coefficients)
    log.info("Complex of class %s at cutoff %s: ranks %s", alpha, cutoff,
             [complex_.rank(k) for k in range(top + 1)])
    return complex_


def homology(complex_):
    '''
    H_k = ker d_k / im d_{k+1} as rank plus torsion coefficients
    :param complex_: ChainComplex with vanishing boundary composition
    :return: HomologyResult
    '''
    top = complex_.top_degree
    for k in range(2, top + 1):
        square = complex_.boundary_matrix(k - 1) @ complex_.boundary_matrix(k)
        if complex_.coefficients == "Z2":
            square = square % 2
        if np.any(square):
            raise BoundaryNotSquareZero("Boundary composition in degree " + str(k) + " is nonzero")

    ranks, factors = {}, {}
    for k in range(1, top + 1):
        matrix = complex_.boundary_matrix(k)
        if complex_.coefficients == "Z2":
            ranks[k], factors[k] = rank_mod2(matrix), []
        else:
            diagonal, _, _ = smith_normal_form(matrix)
            nonzero = [abs(d) for d in diagonal if d != 0]
            ranks[k], factors[k] = len(nonzero), [d for d in nonzero if d > 1]
    betti, torsion = [], []
    for k in range(top + 1):
        betti.append(complex_.rank(k) - ranks.get(k, 0) - ranks.get(k + 1, 0))
        torsion.append(tuple(factors.get(k + 1, [])))
    return HomologyResult(betti=tuple(betti), torsion=tuple(torsion), coefficients=complex_.coefficients)


def filtered_map(complex_a, complex_b):
    '''
    Chain map C^a -> C^b induced by the inclusion of generators for cutoffs a <= b
    :return: Dictionary degree -> 0/1 matrix [rank_b(k), rank_a(k)]
    '''
    if complex_a.alpha != complex_b.alpha:
        raise ValueError("Filtered maps connect complexes of the same class only")
    if complex_a.cutoff > complex_b.cutoff:
        raise ValueError("Cutoffs must satisfy a <= b, got " + str(complex_a.cutoff) + " > " + str(complex_b.cutoff))
    maps = {}
    for k in range(complex_a.top_degree + 1):
        gens_b = complex_b.generators.get(k, ())
        matrix = np.zeros((len(gens_b), complex_a.rank(k)), dtype=np.int64)
        for col, i in enumerate(complex_a.generators[k]):
            if i not in gens_b:
                raise ValueError("Generator " + str(i) + " of the lower complex is missing above")
            matrix[gens_b.index(i), col] = 1
        maps[k] = matrix
    for k in range(1, complex_a.top_degree + 1):
        if np.any(complex_b.boundary_matrix(k) @ maps[k] - maps[k - 1] @ complex_a.boundary_matrix(k)):
            raise ValueError("Inclusion does not commute with the boundaries in degree " + str(k))
    return maps


def induced_homology_map(complex_a, complex_b, k):
    '''
    Rank of the map H_k(C^a) -> H_k(C^b) on free parts, from rank [i(Z_k^a) | B_k^b] - rank B_k^b
    :return: Dictionary with source_rank, target_rank, rank and whether the free parts are isomorphic
    '''
    inclusion = filtered_map(complex_a, complex_b)[k]
    cycles = kernel_basis(complex_a.boundary_matrix(k)) if k >= 1 else np.eye(complex_a.rank(0), dtype=np.int64)
    images = np.asarray(inclusion, dtype=object) @ np.asarray(cycles, dtype=object)
    boundaries = np.asarray(complex_b.boundary_matrix(k + 1), dtype=object)
    rank = integer_rank(np.concatenate([images, boundaries], axis=1)) - integer_rank(boundaries)
    source, target = homology(complex_a).betti[k], homology(complex_b).betti[k]
    return {"source_rank": source, "target_rank": target, "rank": rank,
            "isomorphism": rank == source == target}


def matrix_to_text(matrix):
    '''
    Plain-text integer matrix, one row per line with space-separated entries (an empty matrix is "")
    '''
    return "\n".join(" ".join(str(int(x)) for x in row) for row in np.asarray(matrix).tolist())


def matrix_from_text(text, columns=None):
    rows = [[int(x) for x in line.split()] for line in text.strip().splitlines() if line.strip()]
    if not rows:
        return np.zeros((0, columns or 0), dtype=np.int64)
    return np.array(rows, dtype=np.int64)
