'''
Finite-dimensional model of the loop space: closed r-gons q_0, ..., q_{r-1} in R^n with q_{j+r} = q_j + 2pi alpha
and bounded gaps, carrying the Riemann-sum action

    E(q) = sum_j r/2 |q_{j+1} - q_j|^2 - 1/r sum_j V(j/r, q_j).

Its Morse complex (Newton for critical configurations, exact Hessian index, gradient-flow shooting through
the same tracer as the heat flow) gives an independent homology computation for the loop-space complex.
'''
import itertools
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np
import scipy.linalg

import Utils
import Models.TorusLoops
import Models.CriticalPoints
import Models.HeatFlow
import Models.MorseComplex
from Models.TorusLoops import TWO_PI
from Models.Errors import DegenerateCritical, GapViolated, NoConvergence, NonFinite

log = Utils.get_logger("broken_geodesics")

GAP_BOUND = 0.5 * np.pi


@dataclass(frozen=True, eq=False)
class BrokenLoop:
    alpha: object # WindingClass
    q: np.ndarray # [r, n] vertices q_0 .. q_{r-1}

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        if q.ndim != 2 or q.shape[1] != self.alpha.n:
            raise ValueError("Vertices must have shape [r, n] with n = " + str(self.alpha.n))
        if q.shape[0] < 8:
            raise ValueError("Broken loops need at least 8 vertices, got " + str(q.shape[0]))
        if not np.all(np.isfinite(q)):
            raise ValueError("Vertices must be finite")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def r(self):
        return self.q.shape[0]

    @property
    def n(self):
        return self.q.shape[1]

    @property
    def times(self):
        return np.arange(self.r) / float(self.r)

    @property
    def y(self):
        '''
        Periodic displacement q_j - 2pi alpha j/r
        '''
        return self.q - TWO_PI * self.times[:, None] * self.alpha.vector[None, :]

    def gaps(self):
        following = np.roll(self.q, -1, axis=0)
        following[-1] += TWO_PI * self.alpha.vector
        return np.linalg.norm(following - self.q, axis=1)

    def to_dict(self):
        return {"alpha": list(self.alpha.alpha), "vertices": self.q.tolist()}

    @staticmethod
    def from_dict(record):
        return BrokenLoop(Models.TorusLoops.WindingClass(tuple(record["alpha"])), np.array(record["vertices"]))


def from_displacement(alpha, y):
    alpha = Models.TorusLoops.as_winding(alpha)
    y = np.asarray(y, dtype=float).reshape(-1, alpha.n)
    times = np.arange(y.shape[0]) / float(y.shape[0])
    return BrokenLoop(alpha, y + TWO_PI * times[:, None] * alpha.vector[None, :])


def sample_loop(loop, r):
    '''
    Vertices of a continuum loop at t = j/r (N must be a multiple of r)
    '''
    if loop.N % r != 0:
        raise ValueError("Loop grid " + str(loop.N) + " is not a multiple of r = " + str(r))
    return BrokenLoop(loop.alpha, loop.positions[::loop.N // r])


def _check_gaps(b, gap_bound):
    widest = float(np.max(b.gaps()))
    if widest > gap_bound:
        raise GapViolated("Gap " + str(widest) + " exceeds the bound " + str(gap_bound))


def broken_energy(b, V, gap_bound=GAP_BOUND):
    '''
    E(q) = sum_j r/2 |q_{j+1} - q_j|^2 - 1/r sum_j V(j/r, q_j)
    :param b: BrokenLoop
    :param V: Potential
    :param gap_bound: Largest admissible |q_{j+1} - q_j|
    :return: Energy value
    '''
    _check_gaps(b, gap_bound)
    edges = b.gaps()
    return float(0.5 * b.r * np.sum(edges ** 2) - np.sum(V.value(b.times, b.q)) / b.r)


def _laplacian(y):
    return np.roll(y, -1, axis=0) - 2.0 * y + np.roll(y, 1, axis=0)


def broken_gradient(b, V):
    '''
    Euclidean gradient dE/dq_j = r (2 q_j - q_{j-1} - q_{j+1}) - 1/r grad V(j/r, q_j)
    :return: Array [r, n]
    '''
    return -b.r * _laplacian(b.y) - V.gradient(b.times, b.q) / b.r


def broken_hessian(b, V):
    '''
    Dense Euclidean Hessian of E, flattened so that entry j*n + i is component i of vertex j
    '''
    r, n = b.r, b.n
    L = 2.0 * np.eye(r) - np.roll(np.eye(r), 1, axis=1) - np.roll(np.eye(r), -1, axis=1)
    return r * np.kron(L, np.eye(n)) - scipy.linalg.block_diag(*V.hessian(b.times, b.q)) / r


@dataclass(frozen=True, eq=False)
class BrokenCritical:
    loop: BrokenLoop
    action: float
    index: int
    spectrum_head: tuple
    gap: float
    residual: float
    unstable: np.ndarray # [index, r, n] oriented, unit in the mean-square norm
    label: tuple = None

    @property
    def alpha(self):
        return self.loop.alpha

    def to_dict(self):
        return {"loop": self.loop.to_dict(), "action": self.action, "index": self.index,
                "spectrum_head": list(self.spectrum_head), "gap": self.gap, "residual": self.residual,
                "label": None if self.label is None else list(self.label)}


class BrokenFlowSystem:
    '''
    Gradient flow of E for the mean-square metric 1/r sum_j <xi_j, eta_j> (the discrete heat equation
    dy/ds = r^2 (y_{j+1} - 2 y_j + y_{j-1}) + grad V), with its linearization, integrated by RK4 substeps
    below the explicit stability limit. Interchangeable with the loop heat system in the line tracer.
    '''

    def __init__(self, V, alpha, r, gap_bound=GAP_BOUND):
        self.V = V
        self.alpha = Models.TorusLoops.as_winding(alpha)
        self.r = r
        self.gap_bound = gap_bound
        self.times = np.arange(r) / float(r)
        self.winding = TWO_PI * self.times[:, None] * self.alpha.vector[None, :]
        self.max_substep = 0.5 / r ** 2

    def _rhs(self, stacked):
        x = self.winding + stacked[0]
        out = self.r ** 2 * (np.roll(stacked, -1, axis=1) - 2.0 * stacked + np.roll(stacked, 1, axis=1))
        out[0] += self.V.gradient(self.times, x)
        if stacked.shape[0] > 1:
            out[1:] += np.einsum("jik,mjk->mji", self.V.hessian(self.times, x), stacked[1:])
        return out

    def step(self, y, frame, ds):
        stacked = np.concatenate([y[None], frame], axis=0)
        substeps = int(np.ceil(ds / self.max_substep))
        h = ds / substeps
        for _ in range(substeps):
            k1 = self._rhs(stacked)
            k2 = self._rhs(stacked + 0.5 * h * k1)
            k3 = self._rhs(stacked + 0.5 * h * k2)
            k4 = self._rhs(stacked + h * k3)
            stacked = stacked + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(stacked)):
            raise NonFinite("Broken-loop flow produced non-finite vertices")
        return stacked[0], stacked[1:]

    def loop(self, y):
        return from_displacement(self.alpha, y)

    def energy(self, y):
        return broken_energy(self.loop(y), self.V, self.gap_bound)

    def descent(self, y):
        return -self.r * broken_gradient(self.loop(y), self.V)

    def newton_correction(self, y):
        A = _operator(self.loop(y), self.V)
        return scipy.linalg.solve(A, self.descent(y).reshape(-1), assume_a="sym").reshape(y.shape)

    def norm(self, field):
        return Models.TorusLoops.l2_norm(field)

    def samples(self, point):
        return np.array(point.loop.y)

    def distance(self, y, point):
        shift = Models.TorusLoops.lattice_shift(y, point.loop.y)
        return Models.TorusLoops.l2_norm(y - point.loop.y - TWO_PI * shift[None, :])

    def shift(self, y, point):
        return tuple(int(m) for m in Models.TorusLoops.lattice_shift(y, point.loop.y))


def _operator(b, V):
    # Hessian for the mean-square metric; same index as the Euclidean one
    A = b.r * broken_hessian(b, V)
    return 0.5 * (A + A.T)


def _residual(b, V):
    return Models.TorusLoops.l2_norm(b.r * broken_gradient(b, V))


def newton(seed, V, max_steps=50, tol=1e-10, max_halvings=30):
    '''
    Damped Newton iteration on dE = 0 from a seed configuration
    :return: Tuple (converged BrokenLoop, residual, number of steps)
    '''
    b = seed
    res = _residual(b, V)
    for step in range(max_steps + 1):
        if res < tol:
            return b, res, step
        if step == max_steps:
            break
        rhs = (b.r * broken_gradient(b, V)).reshape(-1)
        A = _operator(b, V)
        try:
            delta = scipy.linalg.solve(A, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            delta = scipy.linalg.lstsq(A, rhs)[0]
        delta = delta.reshape(b.r, b.n)
        lam = 1.0
        for _ in range(max_halvings):
            trial = BrokenLoop(b.alpha, b.q - lam * delta)
            trial_res = _residual(trial, V)
            if trial_res < res:
                break
            lam *= 0.5
        else:
            if res < 10.0 * tol:
                return b, res, step
            raise NoConvergence("Damped Newton step on the broken energy failed to decrease the residual " + str(res))
        b, res = trial, trial_res
    raise NoConvergence("Broken-loop Newton iteration did not reach residual " + str(tol) + " (residual " +
                        str(res) + ")")


def find_broken_critical(seed, V, gap_bound=GAP_BOUND, threshold=1e-6, **options):
    '''
    Converges a seed to a nondegenerate critical configuration and reads off its index
    :return: BrokenCritical (displacement mean normalised to [-pi/2, 3pi/2))
    '''
    b, res, _ = newton(seed, V, **options)
    y = b.y
    y = y - TWO_PI * np.floor((np.mean(y, axis=0) + 0.5 * np.pi) / TWO_PI)[None, :]
    b = from_displacement(b.alpha, y)
    eigvals, eigvecs = scipy.linalg.eigh(_operator(b, V))
    gap = float(np.min(np.abs(eigvals)))
    if gap < threshold:
        raise DegenerateCritical("Smallest broken Hessian eigenvalue " + str(gap) + " below " + str(threshold) +
                                 ": the broken energy is not Morse", gap=gap)
    index = int(np.sum(eigvals < 0.0))
    frame = Models.CriticalPoints._unstable_frame(eigvals, eigvecs, b.r, b.n)
    label = tuple(int(np.round(m / np.pi)) % 2 for m in np.mean(y, axis=0))
    return BrokenCritical(loop=b, action=broken_energy(b, V, gap_bound), index=index,
                          spectrum_head=tuple(float(lam) for lam in eigvals[:Models.CriticalPoints.SPECTRUM_HEAD]),
                          gap=gap, residual=res, unstable=frame, label=label)


def _find_from_seed(task):
    seed, V, options = task
    try:
        return find_broken_critical(seed, V, **options)
    except (NoConvergence, GapViolated) as e:
        log.warning("Broken seed skipped: %s", e)
        return None


def enumerate_broken(V, alpha, r=8, per_axis=3, dedup_tol=1e-6, workers=None, **options):
    '''
    Critical configurations of E from a lattice of constant-displacement seeds
    :return: List of BrokenCritical sorted by (action, index)
    '''
    if r < 8:
        raise ValueError("The broken-loop model needs r >= 8, got " + str(r))
    alpha = Models.TorusLoops.as_winding(alpha)
    offsets = 0.1 + TWO_PI * np.arange(per_axis) / float(per_axis)
    seeds = [from_displacement(alpha, np.zeros((r, alpha.n)) + np.array(combo)[None, :])
             for combo in itertools.product(offsets, repeat=alpha.n)]
    tasks = [(seed, V, options) for seed in seeds]
    workers = Utils.get_num_workers() if workers is None else workers
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_find_from_seed, tasks)
    else:
        results = [_find_from_seed(task) for task in tasks]

    system = BrokenFlowSystem(V, alpha, r)
    points = []
    for cp in results:
        if cp is None:
            continue
        if all(system.distance(cp.loop.y, other) >= dedup_tol for other in points):
            points.append(cp)
    points.sort(key=lambda cp: (round(cp.action, 9), cp.index, cp.label or ()))
    log.info("Broken model r = %d: %d critical configurations with indices %s", r, len(points),
             [cp.index for cp in points])
    return points


def continuum_distance(broken, point):
    '''
    Mean-square vertex distance between a broken critical configuration and the samples of a continuum
    critical loop at t = j/r, modulo the lattice
    '''
    sampled = sample_loop(point.loop, broken.loop.r)
    shift = Models.TorusLoops.lattice_shift(broken.loop.y, sampled.y)
    return Models.TorusLoops.l2_norm(broken.loop.y - sampled.y - TWO_PI * shift[None, :])


def broken_complex(V, alpha, r=8, gap_bound=GAP_BOUND, coefficients="Z", per_axis=3, workers=None, **options):
    '''
    Critical configurations, gradient lines and Morse complex of the broken energy
    :return: Tuple (points, lines, ChainComplex)
    '''
    alpha = Models.TorusLoops.as_winding(alpha)
    points = enumerate_broken(V, alpha, r=r, per_axis=per_axis, workers=workers, gap_bound=gap_bound)
    system = BrokenFlowSystem(V, alpha, r, gap_bound)
    lines = Models.HeatFlow.trace_lines(system, points, workers=workers, **options)
    return points, lines, Models.MorseComplex.build_complex(points, lines, coefficients=coefficients, alpha=alpha)


def broken_homology(V, alpha, r=8, gap_bound=GAP_BOUND, coefficients="Z", workers=None, **options):
    '''
    Homology of the Morse complex of E on closed r-gons in class alpha
    :param V: Potential (V = 0 is degenerate and raises DegenerateCritical)
    :param alpha: Winding class
    :param r: Number of vertices (>= 8)
    :return: HomologyResult
    '''
    _, _, complex_ = broken_complex(V, alpha, r=r, gap_bound=gap_bound, coefficients=coefficients,
                                    workers=workers, **options)
    result = Models.MorseComplex.homology(complex_)
    log.info("Broken-loop homology (r = %d): %s", r, [result.describe(k) for k in range(len(result.betti))])
    return result
