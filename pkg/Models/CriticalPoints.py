'''
Perturbed closed geodesics: 1-periodic solutions of x'' = -grad V_t(x) in a fixed winding class.
Found by damped Newton iteration on the spectrally discretised Euler-Lagrange equation, certified
nondegenerate through the spectrum of the second variation A = -d^2/dt^2 - Hess V_t(x).
'''
import itertools
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np
import scipy.linalg

import Utils
import Models.TorusLoops
from Models.TorusLoops import TWO_PI, DiscreteLoop, TangentField
from Models.Errors import DegenerateCritical, NoConvergence

log = Utils.get_logger("critical_points")

SPECTRUM_HEAD = 12


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    loop: DiscreteLoop
    action: float
    index: int
    spectrum_head: tuple
    gap: float
    residual: float
    unstable: np.ndarray # [index, N, n] oriented unstable eigenvectors, unit L2 norm
    label: tuple = None

    @property
    def alpha(self):
        return self.loop.alpha

    def to_dict(self):
        return {"loop": self.loop.to_dict(), "action": self.action, "index": self.index,
                "spectrum_head": list(self.spectrum_head), "gap": self.gap, "residual": self.residual,
                "label": None if self.label is None else list(self.label)}


def euler_lagrange_residual(loop, V):
    '''
    x'' + grad V_t(x), the negative L2 gradient of the action
    :param loop: DiscreteLoop
    :param V: Potential
    :return: TangentField
    '''
    return TangentField(Models.TorusLoops.second_derivative(loop) + V.gradient(loop.times, loop.positions))


def hessian_operator(loop, V):
    '''
    Dense matrix of the second variation A = -d^2/dt^2 - Hess V_t(x(t)) acting on periodic fields,
    flattened row-major so that entry j*n + i is component i at time t_j
    '''
    N, n = loop.N, loop.n
    A = -np.kron(Utils.derivative_matrix(N, order=2), np.eye(n))
    A -= scipy.linalg.block_diag(*V.hessian(loop.times, loop.positions))
    return 0.5 * (A + A.T)


def orient(vector):
    '''
    Fixes the sign of a field so that its first significant Fourier coefficient is positive
    (coordinates in order, then modes in increasing frequency, real part before imaginary part)
    :param vector: Array [N, n]
    :return: Oriented copy
    '''
    coeffs = np.fft.rfft(vector, axis=0)
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        return vector.copy()
    for i in range(vector.shape[1]):
        for c in coeffs[:, i]:
            for part in (c.real, c.imag):
                if abs(part) > 1e-8 * scale:
                    return vector.copy() if part > 0 else -vector
    return vector.copy()


def _localize(basis, n):
    '''
    Rotates an orthonormal basis of a degenerate eigenspace so that its vectors concentrate on
    single coordinates whenever the eigenspace splits along coordinates
    '''
    position = np.tile(np.arange(1, n + 1, dtype=float), basis.shape[0] // n)
    weights = basis.T @ (position[:, None] * basis)
    _, rotation = np.linalg.eigh(0.5 * (weights + weights.T))
    return basis @ rotation


def _unstable_frame(eigvals, eigvecs, N, n, cluster_tol=1e-7):
    negative = np.flatnonzero(eigvals < 0.0)
    frame = []
    start = 0
    while start < len(negative):
        stop = start + 1
        while stop < len(negative) and abs(eigvals[negative[stop]] - eigvals[negative[start]]) < cluster_tol:
            stop += 1
        block = eigvecs[:, negative[start:stop]]
        if stop - start > 1:
            block = _localize(block, n)
        for j in range(block.shape[1]):
            frame.append(orient(block[:, j].reshape(N, n) * np.sqrt(N)))
        start = stop
    return np.array(frame).reshape(len(frame), N, n)


def spectrum(loop, V):
    '''
    Eigen-decomposition of the second variation
    :return: Tuple (ascending eigenvalues, eigenvectors as columns)
    '''
    return scipy.linalg.eigh(hessian_operator(loop, V))


def morse_index(loop, V, threshold=1e-6):
    '''
    Morse index from the discrete eigenvalue problem A xi = lambda xi with periodic xi
    :param loop: Converged critical loop
    :param V: Potential
    :param threshold: Degeneracy threshold on the smallest |eigenvalue|
    :return: Tuple (index, spectrum_head, gap, oriented unstable frame)
    '''
    eigvals, eigvecs = spectrum(loop, V)
    gap = float(np.min(np.abs(eigvals)))
    if gap < threshold:
        raise DegenerateCritical("Smallest Hessian eigenvalue " + str(gap) + " below degeneracy threshold " +
                                 str(threshold) + ": action not Morse at this resolution", gap=gap)
    index = int(np.sum(eigvals < 0.0))
    frame = _unstable_frame(eigvals, eigvecs, loop.N, loop.n)
    return index, tuple(float(lam) for lam in eigvals[:SPECTRUM_HEAD]), gap, frame


def pendulum_label(loop):
    '''
    Label nu in (Z_2)^n of the nearest pendulum equilibrium x^(nu) = 2pi alpha t + pi nu
    '''
    mean = np.mean(loop.y, axis=0)
    return tuple(int(np.round(m / np.pi)) % 2 for m in mean)


def _residual_norm(loop, V):
    return Models.TorusLoops.l2_norm(euler_lagrange_residual(loop, V).xi)


def newton(seed, V, max_steps=50, tol=1e-10, max_halvings=30):
    '''
    Damped Newton iteration on x'' + grad V_t(x) = 0, halving the step until the residual decreases
    :param seed: Initial DiscreteLoop
    :param V: Potential
    :param max_steps: Number of Newton steps before giving up
    :param tol: Target discrete L2 residual
    :return: Tuple (converged loop, residual, number of steps)
    '''
    loop = seed
    res = _residual_norm(loop, V)
    for step in range(max_steps + 1):
        if res < tol:
            return loop, res, step
        if step == max_steps:
            break
        rhs = euler_lagrange_residual(loop, V).xi.reshape(-1)
        A = hessian_operator(loop, V)
        try:
            delta = scipy.linalg.solve(A, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            delta = scipy.linalg.lstsq(A, rhs)[0]
        delta = delta.reshape(loop.N, loop.n)
        lam = 1.0
        for _ in range(max_halvings):
            trial = loop.with_samples(loop.y + lam * delta)
            trial_res = _residual_norm(trial, V)
            if trial_res < res:
                break
            lam *= 0.5
        else:
            if res < 10.0 * tol:
                log.warning("Newton stalled at round-off level (residual %.2e)", res)
                return loop, res, step
            raise NoConvergence("Damped Newton step failed to decrease the residual " + str(res))
        loop, res = trial, trial_res
    raise NoConvergence("Newton iteration did not reach residual " + str(tol) + " in " + str(max_steps) +
                        " steps (residual " + str(res) + ")")


def find_critical(seed, V, max_steps=50, tol=1e-10, threshold=1e-6):
    '''
    Converges a seed loop to a nondegenerate critical point in its winding class
    :param seed: DiscreteLoop in the desired class
    :param V: Potential
    :return: CriticalPoint (loop normalised to mean displacement in [-pi/2, 3pi/2))
    '''
    loop, res, steps = newton(seed, V, max_steps=max_steps, tol=tol)
    loop = Models.TorusLoops.canonical(loop)
    index, head, gap, frame = morse_index(loop, V, threshold=threshold)
    log.debug("Newton converged after %d steps (residual %.2e), index %d", steps, res, index)
    return CriticalPoint(loop=loop, action=Models.TorusLoops.action(loop, V), index=index, spectrum_head=head,
                         gap=gap, residual=res, unstable=frame, label=pendulum_label(loop))


def seed_lattice(alpha, N, per_axis=3, jitter=0.0, rng=None):
    '''
    Constant seeds y = c with c on a per_axis^n lattice of offsets 0.1 + 2pi j / per_axis,
    optionally jittered by random first-harmonic displacements
    :param jitter: Largest amplitude of the cos and sin components added to every seed
    :param rng: numpy Generator drawing the jitter (required when jitter > 0)
    :return: List of DiscreteLoop
    '''
    if jitter < 0.0:
        raise ValueError("Seed jitter must be non-negative, got " + str(jitter))
    if jitter > 0.0 and rng is None:
        raise ValueError("A random generator is required for jittered seeds")
    alpha = Models.TorusLoops.as_winding(alpha)
    offsets = 0.1 + TWO_PI * np.arange(per_axis) / float(per_axis)
    t = np.arange(N) / float(N)
    seeds = []
    for combo in itertools.product(offsets, repeat=alpha.n):
        y = np.zeros((N, alpha.n)) + np.array(combo)[None, :]
        if jitter > 0.0:
            amplitudes = jitter * rng.uniform(-1.0, 1.0, size=(2, alpha.n))
            y = y + amplitudes[0][None, :] * np.cos(TWO_PI * t)[:, None] + amplitudes[1][None, :] * np.sin(TWO_PI * t)[:, None]
        seeds.append(DiscreteLoop(alpha, y))
    return seeds


def _find_from_seed(task):
    seed, V, options = task
    try:
        return find_critical(seed, V, **options)
    except NoConvergence as e:
        log.warning("Seed skipped: %s", e)
        return None


def enumerate_critical(V, alpha, N=128, per_axis=3, dedup_tol=1e-4, jitter=0.0, rng=None, workers=None, **options):
    '''
    Sweeps a seed lattice, converges every seed and removes duplicates (L2 distance modulo 2piZ^n)
    :param V: Potential
    :param alpha: Winding vector or WindingClass
    :param N: Number of time samples
    :param per_axis: Lattice offsets per coordinate
    :param jitter: Amplitude of the random seed displacements (see seed_lattice)
    :param rng: numpy Generator for the jitter
    :param dedup_tol: Two points closer than this are identified
    :return: List of CriticalPoint sorted by (action, index)
    '''
    alpha = Models.TorusLoops.as_winding(alpha)
    log.info("Enumerating critical points in class %s from %d seeds", alpha, per_axis ** alpha.n)
    tasks = [(seed, V, options) for seed in seed_lattice(alpha, N, per_axis, jitter, rng)]
    workers = Utils.get_num_workers() if workers is None else workers
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_find_from_seed, tasks)
    else:
        results = [_find_from_seed(task) for task in tasks]

    points = []
    for cp in results:
        if cp is None:
            continue
        if all(Models.TorusLoops.wrap_distance(cp.loop, other.loop) >= dedup_tol for other in points):
            points.append(cp)
    points.sort(key=lambda cp: (round(cp.action, 9), cp.index, cp.label or ()))
    log.info("Found %d critical points with indices %s", len(points), [cp.index for cp in points])
    return points


def filter_by_action(points, cutoff):
    '''
    The set P^a(V) of critical points with action at most the cutoff
    '''
    return [cp for cp in points if cp.action <= cutoff]


def find_by_label(points, label):
    for cp in points:
        if cp.label == tuple(label):
            return cp
    raise KeyError("No critical point labelled " + str(label))
