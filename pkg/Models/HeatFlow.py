'''
Negative L2 gradient flow of the action (the heat equation du/ds = d^2u/dt^2 + grad V_t(u)),
connecting trajectories shot from unstable directions, and their characteristic signs.

The second time derivative is diagonal in Fourier space and is treated exactly (exponential
time differencing, ETDRK4) or implicitly (first-order IMEX); the potential gradient is explicit.
Orientation frames of unstable manifolds are carried along each trajectory by the linearized flow,
and the characteristic sign compares the transported frame with (flow direction, target frame).
'''
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
import scipy.linalg
import scipy.optimize

import Utils
import Models.TorusLoops
import Models.CriticalPoints
from Models.TorusLoops import TWO_PI, DiscreteLoop
from Models.Errors import NonFinite, NoTargetMatch, MaxFlowTime

log = Utils.get_logger("heat_flow")

ACTION_SLACK = 1e-9
# Round-off level of the unstable offset of a polished source, and the margin on the closest-approach estimate
DRIFT_FLOOR = 1e-13
PASS_SAFETY = 20.0


@dataclass(frozen=True, eq=False)
class FlowLine:
    s_grid: np.ndarray
    slices: np.ndarray # [len(s_grid), N, n] (or [len(s_grid), r, n] for broken loops)
    actions: np.ndarray
    source_id: int
    target_id: int
    sign: int
    direction_label: tuple # shooting direction as coefficients in the source's unstable frame
    index_drop: int
    target_shift: tuple = () # lattice translation of the limit relative to the stored target
    closest_approach: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def counted(self):
        # Only isolated lines (index difference one) enter the boundary operator
        return self.index_drop == 1

    def to_dict(self):
        return {"source_id": self.source_id, "target_id": self.target_id, "sign": self.sign,
                "direction_label": list(self.direction_label), "index_drop": self.index_drop,
                "target_shift": list(self.target_shift), "closest_approach": self.closest_approach,
                "s_end": float(self.s_grid[-1]), "action_start": float(self.actions[0]),
                "action_end": float(self.actions[-1]), "num_slices": int(len(self.s_grid)),
                "metadata": Utils.to_jsonable(self.metadata)}


class LoopHeatSystem:
    '''
    Heat flow on the loops of one winding class, sampled on N points, together with its linearization
    '''

    def __init__(self, V, alpha, N, scheme="etdrk4"):
        if scheme not in ("etdrk4", "imex"):
            raise ValueError("Unknown time stepping scheme " + str(scheme))
        self.V = V
        self.alpha = Models.TorusLoops.as_winding(alpha)
        self.N = N
        self.scheme = scheme
        self.times = np.arange(N) / float(N)
        self.winding = TWO_PI * self.times[:, None] * self.alpha.vector[None, :]
        self.linear = -(TWO_PI * Utils.wavenumbers(N)) ** 2
        self._coefficients = dict()

    def _coeffs(self, ds):
        if ds not in self._coefficients:
            self._coefficients[ds] = {key: val[None, :, None]
                                      for key, val in Utils.etdrk4_coefficients(self.linear, ds).items()}
        return self._coefficients[ds]

    def _nonlinear(self, stacked):
        # stacked[0] is the displacement, stacked[1:] are tangent vectors
        x = self.winding + stacked[0]
        out = np.empty_like(stacked)
        out[0] = self.V.gradient(self.times, x)
        if stacked.shape[0] > 1:
            hess = self.V.hessian(self.times, x)
            out[1:] = np.einsum("jik,mjk->mji", hess, stacked[1:])
        return out

    def _nonlinear_hat(self, coeffs):
        return np.fft.rfft(self._nonlinear(np.fft.irfft(coeffs, n=self.N, axis=1)), axis=1)

    def step(self, y, frame, ds):
        '''
        One time step of the flow and of the linearized flow acting on a frame of tangent vectors
        :param y: Displacement [N, n]
        :param frame: Tangent vectors [m, N, n] (m may be zero)
        :param ds: Step size
        :return: Tuple (new y, new frame)
        '''
        stacked = np.concatenate([y[None], frame], axis=0)
        v = np.fft.rfft(stacked, axis=1)
        if self.scheme == "imex":
            v_new = (v + ds * self._nonlinear_hat(v)) / (1.0 - ds * self.linear[None, :, None])
        else:
            c = self._coeffs(ds)
            n_v = self._nonlinear_hat(v)
            a = c["exp_half"] * v + c["f0"] * n_v
            n_a = self._nonlinear_hat(a)
            b = c["exp_half"] * v + c["f0"] * n_a
            n_b = self._nonlinear_hat(b)
            cc = c["exp_half"] * a + c["f0"] * (2.0 * n_b - n_v)
            n_c = self._nonlinear_hat(cc)
            v_new = c["exp_full"] * v + c["f1"] * n_v + 2.0 * c["f2"] * (n_a + n_b) + c["f3"] * n_c
        out = np.fft.irfft(v_new, n=self.N, axis=1)
        if not np.all(np.isfinite(out)):
            raise NonFinite("Heat flow produced non-finite samples (step size " + str(ds) + ")")
        return out[0], out[1:]

    def loop(self, y):
        return DiscreteLoop(self.alpha, y)

    def energy(self, y):
        return Models.TorusLoops.action(self.loop(y), self.V)

    def descent(self, y):
        return Models.CriticalPoints.euler_lagrange_residual(self.loop(y), self.V).xi

    def newton_correction(self, y):
        A = Models.CriticalPoints.hessian_operator(self.loop(y), self.V)
        return scipy.linalg.solve(A, self.descent(y).reshape(-1), assume_a="sym").reshape(y.shape)

    def norm(self, field):
        return Models.TorusLoops.l2_norm(field)

    def samples(self, point):
        return np.array(point.loop.y)

    def distance(self, y, point):
        return Models.TorusLoops.wrap_distance(self.loop(y), point.loop)

    def shift(self, y, point):
        return tuple(int(m) for m in Models.TorusLoops.lattice_shift(y, point.loop.y))


def flow_step(loop, V, ds, scheme="etdrk4"):
    '''
    One step of du/ds = u'' + grad V_t(u), heat term exact/implicit in Fourier space, potential explicit
    :param loop: DiscreteLoop
    :param V: Potential
    :param ds: Step size in (0, 0.1]
    :return: DiscreteLoop in the same class
    '''
    if not 0.0 < ds <= 0.1:
        raise ValueError("Step size must lie in (0, 0.1], got " + str(ds))
    system = LoopHeatSystem(V, loop.alpha, loop.N, scheme)
    y, _ = system.step(np.array(loop.y), np.zeros((0, loop.N, loop.n)), ds)
    return loop.with_samples(y)


def integrate(loop, V, s_end, ds=1e-2, scheme="etdrk4"):
    '''
    Fixed-step integration of the heat flow up to time s_end
    :return: Tuple (s grid, list of DiscreteLoop slices)
    '''
    system = LoopHeatSystem(V, loop.alpha, loop.N, scheme)
    steps = int(round(s_end / ds))
    y = np.array(loop.y)
    empty = np.zeros((0, loop.N, loop.n))
    s_grid, slices = [0.0], [loop]
    for i in range(steps):
        y, _ = system.step(y, empty, ds)
        s_grid.append((i + 1) * ds)
        slices.append(loop.with_samples(y))
    return np.array(s_grid), slices


def _orthonormalize(frame):
    '''
    QR orthonormalization keeping the orientation of the frame (positive diagonal of R)
    '''
    if frame.shape[0] == 0:
        return frame
    shape = frame.shape
    q, r = np.linalg.qr(frame.reshape(shape[0], -1).T)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return (q * signs[None, :]).T.reshape(shape)


def orientation_sign(frame, flow_direction, target_frame):
    '''
    Sign of det of the transported source frame against (flow direction, target unstable frame).
    Components of the flow direction along the target frame do not change the determinant, so the
    sign read off at the closest approach of a near-passing trajectory equals that of the separatrix.
    :param frame: Orthonormal transported frame [k, ...]
    :param flow_direction: ds-derivative of the trajectory at the comparison point
    :param target_frame: Unstable frame of the target [k-1, ...]
    :return: +1 or -1
    '''
    k = frame.shape[0]
    basis = frame.reshape(k, -1)
    f = flow_direction.reshape(-1)
    columns = [f / np.linalg.norm(f)] + [w.reshape(-1) / np.linalg.norm(w) for w in target_frame]
    det = np.linalg.det(basis @ np.array(columns).T)
    return 1 if det > 0 else -1


def match_point(system, y, points, match_tol, max_index=None):
    best, best_dist = None, np.inf
    for i, point in enumerate(points):
        if max_index is not None and point.index > max_index:
            continue
        dist = system.distance(y, point)
        if dist < best_dist:
            best, best_dist = i, dist
    if best is None or best_dist >= match_tol:
        return None, best_dist
    return best, best_dist


def eigen_direction(index, j, side):
    '''
    Frame coefficients of the shooting direction side * e_j
    '''
    coefficients = [0.0] * index
    coefficients[j] = float(side)
    return tuple(coefficients)


def unstable_drift(system, y, point):
    '''
    Offset of y from the critical point along its unstable directions, read off from the descent field:
    near the point the descent component along an unstable eigenvector e_j is |lambda_j| times the offset
    :param y: Samples near the point
    :param point: Critical point with unstable frame and spectrum head
    :return: Largest offset over the unstable directions (0 for minima)
    '''
    if point.index == 0:
        return 0.0
    frame = np.asarray(point.unstable)
    projections = np.mean(np.sum(frame * system.descent(y)[None], axis=-1), axis=1)
    head = list(point.spectrum_head[:point.index])
    eigenvalues = np.abs(np.array(head + [point.gap] * (point.index - len(head))))
    return float(np.max(np.abs(projections) / eigenvalues))


def polish_source(system, source, max_steps=3):
    '''
    Extra Newton steps on the samples of a source, kept while they reduce the unstable drift
    :return: Tuple (samples, remaining drift)
    '''
    y = system.samples(source)
    drift = unstable_drift(system, y, source)
    for _ in range(max_steps):
        if drift == 0.0:
            break
        trial = y + system.newton_correction(y)
        trial_drift = unstable_drift(system, trial, source)
        if not trial_drift < drift:
            break
        y, drift = trial, trial_drift
    return y, drift


def pass_tolerance(drift, delta, match_tol):
    '''
    Distance within which a trajectory shot at offset delta from a source with the given unstable drift counts
    as passing through a lower-index point. At closest approach the decaying approach, of order 1/delta after
    the passage, balances the drift grown out of the source, at a distance of order sqrt(drift / delta).
    '''
    return float(max(match_tol, PASS_SAFETY * np.sqrt(max(drift, DRIFT_FLOOR) / delta)))


def shoot(system, source, source_id, direction, points, delta=1e-3, ds=1e-2, ds_max=0.1, grad_tol=1e-9,
          match_tol=1e-4, pass_tol=None, max_time=200.0, record_every=10):
    '''
    Follows the flow from source + delta * (unit direction in the unstable frame) until it comes to rest
    at a critical point, or until it passes a critical point of lower index at closest approach.
    :param system: Flow system (LoopHeatSystem or the broken-loop analogue)
    :param source: Critical point of index >= 1 with an oriented unstable frame
    :param source_id: Position of the source in points
    :param direction: Coefficients of the shooting direction in the source's unstable frame
    :param points: Enumerated critical points used to identify the limit
    :param pass_tol: Largest distance at which a trajectory counts as passing through a lower-index point;
                     None scales it to the unstable drift of the polished source (see pass_tolerance)
    :return: FlowLine
    '''
    coefficients = np.asarray(direction, dtype=float)
    if source.index < 1 or coefficients.shape != (source.index,) or not np.any(coefficients):
        raise ValueError("Direction " + str(direction) + " is not an unstable direction of a point of index " +
                         str(source.index))
    coefficients = coefficients / np.linalg.norm(coefficients)
    unstable = np.asarray(source.unstable)
    start, drift = polish_source(system, source)
    if pass_tol is None:
        pass_tol = pass_tolerance(drift, delta, match_tol)
    y = start + delta * np.tensordot(coefficients, unstable, axes=1)
    frame = _orthonormalize(unstable.copy())
    energy = system.energy(y)
    s = 0.0
    s_grid, slices, actions = [s], [y], [energy]
    best = None # (gradient norm, s, y, frame, descent, energy) at the running gradient minimum
    accepted, streak = 0, 0
    while True:
        if s > max_time:
            raise MaxFlowTime("Flow from point " + str(source_id) + " along " + str(tuple(direction)) +
                              " did not settle before s = " + str(max_time))
        y_new, frame_new = system.step(y, frame, ds)
        energy_new = system.energy(y_new)
        if energy_new > energy + ACTION_SLACK:
            ds *= 0.5
            streak = 0
            if ds < 1e-8:
                raise NonFinite("Step size underflow while keeping the action non-increasing")
            continue
        y, frame, energy = y_new, _orthonormalize(frame_new), energy_new
        s += ds
        accepted += 1
        streak += 1
        if streak == 10 and 2.0 * ds <= ds_max:
            ds, streak = 2.0 * ds, 0
        descent = system.descent(y)
        grad = system.norm(descent)
        if accepted % record_every == 0:
            s_grid.append(s)
            slices.append(y)
            actions.append(energy)

        if grad < grad_tol:
            end, closest = (grad, s, y, frame, descent, energy), False
            break
        if best is None or grad < best[0]:
            best = (grad, s, y, frame, descent, energy)
        elif grad > 10.0 * best[0]:
            passed, _ = match_point(system, best[2], points, pass_tol, max_index=source.index - 1)
            if passed is not None:
                end, closest = best, True
                break
            best = None

    grad, s_end, y_end, frame_end, descent_end, energy_end = end
    target_id, dist = match_point(system, y_end, points, pass_tol if closest else match_tol)
    if target_id is None:
        raise NoTargetMatch("Limit of the flow from point " + str(source_id) + " along " + str(tuple(direction)) +
                            " is " + str(dist) + " away from every known critical point")
    target = points[target_id]
    index_drop = source.index - target.index
    sign = orientation_sign(frame_end, descent_end, np.asarray(target.unstable)) if index_drop == 1 else 0

    # Drop recorded slices past the comparison point and close the line with it
    keep = [i for i, si in enumerate(s_grid) if si < s_end]
    return FlowLine(s_grid=np.array([s_grid[i] for i in keep] + [s_end]),
                    slices=np.array([slices[i] for i in keep] + [y_end]),
                    actions=np.array([actions[i] for i in keep] + [energy_end]),
                    source_id=source_id, target_id=target_id, sign=int(sign),
                    direction_label=tuple(float(c) for c in direction), index_drop=index_drop,
                    target_shift=system.shift(y_end, target), closest_approach=closest,
                    metadata={"delta": delta, "grad_end": grad, "target_distance": dist, "drift": drift,
                              "pass_tol": pass_tol})


def _circle_direction(theta):
    return (float(np.cos(theta)), float(np.sin(theta)))


def _separatrix_search(system, source, source_id, points, samples=8, max_bisections=30, pass_tol=2e-2,
                       **options):
    '''
    Isolated lines out of an index-2 point. Directions on the unit circle of the unstable plane are
    sampled; a trajectory passing within pass_tol of an index-1 point is a line, and between two
    neighbouring directions that settle at different lifts of minima a separatrix is located by bisection.
    :return: List of FlowLine (lines to index-1 points, then the sampled lines to minima)
    '''
    options = dict(options)
    options.setdefault("grad_tol", 1e-6)

    def run(theta):
        return shoot(system, source, source_id, _circle_direction(theta), points, pass_tol=pass_tol, **options)

    thetas = [TWO_PI * i / samples for i in range(samples)]
    sampled = [run(theta) for theta in thetas]
    found = {}

    def record(line):
        key = (line.target_id, line.target_shift)
        if key not in found or line.metadata["target_distance"] < found[key].metadata["target_distance"]:
            found[key] = line

    for line in sampled:
        if line.counted:
            record(line)
    for i in range(samples):
        line_a, line_b = sampled[i], sampled[(i + 1) % samples]
        if line_a.counted or line_b.counted:
            continue
        key_a = (line_a.target_id, line_a.target_shift)
        if key_a == (line_b.target_id, line_b.target_shift):
            continue
        lo, hi = thetas[i], thetas[i] + TWO_PI / samples
        for _ in range(max_bisections):
            mid = 0.5 * (lo + hi)
            line = run(mid)
            if line.counted:
                record(line)
                break
            if (line.target_id, line.target_shift) == key_a:
                lo = mid
            else:
                hi = mid
        else:
            raise NoTargetMatch("Separatrix out of point " + str(source_id) + " between directions " +
                                str(thetas[i]) + " and " + str(thetas[i] + TWO_PI / samples) + " not resolved")
    return sorted(found.values(), key=lambda line: line.direction_label) + \
        [line for line in sampled if not line.counted]


def _refine_direction(system, source, source_id, direction, points, coarse_tol=2e-2, max_evaluations=60,
                      **options):
    '''
    Line out of a point of index >= 3 near a shooting direction whose trajectory missed the points of index
    one lower. A shot with the coarse tolerance names the candidate target; the closest-approach distance to
    it is then minimized over nearby directions on the unstable sphere (Nelder-Mead in tangent coordinates).
    :return: Closest FlowLine to the candidate, or None if no lower point is passed within coarse_tol
    '''
    options = {key: val for key, val in options.items() if key != "pass_tol"}
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    first = shoot(system, source, source_id, tuple(direction), points, pass_tol=coarse_tol, **options)
    if not first.counted:
        return None
    key = (first.target_id, first.target_shift)
    fine_tol = pass_tolerance(first.metadata["drift"], first.metadata["delta"], options.get("match_tol", 1e-4))
    if first.metadata["target_distance"] <= fine_tol:
        return first
    tangent = scipy.linalg.null_space(direction[None, :])
    best = [first]

    def closest_distance(x):
        trial = direction + tangent @ x
        line = shoot(system, source, source_id, tuple(trial / np.linalg.norm(trial)), points, pass_tol=coarse_tol,
                     **options)
        if not line.counted or (line.target_id, line.target_shift) != key:
            return coarse_tol
        if line.metadata["target_distance"] < best[0].metadata["target_distance"]:
            best[0] = line
        return line.metadata["target_distance"]

    k = tangent.shape[1]
    step = min(0.1, first.metadata["target_distance"])
    simplex = np.vstack([np.zeros(k), step * np.eye(k)])
    scipy.optimize.minimize(closest_distance, np.zeros(k), method="Nelder-Mead",
                            options={"initial_simplex": simplex, "maxfev": max_evaluations,
                                     "fatol": 0.1 * fine_tol, "xatol": 1e-10})
    distance = best[0].metadata["target_distance"]
    if distance > fine_tol:
        log.warning("Line %d -> %d passes at distance %.2e after refinement (expected below %.2e)", source_id,
                    first.target_id, distance, fine_tol)
    return best[0]


def _trace_source(task):
    system, points, source_id, options = task
    source = points[source_id]
    if source.index == 2:
        return _separatrix_search(system, source, source_id, points, **options)
    options = {key: val for key, val in options.items() if key not in ("samples", "max_bisections")}
    lines = []
    for j in range(source.index):
        for side in (1, -1):
            direction = eigen_direction(source.index, j, side)
            line = shoot(system, source, source_id, direction, points, **options)
            if source.index > 2 and not line.counted:
                refined = _refine_direction(system, source, source_id, direction, points, **options)
                line = line if refined is None else refined
            lines.append(line)
    return lines


def trace_lines(system, points, workers=None, **options):
    '''
    Traces every line out of every point of positive index under a flow system. Index-one sources are
    shot along both sides of their unstable eigenvector, index-two sources by a separatrix search on
    their unstable circle, higher indices along both sides of each unstable eigenvector, with a local
    search on the unstable sphere for shots that miss the points of index one lower.
    :return: List of FlowLine sorted by (source, direction)
    '''
    tasks = [(system, points, i, options) for i, cp in enumerate(points) if cp.index >= 1]
    workers = Utils.get_num_workers() if workers is None else workers
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_trace_source, tasks)
    else:
        results = [_trace_source(task) for task in tasks]
    lines = [line for result in results for line in result]
    lines.sort(key=lambda line: (line.source_id, line.direction_label))
    for line in lines:
        if line.index_drop > 1:
            log.debug("Line %d -> %d along %s drops index by %d; excluded from the complex", line.source_id,
                      line.target_id, line.direction_label, line.index_drop)
    log.info("Traced %d lines, %d of index difference one", len(lines), sum(line.counted for line in lines))
    return lines


def trace_flow_line(source, direction, V, points, source_id=None, scheme="etdrk4", **options):
    '''
    Shoots the heat flow from source + delta * direction and records the connecting trajectory
    :param source: CriticalPoint of index >= 1
    :param direction: Frame coefficients of the direction, e.g. (1.0,) / (-1.0,) for the two sides of an
                      index-one point, or eigen_direction(k, j, side)
    :param V: Potential
    :param points: Enumerated critical points of the same class (limit candidates)
    :return: FlowLine
    '''
    if source_id is None:
        source_id = next(i for i, cp in enumerate(points) if cp is source)
    system = LoopHeatSystem(V, source.alpha, source.loop.N, scheme)
    line = shoot(system, source, source_id, direction, points, **options)
    log.info("Line %d -> %d along %s: sign %+d, index drop %d", line.source_id, line.target_id,
             line.direction_label, line.sign, line.index_drop)
    return line


def trace_all_lines(points, V, scheme="etdrk4", workers=None, **options):
    '''
    All lines of a class under the heat flow of V, see trace_lines
    '''
    if not points:
        return []
    system = LoopHeatSystem(V, points[0].alpha, points[0].loop.N, scheme)
    return trace_lines(system, points, workers=workers, **options)


def characteristic_sign(line, orientations=None):
    '''
    Characteristic sign of a line; orientations optionally flips the orientation convention of individual
    critical points (a map point id -> +1/-1), which multiplies the sign of every line touching that point
    :param line: FlowLine of index difference one
    :return: +1 or -1
    '''
    if not line.counted:
        raise ValueError("Characteristic signs are defined for lines of index difference one only")
    if orientations is None:
        return line.sign
    return line.sign * orientations.get(line.source_id, 1) * orientations.get(line.target_id, 1)


def sigma_proxy(line):
    '''
    Mean displacement of every slice, the sigma-coordinate of the ansatz family u = 2pi alpha t + sigma
    :return: Array [len(s_grid), n]
    '''
    return np.mean(line.slices, axis=1)


def line_table(line):
    '''
    Plot data (s, action, sigma_1, ..., sigma_n) of a line
    '''
    sigma = sigma_proxy(line)
    columns = {"s": line.s_grid, "action": line.actions}
    for i in range(sigma.shape[1]):
        columns["sigma_" + str(i + 1)] = sigma[:, i]
    return columns
