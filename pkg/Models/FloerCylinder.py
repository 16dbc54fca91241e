'''
The epsilon-Floer system on a truncated cylinder [-S, S] x S^1 for the cotangent bundle of the flat torus:

    d_s u - d_t v - grad V_t(u) = 0,      d_s v + eps^{-2} (d_t u - v) = 0,

solved as a boundary value problem with both ends pinned to critical orbits (x, dx/dt). Derivatives are
fourth-order central differences in s and spectral in t. The free s-translation is fixed by requiring the
symplectic action of the s = 0 slice to equal the mean of the endpoint actions; the resulting overdetermined
system is squared by a bordering unknown tau (equations F(w) - tau b = 0, anchor = 0) and solved by damped
sparse Newton iteration.
'''
import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.integrate
import scipy.interpolate
import scipy.optimize
from scipy.sparse.linalg import spsolve

import Utils
import Models.TorusLoops
from Models.TorusLoops import TWO_PI
from Models.Errors import AnchorInfeasible, NoConvergence

log = Utils.get_logger("floer_cylinder")


@dataclass(frozen=True, eq=False)
class CylinderGrid:
    alpha: object # WindingClass
    S: float
    epsilon: float
    u: np.ndarray # [Ns+1, Nt, n] position displacement, x = 2pi alpha t + u
    v: np.ndarray # [Ns+1, Nt, n] fiber component
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive, got " + str(self.epsilon))
        if self.u.shape != self.v.shape or self.u.ndim != 3:
            raise ValueError("u and v must share the shape [Ns+1, Nt, n]")
        if (self.u.shape[0] - 1) % 2 != 0:
            raise ValueError("Ns must be even so that s = 0 is a grid node")

    @property
    def Ns(self):
        return self.u.shape[0] - 1

    @property
    def Nt(self):
        return self.u.shape[1]

    @property
    def n(self):
        return self.u.shape[2]

    @property
    def h(self):
        return 2.0 * self.S / self.Ns

    @property
    def s(self):
        return np.linspace(-self.S, self.S, self.Ns + 1)

    @property
    def t(self):
        return np.arange(self.Nt) / float(self.Nt)

    def positions(self):
        return TWO_PI * self.t[None, :, None] * self.alpha.vector[None, None, :] + self.u

    def slice_loop(self, i):
        return Models.TorusLoops.DiscreteLoop(self.alpha, self.u[i])

    def with_fields(self, u, v, epsilon=None, **metadata):
        return CylinderGrid(self.alpha, self.S, self.epsilon if epsilon is None else epsilon, u, v,
                            dict(self.metadata, **metadata))

    def to_dict(self):
        return {"alpha": list(self.alpha.alpha), "S": self.S, "epsilon": self.epsilon, "Ns": self.Ns,
                "Nt": self.Nt, "n": self.n, "metadata": Utils.to_jsonable(self.metadata)}


@functools.lru_cache(maxsize=16)
def s_difference_matrix(Ns, h):
    '''
    Sparse first derivative in s on Ns+1 nodes: fourth-order central stencil inside, second-order central
    on the rows next to the boundary, second-order one-sided on the boundary rows
    '''
    rows, cols, vals = [], [], []

    def put(i, offsets, weights):
        for o, w in zip(offsets, weights):
            rows.append(i)
            cols.append(i + o)
            vals.append(w / h)

    put(0, (0, 1, 2), (-1.5, 2.0, -0.5))
    put(Ns, (0, -1, -2), (1.5, -2.0, 0.5))
    for i in range(1, Ns):
        if i in (1, Ns - 1):
            put(i, (-1, 1), (-0.5, 0.5))
        else:
            put(i, (-2, -1, 1, 2), (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0))
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(Ns + 1, Ns + 1))


def s_derivative(field, h):
    Ns = field.shape[0] - 1
    flat = field.reshape(Ns + 1, -1)
    return (s_difference_matrix(Ns, h) @ flat).reshape(field.shape)


def t_derivative(field):
    # Spectral derivative along the loop parameter (axis 1)
    return np.moveaxis(Utils.spectral_derivative(np.moveaxis(field, 1, 0), order=1), 0, 1)


@dataclass(frozen=True)
class WeightedNorm:
    '''
    epsilon-weighted Sobolev norms of pairs zeta = (xi, eta) on the cylinder
    '''
    epsilon: float
    p: int = 2

    def __post_init__(self):
        if self.p != 2:
            raise NotImplementedError("Only p = 2 weighted norms are available")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")

    @staticmethod
    def _integrate(density, h):
        # density [Ns+1, Nt]: mean over t, trapezoid over s
        return float(scipy.integrate.trapezoid(np.mean(density, axis=1), dx=h))

    def zero(self, xi, eta, h):
        '''
        ||zeta||_{0,2,eps}^2 = int int |xi|^2 + eps^2 |eta|^2
        '''
        density = np.sum(xi ** 2, axis=-1) + self.epsilon ** 2 * np.sum(eta ** 2, axis=-1)
        return np.sqrt(self._integrate(density, h))

    def one(self, xi, eta, h):
        '''
        ||zeta||_{1,2,eps}^2 adds eps^2 |d_t xi|^2 + eps^4 |d_t eta|^2 + eps^4 |d_s xi|^2 + eps^6 |d_s eta|^2
        '''
        e2 = self.epsilon ** 2
        sq = lambda f: np.sum(f ** 2, axis=-1)
        density = (sq(xi) + e2 * sq(eta) + e2 * sq(t_derivative(xi)) + e2 ** 2 * sq(t_derivative(eta)) +
                   e2 ** 2 * sq(s_derivative(xi, h)) + e2 ** 3 * sq(s_derivative(eta, h)))
        return np.sqrt(self._integrate(density, h))


def _velocity(grid_alpha, u):
    return TWO_PI * grid_alpha.vector[None, None, :] + t_derivative(u)


def floer_residual(grid, V):
    '''
    Residual of the epsilon-Floer system on the interior nodes
    :param grid: CylinderGrid
    :param V: Potential
    :return: Tuple ((F1, eps^2 * F2) each [Ns-1, Nt, n], ||(F1, F2)||_{0,2,eps} on the unscaled residual)
    '''
    eps2 = grid.epsilon ** 2
    du_s = s_derivative(grid.u, grid.h)[1:-1]
    dv_s = s_derivative(grid.v, grid.h)[1:-1]
    x = grid.positions()[1:-1]
    t = np.broadcast_to(grid.t[None, :], x.shape[:2]).reshape(-1)
    grad = V.gradient(t, x.reshape(-1, grid.n)).reshape(x.shape)
    f1 = du_s - t_derivative(grid.v[1:-1]) - grad
    f2 = eps2 * dv_s + _velocity(grid.alpha, grid.u[1:-1]) - grid.v[1:-1]
    return (f1, f2), _interior_norm(f1, f2 / eps2, grid)


def plain_floer_residual(grid, V):
    '''
    Residual of the unscaled Floer pair (d_s u - d_t v - grad V, d_s v + d_t u - v), the epsilon = 1 system
    '''
    du_s = s_derivative(grid.u, grid.h)[1:-1]
    dv_s = s_derivative(grid.v, grid.h)[1:-1]
    x = grid.positions()[1:-1]
    t = np.broadcast_to(grid.t[None, :], x.shape[:2]).reshape(-1)
    grad = V.gradient(t, x.reshape(-1, grid.n)).reshape(x.shape)
    return du_s - t_derivative(grid.v[1:-1]) - grad, dv_s + _velocity(grid.alpha, grid.u[1:-1]) - grid.v[1:-1]


def _interior_norm(f1, f2, grid):
    pad = lambda f: np.concatenate([np.zeros((1,) + f.shape[1:]), f, np.zeros((1,) + f.shape[1:])])
    return WeightedNorm(grid.epsilon).zero(pad(f1), pad(f2), grid.h)


def symplectic_action(loop, y, V):
    '''
    A_V(x, y) = int <y, dx/dt> - 1/2 |y|^2 - V_t(x) dt
    :param loop: DiscreteLoop (position component)
    :param y: Fiber samples [N, n]
    :param V: Potential
    :return: Action value
    '''
    y = np.asarray(y, dtype=float).reshape(loop.N, loop.n)
    velocity = Models.TorusLoops.differentiate(loop).xi
    integrand = np.sum(y * velocity, axis=1) - 0.5 * np.sum(y ** 2, axis=1) - V.value(loop.times, loop.positions)
    return float(Utils.grid_mean(integrand))


def slice_actions(grid, V):
    return np.array([symplectic_action(grid.slice_loop(i), grid.v[i], V) for i in range(grid.Ns + 1)])


def energy(grid, V):
    '''
    E = 1/2 int int |d_s u|^2 + |d_t v + grad V|^2 + eps^2 |d_s v|^2 + eps^-2 |d_t u - v|^2
    (mean over t, trapezoid over s)
    '''
    eps2 = grid.epsilon ** 2
    x = grid.positions()
    t = np.broadcast_to(grid.t[None, :], x.shape[:2]).reshape(-1)
    grad = V.gradient(t, x.reshape(-1, grid.n)).reshape(x.shape)
    sq = lambda f: np.sum(f ** 2, axis=-1)
    density = (sq(s_derivative(grid.u, grid.h)) + sq(t_derivative(grid.v) + grad) +
               eps2 * sq(s_derivative(grid.v, grid.h)) + sq(_velocity(grid.alpha, grid.u) - grid.v) / eps2)
    return 0.5 * WeightedNorm._integrate(density, grid.h)


def truncation_length(source, target, tol=1e-9):
    '''
    Half-length S with exp(-gap * S) < tol, gap the smallest |Hessian eigenvalue| at the two ends
    '''
    gap = min(source.gap, target.gap)
    return float(np.ceil(np.log(1.0 / tol) / gap))


def _endpoint(cp, Nt, shift=None):
    loop = Models.TorusLoops.resample(cp.loop, Nt)
    if shift is not None:
        loop = loop.with_samples(loop.y + TWO_PI * np.asarray(shift, dtype=float)[None, :])
    return np.array(loop.y), np.array(Models.TorusLoops.differentiate(loop).xi)


def nearest_lift(source, target):
    '''
    Lattice vector m such that target + 2pi m is closest to the source in mean displacement (ties toward +)
    '''
    offset = (np.mean(source.loop.y, axis=0) - np.mean(target.loop.y, axis=0)) / TWO_PI
    return tuple(int(m) for m in np.floor(offset + 0.5))


def _check_anchor(source, target):
    if source is target or (source.loop.alpha == target.loop.alpha and source.loop.N == target.loop.N and
                            Models.TorusLoops.wrap_distance(source.loop, target.loop) < 1e-9):
        raise AnchorInfeasible("Source and target coincide: no nonconstant cylinder to anchor")
    if abs(source.action - target.action) < 1e-12:
        raise AnchorInfeasible("Endpoint actions are equal: the anchor level does not separate the ends")


def boundary_grid(source, target, epsilon, S, Ns, Nt, target_lift=None):
    '''
    Grid with both ends pinned and the interior filled by tanh interpolation between the endpoints
    '''
    if Ns % 2 != 0 or Ns < 8:
        raise ValueError("Ns must be even and at least 8, got " + str(Ns))
    lift = nearest_lift(source, target) if target_lift is None else tuple(target_lift)
    u_minus, v_minus = _endpoint(source, Nt)
    u_plus, v_plus = _endpoint(target, Nt, lift)
    s = np.linspace(-S, S, Ns + 1)
    weight = 0.5 * (1.0 + np.tanh(s))[:, None, None]
    u = (1.0 - weight) * u_minus[None] + weight * u_plus[None]
    v = (1.0 - weight) * v_minus[None] + weight * v_plus[None]
    return CylinderGrid(source.alpha, float(S), float(epsilon), u, v, {"target_lift": list(lift)})


def _block_diagonal(blocks, size, offsets):
    '''
    Sparse matrix of the given size with the n x n blocks placed on the diagonal at the given offsets
    '''
    B, n, _ = blocks.shape
    base = np.asarray(offsets)[:, None, None]
    rows = np.broadcast_to(base + np.arange(n)[None, :, None], blocks.shape)
    cols = np.broadcast_to(base + np.arange(n)[None, None, :], blocks.shape)
    return scipy.sparse.csr_matrix((blocks.reshape(-1), (rows.reshape(-1), cols.reshape(-1))), shape=(size, size))


class _System:
    '''
    Discrete epsilon-Floer system of one grid layout, unknowns (u, v) on interior nodes plus tau
    '''

    def __init__(self, grid, V, anchor_level):
        self.grid = grid
        self.V = V
        self.anchor_level = anchor_level
        self.M = grid.Ns - 1
        self.P = grid.Nt * grid.n
        self.mid = grid.Ns // 2
        D = s_difference_matrix(grid.Ns, grid.h)
        self.D_int = D[1:-1, 1:-1]
        Dt = scipy.sparse.csr_matrix(Utils.derivative_matrix(grid.Nt, order=1))
        self.DtP = scipy.sparse.kron(Dt, scipy.sparse.identity(grid.n), format="csr")
        self.Dt_dense = Utils.derivative_matrix(grid.Nt, order=1)

    # Unknowns and equations are interleaved per s-row, [u_i, v_i] and [F1_i, F2_i], so the Jacobian is block banded
    def unpack(self, w):
        pairs = w.reshape(self.M, 2, self.grid.Nt, self.grid.n)
        return pairs[:, 0], pairs[:, 1]

    @staticmethod
    def interleave(a, b):
        return np.stack([a, b], axis=1).reshape(-1)

    def grid_of(self, w):
        u_int, v_int = self.unpack(w)
        u = self.grid.u.copy()
        v = self.grid.v.copy()
        u[1:-1], v[1:-1] = u_int, v_int
        return self.grid.with_fields(u, v)

    def pack(self, grid):
        return self.interleave(grid.u[1:-1], grid.v[1:-1])

    def equations(self, w, tau, b):
        grid = self.grid_of(w)
        (f1, f2), _ = floer_residual(grid, self.V)
        anchor = symplectic_action(grid.slice_loop(self.mid), grid.v[self.mid], self.V) - self.anchor_level
        return self.interleave(f1, f2) - tau * b, anchor, grid

    def translation(self, w):
        grid = self.grid_of(w)
        b = self.interleave(s_derivative(grid.u, grid.h)[1:-1], s_derivative(grid.v, grid.h)[1:-1])
        return b / np.linalg.norm(b)

    def jacobian(self, w, b):
        grid = self.grid_of(w)
        eps2 = grid.epsilon ** 2
        P = self.P
        x = grid.positions()[1:-1]
        t = np.broadcast_to(grid.t[None, :], x.shape[:2]).reshape(-1)
        offsets = (2 * P * np.arange(self.M)[:, None] + grid.n * np.arange(grid.Nt)[None, :]).reshape(-1)
        hess = _block_diagonal(self.V.hessian(t, x.reshape(-1, grid.n)), 2 * self.M * P, offsets)
        I_P = scipy.sparse.identity(P, format="csr")
        s_weights = scipy.sparse.bmat([[I_P, None], [None, eps2 * I_P]])
        local = scipy.sparse.bmat([[None, -self.DtP], [self.DtP, -I_P]])
        J = (scipy.sparse.kron(self.D_int, s_weights, format="csr") +
             scipy.sparse.kron(scipy.sparse.identity(self.M), local, format="csr") - hess)

        # Gradient of the anchor (only the s = 0 slice enters)
        u_mid, v_mid = grid.u[self.mid], grid.v[self.mid]
        x_mid = grid.positions()[self.mid]
        velocity = _velocity(grid.alpha, u_mid[None])[0]
        d_u = (self.Dt_dense.T @ v_mid - self.V.gradient(grid.t, x_mid)) / grid.Nt
        d_v = (velocity - v_mid) / grid.Nt
        row = np.zeros(2 * self.M * P)
        offset = 2 * (self.mid - 1) * P
        row[offset:offset + P] = d_u.reshape(-1)
        row[offset + P:offset + 2 * P] = d_v.reshape(-1)
        return scipy.sparse.bmat([[J, scipy.sparse.csr_matrix(-b[:, None])],
                                  [scipy.sparse.csr_matrix(row[None, :]), None]], format="csc")

    def newton_step(self, w, tau):
        b = self.translation(w)
        F, g, _ = self.equations(w, tau, b)
        A = self.jacobian(w, b)
        delta = spsolve(A, -np.concatenate([F, [g]]))
        return delta[:-1], delta[-1], b


def _merit(F, g):
    return float(np.sqrt(np.sum(F ** 2) + g ** 2))


def newton_solve(grid, V, anchor_level, max_steps=30, tol=1e-8, max_halvings=30):
    '''
    Damped bordered Newton iteration from the given grid (boundary rows stay fixed)
    :return: Tuple (solved CylinderGrid, final tau, number of steps)
    '''
    system = _System(grid, V, anchor_level)
    w, tau = system.pack(grid), 0.0
    inner_tol = 1e-2 * tol
    for step in range(max_steps + 1):
        b = system.translation(w)
        F, g, current = system.equations(w, tau, b)
        merit = _merit(F, g)
        f1, f2 = system.unpack(F)
        if _interior_norm(f1, f2 / grid.epsilon ** 2, current) < inner_tol and abs(g) < inner_tol:
            return current, tau, step
        if step == max_steps:
            break
        dw, dtau, b = system.newton_step(w, tau)
        lam = 1.0
        for _ in range(max_halvings):
            F_trial, g_trial, _ = system.equations(w + lam * dw, tau + lam * dtau, b)
            if _merit(F_trial, g_trial) < merit:
                break
            lam *= 0.5
        else:
            if merit < 1e-11:
                log.warning("Cylinder Newton stalled at round-off level (merit %.2e)", merit)
                return current, tau, step
            raise NoConvergence("Damped Newton step failed to decrease the cylinder residual " + str(merit))
        w, tau = w + lam * dw, tau + lam * dtau
        log.debug("Cylinder Newton step %d: merit %.3e, damping %.3g", step, merit, lam)
    raise NoConvergence("Cylinder Newton iteration did not converge in " + str(max_steps) + " steps")


def solve_cylinder(source, target, V, epsilon, S=None, Ns=800, Nt=64, initial=None, target_lift=None,
                   max_steps=30, tol=1e-8):
    '''
    Floer cylinder from source (s -> -inf) to target (s -> +inf) with the translation anchor
    :param source: CriticalPoint of index one more than the target
    :param target: CriticalPoint
    :param V: Potential
    :param epsilon: Parameter in (0, 1]
    :param S: Half-length; defaults to truncation_length(source, target)
    :param initial: Optional CylinderGrid (e.g. a resampled heat-flow line) to start from
    :param target_lift: Lattice translation of the target end; defaults to nearest_lift
    :return: CylinderGrid with metadata residual, tau, steps, anchor_level
    '''
    _check_anchor(source, target)
    if source.index != target.index + 1:
        raise ValueError("Cylinders are solved between points of index difference one, got " +
                         str(source.index) + " and " + str(target.index))
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1], got " + str(epsilon))
    if initial is None:
        S = truncation_length(source, target) if S is None else S
        grid = boundary_grid(source, target, epsilon, S, Ns, Nt, target_lift)
    else:
        grid = initial.with_fields(initial.u, initial.v, epsilon=epsilon)
    anchor_level = 0.5 * (source.action + target.action)
    log.info("Solving cylinder at epsilon %g on [-%g, %g] x %d x %d", epsilon, grid.S, grid.S, grid.Ns, grid.Nt)
    solved, tau, steps = newton_solve(grid, V, anchor_level, max_steps=max_steps, tol=tol)
    _, residual = floer_residual(solved, V)
    if residual >= tol:
        raise NoConvergence("Cylinder residual " + str(residual) + " above " + str(tol) +
                            " after convergence of the bordered system; increase S")
    log.info("Cylinder converged after %d Newton steps (residual %.2e)", steps, residual)
    return solved.with_fields(solved.u, solved.v, residual=residual, tau=tau, steps=steps, anchor_level=anchor_level)


def ansatz_sigma(grid):
    '''
    Mean displacement of every slice, the sigma(s) of the family u = 2pi alpha t + sigma(s), v = 2pi alpha
    :return: Array [Ns+1, n]
    '''
    return np.mean(grid.u, axis=1)


def ansatz_deviation(grid):
    '''
    Largest pointwise distance of (u, v) from the t-independent family (sigma(s), 2pi alpha)
    '''
    sigma = ansatz_sigma(grid)
    du = np.max(np.abs(grid.u - sigma[:, None, :]))
    dv = np.max(np.abs(grid.v - TWO_PI * grid.alpha.vector[None, None, :]))
    return float(max(du, dv))


def line_to_grid(line, source, target, V, S, Ns, Nt, epsilon=1.0):
    '''
    Resamples a parabolic line onto a cylinder grid with v = d_t u. The s-origin is placed where the action
    passes the mean of the endpoint actions; beyond the traced range the line is continued by its linearized
    exponential approach to the ends.
    '''
    level = 0.5 * (source.action + target.action)
    actions = np.asarray(line.actions)
    if not actions[0] > level > actions[-1]:
        raise ValueError("The line does not cross the anchor level")
    slices = Utils.resample_periodic(np.moveaxis(np.asarray(line.slices), 1, 0), Nt)
    slices = np.moveaxis(slices, 0, 1)
    spline = scipy.interpolate.CubicSpline(line.s_grid, slices.reshape(len(line.s_grid), -1), axis=0)
    crossing = int(np.argmax(actions < level))
    s_star = scipy.optimize.brentq(
        lambda si: Models.TorusLoops.action(Models.TorusLoops.make_loop(source.alpha, spline(si).reshape(Nt, -1)), V) - level,
        line.s_grid[crossing - 1], line.s_grid[crossing], xtol=1e-14)

    lift = Models.TorusLoops.lattice_shift(slices[-1], _endpoint(target, Nt)[0])
    u_minus, _ = _endpoint(source, Nt)
    u_plus, _ = _endpoint(target, Nt, lift)
    rate_minus = abs(source.spectrum_head[0])
    rate_plus = target.gap

    s = np.linspace(-S, S, Ns + 1) + s_star
    u = np.empty((Ns + 1, Nt, source.alpha.n))
    s0, s1 = line.s_grid[0], line.s_grid[-1]
    for i, si in enumerate(s):
        if si < s0:
            u[i] = u_minus + (slices[0] - u_minus) * np.exp(rate_minus * (si - s0))
        elif si > s1:
            u[i] = u_plus + (slices[-1] - u_plus) * np.exp(-rate_plus * (si - s1))
        else:
            u[i] = spline(si).reshape(Nt, -1)
    u[0], u[-1] = u_minus, u_plus
    v = _velocity(source.alpha, u)
    return CylinderGrid(source.alpha, float(S), float(epsilon), u, v,
                        {"target_lift": [int(m) for m in lift], "s_offset": s_star})


def adiabatic_compare(line, source, target, V, epsilons, S=None, Ns=800, Nt=32, solve=True):
    '''
    Measures how a parabolic line seeds the epsilon-Floer solutions: the residual of (u, d_t u), which equals
    eps ||d_s d_t u|| up to the heat-equation defect of the discrete line, the residual of the unscaled Floer
    pair on the same grid, the size of one bordered Newton correction in the ||.||_{1,2,eps} norm, and the
    ||.||_{1,2,eps} distance to the cylinder solved from the line.
    :param line: FlowLine of the heat flow from source to target
    :param epsilons: Iterable of epsilon values in (0, 1]
    :param solve: Solve the cylinders for the distance column (NaN otherwise)
    :return: List of row dictionaries (epsilon, residual, plain_residual, heat_defect, correction, distance)
    '''
    S = truncation_length(source, target) if S is None else S
    base = line_to_grid(line, source, target, V, S, Ns, Nt)
    anchor_level = 0.5 * (source.action + target.action)
    pad = lambda f: np.concatenate([np.zeros((1,) + f.shape[1:]), f, np.zeros((1,) + f.shape[1:])])
    g1, g2 = plain_floer_residual(base, V)
    plain = WeightedNorm(1.0).zero(pad(g1), pad(g2), base.h)
    rows = []
    for eps in epsilons:
        grid = base.with_fields(base.u, base.v, epsilon=float(eps))
        (f1, _), residual = floer_residual(grid, V)
        system = _System(grid, V, anchor_level)
        dw, _, _ = system.newton_step(system.pack(grid), 0.0)
        du, dv = system.unpack(dw)
        norm = WeightedNorm(float(eps))
        row = {"epsilon": float(eps), "residual": residual, "plain_residual": plain,
               "heat_defect": norm.zero(pad(f1), np.zeros_like(pad(f1)), grid.h),
               "correction": norm.one(pad(du), pad(dv), grid.h), "distance": np.nan}
        if solve:
            solved = solve_cylinder(source, target, V, float(eps), initial=grid)
            row["distance"] = norm.one(solved.u - grid.u, solved.v - grid.v, grid.h)
        log.info("epsilon %g: residual %.3e, correction %.3e, distance %.3e", eps, row["residual"],
                 row["correction"], row["distance"])
        rows.append(row)
    return rows


def cylinder_table(grid):
    '''
    Long-format slab (s, t, u_1.., v_1..) of a cylinder for plotting
    '''
    s, t = np.meshgrid(grid.s, grid.t, indexing="ij")
    columns = {"s": s.reshape(-1), "t": t.reshape(-1)}
    for i in range(grid.n):
        columns["u_" + str(i + 1)] = grid.u[:, :, i].reshape(-1)
        columns["v_" + str(i + 1)] = grid.v[:, :, i].reshape(-1)
    return columns
