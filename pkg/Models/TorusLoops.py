'''
Discrete free loops on the flat torus T^n = R^n / 2piZ^n.

A loop in the homotopy class alpha is stored as its winding part plus a periodic displacement,
x(t_j) = 2pi alpha t_j + y_j with t_j = j/N, so the non-periodic coordinate never enters an array.
'''
from dataclasses import dataclass

import numpy as np

import Utils

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusModel:
    n: int
    circumference: float = TWO_PI

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("Torus dimension must be positive, got " + str(self.n))


@dataclass(frozen=True)
class WindingClass:
    alpha: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        if len(self.alpha) < 1:
            raise ValueError("Winding vector must have at least one entry")

    @property
    def n(self):
        return len(self.alpha)

    @property
    def vector(self):
        return np.array(self.alpha, dtype=float)

    def __str__(self):
        return "(" + ",".join(str(a) for a in self.alpha) + ")"


def as_winding(alpha):
    return alpha if isinstance(alpha, WindingClass) else WindingClass(tuple(np.atleast_1d(alpha)))


@dataclass(frozen=True, eq=False)
class DiscreteLoop:
    alpha: WindingClass
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[1] != self.alpha.n:
            raise ValueError("Samples must have shape [N, n] with n = " + str(self.alpha.n) + ", got " + str(y.shape))
        if not Utils.is_power_of_two(y.shape[0]) or y.shape[0] < 16:
            raise ValueError("Number of samples must be a power of two >= 16, got " + str(y.shape[0]))
        if not np.all(np.isfinite(y)):
            raise ValueError("Loop samples must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def N(self):
        return self.y.shape[0]

    @property
    def n(self):
        return self.y.shape[1]

    @property
    def times(self):
        return np.arange(self.N) / float(self.N)

    @property
    def positions(self):
        '''
        Lifted positions x(t_j) = 2pi alpha t_j + y_j, shape [N, n]
        '''
        return TWO_PI * self.times[:, None] * self.alpha.vector[None, :] + self.y

    def with_samples(self, y):
        return DiscreteLoop(self.alpha, y)

    def to_dict(self):
        return {"alpha": list(self.alpha.alpha), "samples": self.y.tolist()}

    @staticmethod
    def from_dict(record):
        return DiscreteLoop(WindingClass(tuple(record["alpha"])), np.array(record["samples"], dtype=float))


@dataclass(frozen=True, eq=False)
class TangentField:
    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[:, None]
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def N(self):
        return self.xi.shape[0]


def make_loop(alpha, y):
    return DiscreteLoop(as_winding(alpha), y)


def straight_loop(alpha, N, offset=0.0):
    '''
    The geodesic 2pi alpha t + offset, i.e. a constant displacement
    :param alpha: Winding vector or WindingClass
    :param N: Number of samples
    :param offset: Scalar or n-vector added to every sample
    :return: DiscreteLoop
    '''
    alpha = as_winding(alpha)
    y = np.zeros((N, alpha.n)) + np.asarray(offset, dtype=float)
    return DiscreteLoop(alpha, y)


def differentiate(loop):
    '''
    Spectral time derivative of x, including the linear winding term 2pi alpha
    :param loop: DiscreteLoop
    :return: TangentField with samples of dx/dt
    '''
    return TangentField(TWO_PI * loop.alpha.vector[None, :] + Utils.spectral_derivative(loop.y, order=1))


def second_derivative(loop):
    # The linear winding term has vanishing second derivative
    return Utils.spectral_derivative(loop.y, order=2)


def action(loop, V):
    '''
    Classical action S_V(x) = int_0^1 1/2 |x'|^2 - V_t(x) dt by the rectangle rule on the sample grid
    :param loop: DiscreteLoop
    :param V: Potential of the same dimension
    :return: Action value
    '''
    if V.n != loop.n:
        raise ValueError("Loop and potential dimensions differ: " + str(loop.n) + " vs " + str(V.n))
    velocity = differentiate(loop).xi
    values = V.value(loop.times, loop.positions)
    return float(Utils.grid_mean(0.5 * np.sum(velocity ** 2, axis=1) - values))


def inner_products(xi, eta, base):
    '''
    L2 and W^{1,2} pairings of two fields along a base loop (flat metric, so no transport is involved)
    :param xi: TangentField
    :param eta: TangentField
    :param base: DiscreteLoop the fields live along
    :return: Tuple (L2 value, W12 value)
    '''
    if xi.xi.shape != eta.xi.shape or xi.N != base.N:
        raise ValueError("Fields and base loop must share the sample grid")
    l2 = float(Utils.grid_mean(np.sum(xi.xi * eta.xi, axis=1)))
    dxi = Utils.spectral_derivative(xi.xi, order=1)
    deta = Utils.spectral_derivative(eta.xi, order=1)
    return l2, l2 + float(Utils.grid_mean(np.sum(dxi * deta, axis=1)))


def l2_norm(field):
    '''
    Discrete L2 norm of an [N, n] array of samples
    '''
    return float(np.sqrt(Utils.grid_mean(np.sum(np.asarray(field) ** 2, axis=-1))))


def lattice_shift(y_a, y_b):
    '''
    Integer vector m minimising the mean offset between y_a and y_b + 2pi m
    '''
    return np.round(np.mean(y_a - y_b, axis=0) / TWO_PI)


def wrap_distance(loop_a, loop_b):
    '''
    L2 distance of two loops in the same class as loops on the torus, i.e. modulo deck translations 2piZ^n
    '''
    if loop_a.alpha != loop_b.alpha or loop_a.N != loop_b.N:
        raise ValueError("Loops must share winding class and grid")
    shift = lattice_shift(loop_a.y, loop_b.y)
    return l2_norm(loop_a.y - loop_b.y - TWO_PI * shift[None, :])


def canonical(loop):
    '''
    Representative with mean displacement in [-pi/2, 3pi/2) per coordinate
    '''
    mean = np.mean(loop.y, axis=0)
    shift = np.floor((mean + 0.5 * np.pi) / TWO_PI)
    return loop.with_samples(loop.y - TWO_PI * shift[None, :])


def time_shift(loop, k):
    '''
    Rotates the sample grid by k steps, x(t) -> x(t + k/N), keeping the class fixed
    '''
    shifted = np.roll(loop.y, -k, axis=0) + TWO_PI * loop.alpha.vector[None, :] * (k / float(loop.N))
    return loop.with_samples(shifted)


def resample(loop, N):
    '''
    Spectral interpolation of a loop to a grid of N samples
    '''
    return loop.with_samples(Utils.resample_periodic(np.asarray(loop.y), N))
