'''
Time-periodic potentials V(t, q) = sum_i a_i cos(<k_i, q> + 2pi m_i t + phi_i) on S^1 x T^n,
with exact gradient and Hessian.
'''
from dataclasses import dataclass

import numpy as np

import Models.TorusLoops
from Models.TorusLoops import TWO_PI


@dataclass(frozen=True)
class Mode:
    k: tuple
    m: int
    a: float
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(ki) for ki in self.k))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "phi", float(self.phi))


class Potential:
    '''
    Immutable trigonometric polynomial potential. Closed under sums and scalar multiples.
    '''

    def __init__(self, n, modes=()):
        '''
        :param n: Torus dimension
        :param modes: Iterable of Mode (or (k, m, a, phi) tuples)
        '''
        self.n = int(n)
        self.modes = tuple(mode if isinstance(mode, Mode) else Mode(*mode) for mode in modes)
        for mode in self.modes:
            if len(mode.k) != self.n:
                raise ValueError("Mode wave vector " + str(mode.k) + " does not match dimension " + str(self.n))
            if not np.isfinite(mode.a) or not np.isfinite(mode.phi):
                raise ValueError("Mode amplitude and phase must be finite")
        self._K = np.array([mode.k for mode in self.modes], dtype=float).reshape(len(self.modes), self.n)
        self._m = np.array([mode.m for mode in self.modes], dtype=float)
        self._a = np.array([mode.a for mode in self.modes], dtype=float)
        self._phi = np.array([mode.phi for mode in self.modes], dtype=float)

    def __add__(self, other):
        if other.n != self.n:
            raise ValueError("Cannot add potentials of different dimensions")
        return Potential(self.n, self.modes + other.modes)

    def __mul__(self, scalar):
        return Potential(self.n, [Mode(mode.k, mode.m, scalar * mode.a, mode.phi) for mode in self.modes])

    __rmul__ = __mul__

    def __repr__(self):
        return "Potential(n=" + str(self.n) + ", modes=" + str(len(self.modes)) + ")"

    def _phases(self, t, q):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        q = np.asarray(q, dtype=float).reshape(-1, self.n)
        return q @ self._K.T + TWO_PI * t[:, None] * self._m[None, :] + self._phi[None, :]

    def value(self, t, q):
        '''
        :param t: Times, shape [M]
        :param q: Points, shape [M, n]
        :return: Values, shape [M]
        '''
        return np.cos(self._phases(t, q)) @ self._a

    def gradient(self, t, q):
        return -(np.sin(self._phases(t, q)) * self._a[None, :]) @ self._K

    def hessian(self, t, q):
        weights = np.cos(self._phases(t, q)) * self._a[None, :]
        return -np.einsum("jm,mi,mk->jik", weights, self._K, self._K)

    def time_shift(self, tau):
        '''
        Potential W(t, q) = V(t + tau, q)
        '''
        return Potential(self.n, [Mode(mode.k, mode.m, mode.a, mode.phi + TWO_PI * mode.m * tau) for mode in self.modes])

    def to_dict(self):
        return {"n": self.n, "modes": [{"k": list(mode.k), "m": mode.m, "a": mode.a, "phi": mode.phi} for mode in self.modes]}

    @staticmethod
    def from_dict(record):
        modes = [Mode(tuple(mode["k"]), mode["m"], mode["a"], mode.get("phi", 0.0)) for mode in record["modes"]]
        return Potential(record["n"], modes)


def evaluate(V, t, q):
    '''
    Value, gradient and Hessian of V at a single point
    :param V: Potential
    :param t: Time
    :param q: Point in R^n
    :return: Tuple (value, gradient [n], hessian [n, n])
    '''
    q = np.asarray(q, dtype=float).reshape(1, V.n)
    return float(V.value([t], q)[0]), V.gradient([t], q)[0], V.hessian([t], q)[0]


def zero_potential(n):
    return Potential(n, ())


def pendulum_potential(alpha):
    '''
    Class-splitting potential V_alpha(t, q) = sum_k cos(q_k - 2pi alpha_k t)
    :param alpha: Winding vector or WindingClass
    :return: Potential with one mode per coordinate
    '''
    alpha = Models.TorusLoops.as_winding(alpha)
    modes = []
    for i, a_i in enumerate(alpha.alpha):
        k = [0] * alpha.n
        k[i] = 1
        modes.append(Mode(tuple(k), -a_i, 1.0, 0.0))
    return Potential(alpha.n, modes)


def random_perturbation(n, rng, amplitude=1e-2, kmax=1, mmax=1, num_modes=4):
    '''
    Random low-frequency trigonometric potential with amplitudes bounded by the given amplitude.
    Used to restore genericity of a potential (Morse-ness) or to test stability of computed invariants.
    :param n: Dimension
    :param rng: numpy Generator
    :param amplitude: Upper bound for every |a|
    :param kmax: Maximal absolute wave number per coordinate
    :param mmax: Maximal absolute time frequency
    :param num_modes: Number of modes to draw
    :return: Potential
    '''
    modes = []
    for _ in range(num_modes):
        k = tuple(rng.integers(-kmax, kmax + 1, size=n))
        if not any(k):
            k = tuple([1] + [0] * (n - 1))
        m = int(rng.integers(-mmax, mmax + 1))
        modes.append(Mode(k, m, amplitude * rng.uniform(-1.0, 1.0), rng.uniform(0.0, TWO_PI)))
    return Potential(n, modes)


def build_potential(description, alpha, rng=None):
    '''
    Potential from a configuration entry: "pendulum", "zero", or a {n, modes} dictionary,
    plus an optional random perturbation {"amplitude", "kmax", "mmax", "num_modes"}
    '''
    alpha = Models.TorusLoops.as_winding(alpha)
    kind = description.get("kind", "pendulum") if isinstance(description, dict) else description
    if kind == "pendulum":
        V = pendulum_potential(alpha)
    elif kind == "zero":
        V = zero_potential(alpha.n)
    elif kind == "modes":
        V = Potential.from_dict(description)
    else:
        raise ValueError("Unknown potential kind " + str(kind))
    perturbation = description.get("perturbation") if isinstance(description, dict) else None
    if perturbation and perturbation.get("amplitude", 0.0) > 0.0:
        if rng is None:
            raise ValueError("A random generator is required for perturbed potentials")
        V = V + random_perturbation(alpha.n, rng, perturbation["amplitude"], perturbation.get("kmax", 1),
                                    perturbation.get("mmax", 1), perturbation.get("num_modes", 4))
    return V
