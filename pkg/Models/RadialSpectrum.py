'''
Marked length spectrum of the flat torus and 1-periodic orbits of radial Hamiltonians H(q, p) = h(|p|).

An orbit in class alpha sits on the sphere bundle of radius r where the slope h'(r) equals a length of a
closed geodesic in alpha; its action is minus the intercept of the tangent line to h at r, r h'(r) - h(r).
Profiles are C^1 cubic Hermite splines on [0, r_m] continued by a linear tail, so slope roots are found
piece by piece on polynomials.
'''
from dataclasses import dataclass, field

import numpy as np
import scipy.interpolate

import Utils
import Models.TorusLoops
from Models.TorusLoops import TWO_PI
from Models.Errors import TangencySlope

log = Utils.get_logger("radial_spectrum")

SLOPE_TOL = 1e-10
ACTION_TOL = 1e-8


class RadialHamiltonian:
    '''
    Radial profile h(r): cubic Hermite spline through (knots, values, slopes), linear of slope tail_slope
    beyond the last knot. With compact=True the profile vanishes for r >= 1 - margin.
    '''

    def __init__(self, knots, values, slopes, tail_slope=None, compact=False, margin=0.0, name=None):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if knots.ndim != 1 or len(knots) < 2 or values.shape != knots.shape or slopes.shape != knots.shape:
            raise ValueError("Profiles need at least two knots with one value and one slope each")
        if knots[0] != 0.0 or np.any(np.diff(knots) <= 0.0):
            raise ValueError("Knots must increase strictly from r = 0")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
            raise ValueError("Profile values and slopes must be finite")
        tail_slope = float(slopes[-1]) if tail_slope is None else float(tail_slope)
        if abs(tail_slope - slopes[-1]) > SLOPE_TOL:
            raise ValueError("Tail slope " + str(tail_slope) + " does not continue the last knot slope " +
                             str(slopes[-1]) + ": h' would jump")
        if compact:
            outer = knots >= 1.0 - margin - 1e-12
            if not (0.0 < margin < 1.0 and knots[-1] < 1.0 and np.any(outer)):
                raise ValueError("Compactly supported profiles need 0 < margin < 1 and a last knot inside the disc")
            if np.any(values[outer] != 0.0) or np.any(slopes[outer] != 0.0) or tail_slope != 0.0:
                raise ValueError("Compactly supported profiles vanish with zero slope for r >= 1 - margin")
        self.knots, self.values, self.slopes = knots, values, slopes
        self.tail_slope = tail_slope
        self.compact = bool(compact)
        self.margin = float(margin)
        self.name = name
        self._spline = scipy.interpolate.CubicHermiteSpline(knots, values, slopes, extrapolate=False)
        self._slope = self._spline.derivative()
        self._curvature = self._spline.derivative(2)

    def __repr__(self):
        return "RadialHamiltonian(" + str(self.name or "profile") + ", knots=" + str(len(self.knots)) + ")"

    @property
    def r_max(self):
        return float(self.knots[-1])

    def value(self, r):
        r = np.asarray(r, dtype=float)
        tail = self.values[-1] + self.tail_slope * (r - self.r_max)
        return np.where(r <= self.r_max, self._spline(np.clip(r, 0.0, self.r_max)), tail)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.r_max, self._slope(np.clip(r, 0.0, self.r_max)), self.tail_slope)

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.r_max, self._curvature(np.clip(r, 0.0, self.r_max)), 0.0)

    def tangent_intercept(self, r):
        '''
        y-intercept of the tangent line to the graph of h at r
        '''
        return self.value(r) - r * self.derivative(r)

    def refine(self, factor=2):
        '''
        Same profile on a knot vector with factor - 1 extra knots per piece (values and slopes sampled exactly)
        '''
        knots = np.concatenate([np.linspace(a, b, factor + 1)[:-1] for a, b in zip(self.knots[:-1], self.knots[1:])] +
                               [self.knots[-1:]])
        values, slopes = self.value(knots), self.derivative(knots)
        # Original knots keep their exact data
        values[::factor], slopes[::factor] = self.values, self.slopes
        return RadialHamiltonian(knots, values, slopes, self.tail_slope, self.compact, self.margin, self.name)

    def to_dict(self):
        return {"name": self.name, "knots": self.knots.tolist(), "values": self.values.tolist(),
                "slopes": self.slopes.tolist(), "tail_slope": self.tail_slope, "compact": self.compact,
                "margin": self.margin}

    @staticmethod
    def from_dict(record):
        return RadialHamiltonian(record["knots"], record["values"], record["slopes"], record.get("tail_slope"),
                                 record.get("compact", False), record.get("margin", 0.0), record.get("name"))


@dataclass(frozen=True)
class OrbitRecord:
    radius: float
    length: float
    action: float
    alpha: object # WindingClass

    def to_dict(self):
        return {"radius": self.radius, "length": self.length, "action": self.action, "alpha": list(self.alpha.alpha)}


@dataclass(frozen=True)
class ExistenceReport:
    c: float
    length: float
    orbits: tuple
    max_action: float
    hypothesis: bool
    verdict: str
    tangencies: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {"c": self.c, "ell_alpha": self.length, "orbits": [orbit.to_dict() for orbit in self.orbits],
                "max_action": Utils.to_jsonable(self.max_action), "hypothesis": self.hypothesis,
                "verdict": self.verdict, "tangencies": list(self.tangencies)}


def minimal_length(alpha):
    '''
    ell_alpha = 2pi |alpha|_2, the length of every closed geodesic in class alpha of the flat torus
    '''
    alpha = Models.TorusLoops.as_winding(alpha)
    return float(TWO_PI * np.linalg.norm(alpha.vector))


def length_spectrum(alpha):
    '''
    Lengths of the closed geodesics in class alpha on the flat torus R^n / 2piZ^n
    :param alpha: Winding vector or WindingClass
    :return: Tuple (frozenset of lengths, minimal length ell_alpha)
    '''
    ell = minimal_length(alpha)
    return frozenset([ell]), ell


def _slope_roots(h, ell):
    '''
    Radii in (0, r_m] where h' = ell, and radii of intervals on which h' is identically ell
    '''
    shifted = scipy.interpolate.PPoly(h._slope.c.copy(), h._slope.x)
    shifted.c[-1] -= ell
    raw = shifted.roots(discontinuity=False, extrapolate=False)
    roots, families = [], []
    for i, r in enumerate(raw):
        if np.isnan(r):
            continue
        if i + 1 < len(raw) and np.isnan(raw[i + 1]):
            families.append(float(r))
            continue
        roots.append(float(r))
    roots = sorted(set(roots))
    deduped = []
    for r in roots:
        if not deduped or r - deduped[-1] > 1e-12:
            deduped.append(r)
    return deduped, families


def _polish(h, ell, r, steps=3):
    for _ in range(steps):
        curvature = float(h.second_derivative(r))
        if curvature == 0.0:
            break
        r_new = float(np.clip(r - (float(h.derivative(r)) - ell) / curvature, 0.0, h.r_max))
        if abs(float(h.derivative(r_new)) - ell) > abs(float(h.derivative(r)) - ell):
            break
        r = r_new
    return r


def _crosses(h, ell, r, eta=1e-6):
    lo = float(h.derivative(max(r - eta, 0.0))) - ell
    hi = float(h.derivative(r + eta)) - ell
    return lo * hi < 0.0


def enumerate_radial_orbits(h, alpha, allow_contractible=False, strict=False, tangencies=None):
    '''
    All radii with h'(r) = ell for ell in the length spectrum of alpha, with the actions r h'(r) - h(r)
    :param h: RadialHamiltonian
    :param alpha: Winding vector or WindingClass
    :param allow_contractible: Opt-in for alpha = 0
    :param strict: Raise TangencySlope on degenerate orbits instead of logging and skipping them
    :param tangencies: Optional list collecting the radii of skipped degenerate orbits
    :return: List of OrbitRecord sorted by radius
    '''
    alpha = Models.TorusLoops.as_winding(alpha)
    if not any(alpha.alpha) and not allow_contractible:
        raise ValueError("The contractible class has ell = 0; pass allow_contractible=True to enumerate it")
    spectrum, _ = length_spectrum(alpha)
    records = []

    def degenerate(r, ell, what):
        message = "Slope " + str(ell) + " " + what + " at r = " + str(r) + ": degenerate orbit family not counted"
        if strict:
            raise TangencySlope(message, radius=r, length=ell)
        log.warning(message)
        if tangencies is not None:
            tangencies.append(r)

    for ell in sorted(spectrum):
        roots, families = _slope_roots(h, ell)
        for r in families:
            degenerate(r, ell, "is attained on an interval")
        for r in roots:
            r = _polish(h, ell, r)
            if r <= SLOPE_TOL:
                log.debug("Root at the zero section skipped (r = %.3g)", r)
                continue
            if not _crosses(h, ell, r):
                degenerate(r, ell, "is touched without crossing")
                continue
            slope = float(h.derivative(r))
            records.append(OrbitRecord(radius=r, length=ell, action=float(r * slope - h.value(r)), alpha=alpha))
        if abs(h.tail_slope - ell) <= SLOPE_TOL:
            degenerate(h.r_max, ell, "equals the tail slope")
    records.sort(key=lambda orbit: orbit.radius)
    log.info("Profile %s has %d orbits in class %s", h.name or "", len(records), alpha)
    return records


def check_existence_bound(h, alpha, allow_contractible=False, strict=False):
    '''
    For a profile supported in the open unit disc bundle with h(0) = -c <= -ell_alpha, checks that some
    orbit in class alpha has action at least c. Profiles with c < ell_alpha give a VACUOUS verdict, and so
    does the contractible class (opt-in only), for which the bound makes no claim.
    :param h: RadialHamiltonian with compact=True
    :param alpha: Winding class
    :param allow_contractible: Opt-in for alpha = 0
    :param strict: Raise TangencySlope on degenerate orbits
    :return: ExistenceReport with verdict PASS, FAIL or VACUOUS
    '''
    if not h.compact:
        raise ValueError("The existence check applies to compactly supported profiles only")
    alpha = Models.TorusLoops.as_winding(alpha)
    _, ell = length_spectrum(alpha)
    c = -float(h.value(0.0))
    skipped = []
    orbits = enumerate_radial_orbits(h, alpha, allow_contractible=allow_contractible, strict=strict,
                                     tangencies=skipped)
    max_action = max((orbit.action for orbit in orbits), default=-np.inf)
    hypothesis = any(alpha.alpha) and -c <= -ell
    if not hypothesis:
        verdict = "VACUOUS"
    elif max_action >= c - ACTION_TOL:
        verdict = "PASS"
    else:
        verdict = "FAIL"
    log.info("Existence check: c = %.6g, ell = %.6g, max action %.6g -> %s", c, ell, max_action, verdict)
    return ExistenceReport(c=c, length=ell, orbits=tuple(orbits), max_action=float(max_action),
                           hypothesis=hypothesis, verdict=verdict, tangencies=tuple(skipped))


def quadratic_profile(r_max=20.0, pieces=8):
    '''
    The geodesic Hamiltonian h(r) = r^2/2 on [0, r_max] (reproduced exactly by cubic pieces)
    '''
    knots = np.linspace(0.0, r_max, pieces + 1)
    return RadialHamiltonian(knots, 0.5 * knots ** 2, knots, tail_slope=r_max, name="quadratic")


def zero_profile(margin=0.05):
    return RadialHamiltonian([0.0, 1.0 - margin], [0.0, 0.0], [0.0, 0.0], tail_slope=0.0, compact=True,
                             margin=margin, name="zero")


def _ramp_profile(c, width, margin, name):
    # Slope rises linearly from 0 to s over [0, width], stays s, falls back to 0 over [L - width, L]
    L = 1.0 - margin
    s = c / (L - width)
    knots = [0.0, width, L - width, L]
    values = [-c, -c + 0.5 * s * width, -0.5 * s * width, 0.0]
    return RadialHamiltonian(knots, values, [0.0, s, s, 0.0], tail_slope=0.0, compact=True, margin=margin,
                             name=name), s


def sharp_profile(alpha, delta=0.5, margin=0.02, width=0.04):
    '''
    The straight segment from (0, -ell_alpha) to (1, 0), smoothed: h(0) = -(ell_alpha - delta) and every
    slope stays below ell_alpha, so no orbit exists in class alpha
    '''
    _, ell = length_spectrum(alpha)
    h, s = _ramp_profile(ell - delta, width, margin, "sharp")
    if not s < ell:
        raise ValueError("Smoothing with delta " + str(delta) + " keeps a slope " + str(s) + " >= ell_alpha; " +
                         "decrease margin or width")
    return h


def random_compact_profile(alpha, rng, excess=0.1, spread=2.0, pieces=6, margin=0.05):
    '''
    Random compactly supported profile with h(0) = -c, c = ell_alpha + excess + U(0, spread), increasing
    through random interior values with shape-preserving (PCHIP) slopes and flat ends
    '''
    _, ell = length_spectrum(alpha)
    c = ell + excess + rng.uniform(0.0, spread)
    L = 1.0 - margin
    interior = np.sort(rng.uniform(0.05, 0.95, size=pieces - 1)) * L
    knots = np.concatenate([[0.0], interior, [L]])
    values = np.concatenate([[-c], -c * np.sort(rng.uniform(0.0, 1.0, size=pieces - 1))[::-1], [0.0]])
    slopes = scipy.interpolate.PchipInterpolator(knots, values).derivative()(knots)
    slopes[0] = slopes[-1] = 0.0
    return RadialHamiltonian(knots, values, slopes, tail_slope=0.0, compact=True, margin=margin, name="random")


def build_profile(description, alpha=None, rng=None):
    '''
    Profile from a configuration entry: {"kind": "quadratic" | "sharp" | "zero" | "random"} with the
    parameters of the corresponding constructor, or an explicit knot list
    '''
    kind = description.get("kind", "knots")
    params = {key: val for key, val in description.items() if key != "kind"}
    if kind == "quadratic":
        return quadratic_profile(**params)
    if kind == "zero":
        return zero_profile(**params)
    if kind == "sharp":
        return sharp_profile(alpha, **params)
    if kind == "random":
        if rng is None:
            raise ValueError("A random generator is required for random profiles")
        return random_compact_profile(alpha, rng, **params)
    if kind == "knots":
        return RadialHamiltonian.from_dict(params)
    raise ValueError("Unknown profile kind " + str(kind))


def profile_table(h, r_end=None, num=401):
    '''
    Plot data (r, h, dh) on [0, r_end]
    '''
    r_end = (1.0 if h.compact else 1.25 * h.r_max) if r_end is None else r_end
    r = np.linspace(0.0, r_end, num)
    return {"r": r, "h": h.value(r), "dh": h.derivative(r)}


def orbit_table(orbits):
    return {"radius": [o.radius for o in orbits], "length": [o.length for o in orbits],
            "action": [o.action for o in orbits]}
