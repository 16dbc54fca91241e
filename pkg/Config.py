import numpy as np
from sacred import Ingredient

import Utils
from Models.Errors import ConfigError

config_ingredient = Ingredient("cfg")

POTENTIAL_KINDS = ("pendulum", "zero", "modes")
PROFILE_KINDS = ("knots", "quadratic", "sharp", "zero", "random")


@config_ingredient.config
def cfg():
    # Base configuration
    model_config = {"n" : 1, # Torus dimension
                    "alpha" : [1], # Winding class, one integer per coordinate
                    "potential" : {"kind" : "pendulum"}, # "pendulum" (V_alpha), "zero", or {"kind": "modes", "n": .., "modes": [..]}
                    "perturbation" : {"amplitude" : 0.0, "kmax" : 1, "mmax" : 1, "num_modes" : 4}, # Random trigonometric perturbation added to the potential
                    "N" : 128, # Time samples per loop (power of two, >= 16)
                    "seed_lattice_per_axis" : 3, # Constant seeds per coordinate for the critical point sweep
                    "seed_jitter" : 0.0, # Amplitude of random first-harmonic displacements added to every seed
                    "newton_max_steps" : 50,
                    "newton_tol" : 1e-10, # Target L2 residual of the Euler-Lagrange equation
                    "degeneracy_threshold" : 1e-6, # Smallest admissible |Hessian eigenvalue|
                    "dedup_tol" : 1e-4, # Critical points closer than this (modulo the lattice) are identified
                    "scheme" : "etdrk4", # Heat flow time stepping, "etdrk4" or "imex"
                    "flow_delta" : 1e-3, # Offset along the unstable direction when shooting
                    "flow_ds" : 1e-2, # Initial flow step
                    "flow_ds_max" : 0.1, # Largest flow step
                    "flow_grad_tol" : 1e-9, # A line has settled once its gradient norm drops below this
                    "flow_match_tol" : 1e-4, # Distance at which a settled line is matched to a critical point
                    "flow_max_time" : 200.0,
                    "flow_record_every" : 10, # Keep every k-th accepted slice of a line
                    "Ns" : 800, # Cylinder intervals in s (even)
                    "Nt" : 16, # Cylinder samples in t (power of two, >= 16)
                    "S" : None, # Cylinder half-length; None derives it from the spectral gaps at the ends
                    "s_order" : 4, # Order of the s-differences (fourth order, second order at the boundary rows)
                    "epsilons" : [1.0, 0.25], # epsilon values of the Floer solves
                    "adiabatic_epsilons" : [0.4, 0.2, 0.1], # epsilon values of the adiabatic residual sweep
                    "adiabatic_distance" : True, # Solve a cylinder per sweep epsilon for the distance column
                    "target_lift" : None, # Lattice translation of the cylinder target end; None follows the traced line
                    "cutoffs" : ["inf"], # Action cutoffs a of the filtered complexes
                    "coefficients" : "Z", # "Z" or "Z2"
                    "r" : 8, # Vertices of the broken-geodesic model (>= 8)
                    "gap_bound" : 0.5 * np.pi, # Largest admissible gap of a broken loop
                    "profile" : {"kind" : "quadratic"}, # Radial profile: a path to a JSON knot document, or an inline entry
                    "num_random_profiles" : 10, # Random profiles of the existence check
                    "strict_tangency" : False, # Raise on degenerate radial orbits instead of skipping them
                    "allow_contractible" : False, # Opt-in for alpha = 0 in the radial commands
                    "perturbation_trials" : 20, # Perturbed potentials in the square-zero suite of verify
                    "out_dir" : "results", # Output directory (created if needed)
                    }


@config_ingredient.named_config
def pendulum_1d():
    print("Pendulum potential on the circle, class 1")
    model_config = {
        "n": 1,
        "alpha": [1],
        "potential": {"kind": "pendulum"}
    }


@config_ingredient.named_config
def pendulum_2d():
    print("Pendulum potential on T^2, class (1,1)")
    model_config = {
        "n": 2,
        "alpha": [1, 1],
        "N": 64,
        "potential": {"kind": "pendulum"}
    }


@config_ingredient.named_config
def torus_3d():
    print("Pendulum potential on T^3, class (1,1,1)")
    model_config = {
        "n": 3,
        "alpha": [1, 1, 1],
        "N": 32,
        "seed_lattice_per_axis": 2,
        "potential": {"kind": "pendulum"}
    }


@config_ingredient.named_config
def perturbed_2d():
    print("Pendulum potential on T^2 with a random perturbation of size 1e-2")
    model_config = {
        "n": 2,
        "alpha": [1, 1],
        "N": 64,
        "potential": {"kind": "pendulum"},
        "perturbation": {"amplitude": 1e-2, "kmax": 1, "mmax": 1, "num_modes": 4}
    }


@config_ingredient.named_config
def floer_pendulum():
    print("epsilon-Floer cylinders of the pendulum on the circle")
    model_config = {
        "n": 1,
        "alpha": [1],
        "potential": {"kind": "pendulum"},
        "Ns": 800,
        "Nt": 16,
        "epsilons": [1.0, 0.25],
        "target_lift": [0]
    }


@config_ingredient.named_config
def floer_adiabatic():
    print("Adiabatic residual sweep on a perturbed pendulum line")
    model_config = {
        "n": 1,
        "alpha": [1],
        "potential": {"kind": "modes", "n": 1, "modes": [{"k": [1], "m": -1, "a": 1.0, "phi": 0.0},
                                                        {"k": [1], "m": 0, "a": 0.3, "phi": 0.0}]},
        "Ns": 800,
        "Nt": 16,
        "flow_ds_max": 0.02,
        "flow_record_every": 1,
        "adiabatic_epsilons": [0.4, 0.2, 0.1]
    }


@config_ingredient.named_config
def radial_quadratic():
    model_config = {
        "alpha": [1],
        "profile": {"kind": "quadratic", "r_max": 20.0}
    }


@config_ingredient.named_config
def radial_sharp():
    model_config = {
        "alpha": [1],
        "profile": {"kind": "sharp", "delta": 0.5}
    }


@config_ingredient.named_config
def oracle_1d():
    model_config = {
        "n": 1,
        "alpha": [1],
        "r": 8
    }


@config_ingredient.named_config
def oracle_2d():
    model_config = {
        "n": 2,
        "alpha": [1, 1],
        "r": 8,
        "N": 64
    }


def _fail(message):
    raise ConfigError(message)


def cutoff_values(model_config):
    return [float(a) for a in model_config["cutoffs"]]


def validate(model_config, command=None):
    '''
    Checks every parameter a command may touch before anything is computed
    :param model_config: Configuration dictionary
    :param command: Name of the invoked command (optional, checked against a "command" entry)
    :return: The configuration, unchanged
    '''
    if command is not None and model_config.get("command") not in (None, command):
        _fail("Configuration is for command " + str(model_config["command"]) + ", not " + command)
    n = model_config["n"]
    if not isinstance(n, int) or n < 1:
        _fail("Torus dimension n must be a positive integer, got " + str(n))
    alpha = model_config["alpha"]
    if len(alpha) != n or any(int(a) != a for a in alpha):
        _fail("alpha must hold n = " + str(n) + " integers, got " + str(alpha))
    potential = model_config["potential"]
    kind = potential.get("kind") if isinstance(potential, dict) else potential
    if kind not in POTENTIAL_KINDS:
        _fail("Unknown potential kind " + str(kind))
    if kind == "modes" and potential.get("n") != n:
        _fail("Explicit potential has dimension " + str(potential.get("n")) + ", expected " + str(n))
    if model_config["perturbation"].get("amplitude", 0.0) < 0.0:
        _fail("Perturbation amplitude must be non-negative")
    if not model_config["seed_jitter"] >= 0.0:
        _fail("seed_jitter must be non-negative, got " + str(model_config["seed_jitter"]))
    for key in ("N", "Nt"):
        value = model_config[key]
        if not isinstance(value, int) or value < 16 or not Utils.is_power_of_two(value):
            _fail(key + " must be a power of two >= 16, got " + str(value))
    if not isinstance(model_config["Ns"], int) or model_config["Ns"] < 8 or model_config["Ns"] % 2 != 0:
        _fail("Ns must be an even integer >= 8, got " + str(model_config["Ns"]))
    if model_config["S"] is not None and not model_config["S"] > 0.0:
        _fail("S must be positive")
    if model_config["s_order"] != 4:
        _fail("Only fourth-order s-differences are available, got order " + str(model_config["s_order"]))
    for key in ("flow_ds", "flow_ds_max"):
        if not 0.0 < model_config[key] <= 0.1:
            _fail(key + " must lie in (0, 0.1], got " + str(model_config[key]))
    if model_config["flow_ds"] > model_config["flow_ds_max"]:
        _fail("flow_ds exceeds flow_ds_max")
    if model_config["scheme"] not in ("etdrk4", "imex"):
        _fail("Unknown flow scheme " + str(model_config["scheme"]))
    for key in ("adiabatic_distance", "strict_tangency", "allow_contractible"):
        if not isinstance(model_config[key], bool):
            _fail(key + " must be true or false, got " + str(model_config[key]))
    for key in ("epsilons", "adiabatic_epsilons"):
        if not model_config[key] or any(not 0.0 < eps <= 1.0 for eps in model_config[key]):
            _fail(key + " must be a non-empty list of values in (0, 1]")
    try:
        cutoff_values(model_config)
    except (TypeError, ValueError):
        _fail("Cutoffs must be numbers or \"inf\", got " + str(model_config["cutoffs"]))
    if model_config["coefficients"] not in ("Z", "Z2"):
        _fail("Coefficients must be Z or Z2")
    if not isinstance(model_config["r"], int) or model_config["r"] < 8:
        _fail("r must be an integer >= 8, got " + str(model_config["r"]))
    if not 0.0 < model_config["gap_bound"] < np.pi:
        _fail("gap_bound must lie in (0, pi)")
    profile = model_config["profile"]
    if isinstance(profile, dict) and profile.get("kind", "knots") not in PROFILE_KINDS:
        _fail("Unknown profile kind " + str(profile.get("kind")))
    if not any(alpha) and not model_config["allow_contractible"] and command == "radial":
        _fail("The radial commands need a nontrivial class or allow_contractible = True")
    for key in ("newton_max_steps", "seed_lattice_per_axis", "flow_record_every", "num_random_profiles",
                "perturbation_trials"):
        if not isinstance(model_config[key], int) or model_config[key] < 1:
            _fail(key + " must be a positive integer")
    return model_config


def critical_options(model_config):
    '''
    Keyword arguments of CriticalPoints.enumerate_critical taken from the configuration
    '''
    return {"N": model_config["N"], "per_axis": model_config["seed_lattice_per_axis"],
            "jitter": model_config["seed_jitter"],
            "dedup_tol": model_config["dedup_tol"], "max_steps": model_config["newton_max_steps"],
            "tol": model_config["newton_tol"], "threshold": model_config["degeneracy_threshold"]}


def flow_options(model_config):
    '''
    Keyword arguments of the line tracer taken from the configuration
    '''
    return {"delta": model_config["flow_delta"], "ds": model_config["flow_ds"],
            "ds_max": model_config["flow_ds_max"], "grad_tol": model_config["flow_grad_tol"],
            "match_tol": model_config["flow_match_tol"], "max_time": model_config["flow_max_time"],
            "record_every": model_config["flow_record_every"]}


def default_model_config():
    '''
    The base model_config without any named configuration applied
    '''
    return dict(cfg()["model_config"])
