import logging
import sys

import numpy as np
from sacred import Experiment, SETTINGS

import Config
from Config import config_ingredient
import Utils
import Evaluate
import Test
import Input.Input
import Models.TorusLoops
import Models.CriticalPoints
import Models.HeatFlow
import Models.MorseComplex
import Models.FloerCylinder
import Models.RadialSpectrum
import Models.BrokenGeodesics
from Models.Errors import ConfigError, LoopFloerError, NoTargetMatch

SETTINGS.CAPTURE_MODE = "sys"

ex = Experiment("loopfloer", ingredients=[config_ingredient])
ex.logger = logging.getLogger("loopfloer")

COMMANDS = ("critical", "flow", "complex", "floer", "radial", "oracle", "verify")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


@ex.config
# Sacred fixes the Python and numpy RNG from this seed; our own draws come from default_rng(seed)
def set_seed():
    seed = 1337


class Stages(object):
    '''
    Names the stage a command is in, so that a failure can be reported with it
    '''

    def __init__(self, log):
        self.log = log
        self.current = "configuration"

    def __call__(self, name):
        self.current = name
        self.log.info("Stage: %s", name)


STATUS = {EXIT_OK: "success", EXIT_FAIL: "failure", EXIT_CONFIG: "config_error"}


def _run(command, cfg, seed, log, body):
    '''
    Opens the manifest, validates the configuration, runs a command body and maps the outcome to an exit status.
    Every run that can create its output directory leaves a manifest, failed ones with their error.
    :param body: Function (model_config, rng, manifest, stages) -> True/False (PASS/FAIL)
    :return: Exit status 0 (success), 1 (computation error or FAIL verdict) or 2 (configuration error)
    '''
    model_config = cfg["model_config"]
    stages = Stages(log)
    try:
        manifest = Evaluate.Manifest(model_config["out_dir"], command, cfg, seed)
    except (OSError, TypeError) as e:
        log.error("Configuration error: unusable output directory %s (%s)", model_config["out_dir"], e)
        return EXIT_CONFIG
    error = None
    try:
        Config.validate(model_config, command)
        ok = body(model_config, np.random.default_rng(seed), manifest, stages)
    except ConfigError as e:
        log.error("Configuration error: %s", e)
        status, error = EXIT_CONFIG, "ConfigError: " + str(e)
    except LoopFloerError as e:
        log.error("Stage '%s' failed: %s: %s", stages.current, type(e).__name__, e)
        status, error = EXIT_FAIL, type(e).__name__ + " in stage " + stages.current + ": " + str(e)
    else:
        status = EXIT_OK if ok else EXIT_FAIL
    manifest.close(STATUS[status], error)
    return status


def _potential(model_config, rng):
    return Input.Input.load_potential(model_config["potential"], model_config["alpha"],
                                      model_config["perturbation"], rng)


def _critical_points(model_config, V, rng, stages):
    stages("critical points")
    return Models.CriticalPoints.enumerate_critical(V, model_config["alpha"], rng=rng,
                                                   **Config.critical_options(model_config))


def _lines(model_config, V, points, stages):
    stages("flow lines")
    return Models.HeatFlow.trace_all_lines(points, V, scheme=model_config["scheme"], **Config.flow_options(model_config))


@ex.command
def critical(cfg, seed, _log):
    '''
    Enumerates the critical points of one class with their indices
    '''
    def body(model_config, rng, manifest, stages):
        V = _potential(model_config, rng)
        points = _critical_points(model_config, V, rng, stages)
        manifest.write_json("potential.json", V.to_dict())
        manifest.write_json("critical_points.json", [cp.to_dict() for cp in points])
        print(manifest.write_table("critical_points.csv", Evaluate.critical_rows(points)).to_string(index=False))
        return True
    return _run("critical", cfg, seed, _log, body)


@ex.command
def flow(cfg, seed, _log):
    '''
    Traces the heat-flow lines between the critical points of one class
    '''
    def body(model_config, rng, manifest, stages):
        V = _potential(model_config, rng)
        points = _critical_points(model_config, V, rng, stages)
        lines = _lines(model_config, V, points, stages)
        manifest.write_json("lines.json", [line.to_dict() for line in lines])
        print(manifest.write_table("lines.csv", Evaluate.line_rows(lines)).to_string(index=False))
        for i, line in enumerate(lines):
            manifest.write_table("line_" + str(i) + ".csv", Models.HeatFlow.line_table(line))
        return True
    return _run("flow", cfg, seed, _log, body)


@ex.command
def complex(cfg, seed, _log):
    '''
    Builds the filtered Morse complexes at every cutoff and computes their homology
    '''
    def body(model_config, rng, manifest, stages):
        V = _potential(model_config, rng)
        points = _critical_points(model_config, V, rng, stages)
        lines = _lines(model_config, V, points, stages)
        stages("homology")
        cutoffs = sorted(Input.Input.parse_cutoff(a) for a in model_config["cutoffs"])
        complexes, records, rows = [], [], []
        for cutoff in cutoffs:
            complex_ = Models.MorseComplex.build_complex(points, lines, cutoff=cutoff,
                                                         coefficients=model_config["coefficients"],
                                                         alpha=Models.TorusLoops.as_winding(model_config["alpha"]))
            result = Models.MorseComplex.homology(complex_)
            complexes.append(complex_)
            records.append({"complex": complex_.to_dict(), "homology": result.to_dict()})
            rows += Evaluate.homology_rows(result, cutoff)
        maps = []
        for lower, upper in zip(complexes[:-1], complexes[1:]):
            for k in range(lower.top_degree + 1):
                maps.append(dict(Models.MorseComplex.induced_homology_map(lower, upper, k), degree=k,
                                 lower=lower.cutoff, upper=upper.cutoff))
        top = complexes[-1]
        for k in range(1, top.top_degree + 1):
            manifest.write_text("boundary_" + str(k) + ".txt", Models.MorseComplex.matrix_to_text(top.boundary_matrix(k)))
        manifest.write_json("complex.json", {"complexes": records, "induced_maps": maps})
        print(manifest.write_table("homology.csv", rows).to_string(index=False))
        return True
    return _run("complex", cfg, seed, _log, body)


@ex.command
def floer(cfg, seed, _log):
    '''
    Solves the epsilon-Floer cylinders along the first isolated line, their energies, and the adiabatic sweep
    '''
    def body(model_config, rng, manifest, stages):
        V = _potential(model_config, rng)
        points = _critical_points(model_config, V, rng, stages)
        lines = _lines(model_config, V, points, stages)
        counted = [line for line in lines if line.counted and points[line.source_id].index == 1]
        if not counted:
            raise NoTargetMatch("No isolated line between points of index one and zero")
        line = counted[0]
        source, target = points[line.source_id], points[line.target_id]
        lift = line.target_shift if model_config["target_lift"] is None else model_config["target_lift"]
        rows = []
        for eps in model_config["epsilons"]:
            stages("cylinder at epsilon " + str(eps))
            grid = Models.FloerCylinder.solve_cylinder(source, target, V, eps, S=model_config["S"],
                                                       Ns=model_config["Ns"], Nt=model_config["Nt"],
                                                       target_lift=lift)
            energy = Models.FloerCylinder.energy(grid, V)
            rows.append({"epsilon": eps, "energy": energy, "action_drop": source.action - target.action,
                         "residual": grid.metadata["residual"], "ansatz_deviation":
                         Models.FloerCylinder.ansatz_deviation(grid), "steps": grid.metadata["steps"]})
            manifest.write_table("cylinder_eps" + str(eps) + ".csv", Models.FloerCylinder.cylinder_table(grid))
        stages("adiabatic sweep")
        dense = Models.HeatFlow.trace_flow_line(source, line.direction_label, V, points, source_id=line.source_id,
                                                scheme=model_config["scheme"],
                                                **dict(Config.flow_options(model_config), record_every=1,
                                                       ds_max=min(0.02, model_config["flow_ds_max"])))
        sweep = Models.FloerCylinder.adiabatic_compare(dense, source, target, V, model_config["adiabatic_epsilons"],
                                                       S=model_config["S"], Ns=model_config["Ns"],
                                                       Nt=model_config["Nt"], solve=model_config["adiabatic_distance"])
        manifest.write_json("floer.json", {"source": line.source_id, "target": line.target_id,
                                           "cylinders": rows, "adiabatic": sweep})
        print(manifest.write_table("cylinders.csv", rows).to_string(index=False))
        print(manifest.write_table("adiabatic.csv", sweep).to_string(index=False))
        return True
    return _run("floer", cfg, seed, _log, body)


@ex.command
def radial(cfg, seed, _log):
    '''
    Length spectrum, radial orbits and, for compactly supported profiles, the existence check
    '''
    def body(model_config, rng, manifest, stages):
        stages("radial profile")
        alpha = Models.TorusLoops.as_winding(model_config["alpha"])
        h = Input.Input.load_profile(model_config["profile"], alpha, rng)
        spectrum, ell = Models.RadialSpectrum.length_spectrum(alpha)
        stages("radial orbits")
        orbits = Models.RadialSpectrum.enumerate_radial_orbits(h, alpha,
                                                               allow_contractible=model_config["allow_contractible"],
                                                               strict=model_config["strict_tangency"])
        record = {"profile": h.to_dict(), "alpha": list(alpha.alpha), "spectrum": sorted(spectrum), "ell_alpha": ell,
                  "orbits": [orbit.to_dict() for orbit in orbits]}
        ok = True
        if h.compact:
            report = Models.RadialSpectrum.check_existence_bound(
                h, alpha, allow_contractible=model_config["allow_contractible"], strict=model_config["strict_tangency"])
            record["existence"] = report.to_dict()
            print("Existence check: " + report.verdict)
            ok = report.verdict != "FAIL"
        manifest.write_json("radial.json", record)
        manifest.write_table("profile.csv", Models.RadialSpectrum.profile_table(h))
        print(manifest.write_table("orbits.csv", Models.RadialSpectrum.orbit_table(orbits)).to_string(index=False))
        return ok
    return _run("radial", cfg, seed, _log, body)


@ex.command
def oracle(cfg, seed, _log):
    '''
    Broken-geodesic homology, compared degreewise with the loop-space complex
    '''
    def body(model_config, rng, manifest, stages):
        V = _potential(model_config, rng)
        stages("broken-geodesic complex")
        points, lines, complex_ = Models.BrokenGeodesics.broken_complex(V, model_config["alpha"], r=model_config["r"],
                                                                        gap_bound=model_config["gap_bound"],
                                                                        coefficients=model_config["coefficients"],
                                                                        **Config.flow_options(model_config))
        broken = Models.MorseComplex.homology(complex_)
        loop_points = _critical_points(model_config, V, rng, stages)
        loop_lines = _lines(model_config, V, loop_points, stages)
        stages("homology")
        loop = Models.MorseComplex.homology(Models.MorseComplex.build_complex(
            loop_points, loop_lines, coefficients=model_config["coefficients"]))
        agree = broken.betti == loop.betti and broken.torsion == loop.torsion
        manifest.write_json("oracle.json", {"broken": broken.to_dict(), "loop_space": loop.to_dict(), "agree": agree,
                                            "broken_points": [cp.to_dict() for cp in points],
                                            "broken_lines": [line.to_dict() for line in lines]})
        rows = [dict(row, model="broken") for row in Evaluate.homology_rows(broken)] + \
               [dict(row, model="loop_space") for row in Evaluate.homology_rows(loop)]
        print(manifest.write_table("oracle_homology.csv", rows).to_string(index=False))
        return agree
    return _run("oracle", cfg, seed, _log, body)


@ex.command
def verify(cfg, seed, _log):
    '''
    Runs the acceptance suite
    '''
    def body(model_config, rng, manifest, stages):
        stages("acceptance suite")
        rows = Test.test(model_config, rng)
        manifest.write_json("verify.json", [{key: val for key, val in row.items() if key != "seconds"} for row in rows])
        table = [{key: row[key] for key in ("number", "title", "verdict", "seconds")} for row in rows]
        print(manifest.write_table("verify.csv", table).to_string(index=False))
        return all(row["verdict"] == "PASS" for row in rows)
    return _run("verify", cfg, seed, _log, body)


def _translate(argv):
    '''
    Maps "loopfloer <command> --config <path> [--out <dir>] [--seed <int>]" onto an experiment run.
    Any other argument list is handed to sacred's own command line.
    :return: Tuple (command, config updates) or None for sacred's command line
    '''
    flags = {"--config", "--out", "--seed"}
    if len(argv) < 2 or argv[1] not in COMMANDS or not any(arg in flags for arg in argv[2:]):
        return None
    command, rest = argv[1], argv[2:]
    if len(rest) % 2 != 0 or any(flag not in flags for flag in rest[::2]):
        raise ConfigError("Usage: loopfloer <command> --config <path> [--out <dir>] [--seed <int>]")
    options = dict(zip(rest[::2], rest[1::2]))
    updates = {}
    if "--config" in options:
        document = Input.Input.load_document(options["--config"], command)
        updates = {key: val for key, val in document.items() if key != "command"}
    if "--out" in options:
        updates["out_dir"] = options["--out"]
    config_updates = {"cfg": {"model_config": updates}}
    if "--seed" in options:
        try:
            config_updates["seed"] = int(options["--seed"])
        except ValueError:
            raise ConfigError("Seed must be an integer, got " + options["--seed"])
    return command, config_updates


def main(argv):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s - %(name)s - %(message)s")
    try:
        translated = _translate(argv)
    except ConfigError as e:
        print("Configuration error: " + str(e))
        return EXIT_CONFIG
    if translated is None:
        run = ex.run_commandline(argv)
    else:
        command, config_updates = translated
        run = ex.run(command, config_updates=config_updates)
    return run.result if run is not None and run.result is not None else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main(sys.argv))
