import json
import os

import numpy as np

import Models.Potentials
import Models.RadialSpectrum
import Models.TorusLoops
from Models.Errors import ConfigError


def read_json(path):
    '''
    Reads a JSON document, mapping missing files and syntax errors to ConfigError
    :param path: Path to the document
    :return: Parsed document
    '''
    if not os.path.exists(path):
        raise ConfigError("File " + str(path) + " does not exist")
    try:
        with open(path, "r") as f:
            return json.load(f)
    except ValueError as e:
        raise ConfigError("File " + str(path) + " is not valid JSON: " + str(e))


def load_document(path, command=None):
    '''
    Configuration document: a JSON object of model_config entries with an optional "command" field,
    which must match the invoked command
    '''
    document = read_json(path)
    if not isinstance(document, dict):
        raise ConfigError("Configuration document " + str(path) + " must be a JSON object")
    if command is not None and document.get("command", command) != command:
        raise ConfigError("Document " + str(path) + " is for command " + str(document["command"]) +
                          ", not " + command)
    return document


def load_potential(entry, alpha, perturbation=None, rng=None):
    '''
    Potential from an inline entry or a path to a {n, modes} document, plus an optional perturbation
    '''
    if isinstance(entry, str) and entry.endswith(".json"):
        entry = dict(read_json(entry), kind="modes")
    document = dict(entry) if isinstance(entry, dict) else {"kind": entry}
    if perturbation is not None:
        document["perturbation"] = perturbation
    try:
        return Models.Potentials.build_potential(document, alpha, rng)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError("Invalid potential " + str(entry) + ": " + str(e))


def load_profile(entry, alpha=None, rng=None):
    '''
    Radial profile from a path to a JSON document or an inline entry (see RadialSpectrum.build_profile)
    '''
    if isinstance(entry, str):
        entry = read_json(entry)
    try:
        return Models.RadialSpectrum.build_profile(entry, alpha, rng)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError("Invalid radial profile: " + str(e))


def load_loop(path):
    record = read_json(path)
    try:
        return Models.TorusLoops.DiscreteLoop.from_dict(record)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError("Invalid loop document " + str(path) + ": " + str(e))


def parse_cutoff(value):
    return np.inf if value in ("inf", None) else float(value)
