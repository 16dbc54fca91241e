import json
import os
import platform

import numpy as np
import pandas as pd
import scipy
import sacred

import Utils

log = Utils.get_logger("evaluate")


class Manifest(object):
    '''
    Record of one run: the configuration hash, package versions and every file the run wrote.
    All writes go through the manifest, so no output is left undeclared.
    '''

    def __init__(self, out_dir, command, config, seed):
        self.out_dir = out_dir
        self.command = command
        self.config = Utils.to_jsonable(config)
        self.seed = seed
        self.outputs = []
        if not os.path.exists(out_dir):
            print("Creating output directory " + out_dir)
            os.makedirs(out_dir)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def _declare(self, name, kind):
        if any(entry["file"] == name for entry in self.outputs):
            raise ValueError("Output " + name + " written twice in one run")
        self.outputs.append({"file": name, "kind": kind})

    def write_json(self, name, record):
        '''
        Writes a JSON record with sorted keys, so identical inputs give byte-identical files
        :param name: File name inside the output directory
        :param record: JSON-able object (numpy values are converted)
        '''
        self._declare(name, "json")
        write_json(self.path(name), record)

    def write_table(self, name, columns):
        '''
        Writes a CSV table through pandas
        :param name: File name inside the output directory
        :param columns: Dictionary column -> sequence, or a DataFrame
        :return: The DataFrame that was written
        '''
        self._declare(name, "csv")
        return write_table(self.path(name), columns)

    def write_text(self, name, text):
        self._declare(name, "txt")
        with open(self.path(name), "w") as f:
            f.write(text + "\n")

    def to_dict(self, status, error=None):
        return {"command": self.command, "seed": self.seed, "config_hash": Utils.config_hash(self.config),
                "config": self.config, "versions": package_versions(), "outputs": self.outputs, "status": status,
                "error": error}

    def close(self, status, error=None):
        '''
        Writes manifest.json; the manifest itself is the last declared file
        :param status: "success", "failure" or "config_error"
        :param error: Message of the error that ended the run, if any
        '''
        self._declare("manifest.json", "manifest")
        write_json(self.path("manifest.json"), self.to_dict(status, error))
        log.info("Wrote %d files to %s", len(self.outputs), self.out_dir)


def package_versions():
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pd.__version__, "sacred": sacred.__version__}


def write_json(path, record):
    with open(path, "w") as f:
        json.dump(Utils.to_jsonable(record), f, sort_keys=True, indent=2)
        f.write("\n")


def write_table(path, columns):
    frame = columns if isinstance(columns, pd.DataFrame) else pd.DataFrame(columns)
    frame.to_csv(path, index=False, float_format="%.12g")
    return frame


def critical_rows(points):
    return [{"id": i, "label": "".join(str(b) for b in (cp.label or ())), "action": cp.action, "index": cp.index,
             "gap": cp.gap, "residual": cp.residual} for i, cp in enumerate(points)]


def line_rows(lines):
    return [{"source": line.source_id, "target": line.target_id, "direction": str(tuple(round(c, 6) for c in line.direction_label)),
             "sign": line.sign, "index_drop": line.index_drop, "shift": str(line.target_shift),
             "closest_approach": line.closest_approach, "action_drop": float(line.actions[0] - line.actions[-1])}
            for line in lines]


def homology_rows(result, cutoff=np.inf):
    return [{"cutoff": cutoff, "degree": k, "rank": result.betti[k], "group": result.describe(k)}
            for k in range(len(result.betti))]
