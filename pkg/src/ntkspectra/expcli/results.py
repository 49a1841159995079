"""Result tables: CSV with a ``#`` provenance block and an optional JSON mirror.

The provenance block carries the config hash, the seed and the package
version and nothing that changes between runs, so reruns with the same
config are byte-identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        return repr(v)
    return str(value)


def _plain(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


@dataclass
class ResultTable:
    """Named columns plus provenance.

    Attributes
    ----------
    name : str
        File stem.
    columns : list of str
    rows : list of tuple
    units : dict
        Optional unit per column, written to the provenance block.
    meta : dict
        Extra provenance entries (for example an experiment summary).
    """

    name: str
    columns: list
    rows: list = field(default_factory=list)
    units: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError("row has %d values for %d columns" % (len(row), len(self.columns)))
        self.rows.append(tuple(row))

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def provenance(self, config):
        lines = [
            "experiment: %s" % config.id,
            "config_hash: %s" % config.config_hash(),
            "seed: %d" % config.seed,
            "version: ntkspectra %s" % __version__,
        ]
        if self.units:
            lines.append("units: " + ", ".join("%s=%s" % kv for kv in sorted(self.units.items())))
        for key in sorted(self.meta):
            lines.append("%s: %s" % (key, _fmt(self.meta[key])))
        return lines

    def write(self, directory, config, as_json=False):
        """Write ``<name>.csv`` (and ``<name>.json``); returns the paths."""
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, self.name + ".csv")
        with open(path, "w", newline="\n") as fh:
            for line in self.provenance(config):
                fh.write("# " + line + "\n")
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        paths = [path]
        if as_json:
            jpath = os.path.join(directory, self.name + ".json")
            doc = {
                "provenance": {
                    "experiment": config.id,
                    "config_hash": config.config_hash(),
                    "seed": config.seed,
                    "version": __version__,
                    "units": self.units,
                    "meta": {k: _plain(v) for k, v in sorted(self.meta.items())},
                },
                "columns": list(self.columns),
                "rows": [[_plain(v) for v in row] for row in self.rows],
            }
            with open(jpath, "w") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
                fh.write("\n")
            paths.append(jpath)
        return paths


def read_table(path):
    """Read a CSV written by :meth:`ResultTable.write`.

    Returns
    -------
    provenance : dict
    columns : list of str
    data : list of list of str
    """
    prov, rows, columns = {}, [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                prov[key.strip()] = val.strip()
            elif columns is None:
                columns = line.split(",")
            elif line:
                rows.append(line.split(","))
    return prov, columns, rows
