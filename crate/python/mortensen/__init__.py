"""Minimum-energy estimation for dynamics reflected in a convex domain.

Thin wrapper over the compiled extension: runs return parsed reports and
value fields come back as numpy arrays.
"""

import json
from pathlib import Path

import numpy as np

from ._native import (
    Domain,
    __version__,
    emit_plotdata,
    validate_config,
    verify_manifest,
)
from ._native import read_vfld as _read_vfld
from ._native import run_scenario as _run_scenario

__all__ = [
    "Domain",
    "ValueField",
    "__version__",
    "emit_plotdata",
    "read_vfld",
    "run_scenario",
    "validate_config",
    "verify_manifest",
]


def run_scenario(config, out, seed=None, kind=None):
    """Run a config file; returns the report as a dict."""
    return json.loads(_run_scenario(str(config), str(out), seed, kind))


class ValueField:
    """A value table on a tensor grid: ``values[k]`` has shape ``counts``."""

    def __init__(self, label, axes, times, values):
        self.label = label
        self.axes = axes
        self.times = times
        self.values = values

    def __repr__(self):
        return f"ValueField({self.label.get('kind')}, rows={len(self.times)}, grid={self.values.shape[1:]})"


def read_vfld(path):
    label, axes, times, rows = _read_vfld(str(Path(path)))
    axes = [np.asarray(a) for a in axes]
    shape = tuple(len(a) for a in axes)
    # the store is row-major with axis 0 slowest
    values = np.asarray(rows).reshape((len(times),) + shape)
    return ValueField(json.loads(label), axes, np.asarray(times), values)
