"""Python access to the gaugeatlas C++ core."""

import json as _json

from . import _core
from ._core import (
    GaugeAtlasError,
    analyze_chart,
    build_atlas,
    fit_transport,
    holonomy,
    load_dataset as _load_dataset,
    polar_factor,
    shear_score,
)

__all__ = [
    "GaugeAtlasError",
    "analyze_chart",
    "analyze_gauge",
    "build_atlas",
    "default_config",
    "fit_transport",
    "holonomy",
    "load_dataset",
    "polar_factor",
    "run",
    "shear_score",
    "synth",
]


def load_dataset(manifest_path):
    out = _load_dataset(str(manifest_path))
    out["manifest"] = _json.loads(out["manifest"])
    return out


def synth(spec):
    """Generate a synthetic dataset from a spec dict."""
    return _core.synth(_json.dumps(spec))


def analyze_gauge(defects):
    """Gauge summary for a {(u, v): g_vu} mapping with u < v."""
    return _json.loads(_core.analyze_gauge(defects))


def default_config():
    return _json.loads(_core.default_config())


def run(config_path, command="report", **overrides):
    """Run a CLI command; keyword overrides use '__' for nested keys (jam__m=64)."""
    pairs = [(k.replace("__", "."), v if isinstance(v, str) else _json.dumps(v)) for k, v in overrides.items()]
    return _json.loads(_core.run(str(config_path), command, pairs))
