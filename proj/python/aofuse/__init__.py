"""Acoustic-optical surface reconstruction.

Thin wrappers over the C++ core. Configs are passed as dicts or JSON text.
"""

import json
import sys

from ._aofuse import (
    AofuseError,
    ReconMetrics,
    condition_number,
    conditioning,
    point_metrics,
    read_ply,
    singular_values,
)
from . import _aofuse

__all__ = [
    "AofuseError",
    "ReconMetrics",
    "condition_number",
    "conditioning",
    "config_violations",
    "evaluate",
    "main",
    "point_metrics",
    "read_ply",
    "reconstruct",
    "resolve_config",
    "simulate",
    "singular_values",
]


def _text(config):
    if config is None:
        return "{}"
    return config if isinstance(config, str) else json.dumps(config)


def resolve_config(config=None):
    """Fully resolved config as a dict. Raises AofuseError on violations."""
    return json.loads(_aofuse.resolve_config(_text(config)))


def config_violations(config):
    """List of (json_pointer, message); empty when the config is valid."""
    return _aofuse.config_violations(_text(config))


def simulate(out, config=None):
    _aofuse.simulate(_text(config), str(out))


def reconstruct(dataset, out, mode="fused", config=None, seed=0):
    """Trains a field and writes the run directory. Returns the loss trace."""
    return _aofuse.reconstruct(str(dataset), mode, str(out), _text(config), seed)


def evaluate(checkpoint, manifest, seed=0, **kwargs):
    return _aofuse.evaluate(str(checkpoint), str(manifest), seed, **kwargs)


def main(argv=None):
    args = sys.argv[1:] if argv is None else list(argv)
    return _aofuse.main([str(a) for a in args])
