"""Python front end for the thintube C++ core.

Study functions take the same document the CLI reads (a dict, or a path to a
JSON file) and return plain dicts.
"""

import json
import os

from . import _core
from ._core import ConfigError, ExpressionError, HypothesisError, evaluate, weo_spectrum, weo_spectrum_numeric

__all__ = [
    "ConfigError",
    "ExpressionError",
    "HypothesisError",
    "effective_spectrum",
    "essential",
    "evaluate",
    "neumann",
    "report_csv",
    "section",
    "sweep",
    "tube3d",
    "validate_profile",
    "weo_spectrum",
    "weo_spectrum_numeric",
]


def _doc(config):
    if config is None:
        return "{}"
    if isinstance(config, (str, os.PathLike)):
        with open(config, encoding="utf-8") as f:
            return f.read()
    return json.dumps(config)


def section(config=None):
    return _core.section(_doc(config))


def validate_profile(config=None):
    return _core.validate_profile(_doc(config))


def effective_spectrum(config, eps, count=3):
    """Returns (eigenvalues of T_{eps,c}, c)."""
    return _core.effective_spectrum(_doc(config), eps, count)


def sweep(config=None):
    return json.loads(_core.sweep(_doc(config)))


def neumann(config=None):
    return json.loads(_core.neumann(_doc(config)))


def essential(config=None):
    return json.loads(_core.essential(_doc(config)))


def tube3d(config=None, kind="reduction"):
    return json.loads(_core.tube3d(_doc(config), kind))


def report_csv(report):
    """CSV text for a report dict returned by sweep() or neumann()."""
    return _core.report_csv(json.dumps(report))
