"""Distributional value function factorization for cooperative matrix games."""

import json

from . import _dfac
from ._dfac import (
    DfacError,
    DomainError,
    FormatError,
    ShapeError,
    StateError,
    check_digm,
    convolve_direct,
    convolve_fft,
    convolve_pmf,
    project_categorical,
    shape_sum,
)

__all__ = [
    "DfacError",
    "DomainError",
    "FormatError",
    "ShapeError",
    "StateError",
    "check_digm",
    "convolve_direct",
    "convolve_fft",
    "convolve_pmf",
    "evaluate",
    "export",
    "ground_truth_q",
    "project_categorical",
    "shape_sum",
    "table1_spec",
    "train",
    "verify",
]


def _text(obj):
    if obj is None:
        return ""
    return obj if isinstance(obj, str) else json.dumps(obj)


def table1_spec():
    return json.loads(_dfac.table1_spec())


def ground_truth_q(spec=None):
    return _dfac.ground_truth_q(_text(spec))


def train(config, spec=None):
    """Train one run. Returns metrics, log rows, DIGM audits and the checkpoint."""
    return json.loads(_dfac.train(_text(config), _text(spec)))


def evaluate(checkpoint, spec=None, grid=10000):
    return json.loads(_dfac.evaluate(_text(checkpoint), _text(spec), grid))


def export(checkpoint, action, spec=None, grid=10000):
    return json.loads(_dfac.export(_text(checkpoint), action, _text(spec), grid))


def verify(seed=0):
    return [{"name": n, "passed": p, "detail": d} for n, p, d in _dfac.verify(seed)]
