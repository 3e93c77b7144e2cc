"""Ability-based keyboard personalization: characterization, layout synthesis, evaluation.

Documents (grids, models, layouts, users, reports) are plain dicts with the
same shape as the JSON files the ``abkb`` command line reads and writes.
"""

import json

import numpy as np

from . import _abkb
from ._abkb import (
    EmptyCorpus,
    Error,
    InvalidArgument,
    ParseError,
    SizeGuard,
    angle_bin,
    wolpaw_itr,
)

__all__ = [
    "EmptyCorpus", "Error", "InvalidArgument", "ParseError", "SizeGuard",
    "angle_bin", "anisotropic_model", "brute_force", "build_grid", "digraphs",
    "energy", "evaluate", "fit_bins", "flip_vertical", "generate_layout",
    "generic_model", "joint_probabilities", "objective", "predict_mt",
    "qwerty_layout", "replay_log", "simulate_characterization", "solve_faq",
    "solve_lap", "wolpaw_itr",
]


def _dump(doc):
    return None if doc is None else json.dumps(doc)


def _matrix(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def build_grid(rows=9, cols=9, key_width=130.0):
    return json.loads(_abkb.build_grid(rows, cols, key_width))


def generic_model(key_width=130.0):
    return json.loads(_abkb.generic_model(key_width))


def anisotropic_model(a, b_vertical, horizontal_ratio, key_width=130.0):
    return json.loads(_abkb.anisotropic_model(a, b_vertical, horizontal_ratio, key_width))


def fit_bins(samples, key_width=130.0):
    """samples: iterable of {distance, angle (None at zero distance), movement_time, demanded_bin}."""
    return json.loads(_abkb.fit_bins(json.dumps(list(samples)), key_width))


def predict_mt(model, angle, distance):
    return _abkb.predict_mt(_dump(model), angle, distance)


def digraphs(lines):
    return json.loads(_abkb.digraphs(list(lines)))


def joint_probabilities(lines):
    return _abkb.joint_probabilities(list(lines))


def solve_lap(cost):
    return _abkb.solve_lap(_matrix(cost))


def objective(flow, cost, mapping):
    return _abkb.objective(_matrix(flow), _matrix(cost), list(mapping))


def brute_force(flow, cost):
    """Exact optimum by enumeration (at most 9 positions). Returns (mapping, objective)."""
    return _abkb.brute_force(_matrix(flow), _matrix(cost))


def solve_faq(flow, cost, restarts=10, max_iters=30, tol=1e-6, seed=0):
    """Returns (mapping, objective)."""
    return _abkb.solve_faq(_matrix(flow), _matrix(cost), restarts, max_iters, tol, seed)


def generate_layout(kind, lines, seed, model=None, restarts=10, max_iters=30, tol=1e-6):
    return json.loads(_abkb.generate_layout(kind, _dump(model), list(lines), seed, restarts, max_iters, tol))


def qwerty_layout():
    return json.loads(_abkb.qwerty_layout())


def flip_vertical(layout):
    return json.loads(_abkb.flip_vertical(_dump(layout)))


def energy(layout, lines, model=None):
    return _abkb.energy(_dump(layout), list(lines), _dump(model))


def simulate_characterization(user, seed):
    """Returns (model, ndjson_log)."""
    model, log = _abkb.simulate_characterization(_dump(user), seed)
    return json.loads(model), log


def replay_log(log):
    return json.loads(_abkb.replay_log(log))


def evaluate(layout, user, prompts):
    return json.loads(_abkb.evaluate(_dump(layout), _dump(user), list(prompts)))
