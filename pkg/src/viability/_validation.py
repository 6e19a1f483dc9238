"""Input validation helpers shared by the estimators and functional API."""
from __future__ import annotations

from fractions import Fraction
from numbers import Real

import numpy as np


def check_lambda(lam, *, allow_zero=True, name="lam"):
    """Return ``lam`` after checking it is a proportional cost rate.

    Zero is accepted by default (the frictionless limit is needed by several
    cross-checks); pass ``allow_zero=False`` to demand ``0 < lam < 1``.
    """
    if not isinstance(lam, (Real, Fraction)) or isinstance(lam, bool):
        raise TypeError(f"{name} must be a real number, got {type(lam).__name__}")
    lower_ok = lam >= 0 if allow_zero else lam > 0
    if not (lower_ok and lam < 1):
        rng = "[0, 1)" if allow_zero else "(0, 1)"
        raise ValueError(f"{name} must lie in {rng}, got {lam}")
    return lam


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be strictly positive, got {value}")
    return value


def check_tree(tree):
    # local import: market_model imports this module
    from .market_model import EventTree

    if not isinstance(tree, EventTree):
        raise TypeError(f"expected an EventTree, got {type(tree).__name__}")
    return tree


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required for stochastic operations")
    return np.random.default_rng(seed)


def check_node_array(values, tree, name):
    if len(values) != tree.n_nodes:
        raise ValueError(
            f"{name} has {len(values)} entries but the tree has {tree.n_nodes} nodes"
        )
    return values
