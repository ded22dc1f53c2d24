"""Seeded instance generators for experiments and tests."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import ContextualFunctionClass, Dirac, Smooth
from .environments import CLASS_STREAM, Bernoulli, Environment, make_rng, realizable_environment


def random_class(n_functions: int, n_contexts: int, n_actions: int, seed: int, star_index: int = 0) -> ContextualFunctionClass:
    """Functions with iid U[0, 1] values on every (context, action)."""
    vals = make_rng(seed, CLASS_STREAM).random((n_functions, n_contexts, n_actions))
    return ContextualFunctionClass(vals, star_index=star_index)


def discrete_instance(
    n_functions: int = 20,
    n_contexts: int = 4,
    n_actions: int = 5,
    seed: int = 0,
    adversary=None,
    benchmark=None,
    noise=None,
):
    """Realizable discrete-action instance: f* is function 0 of a random class."""
    F = random_class(n_functions, n_contexts, n_actions, seed)
    env = realizable_environment(F, benchmark=benchmark or Dirac(), noise=noise or Bernoulli(), adversary=adversary)
    return F, env


def deceptive_instance(gap: float = 0.1):
    """Two arms, two hypotheses with mirrored means 1/2 +- gap/2.

    A greedy learner that fits on a couple of samples picks the wrong
    hypothesis with constant probability and then never revisits the other arm.
    The optimal arm is action 1, so smallest-index tie-breaks do not favour it.
    """
    hi, lo = 0.5 + gap / 2, 0.5 - gap / 2
    vals = np.array([[[lo, hi]], [[hi, lo]]])
    F = ContextualFunctionClass(vals, star_index=0)
    return F, realizable_environment(F)


def smooth_instance(n_functions: int = 10, n_contexts: int = 2, n_actions: int = 4, h: float = 0.5, seed: int = 0):
    F = random_class(n_functions, n_contexts, n_actions, seed)
    return F, realizable_environment(F, benchmark=Smooth.uniform(h, n_actions))


def single_action_instance(n_contexts: int = 1):
    F = ContextualFunctionClass(np.full((1, n_contexts, 1), 0.5), star_index=0)
    return F, realizable_environment(F)
