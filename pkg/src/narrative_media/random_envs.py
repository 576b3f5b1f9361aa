"""Seeded random environments for property checks.

Prior and kernel rows are Dirichlet(1) draws (flat on the simplex), utility
components are uniform on [-1, 1].  One numpy Generator per call keeps every
draw reproducible from the seed alone.
"""

from __future__ import annotations

import numpy as np

from .model_core import Environment, ModelError, Separability

KINDS = ("action_separable", "state_separable", "outcome_separable", "none")


def random_environment(rng: np.random.Generator, kind: str = "none", T: int = 2, S: int = 2, A: int = 2, Y: int = 2) -> Environment:
    if kind not in KINDS:
        raise ModelError(f"kind: unknown separability {kind!r}; expected one of {KINDS}")
    prior = rng.dirichlet(np.ones(T))
    kernel = rng.dirichlet(np.ones(Y), size=(T, A))

    def unif(*shape):
        return rng.uniform(-1.0, 1.0, size=shape)

    if kind == "action_separable":
        sep = Separability(kind, v=unif(T, Y), c=unif(A))
    elif kind == "state_separable":
        sep = Separability(kind, v=unif(A, Y), w=unif(T))
    elif kind == "outcome_separable":
        sep = Separability(kind, v=unif(T, A), w=unif(Y))
    else:
        sep = None
    util = sep.utility(T, A, Y) if sep is not None else unif(T, A, Y)
    return Environment(range(T), range(S), range(A), range(Y), prior, kernel, np.array(util), sep)


def random_environments(seed: int, n: int, kind: str = "none", **dims) -> list:
    rng = np.random.default_rng(seed)
    return [random_environment(rng, kind, **dims) for _ in range(n)]
