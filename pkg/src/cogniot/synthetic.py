"""Seeded synthetic instances with known ground truth."""

from __future__ import annotations

import numpy as np


def low_rank(m: int, n: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Product of ``m x rank`` and ``rank x n`` standard-normal factors."""
    return rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))


def rpca_instance(m=50, n=50, rank=2, fraction=0.05, magnitude=10.0, seed=0):
    """``(Y, X0, A0)`` with ``Y = X0 + A0``; ``A0`` has ``+-magnitude`` on a random support."""
    rng = np.random.default_rng(seed)
    x0 = low_rank(m, n, rank, rng)
    support = rng.random((m, n)) < fraction
    a0 = np.where(support, magnitude * rng.choice([-1.0, 1.0], size=(m, n)), 0.0)
    return x0 + a0, x0, a0


def completion_instance(m=100, n=100, rank=2, observed=0.3, seed=0):
    """``(X0, mask)`` with each entry observed independently with probability ``observed``."""
    rng = np.random.default_rng(seed)
    x0 = low_rank(m, n, rank, rng)
    return x0, rng.random((m, n)) < observed


def quadratic_agents(n_agents=10, dim=5, rows=8, seed=0):
    """Per-agent least-squares blocks ``(B_i, b_i)``."""
    rng = np.random.default_rng(seed)
    return [(rng.standard_normal((rows, dim)), rng.standard_normal(rows)) for _ in range(n_agents)]
