"""Global-consensus ADMM over an explicit agent topology.

Two z-steps are supported: ``central`` averages every agent's message at a
fusion center, ``neighbor`` lets each agent average the messages of its
one-hop neighborhood (itself included). Each synchronous round an agent
publishes the single message ``x_i + y_i / mu``; nothing else crosses agent
boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np

DIVERGENCE_LIMIT = 1e12


class ConsensusDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentObjective:
    """Local cost ``f_i``.

    ``quadratic``: ``0.5 * ||B x - b||^2``. ``scalar_quadratic``: ``||x - c||^2``.
    """

    kind: str
    B: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None

    @classmethod
    def quadratic(cls, B, b) -> "AgentObjective":
        B = np.atleast_2d(np.asarray(B, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if B.shape[0] != b.size:
            raise ValueError(f"B has {B.shape[0]} rows but b has {b.size} entries")
        return cls("quadratic", B=B, b=b)

    @classmethod
    def scalar_quadratic(cls, c) -> "AgentObjective":
        return cls("scalar_quadratic", c=np.atleast_1d(np.asarray(c, dtype=float)))

    @property
    def dim(self) -> int:
        return self.B.shape[1] if self.kind == "quadratic" else self.c.size

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            r = self.B @ x - self.b
            return 0.5 * float(r @ r)
        return float(((x - self.c) ** 2).sum())


@dataclass(frozen=True)
class Topology:
    n_agents: int
    edges: tuple

    def __post_init__(self):
        clean = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise ValueError(f"edge ({i}, {j}) references a missing agent")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @classmethod
    def complete(cls, n: int) -> "Topology":
        return cls(n, tuple(itertools.combinations(range(n), 2)))

    @classmethod
    def path(cls, n: int) -> "Topology":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    def neighbors(self, i: int) -> list:
        """One-hop neighborhood of ``i``, including ``i``, in ascending order."""
        out = {i}
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return sorted(out)

    def is_connected(self) -> bool:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_agents))
        g.add_edges_from(self.edges)
        return nx.is_connected(g)


@dataclass(frozen=True)
class AdmmConfig:
    mu: float = 1.0
    max_iters: int = 500
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    mode: str = "central"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.primal_tol > 0 and self.dual_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.mode not in ("central", "neighbor"):
            raise ValueError(f"mode must be 'central' or 'neighbor', got {self.mode!r}")


@dataclass
class ConsensusState:
    xs: np.ndarray
    ys: np.ndarray
    zs: np.ndarray  # one row per agent; identical rows in central mode
    iteration: int = 0
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    disagreements: list = field(default_factory=list)
    history: list = field(default_factory=list)
    converged: bool = False

    @classmethod
    def zeros(cls, n_agents: int, dim: int) -> "ConsensusState":
        z = np.zeros((n_agents, dim))
        return cls(z.copy(), z.copy(), z.copy())


def x_update(obj: AgentObjective, z_ref, y_i, mu: float) -> np.ndarray:
    """``argmin_x f_i(x) + y_i'(x - z) + mu/2 ||x - z||^2``."""
    z_ref = np.asarray(z_ref, dtype=float)
    y_i = np.asarray(y_i, dtype=float)
    if obj.kind == "quadratic":
        B = obj.B
        lhs = B.T @ B + mu * np.eye(B.shape[1])
        rhs = B.T @ obj.b + mu * z_ref - y_i
        return np.linalg.solve(lhs, rhs)
    return (2.0 * obj.c + mu * z_ref - y_i) / (2.0 + mu)


def _ordered_mean(vectors: Sequence[np.ndarray]) -> np.ndarray:
    # fixed left-to-right order keeps results independent of how agents are scheduled
    acc = np.zeros_like(vectors[0])
    for v in vectors:
        acc = acc + v
    return acc / len(vectors)


def z_update_central(xs, ys, mu: float) -> np.ndarray:
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xs]
    ys = [np.atleast_1d(np.asarray(y, dtype=float)) for y in ys]
    if not xs or len(xs) != len(ys):
        raise ValueError("need equal, nonempty lists of x and y vectors")
    return _ordered_mean([x + y / mu for x, y in zip(xs, ys)])


def z_update_neighbor(messages: dict, neighborhood: Sequence[int]) -> np.ndarray:
    """Local average of the messages ``x_j + y_j / mu`` over ``neighborhood``.

    ``messages`` maps agent id to its published message; only the ids in
    ``neighborhood`` are read.
    """
    return _ordered_mean([messages[j] for j in sorted(neighborhood)])


def y_update(x_i, z_ref, y_i, mu: float) -> np.ndarray:
    return np.asarray(y_i, dtype=float) + mu * (np.asarray(x_i, dtype=float) - np.asarray(z_ref, dtype=float))


def _max_pairwise(zs: np.ndarray) -> float:
    if zs.shape[0] < 2:
        return 0.0
    d = np.linalg.norm(zs[:, None, :] - zs[None, :, :], axis=-1)
    return float(d.max())


def admm_step(state: ConsensusState, objectives, topology: Topology, config: AdmmConfig) -> ConsensusState:
    """One synchronous round: local x-steps, z-step, local y-steps."""
    mu = config.mu
    n = len(objectives)
    xs = np.array([x_update(objectives[i], state.zs[i], state.ys[i], mu) for i in range(n)])
    messages = {i: xs[i] + state.ys[i] / mu for i in range(n)}
    if config.mode == "central":
        z = _ordered_mean([messages[i] for i in range(n)])
        zs = np.tile(z, (n, 1))
    else:
        zs = []
        for i in range(n):
            inbox = {j: messages[j] for j in topology.neighbors(i)}  # all agent i may see
            zs.append(z_update_neighbor(inbox, inbox.keys()))
        zs = np.array(zs)
    ys = np.array([y_update(xs[i], zs[i], state.ys[i], mu) for i in range(n)])

    primal = float(np.sqrt(((xs - zs) ** 2).sum()))
    dual = mu * float(np.sqrt(((zs - state.zs) ** 2).sum()))
    return ConsensusState(
        xs,
        ys,
        zs,
        state.iteration + 1,
        state.primal_residuals + [primal],
        state.dual_residuals + [dual],
        state.disagreements + [_max_pairwise(zs)],
        state.history,
    )


def run_consensus(objectives, topology: Topology, config: AdmmConfig = AdmmConfig(), keep_history: bool = False):
    """Iterate ADMM until both residuals are below tolerance or ``max_iters``.

    Returns ``(solution, state)``; ``solution`` is the common ``z`` in central
    mode and the ``(N, n)`` array of local ``z_i`` in neighbor mode.
    """
    if not objectives:
        raise ValueError("need at least one agent")
    if len(objectives) != topology.n_agents:
        raise ValueError(f"{len(objectives)} objectives for {topology.n_agents} agents")
    dim = objectives[0].dim
    if any(o.dim != dim for o in objectives):
        raise ValueError("all objectives must share the same dimension")

    state = ConsensusState.zeros(len(objectives), dim)
    for _ in range(config.max_iters):
        state = admm_step(state, objectives, topology, config)
        if keep_history:
            state.history.append((state.xs.copy(), state.ys.copy(), state.zs.copy()))
        primal, dual = state.primal_residuals[-1], state.dual_residuals[-1]
        if not (np.isfinite(primal) and np.isfinite(dual)) or max(primal, dual) > DIVERGENCE_LIMIT:
            raise ConsensusDivergence(
                f"ADMM diverged at iteration {state.iteration}: primal={primal:.3e}, dual={dual:.3e}"
            )
        if primal < config.primal_tol and dual < config.dual_tol:
            state.converged = True
            break
    solution = state.zs[0].copy() if config.mode == "central" else state.zs.copy()
    return solution, state
