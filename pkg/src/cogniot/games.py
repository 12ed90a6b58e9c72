"""Normal-form and spatial games, pure Nash oracles and learning automata."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

MAX_PROFILES = 10**6
CONVERGENCE_LEVEL = 0.99


@dataclass(frozen=True)
class Game:
    """Finite game ``{N, A_n, u_n}``.

    ``utility(n, profile)`` returns player ``n``'s payoff for a full action
    profile (a tuple of action indices).
    """

    action_counts: tuple
    utility: Callable[[int, tuple], float]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.action_counts)
        if not counts:
            raise ValueError("a game needs at least one player")
        if min(counts) < 1:
            raise ValueError("every player needs at least one action")
        object.__setattr__(self, "action_counts", counts)

    @property
    def n_players(self) -> int:
        return len(self.action_counts)

    def n_profiles(self) -> int:
        return int(np.prod(self.action_counts, dtype=object))

    def check_profile(self, profile) -> tuple:
        profile = tuple(int(a) for a in profile)
        if len(profile) != self.n_players:
            raise ValueError(f"profile has {len(profile)} actions for {self.n_players} players")
        for n, (a, k) in enumerate(zip(profile, self.action_counts)):
            if not 0 <= a < k:
                raise ValueError(f"action {a} out of range for player {n}")
        return profile


@dataclass(frozen=True)
class SpatialGame:
    """Game whose player ``n`` only feels its own action and those of ``neighbors[n]``."""

    game: Game
    neighbors: tuple

    def __post_init__(self):
        nbrs = tuple(tuple(sorted(set(int(j) for j in js))) for js in self.neighbors)
        if len(nbrs) != self.game.n_players:
            raise ValueError("need one neighbor set per player")
        for n, js in enumerate(nbrs):
            if n in js:
                raise ValueError(f"player {n} cannot be its own interaction neighbor")
            if any(not 0 <= j < self.game.n_players for j in js):
                raise ValueError(f"neighbor of player {n} out of range")
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def n_players(self) -> int:
        return self.game.n_players

    @property
    def action_counts(self) -> tuple:
        return self.game.action_counts

    def utility(self, n: int, profile) -> float:
        return self.game.utility(n, profile)


def _as_game(g) -> Game:
    return g.game if isinstance(g, SpatialGame) else g


def is_pure_nash(g, profile) -> bool:
    """True iff no player gains by a unilateral deviation."""
    g = _as_game(g)
    profile = g.check_profile(profile)
    for n, k in enumerate(g.action_counts):
        current = g.utility(n, profile)
        for alt in range(k):
            if alt == profile[n]:
                continue
            dev = profile[:n] + (alt,) + profile[n + 1:]
            if g.utility(n, dev) > current:
                return False
    return True


def enumerate_pure_nash(g) -> list:
    """All pure Nash equilibria, in lexicographic profile order."""
    g = _as_game(g)
    if g.n_profiles() > MAX_PROFILES:
        raise ValueError(f"profile space of {g.n_profiles()} exceeds the {MAX_PROFILES} limit")
    return [p for p in itertools.product(*(range(k) for k in g.action_counts)) if is_pure_nash(g, p)]


def altruistic_utility(g: SpatialGame, n: int, profile) -> float:
    """Own utility plus the utilities of the interaction neighbors."""
    profile = g.game.check_profile(profile)
    return g.utility(n, profile) + sum(g.utility(j, profile) for j in g.neighbors[n])


# -- constructors ---------------------------------------------------------------


def _matrix_game(payoffs: np.ndarray) -> Game:
    """Game from a payoff tensor of shape ``(n_players, |A_1|, ..., |A_N|)``."""
    payoffs = np.asarray(payoffs, dtype=float)
    payoffs.setflags(write=False)
    return Game(payoffs.shape[1:], lambda n, p: float(payoffs[(n,) + tuple(p)]))


def coordination_game(n_actions: int = 2) -> SpatialGame:
    """Two players earn 1 when they pick the same action, 0 otherwise."""
    eye = np.eye(n_actions)
    game = _matrix_game(np.stack([eye, eye]))
    return SpatialGame(game, ((1,), (0,)))


def matching_pennies() -> SpatialGame:
    """Zero-sum: player 0 wins +1 on a match, player 1 wins +1 on a mismatch."""
    u0 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return SpatialGame(_matrix_game(np.stack([u0, -u0])), ((1,), (0,)))


def constant_game(action_counts: Sequence[int], value: float = 0.0) -> SpatialGame:
    game = Game(tuple(action_counts), lambda n, p: float(value))
    return SpatialGame(game, tuple(() for _ in action_counts))


def single_player_game(utilities: Sequence[float]) -> SpatialGame:
    u = tuple(float(v) for v in utilities)
    return SpatialGame(Game((len(u),), lambda n, p: u[p[0]]), ((),))


@dataclass(frozen=True)
class CongestionGame:
    """Players pick a route (a set of resources); a route's cost is the sum of
    ``base[e] * (1 + slope[e] * load[e])`` over its resources, where ``load[e]``
    counts the players whose chosen route uses ``e``. Utility is minus cost.
    """

    routes: tuple  # routes[n][a] -> tuple of resource ids
    base: tuple
    slope: tuple

    def __post_init__(self):
        routes = tuple(tuple(tuple(int(e) for e in r) for r in rs) for rs in self.routes)
        for n, rs in enumerate(routes):
            if not rs:
                raise ValueError(f"player {n} has no route")
        object.__setattr__(self, "routes", routes)
        object.__setattr__(self, "base", tuple(float(v) for v in self.base))
        object.__setattr__(self, "slope", tuple(float(v) for v in self.slope))

    def loads(self, profile) -> dict:
        load: dict = {}
        for n, a in enumerate(profile):
            for e in self.routes[n][a]:
                load[e] = load.get(e, 0) + 1
        return load

    def route_cost(self, n: int, profile) -> float:
        load = self.loads(profile)
        return sum(self.base[e] * (1.0 + self.slope[e] * load[e]) for e in self.routes[n][profile[n]])

    def interaction_sets(self) -> tuple:
        used = [set().union(*map(set, rs)) for rs in self.routes]
        return tuple(
            tuple(j for j in range(len(used)) if j != n and used[n] & used[j]) for n in range(len(used))
        )

    def spatial_game(self) -> SpatialGame:
        cache: dict = {}

        def utility(n, profile):
            key = (n, tuple(profile))
            if key not in cache:
                cache[key] = -self.route_cost(n, key[1])
            return cache[key]

        game = Game(tuple(len(rs) for rs in self.routes), utility)
        return SpatialGame(game, self.interaction_sets())

    def max_loads(self) -> dict:
        """Largest load each resource can carry: the players that could use it."""
        out: dict = {}
        for rs in self.routes:
            for e in set().union(*map(set, rs)):
                out[e] = out.get(e, 0) + 1
        return out

    def cost_bounds(self) -> tuple:
        """Per-player ``(lower, upper)`` bounds on realized route cost over all profiles."""
        cap = self.max_loads()
        lo = [min(sum(self.base[e] * (1 + self.slope[e]) for e in r) for r in rs) for rs in self.routes]
        hi = [max(sum(self.base[e] * (1 + self.slope[e] * cap[e]) for e in r) for r in rs) for rs in self.routes]
        return np.array(lo), np.array(hi)


def path_congestion_game(n_players: int = 3, seed: int = 0) -> SpatialGame:
    """Players on a line: player ``n`` uses its own link ``n`` or link ``n + 1``,
    which it shares with player ``n + 1``. Interaction sets form a path graph.
    """
    rng = np.random.default_rng(seed)
    routes = tuple(((n,), (n + 1,)) for n in range(n_players))
    base = tuple(1.0 + rng.random(n_players + 1))
    slope = tuple(0.5 + rng.random(n_players + 1))
    return CongestionGame(routes, base, slope).spatial_game()


# -- learning automata ------------------------------------------------------------


def lri_update(p, chosen: int, r_norm: float, b: float) -> np.ndarray:
    """Linear reward-inaction step toward ``chosen`` by ``b * r_norm``."""
    if not 0.0 <= r_norm <= 1.0:
        raise ValueError(f"normalized reward must lie in [0, 1], got {r_norm}")
    if not 0.0 < b < 1.0:
        raise ValueError(f"step size must lie in (0, 1), got {b}")
    p = np.asarray(p, dtype=float)
    step = b * r_norm
    out = p - step * p
    out[chosen] = p[chosen] + step * (1.0 - p[chosen])
    return out / out.sum()


@dataclass(frozen=True)
class PayoffEnvironment:
    """How realized payoffs are drawn from utilities.

    ``deterministic``: the utility itself. ``additive_uniform``: utility plus
    uniform noise on ``[-width/2, width/2]``. ``bernoulli_success``: 1 with
    probability equal to the utility (which must lie in [0, 1]), else 0.
    """

    kind: str = "deterministic"
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in ("deterministic", "additive_uniform", "bernoulli_success"):
            raise ValueError(f"unknown payoff environment {self.kind!r}")
        if self.width < 0:
            raise ValueError("noise width must be >= 0")

    def realize(self, u: float, rng: np.random.Generator) -> float:
        if self.kind == "deterministic":
            return u
        if self.kind == "additive_uniform":
            return u + self.width * (rng.random() - 0.5)
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"bernoulli success probability {u} outside [0, 1]")
        return 1.0 if rng.random() < u else 0.0


@dataclass(frozen=True)
class LearnerConfig:
    """LR-I parameters. ``r_min``/``r_max`` are scalars or one value per player."""

    b: float = 0.1
    r_min: object = 0.0
    r_max: object = 1.0
    horizon: int = 5000
    seed: int = 0
    stop_on_convergence: bool = True

    def __post_init__(self):
        if not 0.0 < self.b < 1.0:
            raise ValueError(f"step size b must lie in (0, 1), got {self.b}")
        if not np.all(np.asarray(self.r_min, dtype=float) < np.asarray(self.r_max, dtype=float)):
            raise ValueError("r_min must be < r_max")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def bounds(self, n: int) -> tuple:
        lo = np.asarray(self.r_min, dtype=float)
        hi = np.asarray(self.r_max, dtype=float)
        return float(lo if lo.ndim == 0 else lo[n]), float(hi if hi.ndim == 0 else hi[n])

    def normalize(self, r: float, n: int = 0) -> float:
        lo, hi = self.bounds(n)
        return min(max((r - lo) / (hi - lo), 0.0), 1.0)


@dataclass
class LearningResult:
    strategies: list  # per player: (steps + 1, |A_n|) array
    actions: np.ndarray  # (steps, N) chosen action indices
    payoffs: np.ndarray  # (steps, N) raw realized payoffs
    converged_at: Optional[int]
    final_profile: tuple

    @property
    def converged(self) -> bool:
        return self.converged_at is not None

    @property
    def converged_profile(self) -> Optional[tuple]:
        return self.final_profile if self.converged else None

    def expected_payoff(self) -> np.ndarray:
        return self.payoffs.mean(axis=0)

    def outage(self, eta) -> np.ndarray:
        """Per-player outage, treating the negated payoff as the realized cost."""
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (self.payoffs.shape[1],))
        return np.array([outage_probability(-self.payoffs[:, n], eta[n]) for n in range(self.payoffs.shape[1])])

    def summary(self, eta=None) -> dict:
        out = {
            "steps": int(self.actions.shape[0]),
            "converged": self.converged,
            "converged_at": self.converged_at,
            "converged_profile": list(self.converged_profile) if self.converged else None,
            "final_profile": list(self.final_profile),
            "expected_payoff": self.expected_payoff().tolist(),
        }
        if eta is not None:
            out["outage_probability"] = self.outage(eta).tolist()
        return out


def simulate_learning(g: SpatialGame, env: PayoffEnvironment, cfg: LearnerConfig) -> LearningResult:
    """Every player samples an action, observes a payoff, applies LR-I.

    Players start from uniform strategies. Convergence means every player's
    largest strategy component reached 0.99. The inner loop works on plain
    lists (action sets are small) with the arithmetic of :func:`lri_update`.
    """
    rng = np.random.default_rng(cfg.seed)
    counts = g.action_counts
    n_players = len(counts)
    probs = [[1.0 / k] * k for k in counts]
    bounds = [cfg.bounds(n) for n in range(n_players)]
    deterministic = env.kind == "deterministic"

    history = [[list(p)] for p in probs]
    actions = np.zeros((cfg.horizon, n_players), dtype=int)
    payoffs = np.zeros((cfg.horizon, n_players))
    converged_at = None
    steps = cfg.horizon

    for t in range(cfg.horizon):
        draws = rng.random(n_players).tolist()
        profile = []
        for p, u in zip(probs, draws):
            acc, a = 0.0, 0
            for a, q in enumerate(p):
                acc += q
                if u < acc:
                    break
            profile.append(a)
        profile = tuple(profile)
        actions[t] = profile
        done = True
        for n in range(n_players):
            r = g.utility(n, profile)
            if not deterministic:
                r = env.realize(r, rng)
            payoffs[t, n] = r
            lo, hi = bounds[n]
            step = cfg.b * min(max((r - lo) / (hi - lo), 0.0), 1.0)
            p = probs[n]
            a = profile[n]
            new = [q - step * q for q in p]
            new[a] = p[a] + step * (1.0 - p[a])
            total = sum(new)
            new = [q / total for q in new]
            probs[n] = new
            history[n].append(new)
            done = done and max(new) >= CONVERGENCE_LEVEL
        if converged_at is None and done:
            converged_at = t + 1
            if cfg.stop_on_convergence:
                steps = t + 1
                break

    final = tuple(int(np.argmax(p)) for p in probs)
    strategies = [np.array(h) for h in history]
    return LearningResult(strategies, actions[:steps], payoffs[:steps], converged_at, final)


def outage_probability(samples, eta: float) -> float:
    """Fraction of cost samples strictly above ``eta``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("outage probability needs at least one sample")
    return float(np.mean(samples > eta))
