"""Crowdsourced smart-traffic scenario.

Pipeline: synthesize a low-rank link travel-time matrix, observe it through
crowdsourcers (sparse sampling, noise, dishonest contributors), recover it
with robust completion, flag outlier contributors, let drivers learn routes
in the induced congestion game, and score the result with QoD/QoI.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from . import games, metrics
from .lowrank import SolverConfig, robust_completion

MAX_ROUTES = 4


class ScenarioError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


# -- network -----------------------------------------------------------------------


@dataclass
class RoadNetwork:
    """Directed road graph; links are indexed 0..L-1 in ``links`` order."""

    links: list  # (tail, head) junction pairs
    free_flow: np.ndarray
    slope: np.ndarray
    od_pairs: list
    routes: list  # routes[k] -> list of routes (tuples of link ids) for od_pairs[k]

    @property
    def n_links(self) -> int:
        return len(self.links)

    def check(self) -> None:
        if (self.free_flow <= 0).any():
            raise ValueError("free-flow times must be > 0")
        if (self.slope < 0).any():
            raise ValueError("congestion slopes must be >= 0")
        for (o, d), rs in zip(self.od_pairs, self.routes):
            for r in rs:
                node = o
                for e in r:
                    tail, head = self.links[e]
                    if tail != node:
                        raise ValueError(f"route {r} for {(o, d)} is not connected")
                    node = head
                if node != d:
                    raise ValueError(f"route {r} does not end at {d}")


def _k_shortest(g: nx.DiGraph, o, d, k: int) -> list:
    out = []
    for path in nx.shortest_simple_paths(g, o, d, weight="alpha"):
        out.append(tuple(g.edges[u, v]["id"] for u, v in zip(path, path[1:])))
        if len(out) == k:
            break
    return out


def generate_network(n_links: int = 30, n_od_pairs: int = 2, seed: int = 0, max_routes: int = MAX_ROUTES) -> RoadNetwork:
    """Square grid with all east/south links plus random west/north links.

    OD pairs are drawn among junction pairs at least three hops apart that
    have at least two routes; each keeps its ``max_routes`` shortest simple
    routes under free-flow times.
    """
    rng = np.random.default_rng(seed)
    side = 2
    while 2 * (side + 1) * side <= n_links:
        side += 1
    if 2 * side * (side - 1) > n_links or n_links > 4 * side * (side - 1):
        raise ValueError(f"cannot build a grid network with {n_links} links")
    node = lambda r, c: r * side + c  # noqa: E731
    forward, backward = [], []
    for r in range(side):
        for c in range(side):
            if c + 1 < side:
                forward.append((node(r, c), node(r, c + 1)))
                backward.append((node(r, c + 1), node(r, c)))
            if r + 1 < side:
                forward.append((node(r, c), node(r + 1, c)))
                backward.append((node(r + 1, c), node(r, c)))
    extra = rng.choice(len(backward), size=n_links - len(forward), replace=False)
    links = forward + [backward[i] for i in sorted(extra)]
    free_flow = 1.0 + rng.random(len(links))
    slope = 0.2 + 0.6 * rng.random(len(links))

    g = nx.DiGraph()
    for i, (u, v) in enumerate(links):
        g.add_edge(u, v, id=i, alpha=float(free_flow[i]))
    hops = dict(nx.all_pairs_shortest_path_length(g))
    candidates = sorted((o, d) for o in hops for d, h in hops[o].items() if h >= 3)
    order = rng.permutation(len(candidates))
    od_pairs, routes = [], []
    for i in order:
        o, d = candidates[i]
        rs = _k_shortest(g, o, d, max_routes)
        if len(rs) >= 2:
            od_pairs.append((int(o), int(d)))
            routes.append(rs)
        if len(od_pairs) == n_od_pairs:
            break
    if len(od_pairs) < n_od_pairs:
        raise ValueError(f"only {len(od_pairs)} of {n_od_pairs} origin-destination pairs have two or more routes")
    net = RoadNetwork(links, free_flow, slope, od_pairs, routes)
    net.check()
    return net


# -- ground truth and observation ---------------------------------------------------


@dataclass
class TrafficMatrix:
    values: np.ndarray  # links x slots
    rank: int


def generate_ground_truth(links: int, slots: int, rank: int, seed: int, floor: float = 0.5) -> TrafficMatrix:
    """Product of two positive random factors.

    Factor entries are ``sqrt(floor / rank) + U[0, 1)``, so every entry is at
    least ``floor`` and the product has rank ``rank`` almost surely.
    """
    if not 1 <= rank <= min(links, slots):
        raise ValueError(f"rank must lie in [1, {min(links, slots)}], got {rank}")
    if not floor > 0:
        raise ValueError("floor must be > 0")
    rng = np.random.default_rng(seed)
    offset = np.sqrt(floor / rank)
    u = offset + rng.random((links, rank))
    v = offset + rng.random((slots, rank))
    return TrafficMatrix(u @ v.T, rank)


@dataclass(frozen=True)
class CrowdsourceModel:
    sampling_rate: float = 0.5
    noise_std: float = 0.01
    anomaly_rate: float = 0.3
    anomaly_magnitude: float = 5.0
    honest: tuple = (True,) * 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.sampling_rate <= 1.0:
            raise ValueError("sampling_rate must lie in (0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 0.0 <= self.anomaly_rate < 1.0:
            raise ValueError("anomaly_rate must lie in [0, 1)")
        if not self.anomaly_magnitude > 0:
            raise ValueError("anomaly_magnitude must be > 0")
        if len(self.honest) < 1:
            raise ValueError("need at least one contributor")

    @classmethod
    def build(cls, n_contributors: int, dishonest_fraction: float, seed: int, **kw) -> "CrowdsourceModel":
        """Mark ``round(dishonest_fraction * n)`` randomly chosen contributors dishonest."""
        rng = np.random.default_rng([seed, 1])
        n_bad = int(round(dishonest_fraction * n_contributors))
        bad = set(rng.choice(n_contributors, size=n_bad, replace=False).tolist())
        honest = tuple(i not in bad for i in range(n_contributors))
        return cls(honest=honest, seed=seed, **kw)

    @property
    def n_contributors(self) -> int:
        return len(self.honest)


@dataclass
class Observation:
    values: np.ndarray  # zero off the mask
    mask: np.ndarray
    anomalies: np.ndarray  # ground truth, evaluation only
    contributors: np.ndarray  # contributor id per entry, -1 off the mask


def observe(truth: TrafficMatrix, model: CrowdsourceModel) -> Observation:
    rng = np.random.default_rng(model.seed)
    x = truth.values
    mask = rng.random(x.shape) < model.sampling_rate
    who = rng.integers(0, model.n_contributors, size=x.shape)
    noise = model.noise_std * rng.standard_normal(x.shape)
    hit = rng.random(x.shape) < model.anomaly_rate
    sign = rng.choice([-1.0, 1.0], size=x.shape)

    dishonest = ~np.asarray(model.honest, dtype=bool)
    anomalies = mask & dishonest[who] & hit
    y = x + noise + anomalies * sign * model.anomaly_magnitude
    return Observation(np.where(mask, y, 0.0), mask, anomalies, np.where(mask, who, -1))


def estimate_traffic(observed: np.ndarray, mask: np.ndarray, cfg: SolverConfig = SolverConfig()):
    dec = robust_completion(observed, mask, cfg)
    return dec.X, dec.A, dec


def detect_outlier_contributors(a_hat: np.ndarray, mask: np.ndarray, contributors: np.ndarray, tau: float, observed: np.ndarray) -> set:
    """Contributors whose share of entries carrying a sparse anomaly exceeds ``tau``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    scale = np.abs(observed[mask]).max() if mask.any() else 0.0
    anomalous = np.abs(a_hat) > 1e-3 * scale
    flagged = set()
    ids = contributors[mask]
    hits = anomalous[mask]
    for c in np.unique(ids):
        mine = ids == c
        if hits[mine].mean() > tau:
            flagged.add(int(c))
    return flagged


def precision_recall(flagged: set, dishonest: set) -> tuple:
    """Flagging precision and recall; empty denominators score 1.0, except that
    flagging nobody while dishonest contributors exist has precision 0.
    """
    tp = len(flagged & dishonest)
    if flagged:
        precision = tp / len(flagged)
    else:
        precision = 0.0 if dishonest else 1.0
    recall = tp / len(dishonest) if dishonest else 1.0
    return precision, recall


# -- route game ---------------------------------------------------------------------


def build_route_game(network: RoadNetwork, x_hat: np.ndarray, driver_od: list, slot: int) -> games.CongestionGame:
    """Congestion game where driver ``n`` picks among the routes of ``driver_od[n]``.

    Link base times are the (nonnegative part of the) estimates at ``slot``.
    """
    routes = []
    for n, k in enumerate(driver_od):
        if not network.routes[k]:
            raise ValueError(f"driver {n} has no route")
        routes.append(tuple(network.routes[k]))
    base = np.maximum(np.asarray(x_hat)[:, slot], 0.0)
    return games.CongestionGame(tuple(routes), tuple(base), tuple(network.slope))


def best_solo_route(game: games.CongestionGame, n: int) -> tuple:
    """Cost of each of driver ``n``'s routes with no other traffic, and the minimum."""
    costs = [sum(game.base[e] * (1 + game.slope[e]) for e in r) for r in game.routes[n]]
    return costs, min(costs)


# -- end-to-end ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    links: int = 30
    slots: int = 60
    rank: int = 2
    floor: float = 0.5
    n_od_pairs: int = 2
    sampling_rate: float = 0.5
    noise_std: float = 0.01
    anomaly_rate: float = 0.3
    anomaly_magnitude: float = 5.0
    contributors: int = 20
    dishonest_fraction: float = 0.1
    tau: float = 0.15
    drivers: int = 5
    slot: Optional[int] = None  # decision slot; default is the last one
    b: float = 0.01
    horizon: int = 50000
    payoff_noise: float = 0.0
    eta_factor: float = 1.25
    reward_span: float = 0.5
    lam: Optional[float] = None
    max_iters: int = 1000
    seconds_per_solver_iter: float = 0.01
    seconds_per_learning_step: float = 0.001
    timeliness_scale: float = 60.0


@dataclass
class ScenarioReport:
    seed: int
    recovery_error: float
    solver_iterations: int
    solver_converged: bool
    flagged: list
    dishonest: list
    flag_precision: float
    flag_recall: float
    anomaly_recall: float
    learned_profile: list
    learning_converged: bool
    learning_steps: int
    is_pure_nash: bool
    is_pure_nash_true_costs: bool
    expected_travel_time: list
    outage_threshold: list
    outage_probability: list
    qod: dict
    qod_score: float
    qoi: dict
    qoi_score: float
    timings: dict = field(default_factory=dict)

    def to_json(self, include_timings: bool = False) -> str:
        d = asdict(self)
        if not include_timings:
            d.pop("timings")
        return json.dumps(d, sort_keys=True, indent=2)


def _stage(name, timings, fn, *args, **kw):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kw)
    except ScenarioError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise ScenarioError(name, f"{type(exc).__name__}: {exc}") from exc
    timings[name] = time.perf_counter() - t0
    return out


def run_scenario(cfg: ScenarioConfig, seed: int) -> ScenarioReport:
    """Run the whole pipeline; every random draw derives from ``seed``."""
    timings: dict = {}
    ss = np.random.SeedSequence(seed)
    s_net, s_truth, s_obs, s_drivers, s_learn = (int(s.generate_state(1)[0]) for s in ss.spawn(5))

    network = _stage("network", timings, generate_network, cfg.links, cfg.n_od_pairs, s_net)
    truth = _stage("ground_truth", timings, generate_ground_truth, cfg.links, cfg.slots, cfg.rank, s_truth, cfg.floor)
    model = CrowdsourceModel.build(
        cfg.contributors,
        cfg.dishonest_fraction,
        s_obs,
        sampling_rate=cfg.sampling_rate,
        noise_std=cfg.noise_std,
        anomaly_rate=cfg.anomaly_rate,
        anomaly_magnitude=cfg.anomaly_magnitude,
    )
    obs = _stage("observe", timings, observe, truth, model)

    solver = SolverConfig(lam=cfg.lam, epsilon=cfg.noise_std * np.sqrt(obs.mask.sum()), max_iters=cfg.max_iters)
    x_hat, a_hat, dec = _stage("estimate", timings, estimate_traffic, obs.values, obs.mask, solver)
    rel_err = float(np.linalg.norm(x_hat - truth.values) / np.linalg.norm(truth.values))

    flagged = _stage("detect", timings, detect_outlier_contributors, a_hat, obs.mask, obs.contributors, cfg.tau, obs.values)
    dishonest = {i for i, h in enumerate(model.honest) if not h}
    precision, recall = precision_recall(flagged, dishonest)
    planted = obs.anomalies.sum()
    found = (np.abs(a_hat) > 1e-3 * np.abs(obs.values[obs.mask]).max()) & obs.anomalies
    anomaly_recall = float(found.sum() / planted) if planted else 1.0

    slot = cfg.slots - 1 if cfg.slot is None else cfg.slot
    driver_od = np.random.default_rng(s_drivers).integers(0, len(network.od_pairs), size=cfg.drivers).tolist()
    cgame = _stage("route_game", timings, build_route_game, network, x_hat, driver_od, slot)
    sgame = cgame.spatial_game()
    lo, hi = cgame.cost_bounds()
    env = games.PayoffEnvironment("additive_uniform", cfg.payoff_noise) if cfg.payoff_noise > 0 else games.PayoffEnvironment()
    width = cfg.payoff_noise / 2
    hi = lo + cfg.reward_span * (hi - lo)
    lcfg = games.LearnerConfig(b=cfg.b, r_min=tuple(-hi - width), r_max=tuple(-lo + width), horizon=cfg.horizon, seed=s_learn)
    result = _stage("learn", timings, games.simulate_learning, sgame, env, lcfg)

    profile = result.final_profile
    nash = games.is_pure_nash(sgame, profile)
    true_game = build_route_game(network, truth.values, driver_od, slot).spatial_game()
    nash_true = games.is_pure_nash(true_game, profile)
    costs = -result.payoffs
    eta = [cfg.eta_factor * best_solo_route(cgame, n)[1] for n in range(cfg.drivers)]
    outage = [games.outage_probability(costs[:, n], eta[n]) for n in range(cfg.drivers)]

    def score():
        delay = dec.iterations * cfg.seconds_per_solver_iter + result.actions.shape[0] * cfg.seconds_per_learning_step
        t = metrics.timeliness(delay, cfg.timeliness_scale)
        accuracy = 1.0 / (1.0 + rel_err)
        route_links = sorted({e for rs in cgame.routes for r in rs for e in r})
        est = x_hat[route_links, slot]
        quantity = float(np.mean(np.isfinite(est) & (est > 0)))
        qod = metrics.QoDRecord(accuracy, precision, metrics.completeness(int(obs.mask.sum()), obs.mask.size), t)
        qoi = metrics.QoIRecord(quantity, 1.0, 1.0, accuracy, 1.0, t, precision)
        return qod, qoi

    qod, qoi = _stage("metrics", timings, score)

    return ScenarioReport(
        seed=seed,
        recovery_error=rel_err,
        solver_iterations=dec.iterations,
        solver_converged=dec.converged,
        flagged=sorted(flagged),
        dishonest=sorted(dishonest),
        flag_precision=precision,
        flag_recall=recall,
        anomaly_recall=anomaly_recall,
        learned_profile=list(profile),
        learning_converged=result.converged,
        learning_steps=int(result.actions.shape[0]),
        is_pure_nash=nash,
        is_pure_nash_true_costs=nash_true,
        expected_travel_time=costs.mean(axis=0).tolist(),
        outage_threshold=eta,
        outage_probability=outage,
        qod=asdict(qod),
        qod_score=metrics.qod_score(qod),
        qoi=asdict(qoi),
        qoi_score=metrics.qoi_score(qoi),
        timings=timings,
    )
