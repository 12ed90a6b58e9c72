"""Command-line entry point: ``cogniot <subcommand> --config FILE --seed N --out DIR``.

Exit codes: 0 success, 1 invalid config, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__, admm, copula, games, kernels, lowrank, metrics, traffic
from . import io as cio

log = logging.getLogger("cogniot")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"numerical failure in stage {stage!r}: {message}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# -- config schemas ---------------------------------------------------------------


class MarginalCfg(_Strict):
    kind: Literal["gaussian", "exponential", "empirical"]
    mean: float = 0.0
    std: float = Field(1.0, gt=0)
    rate: float = Field(1.0, gt=0)
    samples: Optional[List[float]] = None


class CopulaCfg(_Strict):
    kind: Literal["independence", "gaussian"] = "independence"
    correlation: Optional[List[List[float]]] = None


class HypothesisCfg(_Strict):
    copula: CopulaCfg = CopulaCfg()
    marginals: List[MarginalCfg]


class FuseCfg(_Strict):
    input: str
    copula: CopulaCfg = CopulaCfg()
    marginals: List[MarginalCfg]
    alternative: Optional[HypothesisCfg] = None


class KernelCfg(_Strict):
    kind: Literal["polynomial", "gaussian"] = "gaussian"
    degree: int = Field(1, ge=1)
    offset: float = Field(0.0, ge=0)
    bandwidth: float = Field(1.0, gt=0)


class KernelRunCfg(_Strict):
    input: str
    kernel: KernelCfg = KernelCfg()
    mode: Literal["gram", "ridge"] = "gram"
    targets: Optional[str] = None
    gamma: float = Field(1e-3, gt=0)
    predict: Optional[str] = None


class RpcaCfg(_Strict):
    input: str
    mask: Optional[str] = None
    problem: Literal["robust", "stable"] = "robust"
    lam: Optional[float] = Field(None, alias="lambda", gt=0)
    epsilon: float = Field(0.0, ge=0)
    mu_init: Optional[float] = Field(None, gt=0)
    mu_growth: Optional[float] = Field(None, gt=1)
    max_iters: int = Field(1000, ge=1)
    rel_tol: float = Field(1e-7, gt=0)


class AdmmCfg(_Strict):
    objectives: str
    topology: Optional[str] = None
    n_agents: Optional[int] = Field(None, ge=1)
    mode: Literal["central", "neighbor"] = "central"
    mu: float = Field(1.0, gt=0)
    iters: int = Field(500, ge=1)
    primal_tol: float = Field(1e-8, gt=0)
    dual_tol: float = Field(1e-8, gt=0)


class GameSpecCfg(_Strict):
    name: Literal["coordination", "matching_pennies", "congestion"] = "coordination"
    n_actions: int = Field(2, ge=1)
    n_players: int = Field(3, ge=1)


class LearnerCfg(_Strict):
    b: float = Field(0.1, gt=0, lt=1)
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    horizon: int = Field(5000, ge=1)
    stop_on_convergence: bool = True


class EnvCfg(_Strict):
    kind: Literal["deterministic", "additive_uniform", "bernoulli_success"] = "deterministic"
    width: float = Field(0.0, ge=0)


class GameCfg(_Strict):
    game: GameSpecCfg = GameSpecCfg()
    learner: LearnerCfg = LearnerCfg()
    environment: EnvCfg = EnvCfg()
    eta: Optional[float] = None


class MetricsCfg(_Strict):
    input: str


class ScenarioParams(_Strict):
    links: int = Field(30, ge=4)
    slots: int = Field(60, ge=1)
    rank: int = Field(2, ge=1)
    floor: float = Field(0.5, gt=0)
    n_od_pairs: int = Field(2, ge=1)
    sampling_rate: float = Field(0.5, gt=0, le=1)
    noise_std: float = Field(0.01, ge=0)
    anomaly_rate: float = Field(0.3, ge=0, lt=1)
    anomaly_magnitude: float = Field(5.0, gt=0)
    contributors: int = Field(20, ge=1)
    dishonest_fraction: float = Field(0.1, ge=0, le=1)
    tau: float = Field(0.15, gt=0, lt=1)
    drivers: int = Field(5, ge=1)
    slot: Optional[int] = Field(None, ge=0)
    b: float = Field(0.01, gt=0, lt=1)
    horizon: int = Field(50000, ge=1)
    payoff_noise: float = Field(0.0, ge=0)
    eta_factor: float = Field(1.25, gt=0)
    reward_span: float = Field(0.5, gt=0, le=1)
    lam: Optional[float] = Field(None, alias="lambda", gt=0)
    max_iters: int = Field(1000, ge=1)
    seconds_per_solver_iter: float = Field(0.01, ge=0)
    seconds_per_learning_step: float = Field(0.001, ge=0)
    timeliness_scale: float = Field(60.0, gt=0)


class ScenarioCfg(_Strict):
    scenario: ScenarioParams = ScenarioParams()
    seeds: Optional[List[int]] = None
    workers: int = Field(1, ge=1)


SCHEMAS = {
    "fuse": FuseCfg,
    "kernel": KernelRunCfg,
    "rpca": RpcaCfg,
    "admm": AdmmCfg,
    "game": GameCfg,
    "metrics": MetricsCfg,
    "scenario": ScenarioCfg,
}


def load_config(path: Optional[str], subcommand: str) -> tuple:
    """Validated config plus the seed recorded in a replayed manifest (or None)."""
    raw: dict = {}
    manifest_seed = None
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} does not parse: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
        # a run.json manifest replays its own resolved parameters
        if set(raw) >= {"subcommand", "params"}:
            if raw["subcommand"] != subcommand:
                raise ConfigError(f"field 'subcommand': manifest is for {raw['subcommand']!r}")
            manifest_seed = raw.get("seed")
            raw = raw["params"]
    try:
        return SCHEMAS[subcommand].model_validate(raw), manifest_seed
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(f"invalid config field '{loc}': {err['msg']}") from exc


def _resolve(base: Optional[str], p: Optional[str]) -> Optional[str]:
    """Absolute path, relative ones taken from the config file's directory."""
    if p is None:
        return None
    path = Path(p)
    if not path.is_absolute() and base is not None:
        path = Path(base).parent / path
    return str(path.resolve())


def _numeric(stage: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (lowrank.NumericalError, admm.ConsensusDivergence, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise StageError(stage, str(exc)) from exc
    except traffic.ScenarioError as exc:
        raise StageError(exc.stage, str(exc)) from exc


def _read(kind, fn, path, *args):
    if not Path(path).exists():
        raise FileNotFoundError(f"{kind} file not found: {path}")
    try:
        return fn(path, *args)
    except ValueError as exc:
        raise ConfigError(f"field '{kind}': {exc}") from exc


# -- subcommands ------------------------------------------------------------------


def _marginal(m: MarginalCfg) -> copula.MarginalModel:
    if m.kind == "gaussian":
        return copula.MarginalModel.gaussian(m.mean, m.std)
    if m.kind == "exponential":
        return copula.MarginalModel.exponential(m.rate)
    if not m.samples:
        raise ConfigError("field 'marginals.samples': empirical marginal needs samples")
    return copula.fit_empirical_marginal(m.samples)


def _copula(c: CopulaCfg, dim: int) -> copula.CopulaModel:
    if c.kind == "independence":
        return copula.CopulaModel.independence(dim)
    if c.correlation is None:
        raise ConfigError("field 'copula.correlation': required for a gaussian copula")
    return copula.CopulaModel.gaussian(c.correlation)


def run_fuse(cfg: FuseCfg, out: Path, seed: int) -> dict:
    try:
        margs = [_marginal(m) for m in cfg.marginals]
        cop = _copula(cfg.copula, len(margs))
        alt = None
        if cfg.alternative is not None:
            alt_m = [_marginal(m) for m in cfg.alternative.marginals]
            alt = (_copula(cfg.alternative.copula, len(alt_m)), alt_m)
    except ValueError as exc:
        raise ConfigError(f"field 'copula/marginals': {exc}") from exc
    z = _read("input", cio.read_matrix, cfg.input)
    if z.shape[1] != len(margs):
        raise ConfigError(f"field 'marginals': {len(margs)} marginals for {z.shape[1]} input columns")
    header = ["joint_cdf", "joint_pdf"] + (["log_likelihood_ratio"] if alt else [])
    rows = []
    for zi in z:
        row = [copula.joint_cdf(cop, margs, zi), copula.joint_pdf(cop, margs, zi)]
        if alt:
            row.append(_numeric("likelihood_ratio", copula.log_likelihood_ratio, (cop, margs), alt, zi))
        rows.append([repr(float(v)) for v in row])
    cio.write_rows(out / "fuse.csv", header, rows)
    return {"samples": int(z.shape[0])}


def run_kernel(cfg: KernelRunCfg, out: Path, seed: int) -> dict:
    spec = kernels.KernelSpec(cfg.kernel.kind, cfg.kernel.degree, cfg.kernel.offset, cfg.kernel.bandwidth)
    x = _read("input", cio.read_matrix, cfg.input)
    if cfg.mode == "gram":
        k = kernels.gram_matrix(spec, x)
        cio.write_matrix(out / "gram.csv", k)
        return {"n": int(k.shape[0]), "psd": kernels.is_psd(k)}
    if cfg.targets is None:
        raise ConfigError("field 'targets': required in ridge mode")
    y = _read("targets", cio.read_matrix, cfg.targets).ravel()
    model = _numeric("ridge_fit", kernels.ridge_fit, spec, x, y, cfg.gamma)
    query = _read("predict", cio.read_matrix, cfg.predict) if cfg.predict else x
    cio.write_matrix(out / "predictions.csv", model.predict(query)[:, None], header=["prediction"])
    return {"n": int(x.shape[0]), "queries": int(query.shape[0])}


def run_rpca(cfg: RpcaCfg, out: Path, seed: int) -> dict:
    y = _read("input", cio.read_matrix, cfg.input)
    mask = _read("mask", cio.read_mask, cfg.mask, y.shape) if cfg.mask else None
    solver = lowrank.SolverConfig(cfg.lam, cfg.epsilon, cfg.mu_init, cfg.mu_growth, cfg.max_iters, cfg.rel_tol)
    if cfg.problem == "stable":
        if mask is not None:
            raise ConfigError("field 'mask': stable PCA takes no mask")
        dec = _numeric("stable_pca", lowrank.stable_pca, y, solver)
    elif mask is None:
        dec = _numeric("robust_pca", lowrank.robust_pca, y, solver)
    else:
        dec = _numeric("robust_completion", lowrank.robust_completion, y, mask, solver)
    cio.write_matrix(out / "X.csv", dec.X)
    cio.write_matrix(out / "A.csv", dec.A)
    diag = {
        "converged": dec.converged,
        "iterations": dec.iterations,
        "final_residual": dec.final_residual,
        "lambda": dec.lam,
        "residual_trace": dec.residual_trace,
    }
    cio.write_json(out / "diagnostics.json", diag)
    return {"converged": dec.converged, "iterations": dec.iterations}


def _read_objectives(path) -> list:
    header, data = _read("objectives", cio.read_table, path)
    if header[0] != "agent":
        raise ConfigError("field 'objectives': first column must be 'agent'")
    agents = sorted(set(data[:, 0].astype(int).tolist()))
    if agents != list(range(len(agents))):
        raise ConfigError("field 'objectives': agent ids must be 0..N-1")
    if header[1:] == ["c"]:
        return [admm.AgentObjective.scalar_quadratic(data[data[:, 0] == i, 1][0]) for i in agents]
    if header[1] != "b":
        raise ConfigError("field 'objectives': expected columns agent,c or agent,b,x0,...")
    objs = []
    for i in agents:
        rows = data[data[:, 0] == i]
        objs.append(admm.AgentObjective.quadratic(rows[:, 2:], rows[:, 1]))
    return objs


def run_admm(cfg: AdmmCfg, out: Path, seed: int) -> dict:
    objs = _read_objectives(cfg.objectives)
    n = cfg.n_agents or len(objs)
    edges = ()
    if cfg.topology:
        _, e = _read("topology", cio.read_table, cfg.topology)
        edges = tuple(tuple(int(v) for v in row) for row in e)
    elif cfg.mode == "central":
        edges = admm.Topology.complete(n).edges
    try:
        topo = admm.Topology(n, edges)
        conf = admm.AdmmConfig(cfg.mu, cfg.iters, cfg.primal_tol, cfg.dual_tol, cfg.mode)
    except ValueError as exc:
        raise ConfigError(f"field 'topology': {exc}") from exc
    sol, state = _numeric("admm", admm.run_consensus, objs, topo, conf)
    rows = zip(
        range(1, state.iteration + 1),
        map(repr, state.primal_residuals),
        map(repr, state.dual_residuals),
        map(repr, state.disagreements),
    )
    cio.write_rows(out / "residuals.csv", ["iteration", "primal", "dual", "disagreement"], rows)
    result = {
        "mode": cfg.mode,
        "converged": state.converged,
        "iterations": state.iteration,
        "connected": topo.is_connected(),
        "solution": sol,
        "disagreement": state.disagreements[-1],
    }
    cio.write_json(out / "solution.json", result)
    return {"converged": state.converged, "iterations": state.iteration}


def build_game(spec: GameSpecCfg, seed: int) -> games.SpatialGame:
    if spec.name == "coordination":
        return games.coordination_game(spec.n_actions)
    if spec.name == "matching_pennies":
        return games.matching_pennies()
    return games.path_congestion_game(spec.n_players, seed=seed)


def run_game(cfg: GameCfg, out: Path, seed: int) -> dict:
    g = build_game(cfg.game, seed)
    lo, hi = cfg.learner.r_min, cfg.learner.r_max
    if lo is None or hi is None:
        if cfg.game.name == "congestion":
            # utility is minus cost; the path constructor has base <= 2, slope <= 1.5, load <= 2
            dlo, dhi = -8.0, 0.0
        else:
            dlo, dhi = (0.0, 1.0) if cfg.game.name == "coordination" else (-1.0, 1.0)
        lo = dlo if lo is None else lo
        hi = dhi if hi is None else hi
    try:
        lcfg = games.LearnerConfig(cfg.learner.b, lo, hi, cfg.learner.horizon, seed, cfg.learner.stop_on_convergence)
        env = games.PayoffEnvironment(cfg.environment.kind, cfg.environment.width)
    except ValueError as exc:
        raise ConfigError(f"field 'learner': {exc}") from exc
    res = games.simulate_learning(g, env, lcfg)
    header = ["t", "player", "action", "payoff"] + [f"p{a}" for a in range(max(g.action_counts))]
    rows = []
    for t in range(res.actions.shape[0]):
        for n in range(g.n_players):
            probs = res.strategies[n][t + 1].tolist()
            probs += [""] * (len(header) - 4 - len(probs))
            rows.append([t, n, int(res.actions[t, n]), repr(float(res.payoffs[t, n]))] + [repr(p) if p != "" else "" for p in probs])
    cio.write_rows(out / "trajectory.csv", header, rows)
    summary = res.summary(cfg.eta)
    summary["final_profile_is_pure_nash"] = games.is_pure_nash(g, res.final_profile)
    if g.game.n_profiles() <= games.MAX_PROFILES:
        summary["pure_nash_equilibria"] = [list(p) for p in games.enumerate_pure_nash(g)]
    cio.write_json(out / "summary.json", summary)
    return {"converged": res.converged}


def run_metrics(cfg: MetricsCfg, out: Path, seed: int) -> dict:
    if not Path(cfg.input).exists():
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    try:
        record = json.loads(Path(cfg.input).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"field 'input': {cfg.input} is not valid JSON ({exc})") from exc
    allowed = {"qoi", "qod", "qoe", "resource", "timeliness", "completeness"}
    unknown = set(record) - allowed
    if unknown:
        raise ConfigError(f"field 'input.{sorted(unknown)[0]}': unknown record kind")
    scores = {}
    try:
        for kind in ("qoi", "qod", "resource"):
            if kind in record:
                scores[kind] = metrics.score_record(kind, record[kind])
        if "qoe" in record:
            qoe = dict(record["qoe"])
            mapping = qoe.pop("mapping", None)
            scores["qoe"] = metrics.score_record("qoe", qoe, mapping)
        if "timeliness" in record:
            scores["timeliness"] = metrics.timeliness(**record["timeliness"])
        if "completeness" in record:
            scores["completeness"] = metrics.completeness(**record["completeness"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'input': {exc}") from exc
    cio.write_json(out / "scores.json", scores)
    return {"kinds": sorted(scores)}


def _scenario_worker(args):
    params, seed = args
    return traffic.run_scenario(traffic.ScenarioConfig(**params), seed)


AGGREGATE_FIELDS = [
    "seed",
    "recovery_error",
    "flag_precision",
    "flag_recall",
    "anomaly_recall",
    "is_pure_nash",
    "learning_converged",
    "learning_steps",
    "qod_score",
    "qoi_score",
]


def run_scenario_cmd(cfg: ScenarioCfg, out: Path, seed: int) -> dict:
    params = cfg.scenario.model_dump()
    known = {f.name for f in fields(traffic.ScenarioConfig)}
    params = {k: v for k, v in params.items() if k in known}
    seeds = cfg.seeds if cfg.seeds is not None else [seed]
    jobs = [(params, s) for s in seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            reports = list(_numeric("scenario", pool.map, _scenario_worker, jobs))
    else:
        reports = [_numeric("scenario", _scenario_worker, j) for j in jobs]
    rows = []
    for rep in reports:
        (out / f"report_seed{rep.seed}.json").write_text(rep.to_json() + "\n")
        cio.write_json(out / f"timings_seed{rep.seed}.json", rep.timings)
        rows.append([getattr(rep, f) if not isinstance(getattr(rep, f), float) else repr(getattr(rep, f)) for f in AGGREGATE_FIELDS])
    cio.write_rows(out / "aggregate.csv", AGGREGATE_FIELDS, rows)
    errs = [r.recovery_error for r in reports]
    return {
        "seeds": seeds,
        "mean_recovery_error": float(np.mean(errs)),
        "nash_rate": float(np.mean([r.is_pure_nash for r in reports])),
    }


RUNNERS = {
    "fuse": run_fuse,
    "kernel": run_kernel,
    "rpca": run_rpca,
    "admm": run_admm,
    "game": run_game,
    "metrics": run_metrics,
    "scenario": run_scenario_cmd,
}

PATH_FIELDS = {"input", "mask", "targets", "predict", "objectives", "topology"}


def parse_args(argv=None) -> argparse.Namespace:
    p = argparse.ArgumentParser(prog="cogniot", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=sorted(RUNNERS))
    p.add_argument("--config", help="YAML/JSON config file (or a previous run.json)")
    p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (default 0, or the seed of a replayed run.json)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--quiet", action="store_true")
    return p.parse_args(argv)


def run(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    t0 = time.perf_counter()
    try:
        cfg, manifest_seed = load_config(args.config, args.subcommand)
        seed = args.seed if args.seed is not None else (manifest_seed or 0)
        if not 0 <= seed < 2**64:
            raise ConfigError("field 'seed': must be an unsigned 64-bit integer")
        for name in PATH_FIELDS & set(type(cfg).model_fields):
            setattr(cfg, name, _resolve(args.config, getattr(cfg, name)))
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
        info = RUNNERS[args.subcommand](cfg, out, seed)
        manifest = {
            "subcommand": args.subcommand,
            "params": cfg.model_dump(by_alias=True),
            "seed": seed,
            "version": __version__,
            "wall_clock_seconds": time.perf_counter() - t0,
            "result": info,
        }
        cio.write_json(out / "run.json", manifest)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("%s: wrote outputs to %s", args.subcommand, out)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
