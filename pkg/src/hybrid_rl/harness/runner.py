"""Seeded multi-trial experiments: hybrid vs online-only arms, metrics, CSV/SVG output.

Seeding: trial ``i`` uses ``seed = base_seed + i``. Every random draw comes
from a Philox stream ``make_rng([seed, stream, ...])``:

    offline data     [seed, 0, behavior_index]
    environment      [seed, 1]      (shared by the hybrid and online arms)
    tie-breaking     [seed, 2]      (shared, only with tie_break = "random")
    function class   [base_seed, 3] (disc_golf candidates; same in every trial)
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .. import __version__
from ..agents import (
    UniformPolicy,
    beta_schedule,
    disc_golf_finite,
    generate_offline_dataset,
    lsvi_ucb_hybrid,
    make_behavior_policy,
    product_complete_class,
    ucbvi_hybrid,
)
from ..diagnostics import (
    CoverageCurve,
    Partition,
    aggregate_trials,
    block_latent_coverage,
    covariance_eig_curves,
    empirical_partition_concentrability,
    partial_offline_concentrability,
    partition_from_occupancy,
    partition_visit_curves,
    regret_curve,
    reward_curve,
    single_policy_concentrability,
)
from ..environments import BlockEnv, Projector, TetrisEnv, indexed_feature_map, make_env, svd_projector
from ..environments.tetris import configuration_index
from ..mdp import StochasticPolicy, Trajectory, greedy, make_rng, optimal_values, policy_occupancy
from .config import ExperimentConfig
from .svg import Series, render_svg

log = logging.getLogger(__name__)

STREAM_OFFLINE, STREAM_ENV, STREAM_TIE, STREAM_CLASS = 0, 1, 2, 3
ARMS = ("hybrid", "online")
OUT_ENV_VAR = "HYBRID_RL_OUT"
LOG_SCALE_CURVES = ("coverage", "eig_", "latent_coverage")


class TrialError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    curves: dict  # (behavior, arm, curve name) -> per-episode array
    env_seeds: dict  # arm -> seed words of the environment stream
    offline_seeds: dict  # behavior -> seed words of the offline stream
    seconds: float
    info: dict = field(default_factory=dict)


@dataclass
class ExperimentManifest:
    config: dict
    trials: list[dict]
    library_version: str
    timings: dict
    csv_sha256: dict
    static: dict
    output_dir: str | None = None
    curves: dict = field(default_factory=dict, repr=False)  # aggregated; not serialized

    def to_json(self) -> str:
        body = {
            "config": self.config,
            "library_version": self.library_version,
            "seed_derivation": "trial seed = base_seed + trial_index; streams make_rng([seed, stream, ...])",
            "trials": self.trials,
            "timings": self.timings,
            "csv_sha256": self.csv_sha256,
            "static": _json_safe(self.static),
        }
        return json.dumps(body, indent=2, sort_keys=True)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


# --- per-environment setup ------------------------------------------------------


@dataclass
class _Setup:
    env_factory: object
    mdp: object = None  # tabular MDP for diagnostics (latent MDP for block envs)
    decoder: np.ndarray | None = None
    behaviors: dict = field(default_factory=dict)  # kind -> policy acting on env states
    mu: dict = field(default_factory=dict)  # kind -> OccupancyTensor (tabular/latent)
    partitions: dict = field(default_factory=dict)
    v_star_raw: float | None = None
    q_star: np.ndarray | None = None
    fclass: object = None


def _setup(cfg: ExperimentConfig) -> _Setup:
    factory = partial(make_env, cfg.env, cfg.env_params)
    env = factory()
    setup = _Setup(factory)
    if isinstance(env, TetrisEnv):
        setup.behaviors["uniform"] = UniformPolicy(env.num_actions)
        return setup
    if isinstance(env, BlockEnv):
        setup.mdp, setup.decoder = env.emission.latent_mdp, env.decoder
    else:
        setup.mdp = env.mdp
    mdp = setup.mdp
    q_star, v_star = optimal_values(mdp)
    setup.q_star = q_star
    setup.v_star_raw = float(mdp.reward_offset * mdp.horizon + mdp.reward_scale * v_star[0, mdp.initial_state])
    threshold = cfg.partition.get("threshold")
    for kind in cfg.behavior_policies:
        latent = make_behavior_policy(kind, q_star)
        mu = policy_occupancy(mdp, latent)
        setup.mu[kind] = mu
        setup.partitions[kind] = partition_from_occupancy(mu, threshold)
        if setup.decoder is not None:
            setup.behaviors[kind] = StochasticPolicy(latent.probs[:, setup.decoder])
        else:
            setup.behaviors[kind] = latent
    return setup


def _static_diagnostics(cfg: ExperimentConfig, setup: _Setup) -> dict:
    if setup.mdp is None:
        return {}
    out = {"v_star_raw": setup.v_star_raw}
    comparator = policy_occupancy(setup.mdp, greedy(setup.q_star))
    everything = Partition(np.ones(setup.mdp.reward.shape, dtype=bool))
    for kind in cfg.behavior_policies:
        mu, part = setup.mu[kind], setup.partitions[kind]
        out[kind] = {
            "offline_cells": int(part.offline.sum()),
            "online_cells": int(part.online.sum()),
            "c_off_all_policy": partial_offline_concentrability(setup.mdp, mu, part),
            "c_full_all_policy": partial_offline_concentrability(setup.mdp, mu, everything),
            "c_off_single_policy": single_policy_concentrability(comparator, mu, part),
            "c_full_single_policy": single_policy_concentrability(comparator, mu, everything),
        }
    return out


def _feature_map(cfg: ExperimentConfig, env, offline):
    """Tetris: one-hot features, optionally projected on the offline SVD subspace."""
    A = env.num_actions
    if isinstance(env, TetrisEnv):
        tcfg, cache = env.config, {}

        def index(s, a):
            c = cache.get(s)
            if c is None:
                c = cache[s] = configuration_index(tcfg, s)
            return c * A + int(a)

        dim = tcfg.feature_dim
    else:
        dim = env.num_states * A

        def index(s, a):
            return int(s) * A + int(a)

    if cfg.svd_rank is None:
        return indexed_feature_map(np.eye(dim), index, A), None
    rows = np.array([index(st.state, st.action) for traj in offline for st in traj], dtype=np.int64)
    X = np.zeros((rows.size, dim))
    X[np.arange(rows.size), rows] = 1.0
    proj = svd_projector(X, cfg.svd_rank)
    return indexed_feature_map(proj.basis, index, A), proj


def function_class(cfg: ExperimentConfig, mdp):
    """Product class from R_{H-1} plus ``num_candidates`` U[0, 1] last-step draws (stream [base_seed, 3])."""
    rng = make_rng([cfg.base_seed, STREAM_CLASS])
    H, S, A = mdp.reward.shape
    extra = int(cfg.agent_params.get("num_candidates", 3))
    last = [mdp.reward[H - 1]] + [rng.random((S, A)) for _ in range(extra)]
    return product_complete_class(mdp, last)


def _run_agent(cfg, setup, env, offline, feature_map, seed):
    p = cfg.agent_params
    env_rng = make_rng([seed, STREAM_ENV])
    if cfg.agent == "ucbvi":
        tie = make_rng([seed, STREAM_TIE]) if p.get("tie_break", "lowest") == "random" else None
        kw = {k: p[k] for k in ("bonus_scale", "delta") if k in p}
        return ucbvi_hybrid(env, offline, cfg.n_on, env_rng, tie_rng=tie, seed=seed, **kw), None
    if cfg.agent == "lsvi_ucb":
        kw = {k: p[k] for k in ("lam", "beta_lin") if k in p}
        return lsvi_ucb_hybrid(env, feature_map, offline, cfg.n_on, env_rng, seed=seed, **kw), None
    fclass = setup.fclass
    n_off = len(offline) if offline is not None else 0
    beta = beta_schedule(n_off + cfg.n_on, env.horizon, len(fclass), p.get("delta", 0.1), p.get("c1", 1.0))
    return disc_golf_finite(env, fclass, offline, cfg.n_on, beta, env_rng, seed=seed)


def _latent_view(run, decoder):
    trajs = tuple(
        Trajectory(tuple(st._replace(state=int(decoder[st.state]), next_state=int(decoder[st.next_state])) for st in t), t.episode_index)
        for t in run.trajectories
    )
    return _View(run.n_on, trajs)


@dataclass(frozen=True)
class _View:
    n_on: int
    trajectories: tuple


def _metrics(cfg, setup, kind, arm, run, trace, offline, projector) -> dict:
    out = {}
    part = setup.partitions.get(kind)
    for m in cfg.metrics:
        if m == "coverage":
            for side, curve in empirical_partition_concentrability(run, setup.mdp, setup.mu[kind], part).items():
                out[f"coverage_{side}"] = curve.mean
        elif m == "visits":
            view = run if setup.decoder is None else _latent_view(run, setup.decoder)
            off, on = partition_visit_curves(view, part)
            out["visits_offline"], out["visits_online"] = off, on
        elif m == "avg_reward":
            out["avg_reward"] = reward_curve(run).mean
        elif m == "regret":
            out["regret"] = regret_curve(run, setup.v_star_raw).mean
        elif m == "eig_coverage":
            k = cfg.offline_rank
            eye = np.eye(projector.rank)
            curves = covariance_eig_curves(run.extras["online_features"], (Projector(eye[:, :k]), Projector(eye[:, k:])), k)
            for side, curve in curves.items():
                out[f"eig_{side}"] = curve.mean
        elif m == "latent_coverage":
            emission = setup.env_factory().emission
            prior = tuple(offline) if (arm == "hybrid" and offline is not None) else ()
            online = run.trajectories
            out["latent_coverage"] = np.array(
                [block_latent_coverage(prior + online[: t + 1], emission, part) for t in range(run.n_on)]
            )
        elif m == "confidence_set":
            out["qstar_in_set"] = trace.q_star_survived.astype(float)
            out["bellman_error"] = trace.bellman_error_mean
    return out


def run_trial(cfg: ExperimentConfig, trial_index: int) -> TrialResult:
    """One trial: for every behavior policy, a hybrid arm and a paired online-only arm."""
    start = time.perf_counter()
    seed = cfg.base_seed + trial_index
    setup = _setup(cfg)
    if cfg.agent == "disc_golf":
        setup.fclass = function_class(cfg, setup.mdp)
    curves, info = {}, {}
    online_cache = None
    for j, kind in enumerate(cfg.behavior_policies):
        try:
            offline = generate_offline_dataset(
                setup.env_factory(), setup.behaviors[kind], cfg.n_off, make_rng([seed, STREAM_OFFLINE, j])
            )
            feature_map, projector = (None, None)
            if cfg.agent == "lsvi_ucb":
                feature_map, projector = _feature_map(cfg, setup.env_factory(), offline)
            for arm in ARMS:
                data = offline if arm == "hybrid" else None
                if arm == "online" and online_cache is not None and projector is None:
                    run, trace = online_cache  # the online arm never sees behavior-dependent inputs
                else:
                    env = setup.env_factory()
                    run, trace = _run_agent(cfg, setup, env, data, feature_map, seed)
                    if isinstance(env, TetrisEnv):
                        info[f"{kind}/{arm}/game_overs"] = env.game_overs
                    if arm == "online":
                        online_cache = (run, trace)
                for name, values in _metrics(cfg, setup, kind, arm, run, trace, offline, projector).items():
                    curves[(kind, arm, name)] = np.asarray(values, dtype=float)
        except Exception as exc:
            raise TrialError(f"trial {trial_index} (seed {seed}, behavior {kind}): {type(exc).__name__}: {exc}") from exc
    env_seeds = {arm: [seed, STREAM_ENV] for arm in ARMS}
    offline_seeds = {kind: [seed, STREAM_OFFLINE, j] for j, kind in enumerate(cfg.behavior_policies)}
    return TrialResult(trial_index, seed, curves, env_seeds, offline_seeds, time.perf_counter() - start, info)


# --- output ---------------------------------------------------------------------


def resolve_output_dir(cfg: ExperimentConfig, out: str | Path | None = None) -> Path:
    root = out or os.environ.get(OUT_ENV_VAR) or cfg.output_dir or "runs"
    return Path(root) / cfg.name


def csv_stem(cfg: ExperimentConfig, kind: str, arm: str, name: str) -> str:
    """``{experiment}_{agent}_{metric}`` with experiment = name-behavior, agent = agent-arm."""
    return f"{cfg.name}-{kind}_{cfg.agent}-{arm}_{name}"


def _num(v: float) -> str:
    return repr(float(v))  # "inf" for infinite ratios


def curve_csv(curve: CoverageCurve) -> str:
    lines = ["episode,mean,lo,hi"]
    for t, (m, lo, hi) in enumerate(zip(curve.mean, curve.lo, curve.hi), start=1):
        lines.append(f"{t},{_num(m)},{_num(lo)},{_num(hi)}")
    return "\n".join(lines) + "\n"


def trials_csv(curve: CoverageCurve, seeds: list[int]) -> str:
    lines = ["episode," + ",".join(f"seed_{s}" for s in seeds)]
    for t in range(curve.trials.shape[1]):
        lines.append(f"{t + 1}," + ",".join(_num(v) for v in curve.trials[:, t]))
    return "\n".join(lines) + "\n"


def _aggregate(results: list[TrialResult]) -> dict:
    keys = list(results[0].curves)
    return {k: aggregate_trials([CoverageCurve.single(r.curves[k]) for r in results]) for k in keys}


def _write_outputs(cfg, curves, seeds, out_dir: Path, fmt: str) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    if fmt in ("csv", "both"):
        for (kind, arm, name), curve in curves.items():
            stem = csv_stem(cfg, kind, arm, name)
            for suffix, text in ((".csv", curve_csv(curve)), (".trials.csv", trials_csv(curve, seeds))):
                data = text.encode()
                (out_dir / (stem + suffix)).write_bytes(data)
                hashes[stem + suffix] = hashlib.sha256(data).hexdigest()
    if fmt in ("svg", "both"):
        names = sorted({(kind, name) for kind, _, name in curves}, key=lambda x: (cfg.behavior_policies.index(x[0]), x[1]))
        for kind, name in names:
            series = [
                Series(f"{cfg.agent} {arm}", c.mean, c.lo, c.hi)
                for arm in ARMS
                if (c := curves.get((kind, arm, name))) is not None
            ]
            log_y = name.startswith(LOG_SCALE_CURVES)
            svg = render_svg(series, title=f"{cfg.name}: {name} ({kind} behavior)", ylabel=name, log_y=log_y)
            (out_dir / f"{cfg.name}-{kind}_{cfg.agent}_{name}.svg").write_text(svg)
    return dict(sorted(hashes.items()))


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    *,
    parallel: int = 1,
    fmt: str = "both",
    write: bool = True,
) -> ExperimentManifest:
    """Run every trial (on ``parallel`` worker processes), aggregate in trial order, write outputs."""
    if fmt not in ("csv", "svg", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    start = time.perf_counter()
    task = partial(run_trial, cfg)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(task, range(cfg.trials)))
    else:
        results = [task(i) for i in range(cfg.trials)]
    results.sort(key=lambda r: r.trial)
    curves = _aggregate(results)
    seeds = [r.seed for r in results]

    path = resolve_output_dir(cfg, out_dir) if write else None
    hashes = _write_outputs(cfg, curves, seeds, path, fmt) if write else {}
    static = _static_diagnostics(cfg, _setup(cfg))
    manifest = ExperimentManifest(
        config=cfg.to_dict(),
        trials=[
            {
                "trial": r.trial,
                "seed": r.seed,
                "env_seed": r.env_seeds,
                "offline_seed": r.offline_seeds,
                "seconds": round(r.seconds, 3),
                **({"info": r.info} if r.info else {}),
            }
            for r in results
        ],
        library_version=__version__,
        timings={"total_seconds": round(time.perf_counter() - start, 3), "parallel": parallel},
        csv_sha256=hashes,
        static=static,
        output_dir=str(path) if path else None,
        curves=curves,
    )
    if write:
        (path / "manifest.json").write_text(manifest.to_json() + "\n")
        log.info("wrote %d files to %s", len(hashes), path)
    return manifest
