"""Experiment configuration: TOML (or JSON) files mapped onto a frozen dataclass.

Schema::

    name = "forest_repro"
    trials = 30
    base_seed = 0
    n_off = 100
    n_on = 200
    behavior_policies = ["adversarial", "optimal"]
    metrics = ["coverage", "visits", "avg_reward"]
    output_dir = "runs"            # optional; CLI --out and HYBRID_RL_OUT take precedence

    [environment]
    name = "forest"
    params = { fire_probability = 0.1 }

    [agent]
    name = "ucbvi"
    params = { bonus_scale = 0.1, tie_break = "random" }

    [partition]                    # tabular: occupancy threshold (default 1/(S*A))
    threshold = 0.125              # linear: svd_rank and offline_rank instead
"""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..agents import AGENTS
from ..environments import ENVIRONMENTS

BEHAVIOR_KINDS = ("optimal", "uniform", "adversarial")
TABULAR_ENVS = ("forest", "random")

# metric -> environments it is defined for
METRIC_ENVS = {
    "coverage": TABULAR_ENVS,
    "visits": TABULAR_ENVS + ("block",),
    "avg_reward": tuple(ENVIRONMENTS),
    "regret": TABULAR_ENVS + ("block",),
    "eig_coverage": ("tetris",),
    "latent_coverage": ("block",),
    "confidence_set": TABULAR_ENVS,
}
AGENT_ENVS = {
    "ucbvi": TABULAR_ENVS + ("block",),
    "lsvi_ucb": tuple(ENVIRONMENTS),
    "disc_golf": TABULAR_ENVS,
}
AGENT_PARAMS = {
    "ucbvi": {"bonus_scale", "delta", "tie_break"},
    "lsvi_ucb": {"lam", "beta_lin"},
    "disc_golf": {"c1", "delta", "num_candidates"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    env: str
    agent: str
    n_on: int
    n_off: int = 0
    trials: int = 1
    base_seed: int = 0
    env_params: dict = field(default_factory=dict)
    agent_params: dict = field(default_factory=dict)
    behavior_policies: tuple[str, ...] = ("uniform",)
    metrics: tuple[str, ...] = ("avg_reward",)
    partition: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "behavior_policies", tuple(self.behavior_policies))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        self.check()

    def check(self) -> None:
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.env!r}; registered: {sorted(ENVIRONMENTS)}")
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}; registered: {sorted(AGENTS)}")
        if self.env not in AGENT_ENVS[self.agent]:
            raise ConfigError(f"agent {self.agent!r} does not run on environment {self.env!r}")
        unknown = set(self.agent_params) - AGENT_PARAMS[self.agent]
        if unknown:
            raise ConfigError(f"unknown {self.agent} parameters: {sorted(unknown)}")
        if self.agent_params.get("tie_break", "lowest") not in ("lowest", "random"):
            raise ConfigError("tie_break must be 'lowest' or 'random'")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_on < 1:
            raise ConfigError("n_on must be >= 1")
        if self.n_off < 0:
            raise ConfigError("n_off must be >= 0")
        if not self.behavior_policies:
            raise ConfigError("at least one behavior policy is required")
        for kind in self.behavior_policies:
            if kind not in BEHAVIOR_KINDS:
                raise ConfigError(f"unknown behavior policy {kind!r}; known: {list(BEHAVIOR_KINDS)}")
        if self.env == "tetris" and self.behavior_policies != ("uniform",):
            raise ConfigError("tetris has no optimal Q table; only the uniform behavior policy applies")
        for m in self.metrics:
            if m not in METRIC_ENVS:
                raise ConfigError(f"unknown metric {m!r}; known: {sorted(METRIC_ENVS)}")
            if self.env not in METRIC_ENVS[m]:
                raise ConfigError(f"metric {m!r} is not defined for environment {self.env!r}")
        if "coverage" in self.metrics and self.agent == "lsvi_ucb":
            raise ConfigError("coverage needs tabular policy snapshots; use ucbvi or disc_golf")
        if "confidence_set" in self.metrics and self.agent != "disc_golf":
            raise ConfigError("confidence_set is only recorded by disc_golf")
        if self.env == "tetris" and self.agent == "lsvi_ucb":
            rank, k = self.svd_rank, self.offline_rank
            if rank is not None and not 1 <= k < rank:
                raise ConfigError(f"offline_rank {k} must lie in [1, svd_rank={rank})")
            if rank is not None and self.n_off == 0:
                raise ConfigError("the SVD projection is estimated from offline data; n_off must be > 0")
            if "eig_coverage" in self.metrics and rank is None:
                raise ConfigError("eig_coverage needs partition.svd_rank")

    @property
    def svd_rank(self) -> int | None:
        return self.partition.get("svd_rank")

    @property
    def offline_rank(self) -> int:
        return int(self.partition.get("offline_rank", 5))

    def seeds(self) -> list[int]:
        """Per-trial seeds: base_seed + trial_index."""
        return [self.base_seed + i for i in range(self.trials)]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["behavior_policies"] = list(self.behavior_policies)
        d["metrics"] = list(self.metrics)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        env = raw.pop("environment", None)
        agent = raw.pop("agent", None)
        if isinstance(env, dict):
            raw["env"], raw["env_params"] = env.get("name"), env.get("params", {})
        elif env is not None:
            raw["env"] = env
        if isinstance(agent, dict):
            raw["agent"], raw["agent_params"] = agent.get("name"), agent.get("params", {})
        elif agent is not None:
            raw["agent"] = agent
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"name", "env", "agent", "n_on"} - {k for k, v in raw.items() if v is not None}
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def shipped_configs() -> list[str]:
    root = resources.files("hybrid_rl") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_config(source: str | Path) -> ExperimentConfig:
    """Load from a .toml/.json path, or by the name of a shipped config."""
    path = Path(source)
    if not path.exists():
        if str(source) in shipped_configs():
            text = (resources.files("hybrid_rl") / "configs" / f"{source}.toml").read_text()
            return _parse(text, "toml", str(source))
        raise ConfigError(f"config {source!r} not found (shipped: {shipped_configs()})")
    kind = "json" if path.suffix == ".json" else "toml"
    return _parse(path.read_text(), kind, str(path))


def _parse(text: str, kind: str, origin: str) -> ExperimentConfig:
    try:
        raw = json.loads(text) if kind == "json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return ExperimentConfig.from_dict(raw)
