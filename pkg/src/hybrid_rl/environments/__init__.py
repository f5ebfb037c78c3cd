from __future__ import annotations

from .block import BlockEmission, BlockEnv, block_wrap
from .features import (
    FeatureMap,
    Projector,
    RankDeficiencyError,
    indexed_feature_map,
    projected_feature_map,
    svd_projector,
    tabular_one_hot,
)
from .tabular import ForestParams, TabularEnv, build_forest, build_random_tabular
from .tetris import TetrisConfig, TetrisEnv, TetrisState, one_hot_features, tetris_step


def _forest(params):
    return TabularEnv(build_forest(ForestParams(**params)), name="forest")


def _random(params):
    p = {"seed": 0, "S": 3, "A": 2, "H": 5, "sparsity": 0.0, **params}
    return TabularEnv(build_random_tabular(p["seed"], p["S"], p["A"], p["H"], p["sparsity"]), name="random")


def _tetris(params):
    return TetrisEnv(TetrisConfig(**params))


def _block(params):
    p = {"seed": 0, "latent_states": 3, "A": 2, "H": 5, "contexts_per_state": 3, **params}
    latent = build_random_tabular(p["seed"], p["latent_states"], p["A"], p["H"])
    return block_wrap(BlockEmission.uniform_blocks(latent, p["contexts_per_state"]))


ENVIRONMENTS = {"forest": _forest, "tetris": _tetris, "random": _random, "block": _block}


def make_env(name: str, params: dict | None = None):
    try:
        builder = ENVIRONMENTS[name]
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; registered: {sorted(ENVIRONMENTS)}") from None
    return builder(dict(params or {}))


__all__ = [
    "BlockEmission",
    "BlockEnv",
    "ENVIRONMENTS",
    "FeatureMap",
    "ForestParams",
    "Projector",
    "RankDeficiencyError",
    "TabularEnv",
    "TetrisConfig",
    "TetrisEnv",
    "TetrisState",
    "block_wrap",
    "build_forest",
    "build_random_tabular",
    "indexed_feature_map",
    "make_env",
    "one_hot_features",
    "projected_feature_map",
    "svd_projector",
    "tabular_one_hot",
    "tetris_step",
]
