from .common import (
    ReplayState,
    RunRecord,
    UniformPolicy,
    generate_offline_dataset,
    make_behavior_policy,
    rollout,
)
from .disc_golf import (
    ConfidenceSetTrace,
    EmptyConfidenceSetError,
    FiniteFunctionClass,
    beta_schedule,
    confidence_set,
    disc_golf_finite,
    product_complete_class,
)
from .lsvi_ucb import RidgeState, lsvi_ucb_hybrid
from .ucbvi import TabularModel, optimistic_plan, ucbvi_hybrid

AGENTS = {"ucbvi": ucbvi_hybrid, "lsvi_ucb": lsvi_ucb_hybrid, "disc_golf": disc_golf_finite}

__all__ = [
    "AGENTS",
    "ConfidenceSetTrace",
    "EmptyConfidenceSetError",
    "FiniteFunctionClass",
    "ReplayState",
    "RidgeState",
    "RunRecord",
    "TabularModel",
    "UniformPolicy",
    "beta_schedule",
    "confidence_set",
    "disc_golf_finite",
    "generate_offline_dataset",
    "lsvi_ucb_hybrid",
    "make_behavior_policy",
    "optimistic_plan",
    "product_complete_class",
    "rollout",
    "ucbvi_hybrid",
]
