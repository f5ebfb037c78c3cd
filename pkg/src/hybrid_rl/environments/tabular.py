from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mdp import TabularMDP, make_rng, sample_index, validate


class TabularEnv:
    """Stepping wrapper around a :class:`TabularMDP`.

    ``reset`` consumes no randomness (the start state is fixed); ``step``
    consumes exactly one uniform draw.
    """

    name = "tabular"

    def __init__(self, mdp: TabularMDP, name: str | None = None):
        validate(mdp)
        self.mdp = mdp
        if name:
            self.name = name

    @property
    def horizon(self) -> int:
        return self.mdp.horizon

    @property
    def num_states(self) -> int:
        return self.mdp.num_states

    @property
    def num_actions(self) -> int:
        return self.mdp.num_actions

    @property
    def reward_scale(self) -> float:
        return self.mdp.reward_scale

    @property
    def reward_offset(self) -> float:
        return self.mdp.reward_offset

    def reset(self, rng: np.random.Generator) -> int:
        return self.mdp.initial_state

    def step(self, h: int, state: int, action: int, rng: np.random.Generator) -> tuple[int, float]:
        s_next = sample_index(self.mdp.transition[h, state, action], rng)
        return s_next, float(self.mdp.reward[h, state, action])


@dataclass
class ForestParams:
    num_states: int = 4
    horizon: int = 20
    fire_probability: float = 0.1
    wait_reward_at_max: float = 4.0
    cut_rewards: dict[int, float] | None = field(default=None)

    def __post_init__(self):
        if self.num_states < 2 or self.horizon < 1:
            raise ValueError("forest needs num_states >= 2 and horizon >= 1")
        if not 0.0 <= self.fire_probability <= 1.0:
            raise ValueError(f"fire_probability {self.fire_probability} outside [0, 1]")
        if self.cut_rewards is None:
            # ages 1..S-2 give 1, the oldest stand gives 2, age 0 gives nothing
            self.cut_rewards = {age: 1.0 for age in range(1, self.num_states - 1)}
            self.cut_rewards[self.num_states - 1] = 2.0
        self.cut_rewards = {int(k): float(v) for k, v in self.cut_rewards.items()}


WAIT, CUT = 0, 1


def build_forest(params: ForestParams | None = None) -> TabularMDP:
    """Forest-management MDP with rewards divided by the largest raw reward.

    Reward depends on the age at decision time. Each year the stand burns to
    age 0 with ``fire_probability`` whatever the action; cutting also resets to 0.
    """
    p = params or ForestParams()
    S, H, fire = p.num_states, p.horizon, p.fire_probability
    P = np.zeros((S, 2, S))
    R = np.zeros((S, 2))
    for age in range(S):
        P[age, WAIT, min(age + 1, S - 1)] += 1.0 - fire
        P[age, WAIT, 0] += fire
        P[age, CUT, 0] = 1.0
        R[age, CUT] = p.cut_rewards.get(age, 0.0)
    R[S - 1, WAIT] = p.wait_reward_at_max
    scale = float(np.abs(R).max()) or 1.0
    mdp = TabularMDP(
        np.broadcast_to(P, (H, S, 2, S)).copy(),
        np.broadcast_to(R / scale, (H, S, 2)).copy(),
        initial_state=0,
        reward_scale=scale,
    )
    validate(mdp)
    return mdp


def build_random_tabular(seed, S: int, A: int, H: int, sparsity: float = 0.0) -> TabularMDP:
    """Random MDP: Dirichlet(1 - sparsity) transition rows, U[0, 1] rewards.

    ``sparsity = 1`` degenerates to one-hot rows at the argmax of a flat
    Dirichlet draw, i.e. deterministic transitions.
    """
    if min(S, A, H) < 1:
        raise ValueError("S, A, H must be >= 1")
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity {sparsity} outside [0, 1]")
    rng = make_rng(seed)
    alpha = 1.0 - sparsity
    if alpha <= 1e-3:
        draws = rng.dirichlet(np.ones(S), size=(H, S, A))
        P = np.zeros_like(draws)
        np.put_along_axis(P, draws.argmax(axis=-1)[..., None], 1.0, axis=-1)
    else:
        P = rng.dirichlet(np.full(S, alpha), size=(H, S, A))
        P /= P.sum(axis=-1, keepdims=True)
    R = rng.random((H, S, A))
    mdp = TabularMDP(P, R, initial_state=0)
    validate(mdp)
    return mdp
