from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..mdp import Dataset, StochasticPolicy, Step, Trajectory, sample_index


class UniformPolicy:
    """Uniform over actions for environments without an enumerable state space."""

    def __init__(self, num_actions: int):
        self.num_actions = num_actions
        self._probs = np.full(num_actions, 1.0 / num_actions)

    def sample(self, h: int, state, rng: np.random.Generator) -> int:
        return sample_index(self._probs, rng)


def make_behavior_policy(kind: str, q_star: np.ndarray, adversarial_weight: float = 0.6) -> StochasticPolicy:
    """Behavior policy derived from the optimal Q table (H, S, A).

    ``adversarial`` plays the lowest-index non-greedy action with probability
    ``adversarial_weight`` and a uniform action otherwise.
    """
    H, S, A = q_star.shape
    greedy_actions = q_star.argmax(axis=-1)
    probs = np.zeros((H, S, A))
    if kind == "optimal":
        np.put_along_axis(probs, greedy_actions[..., None], 1.0, axis=-1)
    elif kind == "uniform":
        probs[:] = 1.0 / A
    elif kind == "adversarial":
        if A == 1:
            probs[:] = 1.0
        else:
            base = (1.0 - adversarial_weight) / A
            probs[:] = base
            # lowest index that is not the greedy one: 0 unless greedy is 0
            opposite = np.where(greedy_actions == 0, 1, 0)
            np.put_along_axis(probs, opposite[..., None], base + adversarial_weight, axis=-1)
    else:
        raise ValueError(f"unknown behavior policy kind {kind!r}")
    return StochasticPolicy(probs)


def rollout(env, act: Callable[[int, object], int], rng: np.random.Generator, episode_index: int = 0) -> Trajectory:
    state = env.reset(rng)
    steps = []
    for h in range(env.horizon):
        action = int(act(h, state))
        next_state, reward = env.step(h, state, action, rng)
        steps.append(Step(state, action, reward, next_state))
        state = next_state
    return Trajectory(tuple(steps), episode_index)


def generate_offline_dataset(env, policy, n_episodes: int, rng: np.random.Generator) -> Dataset:
    trajs = [rollout(env, lambda h, s: policy.sample(h, s, rng), rng, i) for i in range(n_episodes)]
    return Dataset(tuple(trajs), source_tag="offline")


class ReplayState:
    """Offline transitions (frozen) followed by an append-only online log."""

    def __init__(self, offline: Dataset | None, horizon: int):
        self.offline = offline if offline is not None else Dataset()
        if self.offline.horizon not in (None, horizon):
            raise ValueError(f"offline horizon {self.offline.horizon} != environment horizon {horizon}")
        self.horizon = horizon
        self.online: list[Trajectory] = []

    def append(self, traj: Trajectory) -> None:
        if len(traj) != self.horizon:
            raise ValueError("online trajectory has the wrong length")
        self.online.append(traj)

    def transitions(self, h: int) -> list[Step]:
        return [t.steps[h] for t in self.offline] + [t.steps[h] for t in self.online]

    @property
    def n_off(self) -> int:
        return len(self.offline)

    @property
    def n_on(self) -> int:
        return len(self.online)


@dataclass(frozen=True, eq=False)
class RunRecord:
    agent_name: str
    env_name: str
    seed: object
    n_off: int
    trajectories: tuple[Trajectory, ...]
    policies: tuple  # per-episode greedy snapshot (DeterministicPolicy or weight array)
    value_estimates: np.ndarray  # optimistic value at the episode's start state
    bonus_magnitudes: np.ndarray  # mean bonus along the executed trajectory
    reward_scale: float = 1.0
    reward_offset: float = 0.0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.trajectories) != len(self.policies):
            raise ValueError("one policy snapshot per episode")

    @property
    def n_on(self) -> int:
        return len(self.trajectories)

    @property
    def horizon(self) -> int:
        return len(self.trajectories[0]) if self.trajectories else 0

    def returns(self) -> np.ndarray:
        return np.array([t.total_reward for t in self.trajectories])

    def raw_returns(self) -> np.ndarray:
        """Episode returns on the environment's native reward scale."""
        return self.reward_offset * self.horizon + self.reward_scale * self.returns()

