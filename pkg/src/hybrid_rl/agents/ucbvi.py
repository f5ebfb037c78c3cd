from __future__ import annotations

import numpy as np

from ..mdp import Dataset, DeterministicPolicy
from .common import ReplayState, RunRecord, rollout


class TabularModel:
    """Visit counts and empirical model for a tabular environment."""

    def __init__(self, horizon: int, num_states: int, num_actions: int):
        self.counts = np.zeros((horizon, num_states, num_actions))
        self.next_counts = np.zeros((horizon, num_states, num_actions, num_states))
        self.reward_sums = np.zeros((horizon, num_states, num_actions))

    def add(self, traj) -> None:
        for h, (s, a, r, s_next) in enumerate(traj):
            self.counts[h, s, a] += 1
            self.next_counts[h, s, a, s_next] += 1
            self.reward_sums[h, s, a] += r

    def estimates(self) -> tuple[np.ndarray, np.ndarray]:
        n = np.maximum(self.counts, 1.0)
        return self.next_counts / n[..., None], self.reward_sums / n


def hoeffding_bonus(counts: np.ndarray, horizon: int, log_term: float, bonus_scale: float) -> np.ndarray:
    return bonus_scale * horizon * np.sqrt(log_term / np.maximum(counts, 1.0))


def optimistic_plan(model: TabularModel, log_term: float, bonus_scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Optimistic backward induction; Q_h is clipped to [0, H - h] (steps remaining)."""
    P_hat, R_hat = model.estimates()
    H, S, A = R_hat.shape
    bonus = hoeffding_bonus(model.counts, H, log_term, bonus_scale)
    q = np.zeros((H, S, A))
    v_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        q[h] = np.clip(R_hat[h] + P_hat[h] @ v_next + bonus[h], 0.0, H - h)
        v_next = q[h].max(axis=1)
    return q, bonus


def greedy_actions(q: np.ndarray, tie_rng: np.random.Generator | None = None) -> np.ndarray:
    if tie_rng is None:
        return q.argmax(axis=-1)
    tied = q == q.max(axis=-1, keepdims=True)
    return np.where(tied, tie_rng.random(q.shape), -1.0).argmax(axis=-1)


def ucbvi_hybrid(
    env,
    offline: Dataset | None,
    n_on: int,
    rng: np.random.Generator,
    *,
    bonus_scale: float = 1.0,
    delta: float = 0.1,
    tie_rng: np.random.Generator | None = None,
    seed=None,
) -> RunRecord:
    """UCBVI with Hoeffding bonuses whose model is warm-started from ``offline``.

    Bonus: ``bonus_scale * H * sqrt(log(S A H N / delta) / max(1, n_h(s, a)))``
    with ``N`` the total number of offline plus online episodes. Ties in the
    greedy step go to the lowest action unless ``tie_rng`` is given, in which
    case they are broken uniformly from that stream.
    """
    H, S, A = env.horizon, env.num_states, env.num_actions
    replay = ReplayState(offline, H)
    model = TabularModel(H, S, A)
    for traj in replay.offline:
        model.add(traj)
    log_term = float(np.log(S * A * H * max(replay.n_off + n_on, 1) / delta))

    trajs, policies, values, bonuses = [], [], [], []
    for t in range(n_on):
        q, bonus = optimistic_plan(model, log_term, bonus_scale)
        actions = greedy_actions(q, tie_rng)
        traj = rollout(env, lambda h, s: actions[h, s], rng, t)
        s0 = traj.steps[0].state
        values.append(q[0, s0].max())
        bonuses.append(np.mean([bonus[h, st.state, st.action] for h, st in enumerate(traj)]))
        policies.append(DeterministicPolicy(actions))
        trajs.append(traj)
        replay.append(traj)
        model.add(traj)

    return RunRecord(
        agent_name="ucbvi",
        env_name=getattr(env, "name", "tabular"),
        seed=seed,
        n_off=replay.n_off,
        trajectories=tuple(trajs),
        policies=tuple(policies),
        value_estimates=np.array(values),
        bonus_magnitudes=np.array(bonuses),
        reward_scale=env.reward_scale,
        reward_offset=env.reward_offset,
        extras={"counts": model.counts.copy()},
    )
