"""Finite episodic MDPs and exact dynamic-programming oracles.

Steps are indexed ``h = 0 .. H-1`` throughout the package; arrays are laid out
``(h, s, a)`` for per-step quantities and ``(h, s, a, s')`` for transitions.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

INPUT_TOL = 1e-12
DERIVED_TOL = 1e-9


class InvalidMDPError(ValueError):
    pass


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox stream; ``seed`` may be an int or a sequence of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    # inverse-CDF with one uniform draw per sample keeps streams aligned across code paths
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


@dataclass(frozen=True, eq=False)
class TabularMDP:
    transition: np.ndarray  # (H, S, A, S)
    reward: np.ndarray  # (H, S, A), in [0, 1]
    initial_state: int = 0
    reward_scale: float = 1.0  # raw reward = reward_offset + reward_scale * reward
    reward_offset: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        if P.ndim != 4 or R.ndim != 3 or P.shape[:3] != R.shape or P.shape[1] != P.shape[3]:
            raise InvalidMDPError(
                f"shape mismatch: transition {P.shape} must be (H,S,A,S) and reward {R.shape} (H,S,A)"
            )
        P.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def horizon(self) -> int:
        return self.reward.shape[0]

    @property
    def num_states(self) -> int:
        return self.reward.shape[1]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[2]

    def to_json(self) -> str:
        doc = {
            "S": self.num_states,
            "A": self.num_actions,
            "H": self.horizon,
            "s0": self.initial_state,
            "P": self.transition.tolist(),
            "R": self.reward.tolist(),
        }
        if self.reward_scale != 1.0 or self.reward_offset != 0.0:
            doc["reward_scale"] = self.reward_scale
            doc["reward_offset"] = self.reward_offset
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TabularMDP":
        doc = json.loads(text)
        mdp = cls(
            np.array(doc["P"], dtype=float),
            np.array(doc["R"], dtype=float),
            doc["s0"],
            doc.get("reward_scale", 1.0),
            doc.get("reward_offset", 0.0),
        )
        if (mdp.num_states, mdp.num_actions, mdp.horizon) != (doc["S"], doc["A"], doc["H"]):
            raise InvalidMDPError("declared S/A/H disagree with array shapes")
        return mdp


def validate(mdp: TabularMDP) -> None:
    """Raise :class:`InvalidMDPError` naming the first violated invariant."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    if min(H, S, A) < 1:
        raise InvalidMDPError(f"need positive H, S, A; got H={H} S={S} A={A}")
    if not 0 <= mdp.initial_state < S:
        raise InvalidMDPError(f"initial_state {mdp.initial_state} outside [0, {S})")
    neg = np.argwhere(mdp.transition < 0)
    if len(neg):
        h, s, a, s2 = neg[0]
        raise InvalidMDPError(f"negative transition probability at (h={h}, s={s}, a={a}) -> s'={s2}")
    sums = mdp.transition.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > INPUT_TOL)
    if len(bad):
        h, s, a = bad[0]
        raise InvalidMDPError(f"transition row (h={h}, s={s}, a={a}) sums to {sums[h, s, a]!r}")
    bad = np.argwhere((mdp.reward < 0) | (mdp.reward > 1) | ~np.isfinite(mdp.reward))
    if len(bad):
        h, s, a = bad[0]
        raise InvalidMDPError(f"reward at (h={h}, s={s}, a={a}) is {mdp.reward[h, s, a]!r}, outside [0, 1]")


@dataclass(frozen=True, eq=False)
class DeterministicPolicy:
    action: np.ndarray  # (H, S) ints

    def __post_init__(self):
        act = np.asarray(self.action, dtype=np.int64)
        act.setflags(write=False)
        object.__setattr__(self, "action", act)

    def to_stochastic(self, num_actions: int) -> "StochasticPolicy":
        probs = np.zeros(self.action.shape + (num_actions,))
        np.put_along_axis(probs, self.action[..., None], 1.0, axis=-1)
        return StochasticPolicy(probs)

    def sample(self, h: int, state: int, rng: np.random.Generator) -> int:
        return int(self.action[h, state])


@dataclass(frozen=True, eq=False)
class StochasticPolicy:
    probs: np.ndarray  # (H, S, A)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3:
            raise ValueError(f"policy probs must be (H, S, A), got {p.shape}")
        if (p < 0).any() or np.abs(p.sum(axis=-1) - 1.0).max() > INPUT_TOL:
            raise ValueError("policy rows must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, horizon: int, num_states: int, num_actions: int) -> "StochasticPolicy":
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    def sample(self, h: int, state: int, rng: np.random.Generator) -> int:
        return sample_index(self.probs[h, state], rng)


def as_stochastic(policy, num_actions: int) -> StochasticPolicy:
    if isinstance(policy, DeterministicPolicy):
        return policy.to_stochastic(num_actions)
    return policy


@dataclass(frozen=True, eq=False)
class OccupancyTensor:
    density: np.ndarray  # (H, S, A)

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "density", d)

    def check(self, tol: float = DERIVED_TOL) -> None:
        err = np.abs(self.density.sum(axis=(1, 2)) - 1.0)
        if err.max() > tol:
            raise ValueError(f"occupancy slice h={int(err.argmax())} sums to {1 - err.max():.12g}")


class Step(NamedTuple):
    state: object
    action: int
    reward: float
    next_state: object


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    episode_index: int = 0

    def __post_init__(self):
        steps = tuple(Step(*st) for st in self.steps)
        object.__setattr__(self, "steps", steps)
        for t, st in enumerate(steps):
            if not 0.0 <= st.reward <= 1.0:
                raise ValueError(f"reward {st.reward} at step {t} outside [0, 1]")
            if t + 1 < len(steps) and st.next_state != steps[t + 1].state:
                raise ValueError(f"trajectory breaks between steps {t} and {t + 1}")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Step]:
        return iter(self.steps)

    @property
    def total_reward(self) -> float:
        return float(sum(st.reward for st in self.steps))


@dataclass(frozen=True)
class Dataset:
    trajectories: tuple[Trajectory, ...] = ()
    source_tag: str = "offline"

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        object.__setattr__(self, "trajectories", trajs)
        if self.source_tag not in ("offline", "online"):
            raise ValueError(f"source_tag must be 'offline' or 'online', not {self.source_tag!r}")
        if len({len(t) for t in trajs}) > 1:
            raise ValueError("all trajectories in a dataset must share one horizon")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    @property
    def horizon(self) -> int | None:
        return len(self.trajectories[0]) if self.trajectories else None

    def transitions_at(self, h: int) -> list[Step]:
        return [traj.steps[h] for traj in self.trajectories]


# --- dynamic programming -------------------------------------------------------


def bellman_backup(mdp: TabularMDP, h: int, v_next: np.ndarray) -> np.ndarray:
    """R_h + P_h v_next, shape (S, A)."""
    return mdp.reward[h] + mdp.transition[h] @ v_next


def optimal_values(mdp: TabularMDP) -> tuple[np.ndarray, np.ndarray]:
    """Backward induction. Returns ``q`` of shape (H, S, A) and ``v`` of shape (H, S)."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    q = np.zeros((H, S, A))
    v = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        q[h] = bellman_backup(mdp, h, v[h + 1])
        v[h] = q[h].max(axis=1)
    return q, v[:H]


def greedy(q: np.ndarray) -> DeterministicPolicy:
    """Greedy policy w.r.t. ``q`` of shape (H, S, A); ties go to the lowest action index."""
    return DeterministicPolicy(np.argmax(q, axis=-1))


def policy_q_values(mdp: TabularMDP, policy) -> np.ndarray:
    pi = as_stochastic(policy, mdp.num_actions).probs
    q = np.zeros(mdp.reward.shape)
    v_next = np.zeros(mdp.num_states)
    for h in range(mdp.horizon - 1, -1, -1):
        q[h] = bellman_backup(mdp, h, v_next)
        v_next = (pi[h] * q[h]).sum(axis=1)
    return q


def policy_value(mdp: TabularMDP, policy) -> float:
    """V^pi at step 0 from the initial state."""
    pi = as_stochastic(policy, mdp.num_actions).probs
    q = policy_q_values(mdp, policy)
    return float(pi[0, mdp.initial_state] @ q[0, mdp.initial_state])


def policy_occupancy(mdp: TabularMDP, policy) -> OccupancyTensor:
    pi = as_stochastic(policy, mdp.num_actions).probs
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    d = np.zeros((H, S, A))
    state_dist = np.zeros(S)
    state_dist[mdp.initial_state] = 1.0
    for h in range(H):
        d[h] = state_dist[:, None] * pi[h]
        state_dist = np.einsum("sa,sat->t", d[h], mdp.transition[h])
    return OccupancyTensor(d)


def max_occupancy_table(mdp: TabularMDP) -> np.ndarray:
    """sup over policies of d^pi_h(s, a) for every cell, shape (H, S, A).

    For each target (h, s) we solve the auxiliary MDP whose only reward is the
    indicator of reaching s at step h; the value from the initial state is the
    largest reachable probability, and any action at the target is free.
    """
    H, S = mdp.horizon, mdp.num_states
    out = np.zeros(mdp.reward.shape)
    for h in range(H):
        # reach[target, s] = max prob of being at `target` at step h starting from s at step k
        reach = np.eye(S)
        for k in range(h - 1, -1, -1):
            reach = np.einsum("sau,tu->tsa", mdp.transition[k], reach).max(axis=2)
        out[h] = reach[:, mdp.initial_state][:, None]
    return out


def max_occupancy(mdp: TabularMDP, h: int, s: int, a: int) -> float:
    """sup_pi d^pi_h(s, a), via backward induction on an indicator-reward MDP."""
    if not (0 <= h < mdp.horizon and 0 <= s < mdp.num_states and 0 <= a < mdp.num_actions):
        raise IndexError(f"cell (h={h}, s={s}, a={a}) out of range")
    v = np.zeros(mdp.num_states)
    v[s] = 1.0  # choosing `a` at step h is always available
    for k in range(h - 1, -1, -1):
        v = (mdp.transition[k] @ v).max(axis=1)
    return float(v[mdp.initial_state])


def all_deterministic_policies(horizon: int, num_states: int, num_actions: int) -> Iterator[DeterministicPolicy]:
    """Every one of the A^(S*H) deterministic Markov policies. Exponential; tiny MDPs only."""
    for combo in itertools.product(range(num_actions), repeat=horizon * num_states):
        yield DeterministicPolicy(np.array(combo).reshape(horizon, num_states))


# --- sampling -------------------------------------------------------------------


def sample_episode(mdp: TabularMDP, policy, rng: np.random.Generator, episode_index: int = 0) -> Trajectory:
    s = mdp.initial_state
    steps = []
    for h in range(mdp.horizon):
        a = policy.sample(h, s, rng)
        s_next = sample_index(mdp.transition[h, s, a], rng)
        steps.append(Step(s, a, float(mdp.reward[h, s, a]), s_next))
        s = s_next
    return Trajectory(tuple(steps), episode_index)


def sample_batch(mdp: TabularMDP, policy, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised rollouts: ``states`` (n, H+1) and ``actions`` (n, H)."""
    pi = as_stochastic(policy, mdp.num_actions).probs
    H = mdp.horizon
    states = np.empty((n, H + 1), dtype=np.int64)
    actions = np.empty((n, H), dtype=np.int64)
    states[:, 0] = mdp.initial_state
    for h in range(H):
        s = states[:, h]
        cdf = np.cumsum(pi[h, s], axis=1)
        a = np.minimum((rng.random((n, 1)) >= cdf).sum(axis=1), mdp.num_actions - 1)
        actions[:, h] = a
        cdf = np.cumsum(mdp.transition[h, s, a], axis=1)
        states[:, h + 1] = np.minimum((rng.random((n, 1)) >= cdf).sum(axis=1), mdp.num_states - 1)
    return states, actions


def empirical_occupancy(states: np.ndarray, actions: np.ndarray, num_states: int, num_actions: int) -> np.ndarray:
    n, H = actions.shape
    counts = np.zeros((H, num_states, num_actions))
    for h in range(H):
        np.add.at(counts[h], (states[:, h], actions[:, h]), 1.0)
    return counts / max(n, 1)


def trajectories_to_arrays(trajectories: Sequence[Trajectory]) -> tuple[np.ndarray, np.ndarray]:
    states = np.array([[st.state for st in t] + [t.steps[-1].next_state] for t in trajectories], dtype=np.int64)
    actions = np.array([[st.action for st in t] for t in trajectories], dtype=np.int64)
    return states, actions


def arrays_to_dataset(mdp: TabularMDP, states: np.ndarray, actions: np.ndarray, source_tag: str = "offline") -> Dataset:
    """Inverse of ``trajectories_to_arrays`` for batches drawn with ``sample_batch``."""
    rewards = mdp.reward[np.arange(mdp.horizon), states[:, :-1], actions].tolist()
    s_list, a_list = states.tolist(), actions.tolist()
    trajs = []
    for i, (s, a, r) in enumerate(zip(s_list, a_list, rewards)):
        steps = tuple(Step(s[h], a[h], r[h], s[h + 1]) for h in range(len(a)))
        trajs.append(Trajectory(steps, i))
    return Dataset(tuple(trajs), source_tag)
