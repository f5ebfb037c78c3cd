"""Optimistic confidence-set learner over an explicit, enumerable Q-function class.

The confidence set keeps every tuple whose squared Bellman loss on the
offline-plus-online buffer is within ``beta`` of the best h-component, for
every step. Each episode plays greedily w.r.t. the surviving member with the
largest optimistic start value.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..mdp import Dataset, DeterministicPolicy, TabularMDP, bellman_backup, optimal_values
from .common import ReplayState, RunRecord, rollout

COMPLETENESS_TOL = 1e-9
MAX_MEMBERS = 10_000


class EmptyConfidenceSetError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteFunctionClass:
    members: np.ndarray  # (M, H, S, A), values in [0, H]
    completeness_closure: bool = False

    def __post_init__(self):
        m = np.asarray(self.members, dtype=float)
        if m.ndim != 4 or m.shape[0] == 0:
            raise ValueError("members must be a nonempty (M, H, S, A) array")
        H = m.shape[1]
        if m.min() < 0 or m.max() > H:
            raise ValueError(f"member values must lie in [0, {H}]")
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    def __len__(self) -> int:
        return self.members.shape[0]

    @property
    def horizon(self) -> int:
        return self.members.shape[1]

    def check_completeness(self, mdp: TabularMDP) -> None:
        """Every backup T_h f_{h+1} must match some member's h-component."""
        H = self.horizon
        for h in range(H):
            comps = self.members[:, h]
            for i, f in enumerate(self.members):
                v_next = f[h + 1].max(axis=1) if h + 1 < H else np.zeros(mdp.num_states)
                target = bellman_backup(mdp, h, v_next)
                gaps = np.abs(comps - target).max(axis=(1, 2))
                if gaps.min() > COMPLETENESS_TOL:
                    raise ValueError(f"class not closed: T_{h} of member {i} is {gaps.min():.3g} from every member")

    @classmethod
    def complete(cls, members, mdp: TabularMDP) -> "FiniteFunctionClass":
        fc = cls(members, completeness_closure=True)
        fc.check_completeness(mdp)
        return fc

    def index_of(self, q: np.ndarray, tol: float = COMPLETENESS_TOL) -> int | None:
        gaps = np.abs(self.members - q).max(axis=(1, 2, 3))
        i = int(gaps.argmin())
        return i if gaps[i] <= tol else None


def product_complete_class(mdp: TabularMDP, last_step: list[np.ndarray], max_members: int = MAX_MEMBERS) -> FiniteFunctionClass:
    """Bellman-complete product class from candidate last-step functions.

    F_{H-1} is ``last_step`` (which must contain R_{H-1}); each earlier F_h is
    the image of F_{h+1} under the exact backup. The class is F_0 x ... x F_{H-1}.
    """
    H = mdp.horizon
    layers: list[list[np.ndarray]] = [None] * H
    layers[H - 1] = [np.asarray(g, dtype=float) for g in last_step]
    for h in range(H - 2, -1, -1):
        layers[h] = _dedupe([bellman_backup(mdp, h, g.max(axis=1)) for g in layers[h + 1]])
    size = int(np.prod([len(layer) for layer in layers], dtype=object))
    if size > max_members:
        raise ValueError(f"product class would have {size} members (limit {max_members})")
    members = np.array([np.stack(combo) for combo in itertools.product(*layers)])
    return FiniteFunctionClass.complete(members, mdp)


def _dedupe(fs):
    out = []
    for f in fs:
        if all(np.abs(f - g).max() > COMPLETENESS_TOL for g in out):
            out.append(f)
    return out


def beta_schedule(n_total: int, horizon: int, class_size: int, delta: float, c1: float = 1.0) -> float:
    """Confidence width c1 * log(N * H * |F| / delta)."""
    if min(n_total, horizon, class_size) <= 0 or delta <= 0:
        raise ValueError("all arguments must be positive")
    return float(c1 * np.log(n_total * horizon * class_size / delta))


class LossStatistics:
    """Per-step sufficient statistics of the buffer for squared Bellman losses."""

    def __init__(self, horizon: int, num_states: int, num_actions: int):
        shape = (horizon, num_states, num_actions, num_states)
        self.counts = np.zeros(shape)
        self.reward_sums = np.zeros(shape)
        self.reward_sq = np.zeros(shape)

    def add(self, traj) -> None:
        for h, (s, a, r, s_next) in enumerate(traj):
            self.counts[h, s, a, s_next] += 1
            self.reward_sums[h, s, a, s_next] += r
            self.reward_sq[h, s, a, s_next] += r * r

    def loss_matrix(self, h: int, comps: np.ndarray, next_values: np.ndarray) -> np.ndarray:
        """L[i, j] = sum over buffer at step h of (comps[i](s,a) - r - next_values[j](s'))^2."""
        N, Rs, R2 = self.counts[h], self.reward_sums[h], self.reward_sq[h]
        x = comps  # (M, S, A)
        y = next_values  # (M, S')
        n_sa = N.sum(axis=2)
        r_sa = Rs.sum(axis=2)
        term_xx = np.einsum("isa,sa->i", x * x, n_sa)
        term_xr = np.einsum("isa,sa->i", x, r_sa)
        term_xy = np.einsum("isa,sat,jt->ij", x, N, y)
        term_yy = np.einsum("jt,t->j", y * y, N.sum(axis=(0, 1)))
        term_yr = np.einsum("jt,t->j", y, Rs.sum(axis=(0, 1)))
        return (
            term_xx[:, None]
            - 2 * term_xr[:, None]
            - 2 * term_xy
            + R2.sum()
            + 2 * term_yr[None, :]
            + term_yy[None, :]
        )


def confidence_set(fclass: FiniteFunctionClass, stats: LossStatistics, beta: float) -> np.ndarray:
    """Boolean mask of members whose excess loss is <= beta at every step."""
    members = fclass.members
    M, H, S, _ = members.shape
    keep = np.ones(M, dtype=bool)
    for h in range(H):
        nxt = members[:, h + 1].max(axis=2) if h + 1 < H else np.zeros((M, S))
        L = stats.loss_matrix(h, members[:, h], nxt)
        own = np.diag(L)
        keep &= own - L.min(axis=0) <= beta
    return keep


@dataclass(frozen=True, eq=False)
class ConfidenceSetTrace:
    survivors: tuple[np.ndarray, ...]  # member indices in F^(t), after episode t
    selected: np.ndarray  # index of f^(t)
    q_star_index: int | None
    q_star_survived: np.ndarray  # Q* in F^(t)
    bellman_error_sum: np.ndarray  # sum over prior buffer and steps of (f_h - T_h f_{h+1})^2 for f^(t)
    bellman_error_mean: np.ndarray  # same, averaged over buffer samples and steps


def in_sample_bellman_error(mdp: TabularMDP, f: np.ndarray, stats: LossStatistics) -> tuple[float, float]:
    H = mdp.horizon
    total = 0.0
    means = []
    for h in range(H):
        v_next = f[h + 1].max(axis=1) if h + 1 < H else np.zeros(mdp.num_states)
        err2 = (f[h] - bellman_backup(mdp, h, v_next)) ** 2
        n_sa = stats.counts[h].sum(axis=2)
        total += float((err2 * n_sa).sum())
        n = n_sa.sum()
        means.append(float((err2 * n_sa).sum() / n) if n else 0.0)
    return total, float(np.mean(means))


def disc_golf_finite(
    env,
    fclass: FiniteFunctionClass,
    offline: Dataset | None,
    n_on: int,
    beta: float,
    rng: np.random.Generator,
    *,
    seed=None,
) -> tuple[RunRecord, ConfidenceSetTrace]:
    mdp: TabularMDP = env.mdp
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    if fclass.members.shape[1:] != (H, S, A):
        raise ValueError("function class shape does not match the environment")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    replay = ReplayState(offline, H)
    stats = LossStatistics(H, S, A)
    for traj in replay.offline:
        stats.add(traj)
    q_star_index = fclass.index_of(optimal_values(mdp)[0])
    s1 = mdp.initial_state
    start_values = fclass.members[:, 0, s1].max(axis=1)

    alive = np.ones(len(fclass), dtype=bool)  # F^(0) = F
    trajs, policies, values, survivors, selected, q_in, err_sum, err_mean = ([] for _ in range(8))
    for t in range(n_on):
        idx = np.flatnonzero(alive)
        pick = int(idx[np.argmax(start_values[idx])])  # first maximiser = lowest index
        f = fclass.members[pick]
        total, mean = in_sample_bellman_error(mdp, f, stats)
        actions = f.argmax(axis=-1)
        traj = rollout(env, lambda h, s: actions[h, s], rng, t)
        replay.append(traj)
        stats.add(traj)
        alive = confidence_set(fclass, stats, beta)
        if not alive.any():
            raise EmptyConfidenceSetError(f"confidence set empty after episode {t}; beta={beta} is too small")

        trajs.append(traj)
        policies.append(DeterministicPolicy(actions))
        values.append(start_values[pick])
        selected.append(pick)
        survivors.append(np.flatnonzero(alive))
        q_in.append(q_star_index is not None and bool(alive[q_star_index]))
        err_sum.append(total)
        err_mean.append(mean)

    record = RunRecord(
        agent_name="disc_golf",
        env_name=getattr(env, "name", "tabular"),
        seed=seed,
        n_off=replay.n_off,
        trajectories=tuple(trajs),
        policies=tuple(policies),
        value_estimates=np.array(values),
        bonus_magnitudes=np.zeros(n_on),
        reward_scale=env.reward_scale,
        reward_offset=env.reward_offset,
    )
    trace = ConfidenceSetTrace(
        survivors=tuple(survivors),
        selected=np.array(selected, dtype=np.int64),
        q_star_index=q_star_index,
        q_star_survived=np.array(q_in, dtype=bool),
        bellman_error_sum=np.array(err_sum),
        bellman_error_mean=np.array(err_mean),
    )
    return record, trace
