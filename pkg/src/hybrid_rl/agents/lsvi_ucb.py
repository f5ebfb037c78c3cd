from __future__ import annotations

import numpy as np

from ..mdp import Dataset
from .common import ReplayState, RunRecord, rollout


class RidgeState:
    """Per-step Gram matrices and transition features of the unioned buffer."""

    def __init__(self, horizon: int, num_actions: int, dim: int, capacity: int, lam: float):
        self.lam = lam
        self.gram = np.broadcast_to(lam * np.eye(dim), (horizon, dim, dim)).copy()
        self.phi = np.zeros((horizon, capacity, dim))
        self.phi_next = np.zeros((horizon, capacity, num_actions, dim))
        self.rewards = np.zeros((horizon, capacity))
        self.size = 0
        self.weights = np.zeros((horizon, dim))

    def add(self, traj, feature_map, num_actions: int) -> None:
        i = self.size
        H = self.phi.shape[0]
        for h, (s, a, r, s_next) in enumerate(traj):
            f = feature_map(s, a)
            self.phi[h, i] = f
            self.rewards[h, i] = r
            if h + 1 < H:
                self.phi_next[h, i] = feature_map.all_actions(s_next, num_actions)
            self.gram[h] += np.outer(f, f)
        self.size += 1


def _cap(x: np.ndarray, horizon: int) -> np.ndarray:
    return np.clip(x, 0.0, horizon)


def _bonus(feats: np.ndarray, gram_inv: np.ndarray, beta: float) -> np.ndarray:
    quad = ((feats @ gram_inv) * feats).sum(axis=-1)
    return beta * np.sqrt(np.maximum(quad, 0.0))


def fit_weights(ridge: RidgeState, gram_inv: np.ndarray, beta: float, max_norm: float) -> np.ndarray:
    """Backward ridge regressions over the whole buffer; returns w of shape (H, d)."""
    H = ridge.gram.shape[0]
    n = ridge.size
    w = np.zeros_like(ridge.weights)
    for h in range(H - 1, -1, -1):
        y = ridge.rewards[h, :n].copy()
        if h + 1 < H and n:
            nf = ridge.phi_next[h, :n]
            q_next = _cap(nf @ w[h + 1] + _bonus(nf, gram_inv[h + 1], beta), H)
            y += q_next.max(axis=1)
        w[h] = np.linalg.solve(ridge.gram[h], ridge.phi[h, :n].T @ y)
        norm = np.linalg.norm(w[h])
        if norm > max_norm:
            w[h] *= max_norm / norm
    return w


def lsvi_ucb_hybrid(
    env,
    feature_map,
    offline: Dataset | None,
    n_on: int,
    rng: np.random.Generator,
    *,
    lam: float = 1.0,
    beta_lin: float = 1.0,
    seed=None,
) -> RunRecord:
    """LSVI-UCB whose regressions run over offline plus online transitions.

    Q_h(s, a) = min(max(w_h . phi + beta_lin * ||phi||_{inv(Lambda_h)}, 0), H).
    """
    H, A, d = env.horizon, env.num_actions, feature_map.dimension
    if lam <= 0:
        raise ValueError("lam must be positive")
    replay = ReplayState(offline, H)
    ridge = RidgeState(H, A, d, replay.n_off + n_on, lam)
    for traj in replay.offline:
        ridge.add(traj, feature_map, A)
    max_norm = 2 * H * np.sqrt(d)

    trajs, policies, values, bonuses, min_eigs = [], [], [], [], []
    online_features = np.zeros((n_on, H, d))
    for t in range(n_on):
        min_eigs.append(np.linalg.eigvalsh(ridge.gram)[:, 0])
        gram_inv = np.linalg.inv(ridge.gram)
        w = fit_weights(ridge, gram_inv, beta_lin, max_norm)
        ridge.weights = w
        seen = []

        def act(h, s):
            feats = feature_map.all_actions(s, A)
            b = _bonus(feats, gram_inv[h], beta_lin)
            q = _cap(feats @ w[h] + b, H)
            a = int(q.argmax())
            seen.append((q[a], b[a]))
            return a

        traj = rollout(env, act, rng, t)
        values.append(seen[0][0])
        bonuses.append(np.mean([b for _, b in seen]))
        for h, st in enumerate(traj):
            online_features[t, h] = feature_map(st.state, st.action)
        policies.append(w.copy())
        trajs.append(traj)
        replay.append(traj)
        ridge.add(traj, feature_map, A)

    return RunRecord(
        agent_name="lsvi_ucb",
        env_name=getattr(env, "name", "linear"),
        seed=seed,
        n_off=replay.n_off,
        trajectories=tuple(trajs),
        policies=tuple(policies),
        value_estimates=np.array(values),
        bonus_magnitudes=np.array(bonuses),
        reward_scale=env.reward_scale,
        reward_offset=env.reward_offset,
        extras={"online_features": online_features, "gram_min_eig": np.array(min_eigs)},
    )
