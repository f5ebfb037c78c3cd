"""Coverage and complexity diagnostics over runs, partitions and occupancies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environments.block import BlockEmission
from .environments.features import Projector
from .mdp import OccupancyTensor, TabularMDP, max_occupancy_table, policy_occupancy

PLOT_SENTINEL = 1e6
CI_Z = 1.96
EIG_FLOOR = 1e-12  # eigenvalues below this are round-off and reported as 0


@dataclass(frozen=True, eq=False)
class Partition:
    """X_off / X_on as boolean masks over (h, s, a), or as a projector pair.

    The two sides may overlap but must cover every cell.
    """

    offline: np.ndarray | None = None
    online: np.ndarray | None = None
    projectors: tuple[Projector, Projector] | None = None

    def __post_init__(self):
        if self.projectors is not None:
            return
        off = np.asarray(self.offline, dtype=bool)
        on = ~off if self.online is None else np.asarray(self.online, dtype=bool)
        if off.shape != on.shape:
            raise ValueError("offline and online masks differ in shape")
        if not (off | on).all():
            h, s, a = np.argwhere(~(off | on))[0]
            raise ValueError(f"cell (h={h}, s={s}, a={a}) is in neither side of the partition")
        object.__setattr__(self, "offline", off)
        object.__setattr__(self, "online", on)

    @classmethod
    def linear(cls, offline: Projector, online: Projector) -> "Partition":
        return cls(projectors=(offline, online))

    @property
    def disjoint(self) -> bool:
        return not (self.offline & self.online).any()


@dataclass(frozen=True, eq=False)
class CoverageCurve:
    mean: np.ndarray
    band: np.ndarray
    n_trials: int = 1
    trials: np.ndarray | None = None  # (n_trials, T)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        band = np.asarray(self.band, dtype=float)
        if mean.shape != band.shape or (band < 0).any():
            raise ValueError("band must be nonnegative and match the series")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "band", band)
        if self.trials is None:
            object.__setattr__(self, "trials", mean[None, :].copy())

    @classmethod
    def single(cls, values) -> "CoverageCurve":
        v = np.asarray(values, dtype=float)
        return cls(v, np.zeros_like(v))

    def __len__(self) -> int:
        return len(self.mean)

    @property
    def lo(self) -> np.ndarray:
        return self.mean - self.band

    @property
    def hi(self) -> np.ndarray:
        return self.mean + self.band


def aggregate_trials(curves: list[CoverageCurve]) -> CoverageCurve:
    """Pointwise mean with a 1.96 * sample-std band (n - 1 denominator).

    Columns containing a non-finite value report mean +inf and a zero band.
    """
    if not curves:
        raise ValueError("no curves to aggregate")
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"curve lengths differ: {sorted(lengths)}")
    X = np.vstack([c.trials for c in curves])
    finite = np.isfinite(X).all(axis=0)
    mean = np.full(X.shape[1], np.inf)
    band = np.zeros(X.shape[1])
    mean[finite] = X[:, finite].mean(axis=0)
    if X.shape[0] > 1:
        band[finite] = CI_Z * X[:, finite].std(axis=0, ddof=1)
    return CoverageCurve(mean, band, X.shape[0], X)


# --- partitions and concentrability ----------------------------------------------


def partition_from_occupancy(mu: OccupancyTensor, threshold: float | None = None) -> Partition:
    _, S, A = mu.density.shape
    thr = 1.0 / (S * A) if threshold is None else threshold
    return Partition(mu.density >= thr)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den with 0/0 -> 0 and positive/0 -> +inf."""
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    num, den = np.broadcast_to(num, out.shape), np.broadcast_to(den, out.shape)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    out[~pos & (num > 0)] = np.inf
    return out


def _restricted_max(ratio: np.ndarray, mask: np.ndarray) -> float:
    return float(ratio[mask].max()) if mask.any() else 0.0


def partial_offline_concentrability(mdp: TabularMDP, mu: OccupancyTensor, part: Partition) -> float:
    """max over X_off of sup_pi d^pi_h(s,a) / mu_h(s,a); zero for an empty X_off."""
    return _restricted_max(_ratio(max_occupancy_table(mdp), mu.density), part.offline)


def single_policy_concentrability(comparator: OccupancyTensor, mu: OccupancyTensor, part: Partition) -> float:
    return _restricted_max(_ratio(comparator.density, mu.density), part.offline)


def partition_visit_curves(run, part: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative visits of executed (h, s, a) to each side, one entry per episode."""
    off, on = np.zeros(run.n_on), np.zeros(run.n_on)
    for t, traj in enumerate(run.trajectories):
        for h, st in enumerate(traj):
            off[t] += part.offline[h, st.state, st.action]
            on[t] += part.online[h, st.state, st.action]
    return np.cumsum(off), np.cumsum(on)


def empirical_partition_concentrability(run, mdp: TabularMDP, mu: OccupancyTensor, part: Partition) -> dict[str, CoverageCurve]:
    """Max density ratio of the executed-policy mixture vs mu, per episode.

    The mixture after t episodes averages the occupancies of snapshots 1..t.
    Keys: ``full`` (all cells), ``offline`` and ``online`` (restricted sides).
    """
    full_mask = np.ones(mdp.reward.shape, dtype=bool)
    running = np.zeros(mdp.reward.shape)
    out = {"full": [], "offline": [], "online": []}
    for t, policy in enumerate(run.policies, start=1):
        running += policy_occupancy(mdp, policy).density
        ratio = _ratio(running / t, mu.density)
        out["full"].append(_restricted_max(ratio, full_mask))
        out["offline"].append(_restricted_max(ratio, part.offline))
        out["online"].append(_restricted_max(ratio, part.online))
    return {k: CoverageCurve.single(v) for k, v in out.items()}


def plot_values(values: np.ndarray) -> np.ndarray:
    """Infinite ratios become the plotting sentinel."""
    return np.where(np.isfinite(values), np.minimum(values, PLOT_SENTINEL), PLOT_SENTINEL)


# --- linear coverage -----------------------------------------------------------


def covariance_eigenvalues(features: np.ndarray, projectors: tuple[Projector, Projector], k: int) -> np.ndarray:
    """Per-episode (lambda_max(full), lambda_k(P_off Sigma P_off), lambda_{d-k}(P_on Sigma P_on)).

    ``features`` has shape (episodes, H, d); Sigma after n episodes is the mean
    of phi phi^T over all n * H online samples.
    """
    feats = np.asarray(features, dtype=float)
    if feats.ndim != 3 or feats.shape[0] < 1:
        raise ValueError("need features of shape (n >= 1, H, d)")
    n_ep, H, d = feats.shape
    P_off, P_on = (p.matrix for p in projectors)
    if P_off.shape != (d, d) or P_on.shape != (d, d):
        raise ValueError("projector dimension does not match the features")
    if not 1 <= k < d:
        raise ValueError(f"k={k} must lie in [1, d)")
    out = np.zeros((n_ep, 3))
    second = np.zeros((d, d))
    for n in range(n_ep):
        second += feats[n].T @ feats[n]
        cov = second / ((n + 1) * H)
        out[n, 0] = np.linalg.eigvalsh(cov)[-1]
        out[n, 1] = np.linalg.eigvalsh(P_off @ cov @ P_off)[::-1][k - 1]
        out[n, 2] = np.linalg.eigvalsh(P_on @ cov @ P_on)[::-1][d - k - 1]
    out[out < EIG_FLOOR] = 0.0
    return out


def covariance_eig_curves(features: np.ndarray, projectors: tuple[Projector, Projector], k: int) -> dict[str, CoverageCurve]:
    """Inverse eigenvalues (concentrability proxies) keyed full / offline / online."""
    eig = covariance_eigenvalues(features, projectors, k)
    inv = _ratio(np.ones_like(eig), eig)
    return {name: CoverageCurve.single(inv[:, i]) for i, name in enumerate(("full", "offline", "online"))}


# --- block MDPs ----------------------------------------------------------------


def decoded_latent_occupancy(trajectories, emission: BlockEmission) -> OccupancyTensor:
    mdp = emission.latent_mdp
    counts = np.zeros(mdp.reward.shape)
    n = 0
    for traj in trajectories:
        n += 1
        for h, st in enumerate(traj):
            counts[h, emission.decoder[st.state], st.action] += 1
    return OccupancyTensor(counts / max(n, 1))


def block_latent_coverage(run, emission: BlockEmission, part: Partition) -> float:
    """Tabular partial concentrability on the latent MDP, with mu the decoded occupancy of ``run``."""
    trajs = getattr(run, "trajectories", run)
    mu = decoded_latent_occupancy(trajs, emission)
    return partial_offline_concentrability(emission.latent_mdp, mu, part)


# --- regret --------------------------------------------------------------------


def regret_curve(run, v_star: float) -> CoverageCurve:
    """Cumulative (v_star - raw episode return); ``v_star`` on the raw scale."""
    return CoverageCurve.single(np.cumsum(v_star - run.raw_returns()))


def reward_curve(run) -> CoverageCurve:
    """Raw return of each episode."""
    return CoverageCurve.single(run.raw_returns())


def paired_difference_ci(a: np.ndarray, b: np.ndarray, z: float = CI_Z) -> tuple[float, float, float]:
    """Mean of a - b over paired trials and its normal-approximation CI."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean = float(diff.mean())
    half = z * float(diff.std(ddof=1)) / np.sqrt(len(diff)) if len(diff) > 1 else 0.0
    return mean, mean - half, mean + half
