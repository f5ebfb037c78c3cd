from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import TabularMDP, sample_index, validate


@dataclass(frozen=True, eq=False)
class BlockEmission:
    latent_mdp: TabularMDP
    emission: np.ndarray  # (U, X): q(x | u)
    decoder: np.ndarray  # (X,): latent state generating each context

    def __post_init__(self):
        q = np.asarray(self.emission, dtype=float)
        dec = np.asarray(self.decoder, dtype=np.int64)
        U = self.latent_mdp.num_states
        if q.shape != (U, dec.shape[0]):
            raise ValueError(f"emission shape {q.shape} must be (U={U}, X={dec.shape[0]})")
        if (q < 0).any() or np.abs(q.sum(axis=1) - 1).max() > 1e-12:
            raise ValueError("emission rows must be distributions")
        for u, x in zip(*np.nonzero(q > 0)):
            if dec[x] != u:
                raise ValueError(f"context {x} is emitted by latent {u} but decodes to {dec[x]}")
        object.__setattr__(self, "emission", q)
        object.__setattr__(self, "decoder", dec)

    @property
    def num_contexts(self) -> int:
        return self.decoder.shape[0]

    @classmethod
    def identity(cls, mdp: TabularMDP) -> "BlockEmission":
        return cls(mdp, np.eye(mdp.num_states), np.arange(mdp.num_states))

    @classmethod
    def uniform_blocks(cls, mdp: TabularMDP, contexts_per_state: int) -> "BlockEmission":
        U = mdp.num_states
        q = np.kron(np.eye(U), np.full((1, contexts_per_state), 1.0 / contexts_per_state))
        return cls(mdp, q, np.repeat(np.arange(U), contexts_per_state))


class BlockEnv:
    """Episodic environment over observed contexts with latent dynamics.

    Emission draws are skipped when the emitting row is a point mass, so the
    identity emission consumes the same random stream as the latent MDP.
    """

    name = "block"

    def __init__(self, emission: BlockEmission):
        validate(emission.latent_mdp)
        self.emission = emission
        self._deterministic = (emission.emission > 0).sum(axis=1) == 1

    @property
    def decoder(self) -> np.ndarray:
        return self.emission.decoder

    @property
    def horizon(self) -> int:
        return self.emission.latent_mdp.horizon

    @property
    def num_states(self) -> int:
        return self.emission.num_contexts

    @property
    def num_actions(self) -> int:
        return self.emission.latent_mdp.num_actions

    @property
    def reward_scale(self) -> float:
        return self.emission.latent_mdp.reward_scale

    @property
    def reward_offset(self) -> float:
        return self.emission.latent_mdp.reward_offset

    def _emit(self, u: int, rng: np.random.Generator) -> int:
        row = self.emission.emission[u]
        if self._deterministic[u]:
            return int(row.argmax())
        return sample_index(row, rng)

    def reset(self, rng: np.random.Generator) -> int:
        return self._emit(self.emission.latent_mdp.initial_state, rng)

    def step(self, h: int, context: int, action: int, rng: np.random.Generator) -> tuple[int, float]:
        mdp = self.emission.latent_mdp
        u = int(self.emission.decoder[context])
        u_next = sample_index(mdp.transition[h, u, action], rng)
        return self._emit(u_next, rng), float(mdp.reward[h, u, action])


def block_wrap(emission: BlockEmission) -> BlockEnv:
    return BlockEnv(emission)
