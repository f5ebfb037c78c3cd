"""Scaled-down Tetris with rotation-only actions.

Pieces drop at column ``t mod width`` (shifted left if they would overhang),
so the only decision is the rotation. Raw reward is minus the growth of the
stack above ``max(old height, threshold)``; agents see it rescaled to [0, 1].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

# cells as (row, col), row 0 at the bottom of the piece
PIECES: dict[str, tuple[tuple[int, int], ...]] = {
    "1x1": ((0, 0),),
    "1x2": ((0, 0), (0, 1)),
    "2x1": ((0, 0), (1, 0)),
    "2x2": ((0, 0), (0, 1), (1, 0), (1, 1)),
}

HEIGHT_LEVELS = 8  # column height capped at 7 in the state abstraction
SLOPE_LEVELS = 5  # neighbour height difference clipped to [-2, 2]


@dataclass(frozen=True)
class TetrisConfig:
    board_width: int = 6
    board_height: int = 10
    max_piece_extent: int = 2
    episode_length: int = 40
    num_rotations: int = 4
    height_penalty_threshold: int = 2
    piece_set: tuple[str, ...] = ("1x1", "1x2", "2x1", "2x2")

    def __post_init__(self):
        object.__setattr__(self, "piece_set", tuple(self.piece_set))
        if self.num_rotations != 4:
            raise ValueError("rotation actions are exactly 4")
        for name in self.piece_set:
            if name not in PIECES:
                raise ValueError(f"unknown piece {name!r}; known: {sorted(PIECES)}")
            rows, cols = _extent(PIECES[name])
            if max(rows, cols) > self.max_piece_extent:
                raise ValueError(f"piece {name} exceeds max extent {self.max_piece_extent}")
        if self.board_width < self.max_piece_extent:
            raise ValueError("board narrower than the widest piece")
        if self.board_height <= self.max_piece_extent:
            raise ValueError("board too short")

    @property
    def num_configurations(self) -> int:
        return len(self.piece_set) * HEIGHT_LEVELS * SLOPE_LEVELS

    @property
    def feature_dim(self) -> int:
        return self.num_configurations * self.num_rotations

    @property
    def max_penalty(self) -> int:
        return self.max_piece_extent


@dataclass(frozen=True)
class TetrisState:
    rows: tuple[int, ...]  # bitmask per board row, bottom row first
    piece: int  # index into config.piece_set
    t: int  # step within the episode; selects the drop column


class TetrisOutcome(NamedTuple):
    next_state: TetrisState
    reward: float
    raw_reward: float
    game_over: bool


def _extent(cells) -> tuple[int, int]:
    return max(r for r, _ in cells) + 1, max(c for _, c in cells) + 1


def rotate(cells, quarter_turns: int) -> tuple[tuple[int, int], ...]:
    out = tuple(cells)
    for _ in range(quarter_turns % 4):
        out = tuple((c, -r) for r, c in out)
        r0 = min(r for r, _ in out)
        c0 = min(c for _, c in out)
        out = tuple(sorted((r - r0, c - c0) for r, c in out))
    return out


def column_heights(rows: tuple[int, ...], width: int) -> list[int]:
    heights = [0] * width
    for y, mask in enumerate(rows):
        while mask:
            low = mask & -mask
            heights[low.bit_length() - 1] = y + 1
            mask ^= low
    return heights


def stack_height(rows: tuple[int, ...]) -> int:
    for y in range(len(rows) - 1, -1, -1):
        if rows[y]:
            return y + 1
    return 0


def initial_state(config: TetrisConfig, rng: np.random.Generator) -> TetrisState:
    return TetrisState((0,) * config.board_height, _spawn(config, rng), 0)


def _spawn(config: TetrisConfig, rng: np.random.Generator) -> int:
    return min(int(rng.random() * len(config.piece_set)), len(config.piece_set) - 1)


def drop_column(config: TetrisConfig, t: int, piece_width: int) -> int:
    return min(t % config.board_width, config.board_width - piece_width)


def tetris_step(config: TetrisConfig, state: TetrisState, action: int, rng: np.random.Generator) -> TetrisOutcome:
    W = config.board_width
    cells = rotate(PIECES[config.piece_set[state.piece]], action)
    _, width = _extent(cells)
    col = drop_column(config, state.t, width)
    heights = column_heights(state.rows, W)
    # rest the piece on the highest supporting column under each of its cells
    y = max(heights[col + c] - r for r, c in cells)
    old_height = stack_height(state.rows)
    rows = list(state.rows)
    top = max(y + r for r, _ in cells) + 1
    game_over = top > config.board_height
    if not game_over:
        for r, c in cells:
            rows[y + r] |= 1 << (col + c)
        full = (1 << W) - 1
        kept = [m for m in rows if m != full]
        rows = kept + [0] * (config.board_height - len(kept))
        new_height = stack_height(tuple(rows))
    else:
        new_height = top
    raw = -max(0, new_height - max(old_height, config.height_penalty_threshold))
    raw = max(raw, -config.max_penalty)
    if game_over:
        log.debug("tetris game over at t=%d; board cleared", state.t)
        rows = [0] * config.board_height
    next_state = TetrisState(tuple(rows), _spawn(config, rng), state.t + 1)
    reward = 1.0 + raw / config.max_penalty
    return TetrisOutcome(next_state, reward, float(raw), game_over)


def configuration_index(config: TetrisConfig, state: TetrisState) -> int:
    """Abstract state id in ``[0, num_configurations)``.

    ``piece * 40 + min(h_c, 7) * 5 + clip(h_n - h_c, -2, 2) + 2`` where ``c`` is
    the drop column for this step and ``n`` its right neighbour (left neighbour
    on the last column). Capping makes the map total, so no board overflows it.
    """
    W = config.board_width
    heights = column_heights(state.rows, W)
    c = state.t % W
    n = c + 1 if c + 1 < W else c - 1
    level = min(heights[c], HEIGHT_LEVELS - 1)
    slope = min(max(heights[n] - heights[c], -2), 2) + 2
    return (state.piece * HEIGHT_LEVELS + level) * SLOPE_LEVELS + slope


def one_hot_index(config: TetrisConfig, state: TetrisState, action: int) -> int:
    return configuration_index(config, state) * config.num_rotations + int(action)


def one_hot_features(config: TetrisConfig, state: TetrisState, action: int) -> np.ndarray:
    phi = np.zeros(config.feature_dim)
    phi[one_hot_index(config, state, action)] = 1.0
    return phi


class TetrisEnv:
    name = "tetris"

    def __init__(self, config: TetrisConfig | None = None):
        self.config = config or TetrisConfig()
        self.game_overs = 0

    @property
    def horizon(self) -> int:
        return self.config.episode_length

    @property
    def num_actions(self) -> int:
        return self.config.num_rotations

    @property
    def reward_scale(self) -> float:
        return float(self.config.max_penalty)

    @property
    def reward_offset(self) -> float:
        return -float(self.config.max_penalty)

    def reset(self, rng: np.random.Generator) -> TetrisState:
        return initial_state(self.config, rng)

    def step(self, h: int, state: TetrisState, action: int, rng: np.random.Generator) -> tuple[TetrisState, float]:
        out = tetris_step(self.config, state, action, rng)
        self.game_overs += out.game_over
        return out.next_state, out.reward

    def features(self, state: TetrisState, action: int) -> np.ndarray:
        return one_hot_features(self.config, state, action)
