import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from hybrid_rl.mdp import StochasticPolicy, TabularMDP  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def small_mdps(draw, max_states=3, max_actions=2, max_horizon=3, deterministic=None):
    """Random tabular MDPs with S <= max_states, A <= max_actions, H <= max_horizon."""
    S = draw(st.integers(1, max_states))
    A = draw(st.integers(1, max_actions))
    H = draw(st.integers(1, max_horizon))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    det = draw(st.booleans()) if deterministic is None else deterministic
    if det:
        P = np.zeros((H, S, A, S))
        np.put_along_axis(P, rng.integers(0, S, (H, S, A, 1)), 1.0, axis=-1)
    else:
        # sprinkle exact zeros so some cells are unreachable
        P = rng.random((H, S, A, S)) * (rng.random((H, S, A, S)) < 0.7)
        P[..., 0] += 1e-3 * (P.sum(axis=-1) == 0)
        P /= P.sum(axis=-1, keepdims=True)
    R = rng.random((H, S, A))
    return TabularMDP(P, R, initial_state=int(rng.integers(S)))


def random_policy(mdp, rng):
    p = rng.random(mdp.reward.shape) + 1e-3
    return StochasticPolicy(p / p.sum(axis=-1, keepdims=True))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
