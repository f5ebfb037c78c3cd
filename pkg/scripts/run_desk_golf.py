"""Exact confidence-set learner on the 2-state desk MDP: how often Q* survives, and Bellman-error drift.

    python scripts/run_desk_golf.py --trials 200
"""
import argparse

import numpy as np

from hybrid_rl.agents import beta_schedule
from hybrid_rl.diagnostics import paired_difference_ci
from hybrid_rl.environments import make_env
from hybrid_rl.harness import load_config, run_experiment
from hybrid_rl.harness.runner import function_class


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--out", default=None)
    p.add_argument("--no-write", action="store_true")
    args = p.parse_args()

    cfg = load_config("desk_golf").with_overrides(trials=args.trials)
    manifest = run_experiment(cfg, args.out, write=not args.no_write)
    curves = manifest.curves
    env = make_env(cfg.env, cfg.env_params)
    size = len(function_class(cfg, env.mdp))
    for arm, n in (("hybrid", cfg.n_off + cfg.n_on), ("online", cfg.n_on)):
        print(f"{arm:<7} beta = {beta_schedule(n, env.horizon, size, cfg.agent_params.get('delta', 0.1)):.4f} (|F| = {size})")
    for arm in ("hybrid", "online"):
        kept = curves[("uniform", arm, "qstar_in_set")].trials
        err = curves[("uniform", arm, "bellman_error")].trials
        t = np.arange(1, err.shape[1] + 1)
        slopes = np.array([np.polyfit(t, e, 1)[0] for e in err])
        mean, lo, hi = paired_difference_ci(slopes, np.zeros_like(slopes))
        print(f"{arm:<7} Q* in set {kept.mean():.3f}; Bellman-error slope {mean:+.2e} [{lo:+.2e}, {hi:+.2e}]")


if __name__ == "__main__":
    main()
