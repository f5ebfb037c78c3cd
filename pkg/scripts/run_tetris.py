"""Tetris reproduction: inverse-eigenvalue coverage proxies and early reward for LSVI-UCB.

    python scripts/run_tetris.py --trials 30 --out runs
"""
import argparse

import numpy as np

from hybrid_rl.diagnostics import paired_difference_ci
from hybrid_rl.harness import load_config, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None)
    p.add_argument("--parallel", type=int, default=1)
    args = p.parse_args()

    cfg = load_config("tetris_repro").with_overrides(trials=args.trials, base_seed=args.seed)
    manifest = run_experiment(cfg, args.out, parallel=args.parallel)
    curves = manifest.curves
    print(f"wrote {manifest.output_dir}")
    for side in ("full", "offline", "online"):
        h = curves[("uniform", "hybrid", f"eig_{side}")].trials[:, -1]
        o = curves[("uniform", "online", f"eig_{side}")].trials[:, -1]
        inf_share = np.isinf(o).mean()
        print(f"1/lambda {side:<8} at t={cfg.n_on}: hybrid {h.mean():.4g}  online {o.mean():.4g}  (online inf in {inf_share:.0%} of trials)")
    h = curves[("uniform", "hybrid", "avg_reward")].trials[:, :20].mean(axis=1)
    o = curves[("uniform", "online", "avg_reward")].trials[:, :20].mean(axis=1)
    mean, lo, hi = paired_difference_ci(h, o)
    print(f"mean raw reward, episodes 1-20: hybrid {h.mean():.3f}  online {o.mean():.3f}  diff {mean:+.3f} [{lo:+.3f}, {hi:+.3f}]")


if __name__ == "__main__":
    main()
