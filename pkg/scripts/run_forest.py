"""Forest management reproduction: coverage, partition visits and reward for three behavior policies.

    python scripts/run_forest.py --trials 30 --out runs
"""
import argparse

from hybrid_rl.diagnostics import paired_difference_ci
from hybrid_rl.harness import load_config, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None)
    p.add_argument("--parallel", type=int, default=1)
    args = p.parse_args()

    cfg = load_config("forest_repro").with_overrides(trials=args.trials, base_seed=args.seed)
    manifest = run_experiment(cfg, args.out, parallel=args.parallel)
    curves = manifest.curves
    print(f"wrote {manifest.output_dir}")
    print(f"{'behavior':<12} {'metric':<22} {'hybrid':>10} {'online':>10}   hybrid-online (95% CI)")
    for kind in cfg.behavior_policies:
        rows = [(name, lambda x: x[:, -1]) for name in ("visits_offline", "visits_online", "regret")]
        rows.append(("avg_reward", lambda x: x[:, :20].mean(axis=1)))
        for name, reduce in rows:
            h = reduce(curves[(kind, "hybrid", name)].trials)
            o = reduce(curves[(kind, "online", name)].trials)
            mean, lo, hi = paired_difference_ci(h, o)
            label = name + (" (1-20)" if name == "avg_reward" else f" (t={cfg.n_on})")
            print(f"{kind:<12} {label:<22} {h.mean():>10.2f} {o.mean():>10.2f}   {mean:+.2f} [{lo:+.2f}, {hi:+.2f}]")


if __name__ == "__main__":
    main()
