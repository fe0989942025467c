"""Success rate and sample counts of every algorithm on the FIG1 instance.

    python3 scripts/fig1_success.py --trials 50
"""
import argparse
import time

from cpedb.experiment import ExperimentConfig, run_experiment

ALGS = ("borda-pac", "car-cond", "car-verify", "car-parallel", "borda-exact")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--algorithms", nargs="+", default=list(ALGS), choices=ALGS)
    a = ap.parse_args(argv)
    print(f"{'algorithm':14s} {'delta':>6s} {'success':>8s} {'95% CI':>15s} "
          f"{'mean samples':>13s} {'max samples':>12s} {'secs':>6s}")
    for alg in a.algorithms:
        delta = 0.005 if alg in ("car-verify", "car-parallel") else 0.1
        eps = 0.05 if alg == "borda-pac" else None
        cfg = ExperimentConfig("builtin:fig1", alg, delta=delta, epsilon=eps,
                               trials=a.trials, base_seed=a.seed)
        t0 = time.perf_counter()
        agg = run_experiment(cfg)["aggregate"]
        dt = time.perf_counter() - t0
        ci = f"[{agg['ci_low']:.3f}, {agg['ci_high']:.3f}]"
        print(f"{alg:14s} {delta:6.3f} {agg['success_rate']:8.3f} {ci:>15s} "
              f"{agg['samples_mean']:13.0f} {agg['samples_max']:12.0f} {dt:6.1f}")


if __name__ == "__main__":
    main()
