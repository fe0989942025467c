"""Sample counts as FIG1's preferences are shrunk toward 1/2.

Scaling every comparable entry by s shrinks all gaps by s, so the hardness
grows like 1/s^2 and the mean sample count should grow with it.

    python3 scripts/hardness_ladder.py --scales 1 0.5 0.25 --trials 10
"""
import argparse

from cpedb.experiment import ExperimentConfig, load_problem, run_experiment
from cpedb.preference import compute_gaps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scales", type=float, nargs="+", default=[1.0, 0.5, 0.25])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--algorithms", nargs="+", default=["car-cond", "borda-pac"],
                    choices=["car-cond", "car-verify", "borda-pac", "borda-exact"])
    a = ap.parse_args(argv)
    print(f"{'algorithm':12s} {'scale':>6s} {'H_borda':>10s} {'H_cond_ver':>11s} "
          f"{'success':>8s} {'mean samples':>13s} {'ratio':>6s}")
    for alg in a.algorithms:
        prev = None
        for s in a.scales:
            G, P = load_problem("builtin:fig1", s)
            gaps = compute_gaps(G, P)
            delta = 0.005 if alg == "car-verify" else 0.1
            eps = 0.05 * s if alg == "borda-pac" else None
            agg = run_experiment(ExperimentConfig("builtin:fig1", alg, delta=delta, epsilon=eps,
                                                  trials=a.trials, scale=s))["aggregate"]
            mean = agg["samples_mean"]
            ratio = "" if prev is None else f"{mean / prev:6.2f}"
            print(f"{alg:12s} {s:6.3f} {gaps.H_borda:10.1f} {gaps.H_cond_ver:11.1f} "
                  f"{agg['success_rate']:8.3f} {mean:13.0f} {ratio:>6s}")
            prev = mean


if __name__ == "__main__":
    main()
