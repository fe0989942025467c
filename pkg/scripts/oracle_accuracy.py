"""Minimax oracle against the exact LP game value on random constrained instances.

    python3 scripts/oracle_accuracy.py --cases 100 --eps 0.05 0.01
"""
import argparse
import time

import numpy as np

from cpedb import ConstraintPair, OracleConfig, enumerate_maximum_matchings
from cpedb.errors import InfeasibleConstraints, InfeasibleMinSide
from cpedb.instances import random_instance
from cpedb.oracle import exact_game_value, minimax_oracle


def random_constraints(rng, G):
    """Accept one edge of a random maximum matching and reject one other edge."""
    ms = enumerate_maximum_matchings(G)
    M = ms[rng.integers(len(ms))]
    acc = {int(rng.choice(M.edge_ids))} if rng.random() < 0.5 else set()
    rest = [e for e in range(G.m) if e not in acc]
    rej = {int(rng.choice(rest))} if rest and rng.random() < 0.5 else set()
    return ConstraintPair(acc, rej)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=50)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.01])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--paper-step", action="store_true",
                    help="fixed step 2l/(K sqrt T) without the certificate stop")
    a = ap.parse_args(argv)
    cfg = OracleConfig(step="paper", certify=False) if a.paper_step else OracleConfig()
    for eps in a.eps:
        rng = np.random.default_rng(a.seed)
        errs, iters, times, n = [], [], [], 0
        while n < a.cases:
            G, P = random_instance(rng, m_max=10)
            c1, c2 = random_constraints(rng, G), random_constraints(rng, G)
            try:
                ex = exact_game_value(G, c1, c2, P.p)
            except (InfeasibleConstraints, InfeasibleMinSide):
                continue
            if ex < 0:  # empty max side: both report the sentinel
                continue
            t0 = time.perf_counter()
            r = minimax_oracle(G, c1, c2, P.p, eps, cfg)
            times.append(time.perf_counter() - t0)
            errs.append(ex - r.value)
            iters.append(r.iterations)
            n += 1
        errs = np.array(errs)
        print(f"eps {eps:<6g} cases {n}  within eps {np.mean(np.abs(errs) <= eps):.3f}  "
              f"max err/eps {np.abs(errs).max() / eps:.3f}  mean err/eps {errs.mean() / eps:+.3f}  "
              f"median iters {int(np.median(iters))}  median ms {np.median(times) * 1e3:.2f}")


if __name__ == "__main__":
    main()
