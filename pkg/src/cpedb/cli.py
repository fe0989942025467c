"""Command line: ``explore run | truth | oracle-eval``.

Exit codes: 0 success, 2 configuration or input error, 3 when some trial
hit its sample budget.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from .errors import CpedbError
from .experiment import (ConfigError, emit_report, ground_truth, load_config, load_problem,
                         run_experiment)
from .graph import ConstraintPair
from .oracle import OracleConfig, exact_game_value, minimax_oracle

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _overrides(args):
    o = {k: getattr(args, k) for k in ("delta", "epsilon", "trials", "base_seed")
         if getattr(args, k) is not None}
    s = {k: v for k, v in (("mode", args.sampler), ("mcmc_steps", args.mcmc_steps)) if v is not None}
    if s:
        o["sampler"] = s
    return o


def _cmd_run(args):
    cfg = load_config(args.config, _overrides(args))
    report = run_experiment(cfg)
    if args.out:
        emit_report(report, args.format, args.out)
    agg = report["aggregate"]
    rate = agg["success_rate"]
    print(f"{cfg.algorithm} on {cfg.instance}: {agg['trials']} trials, "
          f"success {'n/a' if rate is None else f'{rate:.3f}'}"
          + ("" if rate is None else f" (95% CI {agg['ci_low']:.3f}-{agg['ci_high']:.3f})")
          + f", samples mean {agg['samples_mean']:.1f} median {agg['samples_median']:.0f}"
          f" max {agg['samples_max']:.0f}, budget failures {agg['budget_failures']}")
    return EXIT_BUDGET if agg["budget_failures"] else EXIT_OK


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _cmd_truth(args):
    G, P = load_problem(args.instance, args.scale)
    truth = ground_truth(G, P)
    if truth is None:
        print(f"instance has {G.m} edges, above the enumeration cap; no ground truth")
        return EXIT_OK
    if args.json:
        print(json.dumps(truth, indent=2))
        return EXIT_OK
    name = lambda ids: "none" if ids is None else "{" + ",".join(f"e{e + 1}" for e in ids) + "}"
    print(f"edges {G.m}  positions {G.l}  K {G.K}  width {truth['width']}")
    print(f"borda winner     {name(truth['borda_winner'])}")
    print(f"condorcet winner {name(truth['condorcet_winner'])}")
    for key in ("borda_gap", "condorcet_gap"):
        if truth.get(key) is not None:
            print(f"{key:<16} " + " ".join(_fmt(g) for g in truth[key]))
    if truth.get("verification_gap"):
        print("verification_gap " + " ".join(f"e{int(k) + 1}:{_fmt(v)}"
                                             for k, v in truth["verification_gap"].items()))
    for key in ("H_borda", "H_cond_ver"):
        if truth.get(key) is not None:
            print(f"{key:<16} {truth[key]:.2f}")
    for note in truth.get("notes", []):
        print(f"note: {note}")
    return EXIT_OK


def _constraints(text):
    d = json.loads(text) if text else {}
    unknown = set(d) - {"c1", "c2"}
    if unknown:
        raise ConfigError(f"--constraints: unknown keys {sorted(unknown)}; use c1 and c2")
    out = []
    for side in ("c1", "c2"):
        c = d.get(side, {})
        out.append(ConstraintPair(frozenset(c.get("accepted", [])), frozenset(c.get("rejected", []))))
    return out


def _cmd_oracle(args):
    G, P = load_problem(args.instance, args.scale)
    c1, c2 = _constraints(args.constraints)
    cfg = OracleConfig(step=args.step, projection=args.projection, certify=not args.no_certify,
                       max_iter=args.max_iter)
    t0 = time.perf_counter()
    res = minimax_oracle(G, c1, c2, P.p, args.eps, cfg)
    ms = (time.perf_counter() - t0) * 1e3
    out = {"value": res.value, "iterations": res.iterations,
           "projection_steps": res.projection_steps, "certified": res.certified,
           "upper_bound": res.upper_bound, "ms": round(ms, 3)}
    if G.m <= 24:
        ex = exact_game_value(G, c1, c2, P.p)
        out.update(exact=ex, error=abs(res.value - ex), within_eps=abs(res.value - ex) <= args.eps)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="explore", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run seeded trials from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--delta", type=float, help="override the config's delta")
    r.add_argument("--epsilon", type=float, help="override the config's epsilon")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", dest="base_seed", type=int)
    r.add_argument("--sampler", choices=("exact", "mcmc"))
    r.add_argument("--mcmc-steps", type=int, help="transitions per MCMC draw")
    r.set_defaults(func=_cmd_run)
    t = sub.add_parser("truth", help="winners, gaps, width and hardness of an instance")
    t.add_argument("--instance", required=True, help="instance JSON or builtin:fig1 / builtin:rps")
    t.add_argument("--scale", type=float, default=1.0)
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=_cmd_truth)
    o = sub.add_parser("oracle-eval", help="one minimax oracle call against the exact game value")
    o.add_argument("--instance", required=True)
    o.add_argument("--scale", type=float, default=1.0)
    o.add_argument("--eps", type=float, default=0.05)
    o.add_argument("--constraints", default="",
                   help='JSON {"c1": {"accepted": [..], "rejected": [..]}, "c2": {...}}')
    o.add_argument("--step", choices=("anytime", "paper"), default="anytime")
    o.add_argument("--projection", choices=("pairwise", "fw"), default="pairwise")
    o.add_argument("--max-iter", type=int, default=200_000)
    o.add_argument("--no-certify", action="store_true")
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CpedbError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
