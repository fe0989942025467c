"""Seeded experiment runner: configs, per-trial reports, aggregation, emission."""
from __future__ import annotations

import csv
import json
import math
import re
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from . import instances
from .borda import clucb_borda_exact, clucb_borda_pac
from .condorcet import car_cond, car_parallel, car_verify
from .env import DuelEnvironment
from .errors import BudgetExceeded, InstanceTooLarge, VerificationError
from .graph import ENUM_CAP, ConstraintPair, Matching, enumerate_maximum_matchings
from .oracle import OracleConfig, exact_game_value, minimax_oracle
from .preference import compute_gaps, load_instance, matching_preference
from .sampler import SamplerConfig

ALGORITHMS = ("borda-pac", "borda-exact", "car-cond", "car-verify", "car-parallel", "oracle-eval")
CSV_COLUMNS = ("seed", "algorithm", "delta", "epsilon", "samples", "correct", "stop_reason", "wall_ms")
BUILTINS = {"fig1": instances.fig1, "rps": instances.rps_instance}
_KEYS = {"instance", "algorithm", "delta", "epsilon", "trials", "base_seed", "sample_cap", "sampler",
         "oracle", "scale", "parallel_mode"}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the file and line."""


@dataclass(frozen=True)
class ExperimentConfig:
    instance: str
    algorithm: str
    delta: float = 0.1
    epsilon: float | None = None
    trials: int = 1
    base_seed: int = 0
    sample_cap: int = 10 ** 8
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    scale: float = 1.0
    parallel_mode: str = "batched"
    source: str = "<config>"

    def to_dict(self):
        d = asdict(self)
        d.pop("source")
        return d


def _line_of(text, key):
    for i, line in enumerate(text.splitlines(), 1):
        if re.search(r'"%s"\s*:' % re.escape(key), line):
            return i
    return 1


def parse_config(text: str, source="<config>", base_dir: Path | None = None) -> ExperimentConfig:
    """Parse a JSON experiment config; every error message reads ``source:line: ...``."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{source}:1: top level must be an object")

    def fail(key, msg):
        raise ConfigError(f"{source}:{_line_of(text, key)}: {key}: {msg}")

    for k in d:
        if k not in _KEYS:
            fail(k, f"unknown key (valid keys: {', '.join(sorted(_KEYS))})")
    for k in ("instance", "algorithm"):
        if k not in d:
            raise ConfigError(f"{source}:1: missing required key '{k}'")
    alg = d["algorithm"]
    if alg not in ALGORITHMS:
        fail("algorithm", f"invalid algorithm {alg!r}; valid choices: {', '.join(ALGORITHMS)}")
    inst = d["instance"]
    if not isinstance(inst, str):
        fail("instance", "must be a path or 'builtin:<name>'")
    if inst.startswith("builtin:"):
        if inst[8:] not in BUILTINS:
            fail("instance", f"unknown builtin; choices: {', '.join('builtin:' + b for b in BUILTINS)}")
    elif base_dir is not None and not Path(inst).is_absolute():
        inst = str((base_dir / inst).resolve())

    def num(key, default, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
        v = d.get(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and v != int(v)):
            fail(key, f"expected {'an integer' if kind is int else 'a number'}, got {v!r}")
        v = kind(v)
        if lo is not None and (v <= lo if lo_open else v < lo):
            fail(key, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and (v >= hi if hi_open else v > hi):
            fail(key, f"must be {'<' if hi_open else '<='} {hi}, got {v}")
        return v

    hi = 0.01 if alg in ("car-verify", "car-parallel") else 1
    delta = num("delta", 0.005 if hi < 1 else 0.1, lo=0, hi=hi, lo_open=True, hi_open=True)
    eps_default = 0.05 if alg in ("borda-pac", "oracle-eval") else None
    eps = num("epsilon", eps_default, lo=0, lo_open=True)
    if alg in ("borda-pac", "oracle-eval") and eps is None:
        fail("epsilon", f"required for {alg}")
    trials = num("trials", 1, int, lo=1)
    seed = num("base_seed", 0, int, lo=0)
    cap = num("sample_cap", 10 ** 8, int, lo=1)
    scale = num("scale", 1.0, lo=0, hi=1, lo_open=True)
    try:
        s = d.get("sampler", {})
        sampler = SamplerConfig(mode=s.get("mode", "exact"), mcmc_steps=s.get("mcmc_steps"),
                                seed=s.get("seed"))
    except (TypeError, ValueError, AttributeError) as exc:
        fail("sampler", str(exc))
    try:
        o = d.get("oracle", {})
        oracle = OracleConfig(**o)
    except (TypeError, ValueError) as exc:
        fail("oracle", str(exc))
    mode = d.get("parallel_mode", "batched")
    if mode not in ("batched", "interleaved"):
        fail("parallel_mode", "must be 'batched' or 'interleaved'")
    return ExperimentConfig(inst, alg, delta, eps, trials, seed, cap, sampler, oracle, scale, mode,
                            source)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a config file; ``overrides`` (command-line values) replace its keys."""
    p = Path(path)
    text = p.read_text()
    cfg = parse_config(text, str(p), p.parent)
    if not overrides:
        return cfg
    d = json.loads(text)
    for k, v in overrides.items():
        if isinstance(v, dict):
            d[k] = {**d.get(k, {}), **v}
        else:
            d[k] = v
    return parse_config(json.dumps(d, indent=1), f"{p} (with command-line overrides)", p.parent)


def load_problem(instance: str, scale=1.0):
    """(G, P) for a path or 'builtin:<name>', with off-diagonal entries scaled toward 1/2."""
    if instance.startswith("builtin:"):
        G, P = BUILTINS[instance[8:]]()
    else:
        G, P, _ = load_instance(instance)
    return G, (P if scale == 1.0 else P.scaled(scale))


@dataclass
class TrialReport:
    seed: int
    algorithm: str
    delta: float
    epsilon: float | None
    matching: list | None
    outcome: str  # answer | error | budget
    correct: bool | None
    samples: int
    wall_ms: float
    stop_reason: str
    env: dict
    extra: dict = field(default_factory=dict)


def ground_truth(G, P):
    try:
        ms = enumerate_maximum_matchings(G, cap=ENUM_CAP)
    except InstanceTooLarge:
        return None
    return compute_gaps(G, P, ms).to_dict()


def _oracle_trial(G, P, cfg, rng):
    """One accuracy probe: random feasible constraints, oracle vs exact value."""
    ms = enumerate_maximum_matchings(G)
    M = ms[rng.integers(len(ms))]

    def draw(M):
        acc = {int(e) for e in M.edge_ids if rng.random() < 0.3}
        rej = {int(e) for e in range(G.m) if e not in M and rng.random() < 0.2}
        return ConstraintPair(frozenset(acc), frozenset(rej))

    c1, c2 = draw(M), draw(ms[rng.integers(len(ms))])
    res = minimax_oracle(G, c1, c2, P.p, cfg.epsilon, cfg.oracle)
    ex = exact_game_value(G, c1, c2, P.p)
    return res, ex, c1, c2


def run_trial(cfg: ExperimentConfig, G, P, truth, seed: int) -> TrialReport:
    env = DuelEnvironment(P, seed)
    t0 = time.perf_counter()
    extra = {}
    M, outcome, trace = None, "answer", None
    try:
        if cfg.algorithm == "borda-pac":
            M, trace = clucb_borda_pac(env, G, cfg.delta, cfg.epsilon, cfg.sampler, cfg.sample_cap)
        elif cfg.algorithm == "borda-exact":
            M, trace = clucb_borda_exact(env, G, cfg.delta, cfg.sampler, cfg.sample_cap)
        elif cfg.algorithm == "car-cond":
            M, trace = car_cond(env, G, cfg.delta, cfg.oracle, cfg.sample_cap)
        elif cfg.algorithm == "car-verify":
            M, trace = car_verify(env, G, cfg.delta, cfg.oracle, cfg.sample_cap)
        elif cfg.algorithm == "car-parallel":
            M, trace = car_parallel(env, G, cfg.delta, cfg.oracle, cfg.sample_cap,
                                    mode=cfg.parallel_mode)
        else:
            res, ex, c1, c2 = _oracle_trial(G, P, cfg, np.random.default_rng(seed))
            extra = {"value": res.value, "exact": ex, "iterations": res.iterations,
                     "projection_steps": res.projection_steps, "certified": res.certified,
                     "c1": c1.to_dict(), "c2": c2.to_dict()}
            wall = (time.perf_counter() - t0) * 1e3
            return TrialReport(seed, cfg.algorithm, cfg.delta, cfg.epsilon, None, "answer",
                               bool(abs(res.value - ex) <= cfg.epsilon), res.iterations, wall,
                               "certified" if res.certified else "iteration-cap", env.metadata(),
                               extra)
    except VerificationError as exc:
        outcome, trace = "error", exc.trace
    except BudgetExceeded as exc:
        outcome, trace = "budget", exc.trace
    wall = (time.perf_counter() - t0) * 1e3
    target = None
    if truth is not None:
        key = "borda_winner" if cfg.algorithm.startswith("borda") else "condorcet_winner"
        target = truth.get(key)
    correct = None
    if target is not None:
        correct = M is not None and list(M.edge_ids) == list(target)
    if cfg.algorithm == "borda-pac" and M is not None and truth is not None and target is not None:
        # epsilon-correctness on the Borda scale
        extra["eps_correct"] = _borda_of(G, P, M) >= _borda_of(G, P, Matching(tuple(target), G.m)) - cfg.epsilon - 1e-12
    if trace is not None:
        extra["rounds"] = getattr(trace, "rounds", None)
    return TrialReport(seed, cfg.algorithm, cfg.delta, cfg.epsilon,
                       None if M is None else list(M.edge_ids), outcome, correct,
                       int(env.total_samples), wall,
                       getattr(trace, "stop_reason", "") or outcome, env.metadata(), extra)


def _borda_of(G, P, M):
    ms = enumerate_maximum_matchings(G)
    return float(np.mean([matching_preference(M, N, P) for N in ms]))


def aggregate(trials: list[TrialReport]):
    n = len(trials)
    known = [t for t in trials if t.correct is not None]
    s = np.array([t.samples for t in trials], dtype=float)
    agg = {"trials": n, "answers": sum(t.outcome == "answer" for t in trials),
           "errors": sum(t.outcome == "error" for t in trials),
           "budget_failures": sum(t.outcome == "budget" for t in trials),
           "samples_mean": float(s.mean()), "samples_median": float(np.median(s)),
           "samples_max": float(s.max())}
    if known:
        k = sum(bool(t.correct) for t in known)
        ci = binomtest(k, len(known)).proportion_ci(0.95, method="exact")
        agg.update(successes=k, success_rate=k / len(known), ci_low=float(ci.low),
                   ci_high=float(ci.high),
                   wrong_answers=sum(t.outcome == "answer" and not t.correct for t in known))
    else:
        agg.update(successes=None, success_rate=None, ci_low=None, ci_high=None, wrong_answers=None)
    return agg


def _jsonable(x):
    return json.loads(json.dumps(x))


def run_experiment(cfg: ExperimentConfig):
    """Run trials with seeds base_seed + i; returns a JSON-ready report dict."""
    G, P = load_problem(cfg.instance, cfg.scale)
    truth = ground_truth(G, P)
    trials = [run_trial(cfg, G, P, truth, cfg.base_seed + i) for i in range(cfg.trials)]
    trials.sort(key=lambda t: t.seed)
    return _jsonable({
        "config": cfg.to_dict(),
        "instance": {"candidates": G.n_candidates, "positions": G.l, "edges": G.m, "K": G.K,
                     "preference_sha256_16": P.digest()},
        "truth": truth,
        "aggregate": aggregate(trials),
        "trials": [asdict(t) for t in trials],
    })


def emit_report(report, fmt: str, path):
    """Write ``report`` as csv (one row per trial) or json (everything)."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report, indent=2) + "\n")
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for t in report["trials"]:
                w.writerow(["" if t[c] is None else t[c] for c in CSV_COLUMNS])
    else:
        raise ValueError("format must be 'csv' or 'json'")
    return path


def load_report(path):
    return json.loads(Path(path).read_text())


def strip_timing(report):
    """Copy of a report without wall-clock fields (the determinism contract excludes them)."""
    r = json.loads(json.dumps(report))
    for t in r["trials"]:
        t.pop("wall_ms", None)
    return r
