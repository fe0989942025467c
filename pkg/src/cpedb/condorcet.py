"""CAR-Cond, CAR-Verify and CAR-Parallel.

CAR-Cond keeps a partition of the edges into accepted A, rejected R and
undecided U. Each round duels every comparable pair inside U once, rebuilds
the upper/lower confidence matrices and, for each undecided e, compares
the oracle values of "e forced in" against "e forced out" under both
matrices. CAR-Verify confirms or refutes the CAR-Cond answer with its own
duels; CAR-Parallel interleaves verification instances of shrinking
confidence on one environment.

The runners are resumable objects whose whole state is numpy arrays plus a
numpy Generator, so they pickle between any two samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import _car_core as cc
from .env import DuelEnvironment
from .errors import BudgetExceeded, VerificationError
from .graph import BipartiteGraph, Matching
from .oracle import OracleConfig

SAMPLE_CAP = 10 ** 8
DELTA0 = 0.01
SUPPORT_CACHE = 16
_BUF0, _BUF_MAX = 256, 1 << 16


@dataclass
class CondorcetTrace:
    algorithm: str = "car-cond"
    rounds: int = 0
    epoch: int = 1
    samples: int = 0
    matching: tuple | None = None
    stop_reason: str = ""
    accepted: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    classified_round: dict = field(default_factory=dict)  # edge -> round
    classified_epoch: dict = field(default_factory=dict)  # edge -> epoch
    oracle_calls: int = 0
    oracle_iterations: int = 0
    oracle_uncertified: int = 0
    guard_skips: int = 0
    coverage_held: bool | None = None
    first_uncovered_round: int | None = None
    safety_violations: int | None = None
    verify_samples: int = 0
    verify_rounds: int = 0
    hypothesis: tuple | None = None
    ticks: int = 0
    winner_instance: int | None = None
    instances: list = field(default_factory=list)
    schedule_log: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["classified_round"] = {str(k): v for k, v in self.classified_round.items()}
        d["classified_epoch"] = {str(k): v for k, v in self.classified_epoch.items()}
        return d


def epoch_of_round(t):
    """Epoch q holds rounds 4^(q-1) < t <= 4^q."""
    q = 1
    while 4 ** q < t:
        q += 1
    return q


def _opt_vector(cfg: OracleConfig):
    return np.array([0.0 if cfg.step == "paper" else 1.0, float(cfg.certify), float(cfg.max_iter),
                     cfg.proj_floor, float(cfg.proj_max_iter), float(cfg.projection == "pairwise")])


class _Uniforms:
    """Pre-drawn uniforms from one Generator; refills never depend on chunking."""

    def __init__(self, rng):
        self.rng = rng
        self.size = _BUF0
        self.buf = np.zeros(0)

    def refill(self):
        self.buf = self.rng.random(self.size)
        self.size = min(2 * self.size, _BUF_MAX)


class CarCond:
    """Resumable CAR-Cond. ``advance(env, budget)`` takes at most ``budget`` samples.

    ``monitor`` (a Matching, normally the true winner) turns on post-hoc
    bookkeeping: whether the truth stayed inside every confidence interval,
    and rounds where the partition disagreed with the monitored matching
    while it did.
    """

    def __init__(self, G: BipartiteGraph, delta: float, oracle_cfg: OracleConfig | None = None,
                 rng=None, monitor: Matching | None = None):
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.G, self.delta = G, float(delta)
        self.cfg = oracle_cfg or OracleConfig()
        self.opt = _opt_vector(self.cfg)
        m, l = G.m, G.l
        self.K = float(max(G.K, 1))
        self.status = np.zeros(m, dtype=np.int8)
        self.Tp = np.zeros((m, m), dtype=np.int64)
        self.Wp = np.zeros((m, m), dtype=np.int64)
        self.sc = np.zeros(cc.N_SCAL, dtype=np.int64)
        self.sc[cc.T_] = 1
        self.sc[cc.Q_] = 1
        self.pairs = np.zeros((max(G.K, 1), 2), dtype=np.int64)
        self.sc[cc.NPAIRS] = cc.build_pairs(self.status, G.pos, G.comparable, self.pairs)
        S = SUPPORT_CACHE
        self.wV = np.zeros((m, 4, S, l), dtype=np.int64)
        self.wlam = np.zeros((m, 4, S))
        self.wns = np.zeros((m, 4), dtype=np.int64)
        self.wy = np.zeros((m, 4, m))
        self.wyok = np.zeros((m, 4), dtype=bool)
        self.cls_round = np.zeros(m, dtype=np.int64)
        self.target = np.zeros(0, dtype=bool) if monitor is None else np.asarray(monitor.chi, bool)
        self.mon = np.array([1, 0, 0, 0], dtype=np.int64)
        self.counts = np.zeros((m, m), dtype=np.int64)
        self.uni = _Uniforms(rng if rng is not None else np.random.default_rng())
        self.state = "running"

    @property
    def samples(self):
        return int(self.sc[cc.SAMPLES])

    def advance(self, env: DuelEnvironment, budget: int):
        """Run until done, stuck, or one more sample would exceed ``budget``."""
        if self.state != "running":
            return self.state
        G, truth = self.G, env._truth
        while True:
            before = int(self.sc[cc.SAMPLES])
            # the kernel reads its uniform pointer from sc; keep it aligned with the buffer
            r = cc.cond_run(G.eid, G.cand, G.pos, G.bonus, G.scan_table, G.n_candidates, self.K, self.delta,
                            truth.p, truth.comparable, self.status, self.Tp, self.Wp, self.sc,
                            self.pairs, self.wV, self.wlam, self.wns, self.wy, self.wyok,
                            self.uni.buf, budget, self.counts, self.cls_round, self.target,
                            self.mon, self.opt)
            budget -= int(self.sc[cc.SAMPLES]) - before
            if r == cc.REFILL:
                self.uni.refill()
                self.sc[cc.UPTR] = 0
                continue
            break
        self._flush(env)
        if r == cc.DONE:
            self.state = "done"
        elif r == cc.STUCK:
            self.state = "stuck"
        return self.state

    def step(self, env):
        return self.advance(env, 1)

    def _flush(self, env):
        if self.counts.any():
            env.record_bulk(self.counts)
            self.counts[:] = 0

    @property
    def answer(self) -> Matching | None:
        if self.state != "done":
            return None
        return Matching(tuple(int(e) for e in np.flatnonzero(self.status == cc.ACC)), self.G.m)

    def fill_trace(self, tr: CondorcetTrace):
        sc = self.sc
        tr.rounds = int(sc[cc.T_])
        tr.epoch = int(sc[cc.Q_])
        tr.samples = int(sc[cc.SAMPLES])
        tr.accepted = np.flatnonzero(self.status == cc.ACC).tolist()
        tr.rejected = np.flatnonzero(self.status == cc.REJ).tolist()
        tr.classified_round = {int(e): int(self.cls_round[e]) for e in np.flatnonzero(self.status)}
        if self.state == "done":
            # edges still undecided when A fills every position cannot join A: rejected at the last round
            rest = np.flatnonzero(self.status == cc.UND).tolist()
            tr.rejected = sorted(tr.rejected + rest)
            tr.classified_round.update({e: tr.rounds for e in rest})
        tr.classified_epoch = {e: epoch_of_round(t) for e, t in tr.classified_round.items()}
        tr.oracle_calls = int(sc[cc.CALLS])
        tr.oracle_iterations = int(sc[cc.ITERS])
        tr.oracle_uncertified = int(sc[cc.UNCERT])
        tr.guard_skips = int(sc[cc.GUARD])
        if self.target.shape[0]:
            tr.coverage_held = bool(self.mon[cc.COV])
            tr.first_uncovered_round = int(self.mon[cc.FIRST_UNCOV]) or None
            tr.safety_violations = int(self.mon[cc.VIOL])
        return tr


def _cap_chunk(cap, used):
    return int(min(cap - used, 1 << 22))


def car_cond(env: DuelEnvironment, G: BipartiteGraph, delta: float,
             oracle_cfg: OracleConfig | None = None, sample_cap=SAMPLE_CAP,
             monitor: Matching | None = None):
    """Returns (M, trace); M is the Condorcet winner with probability >= 1 - delta.

    Raises BudgetExceeded once ``sample_cap`` samples are spent (which is
    what happens when no Condorcet winner exists).
    """
    run = CarCond(G, delta, oracle_cfg, np.random.default_rng(env.kernel_seed()), monitor)
    tr = CondorcetTrace()
    while run.state == "running" and run.samples < sample_cap:
        run.advance(env, _cap_chunk(sample_cap, run.samples))
    run.fill_trace(tr)
    if run.state == "done":
        tr.matching = run.answer.edge_ids
        tr.stop_reason = "accepted-full-matching"
        return run.answer, tr
    tr.stop_reason = "stalled" if run.state == "stuck" else "budget-exceeded"
    raise BudgetExceeded(f"CAR-Cond stopped without an answer ({tr.stop_reason}) "
                         f"after {tr.samples} samples", tr)


def second_best_response(Mhat: Matching, Q, G: BipartiteGraph):
    """(argmax, max) of f(M, Mhat, Q) over maximum matchings M != Mhat.

    Returns (None, -inf) when Mhat is the only maximum matching.
    """
    vtx = np.empty(G.l, dtype=np.int64)
    best = np.full(G.l, -1, dtype=np.int64)
    v = cc.second_best(np.asarray(Mhat.edge_ids, dtype=np.int64), np.asarray(Q, dtype=float),
                       G.eid, G.pos, G.bonus, G.workspace(),
                       np.empty(G.m, dtype=bool), vtx, best)
    if v == -np.inf:
        return None, v
    return Matching(tuple(int(e) for e in best), G.m), float(v)


class CarVerify:
    """Resumable CAR-Verify: CAR-Cond at delta0 for a hypothesis, then verification at delta."""

    def __init__(self, G: BipartiteGraph, delta: float, oracle_cfg: OracleConfig | None = None,
                 rng=None, delta0=DELTA0):
        if not 0 < delta < delta0:
            raise ValueError(f"delta must lie in (0, {delta0})")
        self.G, self.delta = G, float(delta)
        rng = rng if rng is not None else np.random.default_rng()
        self.cond = CarCond(G, delta0, oracle_cfg, rng)
        m = G.m
        self.Tp = np.zeros((m, m), dtype=np.int64)
        self.Wp = np.zeros((m, m), dtype=np.int64)
        self.vsc = np.array([1, 0, 0, 0], dtype=np.int64)  # t, uptr, samples, unused
        self.counts = np.zeros((m, m), dtype=np.int64)
        self.Mhat = None
        self.state = "exploring"

    @property
    def samples(self):
        return self.cond.samples + int(self.vsc[2])

    @property
    def finished(self):
        return self.state in ("answer", "error", "stuck")

    def advance(self, env, budget: int):
        if self.finished:
            return self.state
        if self.state == "exploring":
            before = self.cond.samples
            st = self.cond.advance(env, budget)
            budget -= self.cond.samples - before
            if st == "stuck":
                self.state = "stuck"
                return self.state
            if st != "done":
                return self.state
            self.Mhat = np.asarray(self.cond.answer.edge_ids, dtype=np.int64)
            self.state = "verifying"
            self.vsc[1] = self.cond.sc[cc.UPTR]  # continue the same uniform stream
        G, truth = self.G, env._truth
        uni = self.cond.uni
        while True:
            before = int(self.vsc[2])
            r = cc.verify_run(G.eid, G.pos, G.bonus, G.scan_table, G.n_candidates, float(max(G.K, 1)), self.delta,
                              truth.p, truth.comparable, self.Mhat, self.Tp, self.Wp, self.vsc,
                              uni.buf, budget, self.counts)
            budget -= int(self.vsc[2]) - before
            if r == cc.REFILL:
                uni.refill()
                self.vsc[1] = 0
                continue
            break
        if self.counts.any():
            env.record_bulk(self.counts)
            self.counts[:] = 0
        if r == cc.DONE:
            self.state = "answer"
        elif r == cc.ERROR:
            self.state = "error"
        return self.state

    def step(self, env):
        return self.advance(env, 1)

    @property
    def answer(self):
        if self.state != "answer":
            return None
        return Matching(tuple(int(e) for e in self.Mhat), self.G.m)

    def fill_trace(self, tr: CondorcetTrace):
        self.cond.fill_trace(tr)
        tr.algorithm = "car-verify"
        tr.verify_samples = int(self.vsc[2])
        tr.verify_rounds = int(self.vsc[0])
        tr.samples = self.samples
        tr.hypothesis = None if self.Mhat is None else tuple(int(e) for e in self.Mhat)
        return tr


def car_verify(env: DuelEnvironment, G: BipartiteGraph, delta: float,
               oracle_cfg: OracleConfig | None = None, sample_cap=SAMPLE_CAP):
    """Returns (M, trace), or raises VerificationError when the hypothesis is refuted.

    With probability >= 1 - delta the outcome is the Condorcet winner or an error.
    """
    run = CarVerify(G, delta, oracle_cfg, np.random.default_rng(env.kernel_seed()))
    while not run.finished and run.samples < sample_cap:
        run.advance(env, _cap_chunk(sample_cap, run.samples))
    tr = run.fill_trace(CondorcetTrace())
    if run.state == "answer":
        tr.matching = run.answer.edge_ids
        tr.stop_reason = "verified"
        return run.answer, tr
    if run.state == "error":
        tr.stop_reason = "verification-error"
        raise VerificationError(f"hypothesis {tr.hypothesis} refuted after {tr.samples} samples", tr)
    tr.stop_reason = "stalled" if run.state == "stuck" else "budget-exceeded"
    raise BudgetExceeded(f"CAR-Verify stopped without an answer ({tr.stop_reason})", tr)


def parallel_schedule(t: int):
    """Instances advanced at tick t: every k with t mod 2^k == 0, ascending."""
    if t < 1:
        raise ValueError("ticks start at 1")
    return [k for k in range(t.bit_length()) if t % (1 << k) == 0]


class _Sink:
    """Stand-in environment for one parallel instance: same truth, private accounting."""

    def __init__(self, truth):
        self._truth = truth
        self.counts = np.zeros((truth.m, truth.m), dtype=np.int64)

    def record_bulk(self, counts):
        self.counts += counts


class CarParallel:
    """CAR-Parallel; instance k (confidence delta / 2^(k+1)) starts at tick 2^k.

    Instance k draws from its own stream default_rng([base, k]); ``base`` is
    one draw from the environment. ``tick`` is the literal scheduler.
    ``run_batched`` exploits the independence of the streams: it runs each
    instance alone up to the best answer tick found so far, then replays
    instances that overran so that states and sample counts equal those of
    the literal schedule at the final tick.
    """

    def __init__(self, G, delta, oracle_cfg=None, base_seed=0, delta0=DELTA0, log_ticks=0,
                 factory=None):
        if not 0 < delta < delta0:
            raise ValueError(f"delta must lie in (0, {delta0})")
        self.G, self.delta, self.cfg, self.delta0 = G, float(delta), oracle_cfg, delta0
        self.base = int(base_seed)
        self.instances: dict[int, CarVerify] = {}
        self.sinks: dict[int, _Sink] = {}
        self.t = 0
        self.winner = None
        self.log_ticks = log_ticks
        self.schedule_log = []
        # factory(k, delta_k, rng) -> instance; a test hook for scripted instances
        self.factory = factory or (lambda k, d, rng: CarVerify(self.G, d, self.cfg, rng, self.delta0))

    def _new(self, k, truth):
        inst = self.factory(k, self.delta / 2 ** (k + 1), np.random.default_rng([self.base, k]))
        self.instances[k] = inst
        self.sinks[k] = _Sink(truth)
        return inst

    @property
    def samples(self):
        return sum(v.samples for v in self.instances.values())

    def tick(self, env):
        """Advance one tick; returns True once an instance has answered."""
        self.t += 1
        advanced = []
        for k in parallel_schedule(self.t):
            inst = self.instances.get(k) or self._new(k, env._truth)
            if inst.finished:  # retired
                continue
            advanced.append(k)
            if inst.step(self.sinks[k]) == "answer":
                self.winner = k
                break
        if len(self.schedule_log) < self.log_ticks:
            self.schedule_log.append(advanced)
        return self.winner is not None

    def run_batched(self, env, tick_cap):
        best = math.inf
        done_at = {}
        k = 0
        while (1 << k) < best and (1 << k) <= tick_cap:
            inst = self._new(k, env._truth)
            steps = int(min(best - 1, tick_cap)) >> k
            while not inst.finished and inst.samples < steps:
                inst.advance(self.sinks[k], steps - inst.samples)
            if inst.finished:
                done_at[k] = max(inst.samples, 1) << k
                if inst.state == "answer" and done_at[k] < best:
                    best, self.winner = done_at[k], k
            k += 1
        self.done_at = done_at
        if self.winner is None:
            self.t = int(tick_cap)
            return False
        self.t = T = int(best)
        for j in list(self.instances):
            if (1 << j) > T or (j > self.winner and (1 << j) == T):
                del self.instances[j], self.sinks[j]  # never started under the literal schedule
                continue
            # steps instance j takes by tick T (tick T itself only below the winner)
            need = T >> j
            if j > self.winner and T % (1 << j) == 0:
                need -= 1
            if j in done_at and done_at[j] >> j <= need:
                continue  # it finished by tick T, so everything it drew was drawn
            if self.instances[j].samples != need:
                inst = self._new(j, env._truth)
                while not inst.finished and inst.samples < need:
                    inst.advance(self.sinks[j], need - inst.samples)
        return True

    def derived_log(self, n):
        """The literal scheduler's per-tick advanced lists for ticks 1..n, after ``run_batched``."""
        done_at = getattr(self, "done_at", {})
        out = []
        for t in range(1, min(n, self.t) + 1):
            adv = []
            for k in parallel_schedule(t):
                if k in done_at and done_at[k] < t:
                    continue  # retired
                adv.append(k)
                if t == self.t and k == self.winner:
                    break
            out.append(adv)
        return out

    def settle(self, env):
        """Charge every instance's samples to the real environment."""
        for sink in self.sinks.values():
            env.record_bulk(sink.counts)
            sink.counts[:] = 0

    def instance_table(self):
        out = []
        for k, v in sorted(self.instances.items()):
            st = v.state if v.state in ("answer", "error") else "running"
            out.append({"k": k, "delta": v.delta, "created_tick": 1 << k, "state": st,
                        "samples": v.samples})
        return out


def car_parallel(env: DuelEnvironment, G: BipartiteGraph, delta: float,
                 oracle_cfg: OracleConfig | None = None, sample_cap=SAMPLE_CAP, log_ticks=0,
                 mode="batched", factory=None):
    """Returns (M, trace); M is the Condorcet winner with probability >= 1 - delta.

    ``mode="interleaved"`` runs the literal tick loop (one sample per
    scheduled instance per tick); ``"batched"`` reaches the identical outcome,
    final tick and per-pair sample counts faster. ``sample_cap`` bounds the
    number of ticks, hence the samples of instance 0.
    """
    if mode not in ("batched", "interleaved"):
        raise ValueError("mode must be 'batched' or 'interleaved'")
    run = CarParallel(G, delta, oracle_cfg, env.kernel_seed(), log_ticks=log_ticks, factory=factory)
    if mode == "interleaved":
        while run.t < sample_cap and not run.tick(env):
            pass
    else:
        run.run_batched(env, sample_cap)
        run.schedule_log = run.derived_log(log_ticks)
    run.settle(env)
    tr = CondorcetTrace(algorithm="car-parallel")
    tr.ticks = run.t
    tr.samples = run.samples
    tr.schedule_log = run.schedule_log
    tr.instances = run.instance_table()
    if run.winner is None:
        tr.stop_reason = "budget-exceeded"
        raise BudgetExceeded(f"CAR-Parallel reached {run.t} ticks without an answer", tr)
    win = run.instances[run.winner]
    tr.winner_instance = run.winner
    tr.matching = win.answer.edge_ids
    tr.hypothesis = tr.matching
    tr.stop_reason = "verified"
    return win.answer, tr
