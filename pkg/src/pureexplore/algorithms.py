"""Sequential identification strategies built from tracking + stopping.

Three strategies share one loop: plain Track-and-Stop (weights at the current
empirical oracle answer), Sticky Track-and-Stop (weights at the order-least
candidate answer from the small confidence region), and a fixed-weights
baseline. All use the GLR stopping rule on the large region.

Every run starts by pulling each arm once (rounds 1..K) so that empirical
means, and hence divergences, are defined before the first solver call;
C-tracking accumulates uniform targets during those rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import glr
from .expfam import DomainError
from .oracle import DegenerateInstanceError, SolverError, solve_answer, solve_global
from .problems import Problem
from .tracking import TrackerState, clip_project, epsilon_schedule, next_arm_c, next_arm_d

__all__ = [
    "StrategyConfig",
    "RunRecord",
    "run",
    "choose_sticky_target",
    "choose_tas_target",
]

STRATEGY_KINDS = ("sticky_tas", "tas", "fixed")


@dataclass(frozen=True)
class StrategyConfig:
    """Which strategy to run and how to track its weights."""

    kind: str
    tracking: str = "C"
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"strategy kind must be one of {STRATEGY_KINDS}")
        if self.tracking not in ("C", "D"):
            raise ValueError("tracking mode must be 'C' or 'D'")
        if self.kind == "fixed":
            if self.weights is None:
                raise ValueError("fixed strategy needs a weight vector")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("fixed weights must be a simplex point")

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            return "fixed"
        return f"{self.kind}-{self.tracking}"

    def to_json(self) -> dict:
        out = {"strategy": self.kind, "tracking": self.tracking}
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out


@dataclass
class RunRecord:
    """Outcome of one sequential run."""

    tau: int
    answer: Optional[str]
    correct: bool
    final_counts: np.ndarray
    final_props: np.ndarray
    mu_hat: np.ndarray
    truncated: bool = False
    snapshots: dict = field(default_factory=dict)
    trace: Optional[list] = None
    seed: Optional[int] = None


def choose_sticky_target(problem: Problem, counts, mu_hat, t, threshold,
                         cache: Optional[dict] = None):
    """Least candidate answer in the answer order and its oracle weights."""
    cands = glr.candidate_oracle_answers(problem, counts, mu_hat, t, threshold)
    target = cands[0]
    w0 = cache.get(target.index) if cache is not None else None
    sol = solve_answer(problem, mu_hat, target, w0=w0)
    w = sol.weight()
    if cache is not None:
        cache[target.index] = w
    return target, w


def choose_tas_target(problem: Problem, mu_hat):
    """Empirical oracle answer (ties broken by answer order) and its weights."""
    g = solve_global(problem, mu_hat)
    target = g.oracle_answers[0]
    return target, g.per_answer[target.label].weight()


def _make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def run(problem: Problem, true_mu, strategy: StrategyConfig,
        threshold: glr.Threshold, seed=0, max_rounds: int = 10_000_000,
        snapshots=(), trace_every: int = 0, engine: str = "auto") -> RunRecord:
    """Full sequential loop; deterministic given the seed and configuration.

    ``engine`` selects "general" (reference implementation, any problem) or
    "fast" (compiled kernel for supported problem/strategy combinations);
    "auto" picks the fast path when available and tracing is off.
    """
    true_mu = problem.validate_mu(true_mu)
    if max_rounds <= problem.n_arms:
        raise ValueError("max_rounds must exceed the arm count")
    if engine not in ("auto", "general", "fast"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine != "general" and trace_every == 0:
        from . import _fastpath

        if _fastpath.supports(problem, strategy):
            rec = _fastpath.run_fast(problem, true_mu, strategy, threshold,
                                     _make_rng(seed), max_rounds, snapshots)
            if rec is not None:
                rec.correct = rec.answer is not None and any(
                    a.label == rec.answer for a in problem.correct_answers(true_mu)
                )
                rec.seed = seed if isinstance(seed, int) else None
                return rec
        if engine == "fast":
            raise ValueError("fast engine does not support this configuration")
    return _run_general(problem, true_mu, strategy, threshold, seed,
                        max_rounds, snapshots, trace_every)


def _run_general(problem, true_mu, strategy, threshold, seed, max_rounds,
                 snapshots, trace_every):
    rng = _make_rng(seed)
    fam = problem.family
    K = problem.n_arms
    tracker = TrackerState.fresh(K, strategy.tracking)
    mu_raw = np.zeros(K)
    uniform = np.full(K, 1.0 / K)
    fixed_w = (np.asarray(strategy.weights, dtype=float)
               if strategy.kind == "fixed" else None)
    cache: dict = {}
    snapshots = sorted(int(s) for s in snapshots)
    snap_out: dict = {}
    trace = [] if trace_every > 0 else None

    answer = None
    truncated = False
    t = 0
    while t < max_rounds:
        t += 1
        if t <= K:
            arm = t - 1
            if strategy.tracking == "C":
                tracker.cum_w += clip_project(uniform, epsilon_schedule(K, t))
            target = None
        else:
            mu_hat = fam.clamp(mu_raw)
            try:
                if strategy.kind == "sticky_tas":
                    target, w = choose_sticky_target(
                        problem, tracker.counts, mu_hat, t, threshold, cache)
                elif strategy.kind == "tas":
                    target, w = choose_tas_target(problem, mu_hat)
                else:
                    target, w = None, fixed_w
            except DegenerateInstanceError:
                target, w = None, uniform
            except SolverError as err:
                raise SolverError(
                    f"round {t}: {err}", best=err.best, gap=err.gap) from err
            arm = (next_arm_c(tracker, w) if strategy.tracking == "C"
                   else next_arm_d(tracker, w))
        x = fam.sample(float(true_mu[arm]), rng)
        tracker.record_pull(arm)
        mu_raw[arm] += (x - mu_raw[arm]) / tracker.counts[arm]

        if t >= K:
            mu_hat = fam.clamp(mu_raw)
            stop = glr.stopping_answer(problem, tracker.counts, mu_hat,
                                       threshold, t)
            if stop is not None:
                answer = stop
        if trace is not None and (t % trace_every == 0 or answer is not None):
            trace.append((t, None if target is None else target.label, arm))
        if snapshots and t == snapshots[0]:
            snap_out[t] = tracker.counts / t
            snapshots.pop(0)
        if answer is not None:
            break
    else:
        truncated = True

    tau = tracker.t
    for s in snapshots:
        snap_out[s] = tracker.counts / tau
    correct = answer is not None and any(
        a.index == answer.index for a in problem.correct_answers(true_mu))
    return RunRecord(
        tau=tau,
        answer=None if answer is None else answer.label,
        correct=correct,
        final_counts=tracker.counts.copy(),
        final_props=tracker.counts / tau,
        mu_hat=mu_raw.copy(),
        truncated=truncated,
        snapshots=snap_out,
        trace=trace,
        seed=seed if isinstance(seed, int) else None,
    )
