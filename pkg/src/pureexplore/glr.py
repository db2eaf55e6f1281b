"""Stopping and confidence machinery for the sequential strategies.

The stopping threshold is beta(t, delta) = log(C t^2 / delta). A certified
constant C must dominate e * sum_t (e/K)^K (log^2(C t^2) log t)^K / t^2; it is
found once per arm count by growing C through the numeric fixed-point check
(series summed to 10^6 plus an integral tail bound). The small confidence
region C_t used for candidate-answer selection inflates with
log f(t) = log(C t^10).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .problems import Answer, Problem, best_response

__all__ = [
    "Threshold",
    "make_threshold",
    "certified_constant",
    "beta",
    "log_f",
    "stopping_answer",
    "candidate_oracle_answers",
]

_SERIES_CUTOFF = 10**6
_C_CACHE: dict[int, float] = {}


def _series_upper(C: float, K: int) -> float:
    """Upper bound on e * sum_{t>=1} (e/K)^K (log^2(Ct^2) log t)^K / t^2."""
    t = np.arange(2.0, _SERIES_CUTOFF + 1.0)
    log_term = (np.log(C) + 2.0 * np.log(t)) ** 2 * np.log(t)
    head = float(np.sum(log_term**K / t**2))

    def integrand(x):
        return ((np.log(C) + 2.0 * np.log(x)) ** 2 * np.log(x)) ** K / x**2

    # substitute x = e^s: the tail becomes a smooth, eventually-exponentially
    # decaying integral that quad handles without transformation trouble
    def integrand_log(s):
        return ((np.log(C) + 2.0 * s) ** 2 * s) ** K * np.exp(-s)

    s0 = np.log(_SERIES_CUTOFF)
    s1 = max(40.0 * (K + 1), 10.0 * s0)
    tail = 0.0
    for a, b in zip(np.linspace(s0, s1, 8)[:-1], np.linspace(s0, s1, 8)[1:]):
        part, _ = integrate.quad(integrand_log, a, b, limit=200)
        tail += part
    # pad by the largest sampled term in case the integrand still rises
    probe = np.logspace(6, 20, 60)
    pad = float(np.max(integrand(probe)))
    scale = np.e * (np.e / K) ** K
    return scale * (head + tail + pad)


def certified_constant(n_arms: int) -> float:
    """Smallest C of the form e * 1.5^j passing the fixed-point inequality."""
    if n_arms in _C_CACHE:
        return _C_CACHE[n_arms]
    C = np.e
    while C < _series_upper(C, n_arms):
        C *= 1.5
    _C_CACHE[n_arms] = C
    return C


@dataclass(frozen=True)
class Threshold:
    """Stopping-threshold configuration beta(t, delta) = log(C t^2 / delta)."""

    delta: float
    C: float
    certified: bool

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        if not self.C > 0:
            raise ValueError("threshold constant C must be positive")


def make_threshold(delta: float, n_arms: int, C: Optional[float] = None) -> Threshold:
    """Certified threshold for K arms, or a user override flagged non-certified."""
    if C is not None:
        return Threshold(delta, float(C), certified=False)
    return Threshold(delta, certified_constant(n_arms), certified=True)


def beta(th: Threshold, t: int) -> float:
    """log(C t^2 / delta) for t >= 1."""
    if t < 1:
        raise ValueError(f"beta requires t >= 1, got {t}")
    return np.log(th.C) + 2.0 * np.log(t) + np.log(1.0 / th.delta)


def log_f(th: Threshold, t: int) -> float:
    """Small-region inflation log f(t) = log(C t^10); +inf for t < 1."""
    if t < 1:
        return np.inf
    return np.log(th.C) + 10.0 * np.log(t)


def stopping_answer(problem: Problem, counts, mu_hat, th: Threshold,
                    t: int) -> Optional[Answer]:
    """First answer whose alternative the large region D_t excludes.

    D_t excludes not-i exactly when inf over not-i of
    sum_k N_k d(mu_hat_k, lambda_k) exceeds beta(t, delta).
    """
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise ValueError("stopping test requires every arm sampled at least once")
    b = beta(th, t)
    for ans in problem.answers:
        if best_response(problem, ans, counts, mu_hat).value > b:
            return ans
    return None


def candidate_oracle_answers(problem: Problem, counts, mu_hat, t: int,
                             th: Threshold) -> list[Answer]:
    """Superset of the oracle answers over the small confidence region C_t.

    C_t = {mu' : D(N_{t-1}, mu_hat_{t-1}, mu') <= log f(t-1)}; at t <= 1 the
    region is the whole model class and every answer is a candidate. Problems
    supply exact (or conservative, eventually tight) membership tests; kinds
    without one fall back to a penalized multi-start search.
    """
    radius = log_f(th, t - 1)
    if not np.isfinite(radius):
        return list(problem.answers)
    counts = np.asarray(counts, dtype=float)
    mu_hat = np.asarray(mu_hat, dtype=float)
    cand = problem.candidate_answers(counts, mu_hat, radius)
    if cand is None:
        cand = _generic_candidates(problem, counts, mu_hat, radius)
    if not cand:
        raise RuntimeError(
            "internal error: candidate set is empty although mu_hat lies in C_t"
        )
    return sorted(cand, key=lambda a: a.index)


# ---------------------------------------------------------------------------
# Generic fallback: penalized multi-start local search
# ---------------------------------------------------------------------------


def _min_divergence_into(problem, counts, mu_hat, member, n_starts, rng):
    """Approximate min D(N, mu_hat, mu') over {mu' : member(mu')}."""
    from .expfam import weighted_divergence

    fam = problem.family
    K = problem.n_arms
    scale = np.sqrt(1.0 / np.maximum(counts, 1.0)) + 1e-3

    def objective(x):
        mu_p = fam.clamp(x)
        div = weighted_divergence(fam, counts, mu_hat, mu_p)
        return div if member(mu_p) else div + 1e6

    best = np.inf
    for s in range(n_starts):
        x0 = mu_hat + (0.0 if s == 0 else rng.standard_normal(K) * scale * (1 + s))
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"maxiter": 200 * K, "fatol": 1e-9})
        if res.fun < best:
            best = float(res.fun)
    return best


def _generic_candidates(problem, counts, mu_hat, radius, n_starts=20):
    """Conservative candidate test for kinds without a specialized one.

    Accepts an answer unless the relaxed correctness region already certifies
    a larger divergence than the radius; the oracle-answer restriction is only
    trusted when its own search found a feasible point.
    """
    from .oracle import solve_global

    rng = np.random.default_rng(0)
    out = []
    for ans in problem.answers:
        relaxed = _min_divergence_into(
            problem, counts, mu_hat,
            lambda m, a=ans: a in problem.correct_answers(m),
            n_starts, rng,
        )
        if relaxed > radius:
            continue

        def is_oracle(m, a=ans):
            try:
                g = solve_global(problem, m)
            except Exception:
                return False
            return any(o.index == a.index for o in g.oracle_answers)

        constrained = _min_divergence_into(problem, counts, mu_hat, is_oracle,
                                           n_starts, rng)
        if constrained <= radius or not np.isfinite(constrained) or constrained >= 1e6:
            # cannot certify exclusion: stay conservative and keep the answer
            out.append(ans)
    return out
