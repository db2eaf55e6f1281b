"""Outer maximization over the simplex and the associated minimax games.

For one answer, the quantity of interest is

    D(mu, not-i) = sup_{w in simplex} inf_{lambda in not-i} sum_k w_k d(mu_k, lambda_k),

a concave maximization whose inner player is the union best response from
:mod:`pureexplore.problems`. Closed forms are dispatched where the alternative
is a single primitive (or a composition); otherwise an iterative solver runs:
projected subgradient ascent with averaging discovers the active alternative
models, and a double-oracle polish on the induced finite matrix game (the same
game whose mixed minimizer is the lower-bound equilibrium) closes the
primal-dual gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expfam import kl
from .problems import Answer, Composed, Problem, best_response

__all__ = [
    "OracleSolution",
    "GlobalOracle",
    "Equilibrium",
    "SolverError",
    "DegenerateInstanceError",
    "solve_answer",
    "solve_global",
    "equilibrium",
    "weighted_value",
    "project_simplex",
]

#: Default tolerance for closed-form dispatch paths (exact up to rounding).
TOL_CLOSED = 1e-6
#: Default tolerance for iterative solver paths.
TOL_ITERATIVE = 1e-4
#: Relative tie window for oracle answers.
TIE_REL = 1e-8

SUBGRADIENT_CAP = 100_000
GAME_ROUNDS_CAP = 10_000


class SolverError(RuntimeError):
    """Iterative solve failed to converge; carries the best iterate found."""

    def __init__(self, message, best=None, gap=None):
        super().__init__(message)
        self.best = best
        self.gap = gap


class DegenerateInstanceError(ValueError):
    """Every answer has zero divergence: mu sits on a global boundary."""


@dataclass
class OracleSolution:
    """Value and maximizer representatives of w -> D(w, mu, not-i)."""

    value: float
    weights: list = field(default_factory=list)
    lam: Optional[np.ndarray] = None

    def weight(self) -> np.ndarray:
        return self.weights[0]


@dataclass
class GlobalOracle:
    """D(mu), the oracle answers attaining it, and the characteristic time."""

    value: float
    oracle_answers: list
    per_answer: dict
    t_star: float


@dataclass
class Equilibrium:
    """Finite mixed strategy of the inner player certifying D(mu, not-i)."""

    q: np.ndarray
    supports: list
    value: float
    gap: float


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(v) + 1)
    cond = u - (css - 1.0) / idx > 0
    rho = int(np.max(idx[cond]))
    tau = (css[rho - 1] - 1.0) / rho
    return np.maximum(v - tau, 0.0)


def _uniform(K):
    return np.full(K, 1.0 / K)


def weighted_value(problem: Problem, w, mu) -> float:
    """max_i D(w, mu, not-i): the best certifiable divergence at fixed w."""
    vals = [best_response(problem, a, w, mu).value for a in problem.answers]
    return max(vals)


# ---------------------------------------------------------------------------
# Finite matrix game: MAX mixes arms (rows), MIN mixes alternative models
# ---------------------------------------------------------------------------


def _fictitious_play(M: np.ndarray, rounds: int):
    """Asynchronous fictitious play; returns averaged mixed strategies."""
    K, J = M.shape
    row_cum = np.zeros(J)   # sum over played rows of M[k, :]
    col_cum = np.zeros(K)   # sum over played columns of M[:, j]
    row_counts = np.zeros(K)
    col_counts = np.zeros(J)
    k = 0
    for _ in range(rounds):
        row_counts[k] += 1
        row_cum += M[k]
        j = int(np.argmin(row_cum))
        col_counts[j] += 1
        col_cum += M[:, j]
        k = int(np.argmax(col_cum))
    w = row_counts / row_counts.sum()
    q = col_counts / col_counts.sum()
    return w, q


def _polish_support(M, rows, cols):
    """Exact equalization on candidate supports; None when inconsistent."""
    sub = M[np.ix_(rows, cols)]
    nr, nc = sub.shape
    # unknowns: q (nc) and the value v
    A = np.zeros((nr + 1, nc + 1))
    A[:nr, :nc] = sub
    A[:nr, nc] = -1.0
    A[nr, :nc] = 1.0
    b = np.zeros(nr + 1)
    b[nr] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    q_sub = sol[:nc]
    if np.any(q_sub < -1e-9):
        return None
    q_sub = np.clip(q_sub, 0.0, None)
    s = q_sub.sum()
    if s <= 0:
        return None
    q = np.zeros(M.shape[1])
    q[cols] = q_sub / s
    return q


def solve_matrix_game(M: np.ndarray, tol: float = 1e-9,
                      rounds: int = GAME_ROUNDS_CAP):
    """Solve max_w min_q w^T M q for the row player.

    Returns (w, q, lower, upper) where lower = min_j (w^T M)_j and
    upper = max_k (M q)_k bracket the game value. Fictitious play locates the
    supports; a linear equalization polish sharpens both strategies.
    """
    K, J = M.shape
    if J == 1:
        q = np.ones(1)
        w = np.zeros(K)
        w[int(np.argmax(M[:, 0]))] = 1.0
        v = float(np.max(M[:, 0]))
        return w, q, v, v

    best_w, best_lower = _uniform(K), float(np.min(_uniform(K) @ M))
    best_q, best_upper = None, np.inf

    def consider_q(q):
        nonlocal best_q, best_upper
        up = float(np.max(M @ q))
        if up < best_upper:
            best_q, best_upper = q, up

    def consider_w(w):
        nonlocal best_w, best_lower
        lo = float(np.min(w @ M))
        if lo > best_lower:
            best_w, best_lower = w, lo

    n = 256
    while True:
        w_fp, q_fp = _fictitious_play(M, n)
        consider_w(w_fp)
        consider_q(q_fp)
        for thresh in (1e-8, 1e-4, 1e-2):
            rows = np.flatnonzero(w_fp > thresh * np.max(w_fp))
            cols = np.flatnonzero(q_fp > thresh * np.max(q_fp))
            q_pol = _polish_support(M, rows, cols)
            if q_pol is not None:
                consider_q(q_pol)
            w_pol = _polish_support(-M.T, cols, rows)
            if w_pol is not None:
                consider_w(w_pol)
        if best_upper - best_lower <= tol or n >= rounds:
            break
        n *= 4
    return best_w, best_q, best_lower, best_upper


# ---------------------------------------------------------------------------
# Per-answer solve
# ---------------------------------------------------------------------------


class _ResponseOracle:
    """Caches distinct best responses as columns of the induced game."""

    def __init__(self, problem, answer, mu):
        self.problem = problem
        self.answer = answer
        self.mu = np.asarray(mu, dtype=float)
        self.columns = []     # d(mu_k, lam_k) vectors
        self.lams = []
        self._seen = set()
        self.upper = np.inf   # min over columns of max_k column_k

    def respond(self, w):
        br = best_response(self.problem, self.answer, w, self.mu)
        g = np.asarray(kl(self.problem.family, self.mu, br.lam), dtype=float)
        key = tuple(np.round(g, 12))
        if key not in self._seen:
            self._seen.add(key)
            self.columns.append(g)
            self.lams.append(br.lam)
            self.upper = min(self.upper, float(np.max(g)))
        return br.value, g

    def matrix(self):
        return np.column_stack(self.columns)


def _solve_iterative(problem, answer, mu, tol, w0=None, want_game=False,
                     seed_weights=()):
    """Subgradient discovery plus double-oracle polish for one answer."""
    K = problem.n_arms
    oracle = _ResponseOracle(problem, answer, mu)
    w = np.asarray(w0, dtype=float) if w0 is not None else _uniform(K)
    f0, g0 = oracle.respond(w)
    best_val, best_w = f0, w.copy()
    for ws in seed_weights:
        ws = np.asarray(ws, dtype=float)
        v, _ = oracle.respond(ws)
        if v > best_val:
            best_val, best_w = v, ws.copy()

    scale = float(np.max(g0)) or 1.0
    step0 = 0.5 / scale
    avg = w.copy()
    n_sub = 200
    for n in range(1, n_sub + 1):
        val, g = oracle.respond(w)
        if val > best_val:
            best_val, best_w = val, w.copy()
        if oracle.upper - best_val <= tol:
            break
        w = project_simplex(w + step0 / np.sqrt(n) * g)
        avg += (w - avg) / (n + 1)
        if n % 25 == 0:
            val_avg, _ = oracle.respond(avg)
            if val_avg > best_val:
                best_val, best_w = val_avg, avg.copy()

    q_final, upper_final = None, oracle.upper
    stalls = 0
    for _ in range(200):
        n_cols = len(oracle.columns)
        M = oracle.matrix()
        w_g, q_g, lower_g, upper_g = solve_matrix_game(M, tol=0.25 * tol)
        if q_g is not None:
            upper_final = min(upper_final, upper_g)
            q_final = q_g
        val, _ = oracle.respond(w_g)
        if val > best_val:
            best_val, best_w = val, w_g.copy()
        gap = min(oracle.upper, upper_final) - best_val
        if gap <= tol:
            break
        stalls = stalls + 1 if len(oracle.columns) == n_cols else 0
        if stalls >= 3:
            break
    else:
        gap = min(oracle.upper, upper_final) - best_val
    if gap > tol:
        sol = OracleSolution(best_val, [best_w], None)
        raise SolverError(
            f"no convergence for answer {answer.label!r}: gap {gap:.3e} > tol {tol:.3e}",
            best=sol, gap=gap,
        )
    br = best_response(problem, answer, best_w, mu)
    sol = OracleSolution(best_val, [best_w], br.lam)
    if want_game:
        return sol, oracle, q_final, min(oracle.upper, upper_final)
    return sol


def solve_answer(problem: Problem, mu, answer: Answer, tol: float = None,
                 force_iterative: bool = False, w0=None) -> OracleSolution:
    """D(mu, not-answer) with maximizing weights and the attained lambda.

    Closed forms are used when the problem supplies them (single-primitive
    alternatives, compositions); otherwise the iterative path runs to the
    requested tolerance.
    """
    mu = problem.validate_mu(mu)
    prims = problem.alternative(answer)
    if not prims:
        return OracleSolution(np.inf, [_uniform(problem.n_arms)], None)
    probe = best_response(problem, answer, _uniform(problem.n_arms), mu)
    if probe.value == 0.0:
        # mu lies in (the closure of) the alternative: the game value is 0
        return OracleSolution(0.0, [_uniform(problem.n_arms)], probe.lam)

    if not force_iterative:
        if isinstance(problem, Composed):
            return _solve_composed(problem, mu, answer, tol)
        cf = problem.closed_form(answer, mu)
        if cf is not None:
            value, weights, lam = cf
            return OracleSolution(float(value), [np.asarray(weights, dtype=float)],
                                  None if lam is None else np.asarray(lam, dtype=float))
    return _solve_iterative(problem, answer, mu, tol or TOL_ITERATIVE, w0=w0)


def _solve_composed(problem: Composed, mu, answer, tol):
    ans_l, ans_r = problem.split(answer)
    idx_l, idx_r = list(problem.arms_left), list(problem.arms_right)
    sol_l = solve_answer(problem.left, mu[idx_l], ans_l, tol)
    sol_r = solve_answer(problem.right, mu[idx_r], ans_r, tol)
    K = problem.n_arms

    def embed(w_l, w_r, mass_l, mass_r):
        w = np.zeros(K)
        w[idx_l] = mass_l * w_l
        w[idx_r] = mass_r * w_r
        return w

    va, vb = sol_l.value, sol_r.value
    if va == 0.0 or vb == 0.0:
        lam = np.array(mu, dtype=float)
        side = sol_l if va <= vb else sol_r
        idx = idx_l if va <= vb else idx_r
        if side.lam is not None:
            lam[idx] = side.lam
        return OracleSolution(0.0, [_uniform(K)], lam)
    inv_a = 0.0 if np.isinf(va) else 1.0 / va
    inv_b = 0.0 if np.isinf(vb) else 1.0 / vb
    if inv_a + inv_b == 0.0:
        return OracleSolution(np.inf, [_uniform(K)], None)
    value = 1.0 / (inv_a + inv_b)
    mass_l = inv_a / (inv_a + inv_b)
    mass_r = inv_b / (inv_a + inv_b)
    w = embed(sol_l.weight(), sol_r.weight(), mass_l, mass_r)
    lam = np.array(mu, dtype=float)
    if mass_l > 0 and sol_l.lam is not None:
        lam[idx_l] = sol_l.lam
    elif sol_r.lam is not None:
        lam[idx_r] = sol_r.lam
    return OracleSolution(value, [w], lam)


def solve_global(problem: Problem, mu, tol: float = None) -> GlobalOracle:
    """D(mu) = max_i D(mu, not-i) over *all* answers, with the argmax set."""
    mu = problem.validate_mu(mu)
    per_answer = {}
    values = np.empty(len(problem.answers))
    for a in problem.answers:
        sol = solve_answer(problem, mu, a, tol)
        per_answer[a.label] = sol
        values[a.index] = sol.value
    v_max = float(np.max(values))
    if v_max == 0.0:
        raise DegenerateInstanceError(
            "every answer has zero divergence at mu; no answer is certifiable"
        )
    window = TIE_REL * v_max if np.isfinite(v_max) else np.inf
    if np.isfinite(v_max):
        oracle_answers = [a for a in problem.answers
                          if values[a.index] >= v_max - window]
    else:
        oracle_answers = [a for a in problem.answers if np.isinf(values[a.index])]
    t_star = 0.0 if np.isinf(v_max) else 1.0 / v_max
    return GlobalOracle(v_max, oracle_answers, per_answer, t_star)


# ---------------------------------------------------------------------------
# Lemma-2 equilibrium
# ---------------------------------------------------------------------------


def _simplex_grid(K: int, m: int):
    """All weight vectors with denominators m (compositions of m into K)."""
    if m <= 0:
        return []
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + [remaining])
            return
        for i in range(remaining + 1):
            rec(prefix + [i], remaining - i, slots - 1)

    rec([], m, K)
    return [np.array(v, dtype=float) / m for v in out]


def equilibrium(problem: Problem, mu, answer: Answer, grid: int = 4,
                tol: float = TOL_ITERATIVE) -> Equilibrium:
    """Mixed minimizer over the alternative supported on at most K points.

    Solves the finite zero-sum game on discretized alternative models
    (best responses at simplex grid points, refined double-oracle style
    against the evolving mixture) and trims the support to at most K points.
    """
    mu = problem.validate_mu(mu)
    K = problem.n_arms
    probe = best_response(problem, answer, _uniform(K), mu)
    if probe.value == 0.0 and np.allclose(probe.lam, mu):
        return Equilibrium(np.ones(1), [np.array(mu, dtype=float)], 0.0, 0.0)

    seeds = _simplex_grid(K, grid) if K <= 4 else []
    sol, oracle, q, upper = _solve_iterative(
        problem, answer, mu, tol, want_game=True, seed_weights=seeds
    )
    if q is None:
        q = np.zeros(len(oracle.columns))
        q[int(np.argmin([np.max(c) for c in oracle.columns]))] = 1.0
    # trim to at most K support points, largest masses first
    order = np.argsort(q)[::-1]
    keep = [j for j in order[:K] if q[j] > 0]
    M = oracle.matrix()
    rows = np.flatnonzero(sol.weight() > 1e-9)
    q_trim = _polish_support(M, rows, keep)
    candidates = [q]
    if q_trim is not None and np.count_nonzero(q_trim) <= K:
        candidates.append(q_trim)
    q_small = np.zeros_like(q)
    q_small[keep] = q[keep]
    if q_small.sum() > 0:
        candidates.append(q_small / q_small.sum())
    best_q, best_up = None, np.inf
    for cand in candidates:
        if np.count_nonzero(cand) > K:
            continue
        up = float(np.max(M @ cand))
        if up < best_up:
            best_q, best_up = cand, up
    if best_q is None:
        best_q, best_up = q, float(np.max(M @ q))
    support_idx = np.flatnonzero(best_q)
    supports = [oracle.lams[j] for j in support_idx]
    q_out = best_q[support_idx]
    return Equilibrium(q_out, supports, best_up, best_up - sol.value)
