"""The identification-problem zoo.

Each problem bundles a finite answer list, the correct-answer map i*(mu), and
for every answer a procedural *alternative*: the set of models on which that
answer is wrong, stored as a union of primitive sets. The infimum over a union
is the minimum over its members, and each primitive knows its own closed-form
(or one-dimensional) best response, so the inner player of every divergence
game is exact.

Problems also expose, where available, a closed-form outer solution (oracle
weights and value) and a candidate-answer test for the confidence-region
machinery of the sequential algorithms.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .expfam import Bernoulli, GaussianKnownVariance, kl, weighted_divergence

__all__ = [
    "Answer",
    "BestResponse",
    "Hyperplane",
    "HalfSpace",
    "Problem",
    "EpsBestArm",
    "ThresholdingBandit",
    "EpsMinimumThreshold",
    "AnyLowArm",
    "AnySign",
    "AnyHalfSpace",
    "SphereDemo",
    "Composed",
    "compose",
    "best_response",
    "problem_from_json",
]


@dataclass(frozen=True)
class Answer:
    """One element of the finite answer set; the index fixes the total order."""

    index: int
    label: str

    def __repr__(self):
        return f"Answer({self.index}, {self.label!r})"


@dataclass
class BestResponse:
    """Arg-inf point of a weighted divergence game, possibly on a closure.

    ``lam`` is None when the alternative set is empty (value is +inf).
    """

    lam: Optional[np.ndarray]
    value: float


class UnsupportedProblemError(NotImplementedError):
    """Raised when an operation is asked of a problem kind that lacks it."""


def _uniform(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


# ---------------------------------------------------------------------------
# Alternative-set primitives
# ---------------------------------------------------------------------------


class Hyperplane:
    """{lambda : <a, lambda> = b}. Gaussian families only."""

    def __init__(self, a, b: float):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)

    def best_response(self, w, mu, family) -> BestResponse:
        if not isinstance(family, GaussianKnownVariance):
            raise UnsupportedProblemError(
                "hyperplane alternatives are only implemented for Gaussian arms"
            )
        a, b = self.a, self.b
        gap = float(a @ mu) - b
        if gap == 0.0:
            return BestResponse(np.array(mu, dtype=float), 0.0)
        w = np.asarray(w, dtype=float)
        nz = a != 0.0
        free = nz & (w <= 0.0)
        if np.any(free):
            # a zero-weight coordinate absorbs the whole constraint for free
            i = int(np.flatnonzero(free)[0])
            lam = np.array(mu, dtype=float)
            lam[i] += -gap / a[i]
            return BestResponse(lam, 0.0)
        S = float(np.sum(a[nz] ** 2 / w[nz]))
        theta = -gap / S
        lam = np.array(mu, dtype=float)
        lam[nz] += theta * a[nz] / w[nz]
        value = gap * gap / (2.0 * family.variance * S)
        return BestResponse(lam, value)

    def oracle(self, mu, family):
        """sup_w inf value with its maximizing weights |a_i| / sum|a_i|."""
        l1 = float(np.abs(self.a).sum())
        gap = float(self.a @ mu) - self.b
        weights = np.abs(self.a) / l1
        value = gap * gap / (2.0 * family.variance * l1 * l1)
        return value, weights


class HalfSpace(Hyperplane):
    """{lambda : <a, lambda> >= b}: a hyperplane when seen from outside."""

    def best_response(self, w, mu, family) -> BestResponse:
        if float(self.a @ mu) - self.b >= 0.0:
            return BestResponse(np.array(mu, dtype=float), 0.0)
        return super().best_response(w, mu, family)


class CoordBound:
    """{lambda : lambda_k >= gamma} (side=+1) or {lambda_k <= gamma} (side=-1)."""

    def __init__(self, arm: int, gamma: float, side: int):
        self.arm = int(arm)
        self.gamma = float(gamma)
        self.side = int(side)

    def best_response(self, w, mu, family) -> BestResponse:
        k, g = self.arm, self.gamma
        if self.side * (mu[k] - g) >= 0.0:
            return BestResponse(np.array(mu, dtype=float), 0.0)
        lam = np.array(mu, dtype=float)
        lam[k] = g
        return BestResponse(lam, float(w[k]) * kl(family, float(mu[k]), g))


class AllAbove:
    """{lambda : lambda_k >= gamma for every k}: the min-above-threshold box."""

    def __init__(self, gamma: float):
        self.gamma = float(gamma)

    def best_response(self, w, mu, family) -> BestResponse:
        lam = np.maximum(np.asarray(mu, dtype=float), self.gamma)
        low = np.flatnonzero(lam != mu)
        value = 0.0
        for k in low:
            if w[k] > 0:
                value += float(w[k]) * kl(family, float(mu[k]), self.gamma)
        return BestResponse(lam, value)


class MeanGap:
    """{lambda : lambda_j >= lambda_k + eps}: arm j beats arm k by eps."""

    def __init__(self, j: int, k: int, eps: float):
        self.j = int(j)
        self.k = int(k)
        self.eps = float(eps)

    def best_response(self, w, mu, family) -> BestResponse:
        j, k, eps = self.j, self.k, self.eps
        if mu[j] - mu[k] >= eps:
            return BestResponse(np.array(mu, dtype=float), 0.0)
        wj, wk = float(w[j]), float(w[k])
        lam = np.array(mu, dtype=float)
        if wk <= 0.0:
            lam[k] = mu[j] - eps
            return BestResponse(lam, 0.0)
        if wj <= 0.0:
            lam[j] = mu[k] + eps
            return BestResponse(lam, 0.0)
        if isinstance(family, GaussianKnownVariance):
            S = 1.0 / wj + 1.0 / wk
            gap = float(mu[j] - mu[k]) - eps
            theta = -gap / S
            lam[j] = mu[j] + theta / wj
            lam[k] = mu[k] - theta / wk
            value = gap * gap / (2.0 * family.variance * S)
            return BestResponse(lam, value)
        # one-dimensional stationarity solve: lambda_k = x, lambda_j = x + eps
        def score(x):
            phi_k = 1.0 / (x * (1.0 - x))
            y = x + eps
            phi_j = 1.0 / (y * (1.0 - y))
            return wk * phi_k * (x - mu[k]) + wj * phi_j * (y - mu[j])

        lo, hi = float(mu[k]), float(mu[j]) - eps
        x = optimize.brentq(score, lo, hi, xtol=1e-14)
        lam[k] = x
        lam[j] = x + eps
        value = wk * kl(family, float(mu[k]), x) + wj * kl(family, float(mu[j]), x + eps)
        return BestResponse(lam, value)


class SphereShell:
    """{lambda : ||lambda||_2 = radius}. Gaussian families only."""

    def __init__(self, radius: float = 1.0):
        self.radius = float(radius)

    def best_response(self, w, mu, family) -> BestResponse:
        if not isinstance(family, GaussianKnownVariance):
            raise UnsupportedProblemError("sphere alternatives require Gaussian arms")
        mu = np.asarray(mu, dtype=float)
        w = np.asarray(w, dtype=float)
        r = self.radius
        active = w > 0.0
        lam = mu.copy()
        if not np.all(active):
            # free coordinates can supply norm at zero cost
            rem = r * r - float(np.sum(mu[active] ** 2))
            if rem >= 0.0:
                free = np.flatnonzero(~active)
                lam[free] = 0.0
                lam[free[0]] = np.sqrt(rem)
                return BestResponse(lam, 0.0)
            lam[~active] = 0.0
        lam_act = _sphere_project(mu[active], w[active], r)
        lam[active] = lam_act
        value = weighted_divergence(family, w, mu, lam)
        return BestResponse(lam, value)


def _sphere_project(mu, w, r):
    """Minimize sum w_k (lam_k - mu_k)^2 subject to ||lam|| = r (all w_k > 0)."""
    if float(np.sum(mu**2)) == r * r:
        return mu.copy()
    w_min = float(np.min(w))

    def norm_sq(theta):
        return float(np.sum((w * mu / (w + theta)) ** 2))

    # strictly decreasing on (-w_min, inf); hard case when it cannot reach r^2
    eps = 1e-13 * max(w_min, 1.0)
    lo = -w_min + eps
    limit = norm_sq(lo)
    if limit <= r * r:
        # boundary multiplier: minimum-weight zero-mean coordinates absorb the rest
        snap = np.isclose(w, w_min) & (mu == 0.0)
        if not np.any(snap):
            snap = np.isclose(w, w_min)
        lam = np.zeros_like(mu)
        np.divide(w * mu, w - w_min, out=lam, where=~snap)
        resid = r * r - float(np.sum(lam**2))
        k = int(np.flatnonzero(snap)[0])
        lam[k] = np.sqrt(max(resid, 0.0))
        return lam
    hi = max(1.0, w_min)
    while norm_sq(hi) > r * r:
        hi *= 2.0
    theta = optimize.brentq(lambda t: norm_sq(t) - r * r, lo, hi, xtol=1e-15)
    return w * mu / (w + theta)


class Lifted:
    """A primitive acting on a block of arms, the rest pinned at mu."""

    def __init__(self, inner, arms: Sequence[int], total: int):
        self.inner = inner
        self.arms = np.asarray(arms, dtype=int)
        self.total = int(total)

    def best_response(self, w, mu, family) -> BestResponse:
        w = np.asarray(w, dtype=float)
        mu = np.asarray(mu, dtype=float)
        sub = self.inner.best_response(w[self.arms], mu[self.arms], family)
        lam = mu.copy()
        lam[self.arms] = sub.lam
        return BestResponse(lam, sub.value)


# ---------------------------------------------------------------------------
# Problem base
# ---------------------------------------------------------------------------


class Problem:
    """Base identification problem: answers, i*(mu), and alternatives.

    Subclasses must populate ``answers`` (a tuple of :class:`Answer` in the
    problem's total order) and implement ``correct_answers`` plus
    ``alternative``. ``closed_form`` and ``candidate_answers`` are optional
    accelerations; the oracle and GLR modules fall back to iterative paths.
    """

    kind: str = "abstract"

    def __init__(self, n_arms: int, family):
        self.n_arms = int(n_arms)
        self.family = family
        self.answers: tuple[Answer, ...] = ()

    # -- answer bookkeeping -------------------------------------------------

    def answer(self, label: str) -> Answer:
        for a in self.answers:
            if a.label == label:
                return a
        raise KeyError(f"no answer labelled {label!r}")

    def _make_answers(self, labels: Sequence[str]):
        self.answers = tuple(Answer(i, lab) for i, lab in enumerate(labels))

    # -- contract -----------------------------------------------------------

    def correct_answers(self, mu) -> list[Answer]:
        raise NotImplementedError

    def alternative(self, answer: Answer) -> tuple:
        """Union-of-primitives representation of the alternative set."""
        raise NotImplementedError

    def closed_form(self, answer: Answer, mu):
        """(value, weights, lam) of sup_w inf_lambda, or None if unavailable."""
        return None

    def candidate_answers(self, counts, mu_hat, radius) -> Optional[list[Answer]]:
        """Answers that are oracle answers somewhere in the confidence region.

        ``radius`` bounds sum_k counts_k d(mu_hat_k, mu'_k). Returns None when
        the problem has no specialized test (callers then use a generic one).
        """
        return None

    def validate_mu(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.n_arms,):
            raise ValueError(f"mu must have shape ({self.n_arms},), got {mu.shape}")
        if not self.family.in_domain(mu):
            raise ValueError(f"mu {mu} outside the {self.family.name} mean domain")
        return mu

    def to_json(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(K={self.n_arms}, answers={len(self.answers)})"


def best_response(problem: Problem, answer: Answer, w, mu) -> BestResponse:
    """inf over the alternative of answer: minimum over union primitives.

    Weights may be any nonnegative vector (counts included); the value is
    weighted_divergence(w, mu, lam) at the returned lam whenever the infimum
    is attained, and 0 with lam = mu whenever mu lies in the alternative.
    """
    w = np.asarray(w, dtype=float)
    mu = problem.validate_mu(mu)
    if np.any(w < 0) or w.shape != (problem.n_arms,):
        raise ValueError("w must be a nonnegative vector matching the arm count")
    prims = problem.alternative(answer)
    if not prims:
        return BestResponse(None, np.inf)
    best = None
    for prim in prims:
        cand = prim.best_response(w, mu, problem.family)
        if best is None or cand.value < best.value:
            best = cand
            if best.value == 0.0:
                break
    return best


# ---------------------------------------------------------------------------
# Threshold-style helpers shared by several kinds
# ---------------------------------------------------------------------------


def _harmonic_solution(family, mu, gamma):
    """Closed form for alternatives that drag any single arm across gamma."""
    d = np.array([kl(family, float(m), gamma) for m in mu])
    if np.any(d <= 0.0):
        return 0.0, _uniform(len(mu)), np.array(mu, dtype=float)
    inv = 1.0 / d
    weights = inv / inv.sum()
    value = 1.0 / inv.sum()
    lam = np.array(mu, dtype=float)
    lam[0] = gamma
    return value, weights, lam


def _drag_cost(family, counts, mu_hat, k, target):
    return float(counts[k]) * kl(family, float(mu_hat[k]), target)


def _line_search_cost(fn, lo, hi):
    """Minimize a piecewise-smooth convex-ish scalar cost on [lo, hi]."""
    res = optimize.minimize_scalar(fn, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    best = min(float(res.fun), fn(lo), fn(hi))
    return best


# ---------------------------------------------------------------------------
# Problem kinds
# ---------------------------------------------------------------------------


class EpsBestArm(Problem):
    """Return any arm whose mean is within eps of the best mean."""

    kind = "eps_best_arm"

    def __init__(self, n_arms: int, eps: float, family=None):
        super().__init__(n_arms, family or GaussianKnownVariance())
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        self.eps = float(eps)
        self._make_answers([f"arm:{k+1}" for k in range(n_arms)])
        self._alts = tuple(
            tuple(MeanGap(j, k, self.eps) for j in range(n_arms) if j != k)
            for k in range(n_arms)
        )

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        top = float(np.max(mu))
        return [a for a in self.answers if mu[a.index] >= top - self.eps]

    def alternative(self, answer):
        return self._alts[answer.index]

    def closed_form(self, answer, mu):
        if self.n_arms != 2 or not isinstance(self.family, GaussianKnownVariance):
            return None
        mu = self.validate_mu(mu)
        k = answer.index
        j = 1 - k
        gap = float(mu[j] - mu[k]) - self.eps
        if gap >= 0.0:
            return 0.0, _uniform(2), np.array(mu, dtype=float)
        w = np.array([0.5, 0.5])
        sub = best_response(self, answer, w, mu)
        return sub.value, w, sub.lam

    def candidate_answers(self, counts, mu_hat, radius):
        # feasibility of "arm k is eps-best" inside the confidence region;
        # a superset of the oracle-answer union (see ledger)
        fam = self.family
        out = []
        lo = float(np.min(mu_hat)) - 10.0 * (np.sqrt(2.0 * radius / max(np.min(counts), 1.0)) + 1.0)
        if isinstance(fam, Bernoulli):
            lo = max(lo, 1e-9)
        for a in self.answers:
            k = a.index

            def cost(x, k=k):
                c = _drag_cost(fam, counts, mu_hat, k, x)
                for j in range(self.n_arms):
                    if j != k and mu_hat[j] > x + self.eps:
                        c += _drag_cost(fam, counts, mu_hat, j, x + self.eps)
                return c

            hi = float(np.max(mu_hat))
            if isinstance(fam, Bernoulli):
                hi = min(hi, 1.0 - 1e-9 - self.eps)
            if _line_search_cost(cost, lo, hi) <= radius:
                out.append(a)
        return out

    def to_json(self):
        return {"kind": self.kind, "arms": self.n_arms, "eps": self.eps,
                "family": self.family.to_json()}


class ThresholdingBandit(Problem):
    """Identify the exact subset of arms with means at or below gamma."""

    kind = "thresholding"

    def __init__(self, n_arms: int, gamma: float, family=None):
        super().__init__(n_arms, family or GaussianKnownVariance())
        self.gamma = float(gamma)
        if not self.family.in_domain(self.gamma):
            raise ValueError("gamma must lie in the family's mean domain")
        labels = []
        for mask in range(2**n_arms):
            members = [str(k + 1) for k in range(n_arms) if mask >> k & 1]
            labels.append("set:{" + ",".join(members) + "}")
        self._make_answers(labels)
        self._alts = tuple(
            tuple(
                CoordBound(k, self.gamma, +1 if mask >> k & 1 else -1)
                for k in range(n_arms)
            )
            for mask in range(2**n_arms)
        )

    def _mask_of(self, mu) -> int:
        mask = 0
        for k in range(self.n_arms):
            if mu[k] <= self.gamma:
                mask |= 1 << k
        return mask

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        return [self.answers[self._mask_of(mu)]]

    def alternative(self, answer):
        return self._alts[answer.index]

    def closed_form(self, answer, mu):
        mu = self.validate_mu(mu)
        if answer.index != self._mask_of(mu):
            return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
        return _harmonic_solution(self.family, mu, self.gamma)

    def candidate_answers(self, counts, mu_hat, radius):
        out = []
        for a in self.answers:
            mask, cost = a.index, 0.0
            for k in range(self.n_arms):
                if mask >> k & 1:
                    target = min(float(mu_hat[k]), self.gamma)
                else:
                    target = max(float(mu_hat[k]), self.gamma)
                cost += _drag_cost(self.family, counts, mu_hat, k, target)
                if cost > radius:
                    break
            if cost <= radius:
                out.append(a)
        return out

    def to_json(self):
        return {"kind": self.kind, "arms": self.n_arms, "gamma": self.gamma,
                "family": self.family.to_json()}


class EpsMinimumThreshold(Problem):
    """Is the minimum mean below gamma (lo) or above it (hi), with slack eps."""

    kind = "eps_min_threshold"

    def __init__(self, n_arms: int, gamma: float, eps: float = 0.0, family=None):
        super().__init__(n_arms, family or GaussianKnownVariance())
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        self.gamma = float(gamma)
        self.eps = float(eps)
        for g in (self.gamma - self.eps, self.gamma + self.eps):
            if not self.family.in_domain(g):
                raise ValueError("gamma +/- eps must lie in the mean domain")
        self._make_answers(["lo", "hi"])
        self._alt_lo = (AllAbove(self.gamma + self.eps),)
        self._alt_hi = tuple(
            CoordBound(k, self.gamma - self.eps, -1) for k in range(n_arms)
        )

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        lo_ok = float(np.min(mu)) <= self.gamma + self.eps
        hi_ok = float(np.min(mu)) >= self.gamma - self.eps
        return [a for a, ok in zip(self.answers, (lo_ok, hi_ok)) if ok]

    def alternative(self, answer):
        return self._alt_lo if answer.label == "lo" else self._alt_hi

    def closed_form(self, answer, mu):
        mu = self.validate_mu(mu)
        if answer.label == "lo":
            g = self.gamma + self.eps
            k = int(np.argmin(mu))
            if mu[k] >= g:
                return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
            w = np.zeros(self.n_arms)
            w[k] = 1.0
            return kl(self.family, float(mu[k]), g), w, np.maximum(mu, g)
        g = self.gamma - self.eps
        if float(np.min(mu)) <= g:
            return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
        return _harmonic_solution(self.family, mu, g)

    def candidate_answers(self, counts, mu_hat, radius):
        out = []
        g_lo, g_hi = self.gamma + self.eps, self.gamma - self.eps
        drag_down = min(
            _drag_cost(self.family, counts, mu_hat, k, min(float(mu_hat[k]), g_lo))
            for k in range(self.n_arms)
        )
        if drag_down <= radius:
            out.append(self.answers[0])
        raise_up = sum(
            _drag_cost(self.family, counts, mu_hat, k, max(float(mu_hat[k]), g_hi))
            for k in range(self.n_arms)
        )
        if raise_up <= radius:
            out.append(self.answers[1])
        return out

    def to_json(self):
        return {"kind": self.kind, "arms": self.n_arms, "gamma": self.gamma,
                "eps": self.eps, "family": self.family.to_json()}


class AnyLowArm(Problem):
    """Return some arm with mean at or below gamma, or 'no' if none exists."""

    kind = "any_low_arm"

    def __init__(self, n_arms: int, gamma: float, family=None):
        super().__init__(n_arms, family or GaussianKnownVariance())
        self.gamma = float(gamma)
        if not self.family.in_domain(self.gamma):
            raise ValueError("gamma must lie in the family's mean domain")
        self._make_answers(["no"] + [f"arm:{k+1}" for k in range(n_arms)])
        self._alt_no = tuple(CoordBound(k, self.gamma, -1) for k in range(n_arms))
        self._alt_arm = tuple(
            (CoordBound(k, self.gamma, +1),) for k in range(n_arms)
        )

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        out = []
        if float(np.min(mu)) > self.gamma:
            out.append(self.answers[0])
        out.extend(self.answers[k + 1] for k in range(self.n_arms)
                   if mu[k] <= self.gamma)
        return out

    def alternative(self, answer):
        if answer.index == 0:
            return self._alt_no
        return self._alt_arm[answer.index - 1]

    def closed_form(self, answer, mu):
        mu = self.validate_mu(mu)
        if answer.index == 0:
            if float(np.min(mu)) <= self.gamma:
                return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
            return _harmonic_solution(self.family, mu, self.gamma)
        k = answer.index - 1
        if mu[k] > self.gamma:
            return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
        w = np.zeros(self.n_arms)
        w[k] = 1.0
        lam = np.array(mu, dtype=float)
        lam[k] = self.gamma
        return kl(self.family, float(mu[k]), self.gamma), w, lam

    def candidate_answers(self, counts, mu_hat, radius):
        fam, g = self.family, self.gamma
        out = []
        cost_no = sum(
            _drag_cost(fam, counts, mu_hat, k, max(float(mu_hat[k]), g))
            for k in range(self.n_arms)
        )
        if cost_no <= radius:
            out.append(self.answers[0])
        lo = float(np.min(mu_hat)) - 10.0 * (np.sqrt(2.0 * radius / max(np.min(counts), 1.0)) + 1.0)
        if isinstance(fam, Bernoulli):
            lo = max(lo, 1e-9)
        for k in range(self.n_arms):
            # arm k is an oracle answer at mu' iff mu'_k <= gamma and mu'_k = min mu'
            def cost(x, k=k):
                c = _drag_cost(fam, counts, mu_hat, k, x)
                for j in range(self.n_arms):
                    if j != k and mu_hat[j] < x:
                        c += _drag_cost(fam, counts, mu_hat, j, x)
                return c

            if lo < g and _line_search_cost(cost, lo, g) <= radius:
                out.append(self.answers[k + 1])
            elif cost(g) <= radius:
                out.append(self.answers[k + 1])
        return out

    def to_json(self):
        return {"kind": self.kind, "arms": self.n_arms, "gamma": self.gamma,
                "family": self.family.to_json()}


class AnySign(Problem):
    """Report the sign (relative to gamma) of any single arm."""

    kind = "any_sign"

    def __init__(self, n_arms: int, gamma: float = 0.0, family=None):
        super().__init__(n_arms, family or GaussianKnownVariance())
        self.gamma = float(gamma)
        if not self.family.in_domain(self.gamma):
            raise ValueError("gamma must lie in the family's mean domain")
        labels = []
        for k in range(n_arms):
            labels.append(f"sign:{k+1}:lo")
            labels.append(f"sign:{k+1}:hi")
        self._make_answers(labels)
        self._alts = []
        for k in range(n_arms):
            self._alts.append((CoordBound(k, self.gamma, +1),))   # not-lo
            self._alts.append((CoordBound(k, self.gamma, -1),))   # not-hi
        self._alts = tuple(self._alts)

    @staticmethod
    def _arm_side(answer: Answer):
        k, side = divmod(answer.index, 2)
        return k, (-1 if side == 0 else +1)   # lo means mu_k <= gamma

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        out = []
        for a in self.answers:
            k, side = self._arm_side(a)
            if side * (mu[k] - self.gamma) >= 0.0:
                out.append(a)
        return out

    def alternative(self, answer):
        return self._alts[answer.index]

    def closed_form(self, answer, mu):
        mu = self.validate_mu(mu)
        k, side = self._arm_side(answer)
        if side * (mu[k] - self.gamma) < 0.0:
            return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
        w = np.zeros(self.n_arms)
        w[k] = 1.0
        lam = np.array(mu, dtype=float)
        lam[k] = self.gamma
        return kl(self.family, float(mu[k]), self.gamma), w, lam

    def candidate_answers(self, counts, mu_hat, radius):
        if not isinstance(self.family, GaussianKnownVariance):
            return None   # generic fallback
        g = self.gamma
        out = []
        span = 10.0 * (np.sqrt(2.0 * radius * self.family.variance
                               / max(float(np.min(counts)), 1.0)) + 1.0)
        for a in self.answers:
            k, side = self._arm_side(a)

            def cost(t, k=k, side=side):
                # arm k sits at gamma + side*t and must dominate all arms
                x = g + side * t
                c = _drag_cost(self.family, counts, mu_hat, k, x)
                for j in range(self.n_arms):
                    if j != k:
                        c += _drag_cost(
                            self.family, counts, mu_hat, j,
                            float(np.clip(mu_hat[j], g - t, g + t)),
                        )
                return c

            if _line_search_cost(cost, 0.0, span) <= radius:
                out.append(a)
        return out

    def to_json(self):
        return {"kind": self.kind, "arms": self.n_arms, "gamma": self.gamma,
                "family": self.family.to_json()}


class AnyHalfSpace(Problem):
    """Return a half-space (through the origin) containing the mean vector.

    Normals are rows of ``normals`` and must have unit L1 norm; they are
    auto-normalized with a warning when off by more than 1e-9. Answer (m,s)
    asserts s * <mu, u_m> >= 0.
    """

    kind = "any_halfspace"

    def __init__(self, normals, family=None):
        normals = np.asarray(normals, dtype=float)
        if normals.ndim != 2:
            raise ValueError("normals must be a 2-d array (one row per hyperplane)")
        super().__init__(normals.shape[1], family or GaussianKnownVariance())
        if not isinstance(self.family, GaussianKnownVariance):
            raise UnsupportedProblemError("AnyHalfSpace requires Gaussian arms")
        norms = np.abs(normals).sum(axis=1)
        if np.any(norms <= 0):
            raise ValueError("each normal must be nonzero")
        if np.any(np.abs(norms - 1.0) > 1e-9):
            warnings.warn("normals renormalized to unit L1 norm", stacklevel=2)
        self.normals = normals / norms[:, None]
        self.n_planes = normals.shape[0]
        labels = []
        for m in range(self.n_planes):
            labels.append(f"halfspace:({m+1},+)")
            labels.append(f"halfspace:({m+1},-)")
        self._make_answers(labels)
        self._alts = []
        for m in range(self.n_planes):
            u = self.normals[m]
            self._alts.append((HalfSpace(-u, 0.0),))   # alternative to (m,+)
            self._alts.append((HalfSpace(+u, 0.0),))   # alternative to (m,-)
        self._alts = tuple(self._alts)

    @staticmethod
    def plane_sign(answer: Answer):
        m, s = divmod(answer.index, 2)
        return m, (+1 if s == 0 else -1)

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        p = self.normals @ mu
        out = []
        for a in self.answers:
            m, s = self.plane_sign(a)
            if s * p[m] >= 0.0:
                out.append(a)
        return out

    def alternative(self, answer):
        return self._alts[answer.index]

    def closed_form(self, answer, mu):
        mu = self.validate_mu(mu)
        m, s = self.plane_sign(answer)
        if s * float(self.normals[m] @ mu) <= 0.0:
            return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
        value, w = self._alts[answer.index][0].oracle(mu, self.family)
        sub = best_response(self, answer, w, mu)
        return value, w, sub.lam

    def candidate_answers(self, counts, mu_hat, radius):
        # interval arithmetic on the projections over the confidence ellipsoid
        p = self.normals @ np.asarray(mu_hat, dtype=float)
        var2 = 2.0 * self.family.variance * radius
        r = np.sqrt(var2 * np.sum(self.normals**2 / np.asarray(counts, dtype=float),
                                  axis=1))
        lo_abs = np.maximum(np.abs(p) - r, 0.0)
        out = []
        for a in self.answers:
            m, s = self.plane_sign(a)
            hi_m = np.abs(p[m]) + r[m]
            if s * p[m] + r[m] >= 0.0 and np.all(hi_m >= np.delete(lo_abs, m)):
                out.append(a)
        return out

    def to_json(self):
        return {"kind": self.kind, "normals": self.normals.tolist(),
                "family": self.family.to_json()}


class SphereDemo(Problem):
    """Distance-to-the-unit-sphere fixture (no identification semantics)."""

    kind = "sphere_demo"

    def __init__(self, n_arms: int, family=None, radius: float = 1.0):
        super().__init__(n_arms, family or GaussianKnownVariance())
        if not isinstance(self.family, GaussianKnownVariance):
            raise UnsupportedProblemError("SphereDemo requires Gaussian arms")
        self.radius = float(radius)
        self._make_answers(["off-sphere"])
        self._alt = (SphereShell(self.radius),)

    def correct_answers(self, mu):
        self.validate_mu(mu)
        return [self.answers[0]]

    def alternative(self, answer):
        return self._alt

    def closed_form(self, answer, mu):
        mu = self.validate_mu(mu)
        if self.radius != 1.0:
            return None   # the closed form below is for the unit sphere
        value, weights = _sphere_oracle(mu)
        if value == 0.0:
            return 0.0, _uniform(self.n_arms), np.array(mu, dtype=float)
        sub = best_response(self, answer, weights, mu)
        return value / self.family.variance, weights, sub.lam

    def candidate_answers(self, counts, mu_hat, radius):
        return [self.answers[0]]

    def to_json(self):
        return {"kind": self.kind, "arms": self.n_arms, "radius": self.radius,
                "family": self.family.to_json()}


def _sphere_oracle(mu, active=None):
    """Unit-sphere distance and weights, dropping arms while the proviso fails.

    Returns the value for d(mu, lam) = (mu-lam)^2 / 2 (variance 1); callers
    rescale. Weights of dropped arms are zero.
    """
    mu = np.asarray(mu, dtype=float)
    K_full = mu.shape[0]
    if active is None:
        active = np.arange(K_full)
    sub = mu[active]
    K = len(active)
    l2 = float(np.sum(sub**2))
    l1 = float(np.sum(np.abs(sub)))
    if l2 == 1.0:
        return 0.0, _uniform(K_full)
    disc = K * (1.0 - l2) + l1 * l1
    proviso = (l1 - K * np.min(np.abs(sub))) ** 2 <= disc + 1e-12
    if not proviso and K > 1:
        drop = int(np.argmin(np.abs(sub)))
        return _sphere_oracle(mu, np.delete(active, drop))
    root = np.sqrt(max(disc, 0.0))
    value = (root - l1) ** 2 / (2.0 * K * K)
    w = np.zeros(K_full)
    if root > 0:
        w[active] = 1.0 / K + (np.abs(sub) - l1 / K) / root
    else:
        w[active] = 1.0 / K
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    return value, w


class Composed(Problem):
    """Two independent identification problems on disjoint arm blocks."""

    kind = "composed"

    def __init__(self, left: Problem, right: Problem, arms_left, arms_right):
        arms_left = tuple(int(k) for k in arms_left)
        arms_right = tuple(int(k) for k in arms_right)
        if set(arms_left) & set(arms_right):
            raise ValueError("composition blocks overlap")
        if len(arms_left) != left.n_arms or len(arms_right) != right.n_arms:
            raise ValueError("block sizes must match the component arm counts")
        total = len(arms_left) + len(arms_right)
        if set(arms_left) | set(arms_right) != set(range(total)):
            raise ValueError("blocks must partition the composed arm range")
        if type(left.family) is not type(right.family) or left.family != right.family:
            raise ValueError("composition requires identical families")
        super().__init__(total, left.family)
        self.left, self.right = left, right
        self.arms_left, self.arms_right = arms_left, arms_right
        labels = [
            f"({a.label},{b.label})"
            for a, b in itertools.product(left.answers, right.answers)
        ]
        self._make_answers(labels)
        self._alts = []
        for a, b in itertools.product(left.answers, right.answers):
            prims = tuple(Lifted(p, arms_left, total) for p in left.alternative(a))
            prims += tuple(Lifted(p, arms_right, total) for p in right.alternative(b))
            self._alts.append(prims)
        self._alts = tuple(self._alts)

    def split(self, answer: Answer):
        ia, ib = divmod(answer.index, len(self.right.answers))
        return self.left.answers[ia], self.right.answers[ib]

    def correct_answers(self, mu):
        mu = self.validate_mu(mu)
        ok_a = {a.index for a in self.left.correct_answers(mu[list(self.arms_left)])}
        ok_b = {b.index for b in self.right.correct_answers(mu[list(self.arms_right)])}
        nb = len(self.right.answers)
        return [ans for ans in self.answers
                if ans.index // nb in ok_a and ans.index % nb in ok_b]

    def alternative(self, answer):
        return self._alts[answer.index]

    def candidate_answers(self, counts, mu_hat, radius):
        counts = np.asarray(counts, dtype=float)
        mu_hat = np.asarray(mu_hat, dtype=float)
        la, ra = list(self.arms_left), list(self.arms_right)
        cand_a = self.left.candidate_answers(counts[la], mu_hat[la], radius)
        cand_b = self.right.candidate_answers(counts[ra], mu_hat[ra], radius)
        if cand_a is None or cand_b is None:
            return None
        ok_a = {a.index for a in cand_a}
        ok_b = {b.index for b in cand_b}
        nb = len(self.right.answers)
        return [ans for ans in self.answers
                if ans.index // nb in ok_a and ans.index % nb in ok_b]

    def to_json(self):
        return {
            "kind": self.kind,
            "components": [
                {"problem": self.left.to_json(), "arms": [k + 1 for k in self.arms_left]},
                {"problem": self.right.to_json(), "arms": [k + 1 for k in self.arms_right]},
            ],
        }


def compose(left: Problem, right: Problem, arms_left=None, arms_right=None) -> Composed:
    """Product problem of two queries on disjoint arm blocks.

    Default blocks are the concatenation [0..Ka) and [Ka..Ka+Kb).
    """
    if arms_left is None:
        arms_left = tuple(range(left.n_arms))
    if arms_right is None:
        arms_right = tuple(range(left.n_arms, left.n_arms + right.n_arms))
    return Composed(left, right, arms_left, arms_right)


# ---------------------------------------------------------------------------
# JSON parsing
# ---------------------------------------------------------------------------

from .expfam import family_from_json  # noqa: E402  (re-export for configs)


def _family_of(obj):
    return family_from_json(obj.get("family", {"family": "gaussian", "variance": 1.0}))


def problem_from_json(obj: dict) -> Problem:
    """Build a problem from its JSON declaration; unknown keys are rejected."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("problem config must be a dict with a 'kind' key")
    kind = obj["kind"]

    def check(allowed):
        extra = set(obj) - set(allowed) - {"kind", "family"}
        if extra:
            raise ValueError(f"unknown keys in {kind} config: {sorted(extra)}")

    if kind == "eps_best_arm":
        check({"arms", "eps"})
        return EpsBestArm(int(obj["arms"]), float(obj.get("eps", 0.0)), _family_of(obj))
    if kind == "thresholding":
        check({"arms", "gamma"})
        return ThresholdingBandit(int(obj["arms"]), float(obj["gamma"]), _family_of(obj))
    if kind == "eps_min_threshold":
        check({"arms", "gamma", "eps"})
        return EpsMinimumThreshold(int(obj["arms"]), float(obj["gamma"]),
                                   float(obj.get("eps", 0.0)), _family_of(obj))
    if kind == "any_low_arm":
        check({"arms", "gamma"})
        return AnyLowArm(int(obj["arms"]), float(obj["gamma"]), _family_of(obj))
    if kind == "any_sign":
        check({"arms", "gamma"})
        return AnySign(int(obj["arms"]), float(obj.get("gamma", 0.0)), _family_of(obj))
    if kind == "any_halfspace":
        check({"normals"})
        return AnyHalfSpace(np.asarray(obj["normals"], dtype=float), _family_of(obj))
    if kind == "sphere_demo":
        check({"arms", "radius"})
        return SphereDemo(int(obj["arms"]), _family_of(obj),
                          float(obj.get("radius", 1.0)))
    if kind == "composed":
        check({"components"})
        comps = obj["components"]
        if not isinstance(comps, list) or len(comps) != 2:
            raise ValueError("composed config needs exactly two components")
        probs, blocks = [], []
        for c in comps:
            extra = set(c) - {"problem", "arms"}
            if extra:
                raise ValueError(f"unknown keys in composed component: {sorted(extra)}")
            probs.append(problem_from_json(c["problem"]))
            blocks.append(tuple(int(k) - 1 for k in c["arms"]))
        return Composed(probs[0], probs[1], blocks[0], blocks[1])
    raise ValueError(f"unknown problem kind {kind!r}")
