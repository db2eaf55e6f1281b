"""Sampling-rule machinery: C-tracking and D-tracking.

C-tracking accumulates clipped oracle weights and pulls the arm lagging its
cumulative target the most; the clipping floor eps_t = (K^2 + t)^(-1/2) / 2
provides the forced exploration that the tracking bounds

    N_{t,k} >= sqrt(t + K^2) - 2K,   ||N_t - sum_s w_s^{eps_s}||_inf <= K(1 + sqrt(t))

are stated under. D-tracking instead forces any arm with N_{t,j} <= sqrt(t) - K/2
and otherwise chases t * w_t directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TrackerState", "clip_project", "epsilon_schedule", "next_arm_c", "next_arm_d"]


def epsilon_schedule(n_arms: int, t: int) -> float:
    """Clipping floor used by C-tracking at round t (1-based)."""
    return 0.5 / np.sqrt(n_arms * n_arms + t)


def clip_project(w, eps: float) -> np.ndarray:
    """L-infinity projection of w onto {v in simplex : v_k >= eps}.

    Water-filling: deficient coordinates rise to eps and the created surplus
    is removed from the remaining coordinates by a common clipped level tau,
    the deterministic representative of the (non-unique) l-inf projection.
    """
    w = np.asarray(w, dtype=float)
    K = w.shape[0]
    if not 0.0 < eps <= 1.0 / K:
        raise ValueError(f"eps must lie in (0, 1/K], got {eps} for K={K}")
    lifted = np.maximum(w, eps)
    surplus = lifted.sum() - 1.0
    if surplus <= 0.0:
        return lifted
    # find tau with sum_k max(eps, w_k - tau) = 1 by scanning sorted levels
    order = np.sort(w)[::-1]
    above = order.cumsum()
    for m in range(K, 0, -1):
        tau = (above[m - 1] + (K - m) * eps - 1.0) / m
        if order[m - 1] - tau >= eps:
            break
    return np.maximum(w - tau, eps)


@dataclass
class TrackerState:
    """Per-run mutable tracking state: pull counts and cumulative targets."""

    counts: np.ndarray
    cum_w: np.ndarray
    t: int = 0
    mode: str = "C"

    @classmethod
    def fresh(cls, n_arms: int, mode: str = "C") -> "TrackerState":
        if mode not in ("C", "D"):
            raise ValueError(f"tracking mode must be 'C' or 'D', got {mode!r}")
        return cls(np.zeros(n_arms, dtype=np.int64), np.zeros(n_arms), 0, mode)

    @property
    def n_arms(self) -> int:
        return self.counts.shape[0]

    def record_pull(self, arm: int):
        self.counts[arm] += 1
        self.t += 1


def next_arm_c(state: TrackerState, w) -> int:
    """C-tracking pick; accumulates the clipped weights as a side effect."""
    if state.mode != "C":
        raise ValueError("next_arm_c requires a tracker in C mode")
    eps = epsilon_schedule(state.n_arms, state.t + 1)
    state.cum_w += clip_project(w, eps)
    return int(np.argmin(state.counts - state.cum_w))


def next_arm_d(state: TrackerState, w) -> int:
    """D-tracking pick: forced exploration first, then direct target chasing."""
    if state.mode != "D":
        raise ValueError("next_arm_d requires a tracker in D mode")
    floor = np.sqrt(state.t) - state.n_arms / 2.0
    starved = np.flatnonzero(state.counts <= floor)
    if starved.size:
        return int(starved[0])
    return int(np.argmin(state.counts - state.t * np.asarray(w, dtype=float)))
