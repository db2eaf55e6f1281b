"""One-parameter exponential families in their mean parameterization.

Every quantity downstream (best responses, oracle weights, GLR statistics)
reduces to the per-arm divergence d(mu, lambda) between two distributions of
the same family, identified by their means. Two families are shipped:
Gaussian with known variance and Bernoulli.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "GaussianKnownVariance",
    "Bernoulli",
    "BanditInstance",
    "kl",
    "weighted_divergence",
    "family_from_json",
]

#: Empirical Bernoulli means are clamped this far away from {0, 1} so that
#: divergences stay finite while all samples of an arm are still identical.
BERNOULLI_MARGIN = 1e-9


class DomainError(ValueError):
    """A mean parameter lies outside the family's open mean domain."""


@dataclass(frozen=True)
class GaussianKnownVariance:
    """Gaussian arms N(mu, variance) with a shared known variance."""

    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def name(self) -> str:
        return "gaussian"

    def in_domain(self, x) -> bool:
        return bool(np.all(np.isfinite(x)))

    def clamp(self, x):
        """Empirical means need no clamping: the mean domain is all of R."""
        return x

    def divergence(self, mu, lam):
        return (np.asarray(mu) - lam) ** 2 / (2.0 * self.variance)

    def sample(self, mean: float, rng: np.random.Generator) -> float:
        return mean + np.sqrt(self.variance) * rng.standard_normal()

    def to_json(self) -> dict:
        return {"family": "gaussian", "variance": self.variance}


@dataclass(frozen=True)
class Bernoulli:
    """Bernoulli arms with mean domain the open interval (0, 1)."""

    @property
    def name(self) -> str:
        return "bernoulli"

    def in_domain(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x > 0.0) & (x < 1.0)))

    def clamp(self, x):
        return np.clip(x, BERNOULLI_MARGIN, 1.0 - BERNOULLI_MARGIN)

    def divergence(self, mu, lam):
        mu = np.asarray(mu, dtype=float)
        lam = np.asarray(lam, dtype=float)
        return mu * np.log(mu / lam) + (1.0 - mu) * np.log((1.0 - mu) / (1.0 - lam))

    def sample(self, mean: float, rng: np.random.Generator) -> float:
        return float(rng.random() < mean)

    def to_json(self) -> dict:
        return {"family": "bernoulli"}


def kl(family, mu, lam) -> float:
    """KL divergence d(mu, lambda) between same-family distributions.

    Accepts scalars or arrays (elementwise). Raises :class:`DomainError` when
    either argument leaves the family's mean domain.
    """
    if not family.in_domain(mu):
        raise DomainError(f"mean {mu!r} outside domain of {family.name}")
    if not family.in_domain(lam):
        raise DomainError(f"mean {lam!r} outside domain of {family.name}")
    out = family.divergence(mu, lam)
    return float(out) if np.ndim(out) == 0 else out


def weighted_divergence(family, w, mu, lam) -> float:
    """Sum_k w_k d(mu_k, lambda_k) for nonnegative weights w.

    The weights need not sum to one: raw pull counts N_t are passed here by
    the stopping rule. Zero-weight coordinates are annihilated before the
    divergence is evaluated, so they may sit anywhere in the domain.
    """
    w = np.asarray(w, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if w.shape != mu.shape or mu.shape != lam.shape:
        raise ValueError(
            f"dimension mismatch: w{w.shape}, mu{mu.shape}, lambda{lam.shape}"
        )
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    active = w > 0
    if not np.any(active):
        return 0.0
    d = kl(family, mu[active], lam[active])
    return float(np.sum(w[active] * d))


@dataclass(frozen=True)
class BanditInstance:
    """Ground-truth bandit model: arm means plus their exponential family."""

    mu: np.ndarray
    family: object = field(default_factory=GaussianKnownVariance)

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if not self.family.in_domain(self.mu):
            raise DomainError(f"means {self.mu} outside {self.family.name} domain")

    @property
    def n_arms(self) -> int:
        return self.mu.shape[0]

    def sample(self, arm: int, rng: np.random.Generator) -> float:
        return self.family.sample(float(self.mu[arm]), rng)


def family_from_json(obj: dict):
    """Parse {"family": "gaussian", "variance": v} or {"family": "bernoulli"}."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise ValueError(f"family config must be a dict with a 'family' key, got {obj!r}")
    name = obj["family"]
    if name == "gaussian":
        extra = set(obj) - {"family", "variance"}
        if extra:
            raise ValueError(f"unknown keys in gaussian family config: {sorted(extra)}")
        return GaussianKnownVariance(variance=float(obj.get("variance", 1.0)))
    if name == "bernoulli":
        extra = set(obj) - {"family"}
        if extra:
            raise ValueError(f"unknown keys in bernoulli family config: {sorted(extra)}")
        return Bernoulli()
    raise ValueError(f"unknown family {name!r}")
