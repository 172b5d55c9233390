"""VM fleet modelled as a stochastic bandit environment.

Each VM is an arm whose preference probability measures how well it
resists attacks. Two reward models are available:

* :class:`Bernoulli` -- reward 1 (attack unsuccessful) with probability
  ``p`` and 0 otherwise.
* :class:`ClippedGaussian` -- an anomaly score ``s ~ Normal(1 - p, sigma)``
  clipped to ``[0, 1]`` (1 = malicious, 0 = normal) and reward ``1 - s``.

All randomness is drawn from caller-supplied :class:`numpy.random.Generator`
instances; fleets themselves are immutable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .errors import ConfigurationError, UnsupportedOperationError

__all__ = [
    "VmArm",
    "Bernoulli",
    "ClippedGaussian",
    "RewardModel",
    "Fleet",
    "RewardObservation",
    "PAPER_FLEET",
    "DEFAULT_SIGMA",
    "new_fleet",
    "paper_fleet",
    "clipped_normal_mean",
    "pull",
    "anomaly_score",
    "best_arm",
    "sample_outcomes",
]

DEFAULT_SIGMA = 0.3

#: The ten VMs and preference probabilities used in the reference tables.
PAPER_FLEET: tuple[tuple[str, float], ...] = (
    ("VM1", 0.98),
    ("VM2", 0.95),
    ("VM3", 0.90),
    ("VM4", 0.85),
    ("VM5", 0.8),
    ("VM6", 0.75),
    ("VM7", 0.7),
    ("VM8", 0.65),
    ("VM9", 0.55),
    ("VM10", 0.5),
)


@dataclass(frozen=True)
class VmArm:
    id: int
    name: str
    preference_probability: float


@dataclass(frozen=True)
class Bernoulli:
    """Binary attack outcome: reward 1 with probability ``p``."""

    name = "bernoulli"

    def to_dict(self) -> dict:
        return {"reward_model": self.name}


@dataclass(frozen=True)
class ClippedGaussian:
    """Gaussian anomaly score clipped to the unit interval."""

    sigma: float = DEFAULT_SIGMA
    name = "clipped_gaussian"

    def __post_init__(self):
        if not (isinstance(self.sigma, (int, float)) and math.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError(f"sigma must be positive and finite, got {self.sigma!r}")

    def to_dict(self) -> dict:
        return {"reward_model": self.name, "sigma": float(self.sigma)}


RewardModel = Union[Bernoulli, ClippedGaussian]


@dataclass(frozen=True)
class RewardObservation:
    arm_id: int
    t: int
    reward: float


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _Phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def clipped_normal_mean(mu: float, sigma: float) -> float:
    """Mean of ``clip(X, 0, 1)`` for ``X ~ Normal(mu, sigma)``.

    Closed form: ``P(X > 1) + E[X; 0 < X < 1]``.
    """
    a = (0.0 - mu) / sigma
    b = (1.0 - mu) / sigma
    inner = mu * (_Phi(b) - _Phi(a)) + sigma * (_phi(a) - _phi(b))
    return inner + _Phi(-b)


@dataclass(frozen=True)
class Fleet:
    """Ordered, immutable set of VM arms sharing one reward model.

    True mean rewards are computed once at construction and cached.
    """

    arms: tuple[VmArm, ...]
    reward_model: RewardModel = field(default_factory=Bernoulli)
    true_means: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arms = tuple(self.arms)
        if not arms:
            raise ConfigurationError("fleet must contain at least one arm")
        for i, arm in enumerate(arms):
            if arm.id != i:
                raise ConfigurationError(f"arm ids must be contiguous from 0; arm {arm.name!r} has id {arm.id}")
            p = arm.preference_probability
            if not (0.0 <= p <= 1.0):
                raise ConfigurationError(f"preference probability of {arm.name!r} must lie in [0, 1], got {p!r}")
        if not isinstance(self.reward_model, (Bernoulli, ClippedGaussian)):
            raise ConfigurationError(f"unknown reward model {self.reward_model!r}")
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "true_means", tuple(self._true_mean(a.preference_probability) for a in arms))

    def _true_mean(self, p: float) -> float:
        if isinstance(self.reward_model, Bernoulli):
            return float(p)
        # reward = 1 - clip(Normal(1 - p, sigma)) has the law of clip(Normal(p, sigma))
        return clipped_normal_mean(p, self.reward_model.sigma)

    def __len__(self) -> int:
        return len(self.arms)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.arms]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([a.preference_probability for a in self.arms], dtype=float)

    def to_dict(self) -> dict:
        d = {"arms": [{"name": a.name, "p": a.preference_probability} for a in self.arms]}
        d.update(self.reward_model.to_dict())
        return d

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def new_fleet(arms: Iterable[tuple[str, float]], reward_model: RewardModel | None = None) -> Fleet:
    """Build a fleet from ``(name, preference_probability)`` pairs.

    Ids are assigned in list order.

    Raises
    ------
    ConfigurationError
        If the list is empty or a probability lies outside ``[0, 1]``.
    """
    items = list(arms)
    if not items:
        raise ConfigurationError("fleet must contain at least one arm")
    vm_arms = []
    for i, (name, p) in enumerate(items):
        try:
            p = float(p)
        except (TypeError, ValueError):
            raise ConfigurationError(f"preference probability of {name!r} is not a number: {p!r}") from None
        vm_arms.append(VmArm(i, str(name), p))
    return Fleet(tuple(vm_arms), reward_model if reward_model is not None else Bernoulli())


def paper_fleet(reward_model: RewardModel | None = None) -> Fleet:
    """The ten-VM reference fleet (VM1 = 0.98 ... VM10 = 0.5)."""
    return new_fleet(PAPER_FLEET, reward_model)


def _check_arm(fleet: Fleet, arm_id: int) -> int:
    if not (0 <= arm_id < len(fleet)) or int(arm_id) != arm_id:
        raise IndexError(f"arm id {arm_id!r} out of range for fleet of {len(fleet)}")
    return int(arm_id)


def _draw_score(p, sigma: float, rng: np.random.Generator, size=None):
    return np.clip(rng.normal(1.0 - p, sigma, size), 0.0, 1.0)


def pull(fleet: Fleet, arm_id: int, rng: np.random.Generator, t: int = 0) -> RewardObservation:
    """Allocate arm ``arm_id`` once and observe its reward."""
    arm_id = _check_arm(fleet, arm_id)
    p = fleet.arms[arm_id].preference_probability
    model = fleet.reward_model
    if isinstance(model, Bernoulli):
        reward = 1.0 if rng.random() < p else 0.0
    else:
        reward = 1.0 - float(_draw_score(p, model.sigma, rng))
    return RewardObservation(arm_id, t, reward)


def anomaly_score(fleet: Fleet, arm_id: int, rng: np.random.Generator) -> float:
    """Draw one anomaly score for ``arm_id`` (1 = malicious, 0 = normal).

    For the same generator state, ``pull`` returns exactly ``1 - score``.
    """
    arm_id = _check_arm(fleet, arm_id)
    model = fleet.reward_model
    if not isinstance(model, ClippedGaussian):
        raise UnsupportedOperationError("anomaly scores require a clipped_gaussian fleet")
    return float(_draw_score(fleet.arms[arm_id].preference_probability, model.sigma, rng))


def best_arm(fleet: Fleet) -> tuple[int, float]:
    """Arm with the highest true mean reward, ties broken by lowest id."""
    means = fleet.true_means
    best = max(range(len(means)), key=lambda i: (means[i], -i))
    return best, means[best]


def sample_outcomes(fleet: Fleet, rng: np.random.Generator, n_steps: int) -> np.ndarray:
    """Rewards for every arm at every step, shape ``(n_steps, n_arms)``.

    Row ``t`` holds the outcome each arm would produce if allocated at step
    ``t``; simulations read one cell per step so that all policies fed the
    same generator face identical environment randomness.
    """
    p = fleet.probabilities
    model = fleet.reward_model
    if isinstance(model, Bernoulli):
        return (rng.random((n_steps, len(p))) < p).astype(float)
    return 1.0 - _draw_score(p, model.sigma, rng, (n_steps, len(p)))


def arm_sigma_eff(fleet: Fleet, arm_id: int) -> float:
    """Upper bound on the reward standard deviation of one arm."""
    p = fleet.arms[arm_id].preference_probability
    if isinstance(fleet.reward_model, Bernoulli):
        return math.sqrt(p * (1.0 - p))
    return fleet.reward_model.sigma
