"""Allocation policies with a shared select/update contract.

Every policy keeps the same per-arm statistics (pull counts, running mean
reward and Beta posterior parameters) in a :class:`PolicyState`; the policy
kind only decides how the next arm is chosen. Ties always go to the lowest
arm id.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, DataError

__all__ = [
    "EpsilonGreedy",
    "EpsilonFirst",
    "Ucb1",
    "Thompson",
    "UniformRandom",
    "PolicyKind",
    "ArmEstimate",
    "PolicyState",
    "policy_init",
    "select",
    "update",
    "allocation_probabilities",
    "parse_policy",
    "POLICY_GRAMMAR",
]

POLICY_GRAMMAR = (
    "eps:<epsilon>",
    "epsfirst[:<explore_steps>]",
    "ucb1[:<c>]",
    "thompson[:<alpha0>:<beta0>]",
    "random",
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _argmax(values: np.ndarray) -> int:
    # np.argmax returns the first maximal index
    return int(np.argmax(values))


@dataclass(frozen=True)
class EpsilonGreedy:
    """Uniform exploration with probability ``epsilon``, greedy otherwise."""

    epsilon: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")

    @property
    def spec(self) -> str:
        return f"eps:{_fmt(self.epsilon)}"

    def choose(self, state: "PolicyState", rng: np.random.Generator) -> int:
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            return int(rng.integers(state.num_arms))
        return _argmax(state.values)


@dataclass(frozen=True)
class EpsilonFirst:
    """Uniform exploration for the first ``explore_steps`` selections, then greedy.

    ``explore_steps=None`` defers the choice to the simulator, which uses one
    tenth of the episode horizon.
    """

    explore_steps: Optional[int] = None

    def __post_init__(self):
        n = self.explore_steps
        if n is not None and (isinstance(n, bool) or int(n) != n or n < 0):
            raise ConfigurationError(f"explore_steps must be a non-negative integer, got {n!r}")

    @property
    def spec(self) -> str:
        return "epsfirst" if self.explore_steps is None else f"epsfirst:{int(self.explore_steps)}"

    def resolve(self, horizon: int) -> "EpsilonFirst":
        if self.explore_steps is not None:
            return self
        return EpsilonFirst(int(round(0.1 * horizon)))

    def choose(self, state: "PolicyState", rng: np.random.Generator) -> int:
        if self.explore_steps is None:
            raise ConfigurationError("epsfirst needs explore_steps; resolve it against a horizon first")
        if state.t < self.explore_steps:
            return int(rng.integers(state.num_arms))
        return _argmax(state.values)


@dataclass(frozen=True)
class Ucb1:
    """Highest ``Q_i + c * sqrt(ln t / n_i)``; unpulled arms first, by id."""

    c: float = math.sqrt(2.0)

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ConfigurationError(f"ucb1 c must be positive, got {self.c!r}")

    @property
    def spec(self) -> str:
        return f"ucb1:{_fmt(self.c)}"

    def choose(self, state: "PolicyState", rng: np.random.Generator) -> int:
        pulls = state.pulls
        unpulled = np.flatnonzero(pulls == 0)
        if unpulled.size:
            return int(unpulled[0])
        bonus = self.c * np.sqrt(math.log(state.t) / pulls)
        return _argmax(state.values + bonus)


@dataclass(frozen=True)
class Thompson:
    """Beta-Bernoulli posterior sampling."""

    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self):
        for name in ("alpha0", "beta0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"thompson {name} must be positive, got {v!r}")

    @property
    def spec(self) -> str:
        if self.alpha0 == 1.0 and self.beta0 == 1.0:
            return "thompson"
        return f"thompson:{_fmt(self.alpha0)}:{_fmt(self.beta0)}"

    def choose(self, state: "PolicyState", rng: np.random.Generator) -> int:
        return _argmax(rng.beta(state.alpha, state.beta))


@dataclass(frozen=True)
class UniformRandom:
    """Baseline: every arm equally likely."""

    @property
    def spec(self) -> str:
        return "random"

    def choose(self, state: "PolicyState", rng: np.random.Generator) -> int:
        return int(rng.integers(state.num_arms))


PolicyKind = Union[EpsilonGreedy, EpsilonFirst, Ucb1, Thompson, UniformRandom]
_KINDS = (EpsilonGreedy, EpsilonFirst, Ucb1, Thompson, UniformRandom)


@dataclass(frozen=True)
class ArmEstimate:
    pulls: int
    value_estimate: float
    alpha: float
    beta: float


@dataclass
class PolicyState:
    """Per-arm statistics of one policy instance.

    Stored as parallel arrays; :attr:`estimates` gives a per-arm view.
    """

    kind: PolicyKind
    pulls: np.ndarray
    values: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    t: int = 0
    _thompson: bool = field(init=False, repr=False)

    def __post_init__(self):
        self._thompson = isinstance(self.kind, Thompson)

    @property
    def num_arms(self) -> int:
        return len(self.pulls)

    @property
    def estimates(self) -> list[ArmEstimate]:
        return [
            ArmEstimate(int(n), float(q), float(a), float(b))
            for n, q, a, b in zip(self.pulls, self.values, self.alpha, self.beta)
        ]

    def copy(self) -> "PolicyState":
        return copy.deepcopy(self)


def policy_init(kind: PolicyKind, num_arms: int) -> PolicyState:
    """Fresh state: zero counts and estimates, Beta priors at ``(alpha0, beta0)``."""
    if not isinstance(kind, _KINDS):
        raise ConfigurationError(f"unknown policy kind {kind!r}")
    if isinstance(num_arms, bool) or int(num_arms) != num_arms or num_arms < 1:
        raise ConfigurationError(f"num_arms must be a positive integer, got {num_arms!r}")
    a0, b0 = (kind.alpha0, kind.beta0) if isinstance(kind, Thompson) else (1.0, 1.0)
    k = int(num_arms)
    return PolicyState(
        kind=kind,
        pulls=np.zeros(k, dtype=np.int64),
        values=np.zeros(k),
        alpha=np.full(k, float(a0)),
        beta=np.full(k, float(b0)),
    )


def select(state: PolicyState, rng: np.random.Generator) -> int:
    """Choose the next arm. Does not modify ``state``."""
    return state.kind.choose(state, rng)


def update(state: PolicyState, arm_id: int, reward: float, rng: Optional[np.random.Generator] = None) -> PolicyState:
    """Fold one observed reward into ``state`` (in place) and return it.

    Fractional rewards reach the Beta posterior through an auxiliary
    Bernoulli(reward) draw from ``rng``.
    """
    if not (0 <= arm_id < state.num_arms):
        raise IndexError(f"arm id {arm_id!r} out of range for {state.num_arms} arms")
    if not (0.0 <= reward <= 1.0):
        raise DataError(f"reward must lie in [0, 1], got {reward!r}")
    n = state.pulls[arm_id] + 1
    state.pulls[arm_id] = n
    q = state.values[arm_id]
    state.values[arm_id] = q + (reward - q) / n
    state.t += 1
    if state._thompson:
        if reward == 1.0 or reward == 0.0:
            success = reward == 1.0
        else:
            if rng is None:
                raise ConfigurationError("fractional rewards need a random stream for binarization")
            success = rng.random() < reward
        if success:
            state.alpha[arm_id] += 1.0
        else:
            state.beta[arm_id] += 1.0
    return state


def allocation_probabilities(state: PolicyState, rng: np.random.Generator, n_samples: int = 10_000) -> np.ndarray:
    """Monte-Carlo estimate of ``P(select = i)`` for the current state."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    frozen = state.copy()
    counts = np.zeros(state.num_arms, dtype=np.int64)
    kind = frozen.kind
    for _ in range(int(n_samples)):
        counts[kind.choose(frozen, rng)] += 1
    return counts / counts.sum()


def _number(text: str, spec: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"bad number {text!r} in policy specifier {spec!r}") from None


def parse_policy(spec: str) -> PolicyKind:
    """Parse a short policy specifier such as ``"eps:0.1"`` or ``"ucb1"``.

    >>> parse_policy("eps:0.2")
    EpsilonGreedy(epsilon=0.2)
    >>> parse_policy("thompson")
    Thompson(alpha0=1.0, beta0=1.0)
    """
    text = spec.strip().lower()
    name, *args = text.split(":")
    try:
        if name == "eps" and len(args) == 1:
            return EpsilonGreedy(_number(args[0], spec))
        if name == "epsfirst" and len(args) <= 1:
            if not args:
                return EpsilonFirst()
            steps = _number(args[0], spec)
            if steps != int(steps):
                raise ConfigurationError(f"explore_steps must be an integer in {spec!r}")
            return EpsilonFirst(int(steps))
        if name == "ucb1" and len(args) <= 1:
            return Ucb1(_number(args[0], spec)) if args else Ucb1()
        if name == "thompson" and len(args) in (0, 2):
            return Thompson(*(_number(a, spec) for a in args))
        if name == "random" and not args:
            return UniformRandom()
    except ConfigurationError as exc:
        raise ConfigurationError(f"invalid policy specifier {spec!r}: {exc}") from None
    raise ConfigurationError(
        f"unknown policy specifier {spec!r}; valid forms: {', '.join(POLICY_GRAMMAR)}"
    )
