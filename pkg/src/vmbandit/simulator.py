"""Seeded episodes, replications and policy comparisons.

Random streams
--------------
Every episode owns two independent :class:`numpy.random.Generator` lanes
derived from a :class:`numpy.random.SeedSequence` keyed by counters:

* environment lane: ``SeedSequence(base_seed, spawn_key=(replication, 0))``
* policy lane: ``SeedSequence(base_seed, spawn_key=(replication, 1, policy_index))``

The environment lane ignores the policy index, so in a comparison every
policy sees the same reward outcomes in replication ``r`` (common random
numbers). The environment lane pre-draws one outcome per arm per step, which
keeps outcomes aligned across policies that pull different arms.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np

from .env import Bernoulli, Fleet, sample_outcomes
from .errors import ConfigurationError, SizeError
from .metrics import AggregateSummary, ArmSummary, RunLog, merge_runs, per_arm_summary, record_step
from .policies import (
    EpsilonFirst,
    EpsilonGreedy,
    PolicyKind,
    Thompson,
    Ucb1,
    UniformRandom,
    parse_policy,
    policy_init,
    select,
    update,
)

__all__ = [
    "DEFAULT_REPLICATIONS",
    "SimulationConfig",
    "PolicyResult",
    "ComparisonReport",
    "BruteForceResult",
    "episode_streams",
    "run_episode",
    "run_replicated",
    "compare_policies",
    "forced_pull_table",
    "brute_force_expected_value",
]

DEFAULT_REPLICATIONS = 100
ENV_LANE = 0
POLICY_LANE = 1


def _as_kind(policy: PolicyKind | str) -> PolicyKind:
    return parse_policy(policy) if isinstance(policy, str) else policy


@dataclass(frozen=True)
class SimulationConfig:
    fleet: Fleet
    policy: PolicyKind
    horizon: int = 500
    replications: int = DEFAULT_REPLICATIONS
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "policy", _as_kind(self.policy))
        for name in ("horizon", "replications"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.base_seed, bool) or int(self.base_seed) != self.base_seed or self.base_seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.base_seed!r}")
        if isinstance(self.policy, EpsilonFirst):
            object.__setattr__(self, "policy", self.policy.resolve(self.horizon))

    def to_dict(self) -> dict:
        return {
            "fleet": self.fleet.to_dict(),
            "policy": self.policy.spec,
            "horizon": int(self.horizon),
            "replications": int(self.replications),
            "seed": int(self.base_seed),
        }

    @cached_property
    def digest_value(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def digest(self) -> str:
        return self.digest_value


def episode_streams(
    base_seed: int, replication_index: int, policy_index: int = 0
) -> tuple[np.random.Generator, np.random.Generator]:
    """(environment, policy) generators for one episode."""
    env = np.random.SeedSequence(base_seed, spawn_key=(replication_index, ENV_LANE))
    pol = np.random.SeedSequence(base_seed, spawn_key=(replication_index, POLICY_LANE, policy_index))
    return np.random.default_rng(env), np.random.default_rng(pol)


def run_episode(config: SimulationConfig, replication_index: int = 0, policy_index: int = 0) -> RunLog:
    """One episode: select, pull, update and record for ``horizon`` steps."""
    env_rng, pol_rng = episode_streams(config.base_seed, replication_index, policy_index)
    fleet = config.fleet
    outcomes = sample_outcomes(fleet, env_rng, config.horizon).tolist()
    state = policy_init(config.policy, len(fleet))
    log = RunLog(config.digest(), int(config.base_seed))
    for t in range(config.horizon):
        arm = select(state, pol_rng)
        reward = outcomes[t][arm]
        update(state, arm, reward, pol_rng)
        record_step(log, t, arm, reward, fleet)
    return log


def _episode_job(args) -> RunLog:
    config, replication_index, policy_index = args
    return run_episode(config, replication_index, policy_index)


def _run_many(jobs: list, workers: int) -> list[RunLog]:
    if workers <= 1 or len(jobs) <= 1:
        return [_episode_job(j) for j in jobs]
    # map preserves input order, so results do not depend on scheduling
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_replicated(
    config: SimulationConfig, workers: int = 1, policy_index: int = 0
) -> tuple[list[RunLog], AggregateSummary]:
    """Run replications ``0..R-1`` and aggregate them."""
    jobs = [(config, r, policy_index) for r in range(config.replications)]
    logs = _run_many(jobs, workers)
    return logs, merge_runs(logs, num_arms=len(config.fleet))


@dataclass(frozen=True)
class PolicyResult:
    policy: str
    config_digest: str
    summary: AggregateSummary
    logs: Optional[list[RunLog]] = None


@dataclass(frozen=True)
class ComparisonReport:
    """Policies evaluated on a shared fleet, ranked by final mean regret."""

    fleet: Fleet
    horizon: int
    replications: int
    base_seed: int
    results: list[PolicyResult]
    ranking_definition: str = "oracle"

    @property
    def fleet_digest(self) -> str:
        return self.fleet.digest()

    @property
    def ranking(self) -> list[str]:
        return [r.policy for r in self.results]

    def result(self, policy: str | PolicyKind) -> PolicyResult:
        spec = _as_kind(policy).spec
        for r in self.results:
            if r.policy == spec:
                return r
        raise KeyError(spec)


def compare_policies(
    fleet: Fleet,
    policies: Sequence[PolicyKind | str],
    horizon: int,
    replications: int = DEFAULT_REPLICATIONS,
    base_seed: int = 0,
    workers: int = 1,
    keep_logs: bool = False,
    min_policies: int = 2,
) -> ComparisonReport:
    """Evaluate several policies under common random numbers.

    Results are ranked ascending by final mean cumulative oracle regret,
    ties kept in input order.
    """
    kinds = [_as_kind(p) for p in policies]
    if len(kinds) < min_policies:
        raise ConfigurationError(f"need at least {min_policies} policies to compare, got {len(kinds)}")
    configs = [SimulationConfig(fleet, k, horizon, replications, base_seed) for k in kinds]
    specs = [c.policy.spec for c in configs]
    dupes = sorted({s for s in specs if specs.count(s) > 1})
    if dupes:
        raise ConfigurationError(f"duplicate policy specifiers: {', '.join(dupes)}")

    jobs = [(c, r, i) for i, c in enumerate(configs) for r in range(replications)]
    all_logs = _run_many(jobs, workers)
    results = []
    for i, c in enumerate(configs):
        logs = all_logs[i * replications : (i + 1) * replications]
        results.append(
            PolicyResult(specs[i], c.digest(), merge_runs(logs, num_arms=len(fleet)), logs if keep_logs else None)
        )
    results.sort(key=lambda r: r.summary["oracle"].final_mean)
    return ComparisonReport(fleet, int(horizon), int(replications), int(base_seed), results)


def forced_pull_table(fleet: Fleet, horizon: int = 500, seed: int = 0) -> list[ArmSummary]:
    """Pull every arm once per step and summarise each arm's own log.

    Returns one :class:`ArmSummary` per arm (its ``allocation_frequency`` is
    1, relative to that arm's forced log).
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    env_rng, _ = episode_streams(seed, 0)
    outcomes = sample_outcomes(fleet, env_rng, horizon)
    rows = []
    for arm in fleet.arms:
        log = RunLog(f"forced:{fleet.digest()}:{arm.id}", seed)
        for t in range(horizon):
            record_step(log, t, arm.id, float(outcomes[t, arm.id]), fleet)
        rows.append(per_arm_summary(log, len(fleet))[arm.id])
    return rows


# -- exhaustive enumeration ------------------------------------------------

MAX_ENUM_ARMS = 3
MAX_ENUM_HORIZON = 12


@dataclass(frozen=True)
class BruteForceResult:
    expected_reward: float
    expected_oracle_regret: float


def _thompson_win_probs(alphas: tuple[float, ...], betas: tuple[float, ...]) -> tuple[float, ...]:
    from scipy import integrate, stats

    dists = [stats.beta(a, b) for a, b in zip(alphas, betas)]
    probs = []
    for i, di in enumerate(dists):
        others = [d for j, d in enumerate(dists) if j != i]

        def integrand(x, di=di, others=others):
            v = di.pdf(x)
            for d in others:
                v *= d.cdf(x)
            return v

        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
        probs.append(val)
    total = sum(probs)
    return tuple(p / total for p in probs)


def _first_max(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def brute_force_expected_value(fleet: Fleet, kind: PolicyKind | str, horizon: int) -> BruteForceResult:
    """Exact expected cumulative reward and oracle regret by enumeration.

    Walks every branch of (exploration decision, chosen arm, reward outcome)
    weighted by its probability. Estimates are carried with the same
    floating-point running-mean recurrence the policies use, so greedy ties
    resolve identically.

    Raises
    ------
    SizeError
        For more than 3 arms or a horizon above 12.
    """
    kind = _as_kind(kind)
    if not isinstance(fleet.reward_model, Bernoulli):
        raise ConfigurationError("exhaustive enumeration needs a bernoulli fleet")
    k = len(fleet)
    if k > MAX_ENUM_ARMS or horizon > MAX_ENUM_HORIZON:
        raise SizeError(
            f"enumeration limited to {MAX_ENUM_ARMS} arms and horizon {MAX_ENUM_HORIZON}; got {k} arms, horizon {horizon}"
        )
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    if isinstance(kind, EpsilonFirst):
        kind = kind.resolve(horizon)
    p = [a.preference_probability for a in fleet.arms]
    p_best = max(p)

    def choice_probs(t: int, counts: tuple[int, ...], q: tuple[float, ...], ab) -> list[float]:
        uniform = [1.0 / k] * k
        if isinstance(kind, UniformRandom):
            return uniform
        if isinstance(kind, EpsilonGreedy):
            greedy = _first_max(q)
            probs = [kind.epsilon / k] * k
            probs[greedy] += 1.0 - kind.epsilon
            return probs
        if isinstance(kind, EpsilonFirst):
            if t < kind.explore_steps:
                return uniform
            probs = [0.0] * k
            probs[_first_max(q)] = 1.0
            return probs
        if isinstance(kind, Ucb1):
            probs = [0.0] * k
            if 0 in counts:
                probs[counts.index(0)] = 1.0
            else:
                scores = [q[i] + kind.c * math.sqrt(math.log(t) / counts[i]) for i in range(k)]
                probs[_first_max(scores)] = 1.0
            return probs
        if isinstance(kind, Thompson):
            return list(_thompson_win_probs(ab[0], ab[1]))
        raise ConfigurationError(f"enumeration does not support {kind!r}")

    @lru_cache(maxsize=None)
    def value(t: int, counts: tuple[int, ...], q: tuple[float, ...], ab) -> tuple[float, float]:
        # expected (reward, regret) accumulated from step t to the horizon
        if t == horizon:
            return 0.0, 0.0
        exp_reward = exp_regret = 0.0
        for arm, w in enumerate(choice_probs(t, counts, q, ab)):
            if w == 0.0:
                continue
            n = counts[arm] + 1
            new_counts = counts[:arm] + (n,) + counts[arm + 1 :]
            for r, pr in ((1.0, p[arm]), (0.0, 1.0 - p[arm])):
                if pr == 0.0:
                    continue
                old = q[arm]
                new_q = q[:arm] + (old + (r - old) / n,) + q[arm + 1 :]
                if ab is not None:
                    a, b = list(ab[0]), list(ab[1])
                    if r == 1.0:
                        a[arm] += 1.0
                    else:
                        b[arm] += 1.0
                    new_ab = (tuple(a), tuple(b))
                else:
                    new_ab = None
                fr, fg = value(t + 1, new_counts, new_q, new_ab)
                exp_reward += w * pr * (r + fr)
                exp_regret += w * pr * ((p_best - p[arm]) + fg)
        return exp_reward, exp_regret

    ab0 = None
    if isinstance(kind, Thompson):
        ab0 = ((float(kind.alpha0),) * k, (float(kind.beta0),) * k)
    reward, regret = value(0, (0,) * k, (0.0,) * k, ab0)
    return BruteForceResult(reward, regret)
