"""Reward and regret accounting.

Two regret definitions are tracked for every step:

``ideal``
    ``1 - reward``, the shortfall from a perfect outcome.
``oracle``
    ``true_mean(best arm) - true_mean(chosen arm)``, the expected loss
    against always allocating the best VM.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .env import Fleet
from .errors import AggregationError, ConfigurationError, DataError, SequencingError

__all__ = [
    "DEFINITIONS",
    "StepRecord",
    "RunLog",
    "ArmSummary",
    "RegretCurve",
    "AggregateSummary",
    "record_step",
    "per_arm_summary",
    "cumulative_regret_curve",
    "merge_runs",
]

DEFINITIONS = ("ideal", "oracle")


def _check_definition(definition: str) -> str:
    if definition not in DEFINITIONS:
        raise ConfigurationError(f"regret definition must be one of {DEFINITIONS}, got {definition!r}")
    return definition


@dataclass(frozen=True, slots=True)
class StepRecord:
    t: int
    arm_id: int
    reward: float
    ideal_regret: float
    oracle_regret: float


@dataclass
class RunLog:
    """Per-step trace of one seeded episode."""

    config_digest: str
    seed: int
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def horizon(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def record_step(log: RunLog, t: int, arm_id: int, reward: float, fleet: Fleet) -> RunLog:
    """Append one step to ``log``; ``t`` must be the next index."""
    if t != len(log.records):
        raise SequencingError(f"expected step {len(log.records)}, got {t}")
    if not (0.0 <= reward <= 1.0):
        raise DataError(f"reward must lie in [0, 1], got {reward!r}")
    means = fleet.true_means
    log.records.append(StepRecord(t, arm_id, reward, 1.0 - reward, max(means) - means[arm_id]))
    return log


@dataclass(frozen=True)
class ArmSummary:
    """Per-arm averages over one run.

    ``mean_reward`` and ``mean_ideal_regret`` are ``None`` for arms that were
    never pulled.
    """

    arm_id: int
    pulls: int
    mean_reward: Optional[float]
    mean_ideal_regret: Optional[float]
    allocation_frequency: float


def per_arm_summary(log: RunLog, num_arms: int) -> list[ArmSummary]:
    if not log.records:
        raise DataError("cannot summarise an empty run log")
    rewards: list[list[float]] = [[] for _ in range(num_arms)]
    for r in log.records:
        rewards[r.arm_id].append(r.reward)
    horizon = len(log.records)
    out = []
    for i in range(num_arms):
        n = len(rewards[i])
        if n:
            mean = float(np.mean(rewards[i]))
            out.append(ArmSummary(i, n, mean, 1.0 - mean, n / horizon))
        else:
            out.append(ArmSummary(i, 0, None, None, 0.0))
    return out


def cumulative_regret_curve(log: RunLog, definition: str = "oracle") -> np.ndarray:
    """Prefix sums of the per-step regret; nondecreasing in ``t``."""
    if not log.records:
        raise DataError("cannot build a curve from an empty run log")
    field_name = f"{_check_definition(definition)}_regret"
    return np.cumsum(log.column(field_name))


@dataclass(frozen=True)
class RegretCurve:
    """Cross-replication statistics for one regret definition."""

    definition: str
    mean: np.ndarray
    std: np.ndarray
    finals: np.ndarray

    @property
    def final_min(self) -> float:
        return float(self.finals.min())

    @property
    def final_median(self) -> float:
        return float(np.median(self.finals))

    @property
    def final_max(self) -> float:
        return float(self.finals.max())

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])


@dataclass(frozen=True)
class AggregateSummary:
    config_digest: str
    horizon: int
    replications: int
    curves: dict[str, RegretCurve]
    allocation_frequency: np.ndarray

    def __getitem__(self, definition: str) -> RegretCurve:
        return self.curves[_check_definition(definition)]


def merge_runs(
    logs: Sequence[RunLog],
    definition: str | Iterable[str] = DEFINITIONS,
    num_arms: Optional[int] = None,
) -> AggregateSummary:
    """Mean/std of cumulative regret across replications.

    Values are sorted across runs before reduction, so the result is
    bit-identical under any permutation of ``logs``. ``finals`` is likewise
    stored sorted; pair replications through the logs themselves.
    """
    logs = list(logs)
    if not logs:
        raise AggregationError("no run logs to merge")
    definitions = (definition,) if isinstance(definition, str) else tuple(definition)
    for d in definitions:
        _check_definition(d)
    digest, horizon = logs[0].config_digest, logs[0].horizon
    for log in logs[1:]:
        if log.config_digest != digest:
            raise AggregationError(f"config digest mismatch: {log.config_digest} != {digest}")
        if log.horizon != horizon:
            raise AggregationError(f"horizon mismatch: {log.horizon} != {horizon}")
    if horizon == 0:
        raise AggregationError("run logs are empty")

    curves = {}
    for d in definitions:
        stacked = np.sort(np.stack([cumulative_regret_curve(log, d) for log in logs]), axis=0)
        curves[d] = RegretCurve(
            definition=d,
            mean=stacked.mean(axis=0),
            std=stacked.std(axis=0),
            finals=stacked[:, -1].copy(),
        )
    if num_arms is None:
        num_arms = 1 + max(max(r.arm_id for r in log.records) for log in logs)
    freq = np.sort(
        np.stack([np.bincount(log.column("arm_id").astype(int), minlength=num_arms) / horizon for log in logs]),
        axis=0,
    ).mean(axis=0)
    return AggregateSummary(digest, horizon, len(logs), curves, freq)
