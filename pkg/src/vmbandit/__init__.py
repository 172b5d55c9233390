"""Multi-armed-bandit simulator for security-aware VM allocation."""

from .env import (
    Bernoulli,
    ClippedGaussian,
    Fleet,
    VmArm,
    anomaly_score,
    best_arm,
    new_fleet,
    paper_fleet,
    pull,
)
from .errors import (
    AggregationError,
    ConfigurationError,
    DataError,
    SequencingError,
    SizeError,
    UnsupportedOperationError,
    VmBanditError,
)
from .metrics import merge_runs, per_arm_summary, cumulative_regret_curve, record_step
from .policies import (
    EpsilonFirst,
    EpsilonGreedy,
    Thompson,
    Ucb1,
    UniformRandom,
    allocation_probabilities,
    parse_policy,
    policy_init,
    select,
    update,
)
from .simulator import (
    SimulationConfig,
    brute_force_expected_value,
    compare_policies,
    run_episode,
    run_replicated,
)

__version__ = "0.1.0"
