import math

import numpy as np
import pytest

from vmbandit.env import ClippedGaussian, new_fleet, paper_fleet
from vmbandit.errors import ConfigurationError, SizeError
from vmbandit.metrics import cumulative_regret_curve
from vmbandit.policies import EpsilonFirst, EpsilonGreedy, Thompson, Ucb1, UniformRandom
from vmbandit.simulator import (
    SimulationConfig,
    brute_force_expected_value,
    compare_policies,
    episode_streams,
    forced_pull_table,
    run_episode,
    run_replicated,
)


def _signature(log):
    return [(r.t, r.arm_id, r.reward, r.ideal_regret, r.oracle_regret) for r in log.records]


@pytest.mark.parametrize("policy", ["eps:0.3", "ucb1", "thompson", "random", "epsfirst"])
def test_single_arm_fleet_never_regrets(policy):
    cfg = SimulationConfig(new_fleet([("solo", 0.4)]), policy, horizon=50, replications=1)
    log = run_episode(cfg, 0)
    assert {r.arm_id for r in log.records} == {0}
    assert all(r.oracle_regret == 0 for r in log.records)


def test_episode_deterministic():
    cfg = SimulationConfig(paper_fleet(ClippedGaussian()), Thompson(), horizon=300)
    assert _signature(run_episode(cfg, 3)) == _signature(run_episode(cfg, 3))
    assert _signature(run_episode(cfg, 3)) != _signature(run_episode(cfg, 4))


def test_config_validation():
    fleet = paper_fleet()
    for bad in ({"horizon": 0}, {"replications": 0}, {"base_seed": -1}):
        with pytest.raises(ConfigurationError):
            SimulationConfig(fleet, "random", **bad)
    cfg = SimulationConfig(fleet, "epsfirst", horizon=2000)
    assert cfg.policy == EpsilonFirst(200)
    assert cfg.digest() == SimulationConfig(fleet, EpsilonFirst(200), horizon=2000).digest()


def test_streams_are_counter_keyed():
    a_env, a_pol = episode_streams(7, 2, 0)
    b_env, b_pol = episode_streams(7, 2, 5)
    assert a_env.random() == b_env.random()
    assert a_pol.random() != b_pol.random()


def test_environment_lane_independent_of_policy():
    # under common random numbers the realised reward of an arm at step t
    # does not depend on which policy is running
    fleet = paper_fleet()
    seen = {}
    for idx, policy in enumerate(["random", "eps:0.5", "thompson"]):
        log = run_episode(SimulationConfig(fleet, policy, horizon=400), 1, idx)
        for r in log.records:
            key = (r.t, r.arm_id)
            assert seen.setdefault(key, r.reward) == r.reward


def test_run_replicated_single_and_repeat():
    cfg = SimulationConfig(paper_fleet(), "eps:0.1", horizon=100, replications=1)
    _, agg = run_replicated(cfg)
    assert (agg["oracle"].std == 0).all()
    cfg = SimulationConfig(paper_fleet(), "thompson", horizon=100, replications=8)
    _, a = run_replicated(cfg)
    _, b = run_replicated(cfg)
    assert a["oracle"].mean.tobytes() == b["oracle"].mean.tobytes()
    assert a["ideal"].std.tobytes() == b["ideal"].std.tobytes()


def test_workers_do_not_change_results():
    cfg = SimulationConfig(paper_fleet(), "thompson", horizon=60, replications=6)
    serial, a = run_replicated(cfg, workers=1)
    parallel, b = run_replicated(cfg, workers=2)
    assert [_signature(x) for x in serial] == [_signature(x) for x in parallel]
    assert a["oracle"].mean.tobytes() == b["oracle"].mean.tobytes()


def test_compare_uniform_vs_greedy():
    fleet = new_fleet([("good", 0.9), ("bad", 0.1)])
    report = compare_policies(fleet, ["random", "eps:0"], horizon=1000, replications=100)
    assert report.ranking == ["eps:0.0", "random"]
    # uniform random loses 0.4 per step in expectation
    assert report.result("random").summary["oracle"].final_mean == pytest.approx(400, rel=0.05)


def test_compare_rejects_duplicates_and_singletons():
    fleet = paper_fleet()
    with pytest.raises(ConfigurationError):
        compare_policies(fleet, ["ucb1", "ucb1:1.4142135623730951"], horizon=10)
    with pytest.raises(ConfigurationError):
        compare_policies(fleet, ["ucb1"], horizon=10)


def test_compare_forced_dominance():
    # always-best vs always-worst: a 2-arm fleet where greedy never leaves arm 0
    best_first = new_fleet([("best", 0.9), ("worst", 0.1)])
    worst_first = new_fleet([("worst", 0.1), ("best", 0.9)])
    for fleet, winner in ((best_first, "eps:0.0"), (worst_first, "random")):
        report = compare_policies(fleet, ["eps:0", "random"], horizon=200, replications=20)
        assert report.ranking[0] == winner


def test_compare_report_metadata():
    fleet = paper_fleet()
    report = compare_policies(fleet, ["eps:0.1", "thompson"], horizon=50, replications=3, base_seed=9)
    assert report.fleet_digest == fleet.digest()
    assert all(r.summary.horizon == 50 for r in report.results)
    finals = [r.summary["oracle"].final_mean for r in report.results]
    assert finals == sorted(finals)


def test_forced_pull_table_identity():
    rows = forced_pull_table(paper_fleet(ClippedGaussian()), horizon=500, seed=0)
    assert len(rows) == 10 and all(r.pulls == 500 for r in rows)
    for r in rows:
        assert r.mean_ideal_regret == 1.0 - r.mean_reward


# -- exhaustive enumeration ------------------------------------------------


def test_brute_force_trivial_values():
    assert brute_force_expected_value(new_fleet([("a", 0.7)]), EpsilonGreedy(0), 3).expected_reward == pytest.approx(2.1)
    two = new_fleet([("a", 0.9), ("b", 0.1)])
    assert brute_force_expected_value(two, UniformRandom(), 2).expected_reward == pytest.approx(1.0)


def test_brute_force_hand_derived():
    two = new_fleet([("a", 0.9), ("b", 0.1)])
    # greedy from zero estimates never leaves arm 0: ties go to the lowest id
    r = brute_force_expected_value(two, EpsilonGreedy(0), 3)
    assert (r.expected_reward, r.expected_oracle_regret) == pytest.approx((2.7, 0.0))
    # ucb1 pulls arm 0, arm 1, then arm 1 only if (r0, r1) = (0, 1), prob 0.01
    r = brute_force_expected_value(two, Ucb1(), 3)
    assert r.expected_reward == pytest.approx(0.9 + 0.1 + 0.01 * 0.1 + 0.99 * 0.9)
    assert r.expected_oracle_regret == pytest.approx(0.8 + 0.01 * 0.8)
    # thompson on p=(1, 0): step 2 picks arm 0 with probability 2/3 in both branches
    r = brute_force_expected_value(new_fleet([("a", 1.0), ("b", 0.0)]), Thompson(), 2)
    assert r.expected_reward == pytest.approx(0.5 + 2 / 3, abs=1e-9)


def test_brute_force_epsilon_greedy_one_step_by_hand():
    two = new_fleet([("a", 0.9), ("b", 0.1)])
    # step 0: greedy picks arm 0 w.p. 1 - eps/2
    eps = 0.5
    p0 = 1 - eps / 2
    r = brute_force_expected_value(two, EpsilonGreedy(eps), 1)
    assert r.expected_reward == pytest.approx(p0 * 0.9 + (1 - p0) * 0.1)


def test_brute_force_size_limits():
    with pytest.raises(SizeError):
        brute_force_expected_value(new_fleet([(str(i), 0.5) for i in range(4)]), UniformRandom(), 2)
    with pytest.raises(SizeError):
        brute_force_expected_value(new_fleet([("a", 0.5)]), UniformRandom(), 13)
    with pytest.raises(ConfigurationError):
        brute_force_expected_value(new_fleet([("a", 0.5)], ClippedGaussian()), UniformRandom(), 2)


@pytest.mark.parametrize("policy", ["eps:0", "eps:0.5", "random", "ucb1", "epsfirst:2", "thompson"])
def test_simulation_matches_enumeration_small(policy):
    fleet = new_fleet([("a", 0.9), ("b", 0.1)])
    horizon, reps = 3, 20_000
    exact = brute_force_expected_value(fleet, policy, horizon)
    cfg = SimulationConfig(fleet, policy, horizon=horizon, replications=reps)
    totals = np.array([sum(r.reward for r in run_episode(cfg, i).records) for i in range(reps)])
    se = totals.std(ddof=1) / math.sqrt(reps)
    assert abs(totals.mean() - exact.expected_reward) <= 3 * se + 1e-12
