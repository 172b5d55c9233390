import json
import math

import numpy as np
import pytest

from vmbandit.datagen_io import (
    generate_anomaly_dataset,
    load_config,
    parse_config,
    read_dataset_csv,
    read_report_json,
    regenerate_dataset,
    report_to_dict,
    write_curves_csv,
    write_dataset_csv,
    write_report,
    write_tables_csv,
)
from vmbandit.env import Bernoulli, ClippedGaussian, new_fleet, paper_fleet
from vmbandit.errors import ConfigurationError, DataError, UnsupportedOperationError
from vmbandit.policies import EpsilonGreedy, Ucb1
from vmbandit.simulator import compare_policies, forced_pull_table


@pytest.fixture
def gaussian_fleet():
    return paper_fleet(ClippedGaussian(0.3))


def test_generate_shape_and_range(gaussian_fleet):
    ds = generate_anomaly_dataset(gaussian_fleet, 5000, seed=1)
    assert ds.scores.shape == (5000, 10)
    assert ds.columns == [f"VM{i}" for i in range(1, 11)]
    assert ds.scores.min() >= 0 and ds.scores.max() <= 1
    assert ds.scores[:, 0].mean() == pytest.approx(0.130, abs=0.013)


def test_generate_perfect_machine():
    fleet = new_fleet([("VM", 1.0)], ClippedGaussian(1e-12))
    ds = generate_anomaly_dataset(fleet, 100, seed=0)
    assert ds.scores.max() <= 1e-9


def test_generate_errors(gaussian_fleet):
    with pytest.raises(UnsupportedOperationError):
        generate_anomaly_dataset(paper_fleet(Bernoulli()), 10)
    with pytest.raises(ConfigurationError):
        generate_anomaly_dataset(gaussian_fleet, 0)


def test_regeneration_bit_identical(gaussian_fleet):
    ds = generate_anomaly_dataset(gaussian_fleet, 300, seed=42)
    assert regenerate_dataset(ds).scores.tobytes() == ds.scores.tobytes()


def test_column_means_within_three_se():
    fleet = paper_fleet(ClippedGaussian(0.3))
    hits, seeds = 0, 200
    for seed in range(seeds):
        ds = generate_anomaly_dataset(fleet, 500, seed)
        se = ds.scores.std(axis=0, ddof=1) / math.sqrt(500)
        expected = 1 - np.array(fleet.true_means)
        hits += int((np.abs(ds.scores.mean(axis=0) - expected) <= 3 * se).sum())
    assert hits / (seeds * len(fleet)) >= 0.99


def test_dataset_csv_round_trip(tmp_path, gaussian_fleet):
    ds = generate_anomaly_dataset(gaussian_fleet, 50, seed=3)
    path = tmp_path / "scores.csv"
    write_dataset_csv(ds, path)
    back = read_dataset_csv(path)
    assert back == ds
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    assert raw.splitlines()[1].decode() == "hour," + ",".join(ds.columns)


def _write_and_patch(tmp_path, fleet, patch):
    path = tmp_path / "scores.csv"
    write_dataset_csv(generate_anomaly_dataset(fleet, 5, seed=0), path)
    lines = path.read_text().split("\n")
    patch(lines)
    path.write_text("\n".join(lines))
    return path


def test_dataset_csv_bad_cell(tmp_path, gaussian_fleet):
    def patch(lines):
        cells = lines[3].split(",")
        cells[2] = "1.7"
        lines[3] = ",".join(cells)

    with pytest.raises(DataError, match=r"line 4, column 'VM2'"):
        read_dataset_csv(_write_and_patch(tmp_path, gaussian_fleet, patch))


def test_dataset_csv_ragged_and_header(tmp_path, gaussian_fleet):
    def ragged(lines):
        lines[4] = lines[4] + ",0.5"

    with pytest.raises(DataError, match="line 5"):
        read_dataset_csv(_write_and_patch(tmp_path, gaussian_fleet, ragged))

    def header(lines):
        lines[1] = ",".join(lines[1].split(",")[:-1])

    with pytest.raises(DataError, match="metadata declares 10"):
        read_dataset_csv(_write_and_patch(tmp_path, gaussian_fleet, header))

    def garbage(lines):
        lines[0] = "not metadata"

    with pytest.raises(DataError):
        read_dataset_csv(_write_and_patch(tmp_path, gaussian_fleet, garbage))


def test_bundled_paper_config():
    cfg = load_config("paper-fleet.json")
    assert cfg.fleet.probabilities.tolist() == [0.98, 0.95, 0.90, 0.85, 0.8, 0.75, 0.7, 0.65, 0.55, 0.5]
    assert cfg.fleet.reward_model == ClippedGaussian(0.3)
    bern = load_config("paper-fleet-bernoulli")
    assert isinstance(bern.fleet.reward_model, Bernoulli)
    assert bern.policies[-1] == Ucb1()


def test_config_defaults():
    cfg = parse_config({"fleet": {"arms": [{"name": "a", "p": 0.5}], "reward_model": "clipped_gaussian"}})
    assert cfg.fleet.reward_model.sigma == 0.3
    assert cfg.replications == 100 and cfg.policies == ()
    sim = parse_config({"fleet": {"arms": [{"p": 0.5}]}, "policy": "eps:0.2", "horizon": 7}).simulation()
    assert sim.policy == EpsilonGreedy(0.2) and sim.horizon == 7


def test_config_empty_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("")
    with pytest.raises(ConfigurationError, match="empty"):
        load_config(path)


@pytest.mark.parametrize(
    "data,where",
    [
        ({"fleet": {"arms": [{"name": "a", "p": 0.5}, {"name": "b", "p": -0.1}]}}, r"fleet\.arms\[1\]\.p"),
        ({"fleet": {"arms": [{"name": "a", "p": 0.5}]}, "bogus": 1}, "bogus"),
        ({"fleet": {"arms": [{"name": "a", "p": 0.5, "q": 1}]}}, r"fleet\.arms\[0\]\.q"),
        ({"fleet": {"arms": []}}, "fleet.arms"),
        ({"fleet": {"arms": [{"p": 0.5}], "reward_model": "poisson"}}, "fleet.reward_model"),
        ({"fleet": {"arms": [{"p": 0.5}], "sigma": 0.2}}, "fleet.sigma"),
        ({"fleet": {"arms": [{"p": 0.5}]}, "policies": ["eps:0.1", "ucb9"]}, r"policies\[1\]"),
        ({"fleet": {"arms": [{"p": 0.5}]}, "horizon": 0}, "horizon"),
        ([], "root"),
    ],
)
def test_config_validation_paths(data, where):
    with pytest.raises(ConfigurationError, match=where):
        parse_config(data)


@pytest.fixture(scope="module")
def small_report():
    return compare_policies(paper_fleet(), ["eps:0.1", "ucb1", "thompson"], horizon=20, replications=4, base_seed=2)


def test_report_json_round_trip(tmp_path, small_report):
    path = tmp_path / "r.json"
    write_report(small_report, path, "json")
    back = read_report_json(path)
    assert report_to_dict(back) == report_to_dict(small_report)
    assert json.loads(path.read_text())["ranking"] == small_report.ranking


def test_curve_csv_rows(tmp_path):
    report = compare_policies(paper_fleet(), ["random"], horizon=3, replications=2, min_policies=1)
    path = tmp_path / "c.csv"
    write_report(report, path, "csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,policy,mean_cum_regret,std_cum_regret,definition"
    assert sum(1 for ln in lines[1:] if ln.endswith(",oracle")) == 3
    assert sum(1 for ln in lines[1:] if ln.endswith(",ideal")) == 3


def test_curve_csv_row_count_six_policies(tmp_path):
    report = compare_policies(
        paper_fleet(), ["eps:0.1", "eps:0.2", "eps:0.3", "eps:0.4", "ucb1", "thompson"], horizon=2000, replications=1
    )
    n = write_curves_csv(report, tmp_path / "c.csv", definitions=("oracle",))
    assert n == 12000


def test_curve_csv_values_exact(tmp_path, small_report):
    path = tmp_path / "c.csv"
    write_curves_csv(small_report, path)
    lines = path.read_text().splitlines()[1:]
    first = small_report.results[0]
    row = [ln for ln in lines if ln.startswith(f"5,{first.policy},") and ln.endswith(",ideal")][0]
    assert float(row.split(",")[2]) == first.summary["ideal"].mean[5]


def test_tables_csv(tmp_path):
    fleet = paper_fleet(ClippedGaussian())
    rows = forced_pull_table(fleet, 100, 0)
    path = tmp_path / "t.csv"
    write_tables_csv(rows, fleet, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "name,preference_probability,reward,regret"
    for ln, s in zip(lines[1:], rows):
        name, p, reward, regret = ln.split(",")
        assert float(reward) == s.mean_reward and float(regret) == 1.0 - float(reward)


def test_unknown_format(tmp_path, small_report):
    with pytest.raises(ConfigurationError):
        write_report(small_report, tmp_path / "x", "xml")
