"""Synthetic anomaly-score datasets and all file persistence.

File formats
------------
Dataset CSV
    Line 1 is ``# `` followed by a JSON metadata object
    (``seed``, ``sigma``, ``probabilities``); line 2 is the header ``hour``
    plus one column per VM name; then one row per hour index.
Curve CSV
    ``t,policy,mean_cum_regret,std_cum_regret,definition``.
Table CSV
    ``name,preference_probability,reward,regret``.
Report JSON
    The full comparison report, see :func:`report_to_dict`.

Floats are written with :func:`repr`, the shortest string that round-trips.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .env import DEFAULT_SIGMA, Bernoulli, ClippedGaussian, Fleet, new_fleet
from .errors import ConfigurationError, DataError, UnsupportedOperationError
from .metrics import DEFINITIONS, AggregateSummary, ArmSummary, RegretCurve
from .policies import PolicyKind, parse_policy
from .simulator import DEFAULT_REPLICATIONS, ComparisonReport, PolicyResult, SimulationConfig

__all__ = [
    "AnomalyDataset",
    "ExperimentConfig",
    "generate_anomaly_dataset",
    "regenerate_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "parse_config",
    "load_config",
    "bundled_config_path",
    "write_report",
    "write_curves_csv",
    "write_tables_csv",
    "report_to_dict",
    "report_from_dict",
    "read_report_json",
]

DEFAULT_SAMPLES = 5000


def _fmt(x: float) -> str:
    return repr(float(x))


# -- datasets --------------------------------------------------------------


@dataclass
class AnomalyDataset:
    columns: list[str]
    scores: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnomalyDataset):
            return NotImplemented
        return (
            self.columns == other.columns
            and self.metadata == other.metadata
            and self.scores.shape == other.scores.shape
            and bool(np.array_equal(self.scores, other.scores))
        )


def generate_anomaly_dataset(fleet: Fleet, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> AnomalyDataset:
    """Hourly anomaly scores: column ``i`` is i.i.d. ``clip(Normal(1 - p_i, sigma), 0, 1)``."""
    if not isinstance(fleet.reward_model, ClippedGaussian):
        raise UnsupportedOperationError("anomaly datasets require a clipped_gaussian fleet")
    if isinstance(n_samples, bool) or int(n_samples) != n_samples or n_samples < 1:
        raise ConfigurationError(f"n_samples must be a positive integer, got {n_samples!r}")
    sigma = fleet.reward_model.sigma
    p = fleet.probabilities
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    scores = np.clip(rng.normal(1.0 - p, sigma, (int(n_samples), len(p))), 0.0, 1.0)
    meta = {"seed": int(seed), "sigma": float(sigma), "probabilities": [float(x) for x in p]}
    return AnomalyDataset(fleet.names, scores, meta)


def regenerate_dataset(dataset: AnomalyDataset) -> AnomalyDataset:
    """Rebuild a dataset from its metadata alone."""
    meta = dataset.metadata
    fleet = new_fleet(zip(dataset.columns, meta["probabilities"]), ClippedGaussian(meta["sigma"]))
    return generate_anomaly_dataset(fleet, dataset.n_samples, meta["seed"])


def write_dataset_csv(dataset: AnomalyDataset, path: str | Path) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(dataset.metadata, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["hour", *dataset.columns])
    for hour, row in enumerate(dataset.scores.tolist()):
        writer.writerow([hour, *(_fmt(v) for v in row)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_dataset_csv(path: str | Path) -> AnomalyDataset:
    """Parse a dataset CSV, validating every cell.

    Raises
    ------
    DataError
        On malformed metadata, ragged rows, non-numeric or out-of-range
        cells; messages carry the 1-based line and the column name.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or not lines[0].startswith("# "):
        raise DataError(f"{path}: line 1: missing '# ' metadata line")
    try:
        meta = json.loads(lines[0][2:])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line 1: bad metadata JSON: {exc}") from None
    if not isinstance(meta, dict) or not {"seed", "sigma", "probabilities"} <= meta.keys():
        raise DataError(f"{path}: line 1: metadata needs seed, sigma and probabilities")
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    if not rows or not rows[0] or rows[0][0] != "hour":
        raise DataError(f"{path}: line 2: header must start with 'hour'")
    columns = rows[0][1:]
    if len(columns) != len(meta["probabilities"]):
        raise DataError(
            f"{path}: line 2: header has {len(columns)} VM columns but metadata declares "
            f"{len(meta['probabilities'])} arms"
        )
    data = []
    for lineno, row in enumerate(rows[1:], start=3):
        if len(row) != len(columns) + 1:
            raise DataError(f"{path}: line {lineno}: expected {len(columns) + 1} cells, got {len(row)}")
        if row[0] != str(len(data)):
            raise DataError(f"{path}: line {lineno}, column 'hour': expected {len(data)}, got {row[0]!r}")
        values = []
        for name, cell in zip(columns, row[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {lineno}, column {name!r}: not a number: {cell!r}") from None
            if not (0.0 <= v <= 1.0):
                raise DataError(f"{path}: line {lineno}, column {name!r}: score {cell} outside [0, 1]")
            values.append(v)
        data.append(values)
    if not data:
        raise DataError(f"{path}: no data rows")
    return AnomalyDataset(columns, np.array(data, dtype=float), meta)


# -- configuration ---------------------------------------------------------

_TOP_KEYS = {"fleet", "policy", "policies", "horizon", "replications", "seed"}
_FLEET_KEYS = {"arms", "reward_model", "sigma"}
_ARM_KEYS = {"name", "p"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Contents of a JSON configuration file.

    A file may name one ``policy`` or several ``policies``; use
    :meth:`simulation` to obtain the per-policy :class:`SimulationConfig`.
    """

    fleet: Fleet
    policies: tuple[PolicyKind, ...] = ()
    horizon: int = 500
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0

    def simulation(self, policy: PolicyKind | str | None = None, **overrides) -> SimulationConfig:
        if policy is None:
            if len(self.policies) != 1:
                raise ConfigurationError("configuration must name exactly one policy")
            policy = self.policies[0]
        params = {"horizon": self.horizon, "replications": self.replications, "base_seed": self.seed}
        params.update({k: v for k, v in overrides.items() if v is not None})
        return SimulationConfig(self.fleet, policy, **params)


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigurationError(f"{where}{extra[0]}: unknown key")


def _positive_int(obj: dict, key: str, default: int, minimum: int = 1) -> int:
    v = obj.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigurationError(f"{key}: expected an integer >= {minimum}, got {v!r}")
    return v


def parse_config(data: Any) -> ExperimentConfig:
    """Validate a decoded JSON configuration; errors name the key path."""
    if not isinstance(data, dict):
        raise ConfigurationError("<root>: expected a JSON object")
    _reject_unknown(data, _TOP_KEYS, "")
    fleet_obj = data.get("fleet")
    if not isinstance(fleet_obj, dict):
        raise ConfigurationError("fleet: required object is missing")
    _reject_unknown(fleet_obj, _FLEET_KEYS, "fleet.")
    arms = fleet_obj.get("arms")
    if not isinstance(arms, list) or not arms:
        raise ConfigurationError("fleet.arms: expected a non-empty list")
    pairs = []
    for i, arm in enumerate(arms):
        where = f"fleet.arms[{i}]"
        if not isinstance(arm, dict):
            raise ConfigurationError(f"{where}: expected an object")
        _reject_unknown(arm, _ARM_KEYS, where + ".")
        name = arm.get("name", f"VM{i + 1}")
        if not isinstance(name, str) or not name:
            raise ConfigurationError(f"{where}.name: expected a non-empty string")
        p = arm.get("p")
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not (0.0 <= p <= 1.0):
            raise ConfigurationError(f"{where}.p: expected a probability in [0, 1], got {p!r}")
        pairs.append((name, float(p)))
    model_name = fleet_obj.get("reward_model", "bernoulli")
    if model_name == "bernoulli":
        if "sigma" in fleet_obj:
            raise ConfigurationError("fleet.sigma: only valid with reward_model 'clipped_gaussian'")
        model = Bernoulli()
    elif model_name == "clipped_gaussian":
        sigma = fleet_obj.get("sigma", DEFAULT_SIGMA)
        if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or not (math.isfinite(sigma) and sigma > 0):
            raise ConfigurationError(f"fleet.sigma: expected a positive number, got {sigma!r}")
        model = ClippedGaussian(float(sigma))
    else:
        raise ConfigurationError(f"fleet.reward_model: expected 'bernoulli' or 'clipped_gaussian', got {model_name!r}")

    if "policy" in data and "policies" in data:
        raise ConfigurationError("policy: give either 'policy' or 'policies', not both")
    raw = data.get("policies", [data["policy"]] if "policy" in data else [])
    if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
        raise ConfigurationError("policies: expected a list of specifier strings")
    policies = []
    for i, s in enumerate(raw):
        try:
            policies.append(parse_policy(s))
        except ConfigurationError as exc:
            key = "policy" if "policy" in data else f"policies[{i}]"
            raise ConfigurationError(f"{key}: {exc}") from None
    return ExperimentConfig(
        fleet=new_fleet(pairs, model),
        policies=tuple(policies),
        horizon=_positive_int(data, "horizon", 500),
        replications=_positive_int(data, "replications", DEFAULT_REPLICATIONS),
        seed=_positive_int(data, "seed", 0, minimum=0),
    )


def bundled_config_path(name: str) -> Optional[Path]:
    """Path of a configuration shipped with the package, e.g. ``paper-fleet.json``."""
    candidate = resources.files("vmbandit") / "data" / name
    if candidate.is_file():
        return Path(str(candidate))
    if not name.endswith(".json"):
        return bundled_config_path(name + ".json")
    return None


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a JSON configuration file.

    Falls back to the bundled configurations when ``path`` does not exist
    but names one of them.
    """
    p = Path(path)
    if not p.exists():
        bundled = bundled_config_path(p.name)
        if bundled is None:
            raise ConfigurationError(f"configuration file not found: {path}")
        p = bundled
    text = p.read_text(encoding="utf-8")
    if not text.strip():
        raise ConfigurationError(f"{path}: empty configuration file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(data)


# -- reports ---------------------------------------------------------------


def _curve_to_dict(curve: RegretCurve) -> dict:
    return {
        "mean": curve.mean.tolist(),
        "std": curve.std.tolist(),
        "finals": curve.finals.tolist(),
        "final_min": curve.final_min,
        "final_median": curve.final_median,
        "final_max": curve.final_max,
    }


def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "fleet": report.fleet.to_dict(),
        "fleet_digest": report.fleet_digest,
        "horizon": report.horizon,
        "replications": report.replications,
        "seed": report.base_seed,
        "ranking_definition": report.ranking_definition,
        "ranking": report.ranking,
        "results": [
            {
                "policy": r.policy,
                "config_digest": r.config_digest,
                "final_mean_cum_regret": {d: c.final_mean for d, c in r.summary.curves.items()},
                "allocation_frequency": r.summary.allocation_frequency.tolist(),
                "curves": {d: _curve_to_dict(c) for d, c in r.summary.curves.items()},
            }
            for r in report.results
        ],
    }


def report_from_dict(data: dict) -> ComparisonReport:
    try:
        cfg = parse_config({"fleet": data["fleet"]})
        results = []
        for r in data["results"]:
            curves = {
                d: RegretCurve(d, np.array(c["mean"]), np.array(c["std"]), np.array(c["finals"]))
                for d, c in r["curves"].items()
            }
            summary = AggregateSummary(
                r["config_digest"], data["horizon"], data["replications"], curves, np.array(r["allocation_frequency"])
            )
            results.append(PolicyResult(r["policy"], r["config_digest"], summary))
        return ComparisonReport(
            cfg.fleet, data["horizon"], data["replications"], data["seed"], results, data["ranking_definition"]
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed report: {exc!r}") from None


def read_report_json(path: str | Path) -> ComparisonReport:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    return report_from_dict(data)


def write_curves_csv(report: ComparisonReport, path: str | Path, definitions: Sequence[str] = DEFINITIONS) -> int:
    """Write the curve CSV; returns the number of data rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "policy", "mean_cum_regret", "std_cum_regret", "definition"])
    n = 0
    for d in definitions:
        for r in report.results:
            curve = r.summary[d]
            for t, (m, s) in enumerate(zip(curve.mean.tolist(), curve.std.tolist())):
                writer.writerow([t, r.policy, _fmt(m), _fmt(s), d])
                n += 1
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    return n


def write_tables_csv(summaries: Sequence[ArmSummary], fleet: Fleet, path: str | Path) -> None:
    """Per-arm reward/regret table; arms never pulled get empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "preference_probability", "reward", "regret"])
    for s in summaries:
        arm = fleet.arms[s.arm_id]
        if s.mean_reward is None:
            writer.writerow([arm.name, _fmt(arm.preference_probability), "", ""])
        else:
            writer.writerow([arm.name, _fmt(arm.preference_probability), _fmt(s.mean_reward), _fmt(s.mean_ideal_regret)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def write_report(report: ComparisonReport, path: str | Path, format: str = "json") -> None:
    """Write a report as ``json`` (full structure) or ``csv`` (curves)."""
    if format == "json":
        text = json.dumps(report_to_dict(report), indent=1, sort_keys=True) + "\n"
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    elif format == "csv":
        write_curves_csv(report, path)
    else:
        raise ConfigurationError(f"unknown report format {format!r}; use 'csv' or 'json'")
