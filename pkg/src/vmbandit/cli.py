"""Command-line front end.

Subcommands: ``generate``, ``simulate``, ``compare`` and ``tables``.
Exit codes: 0 success, 1 configuration or usage error, 2 I/O error. Errors
are reported on stderr as a single ``error[<kind>]: <message>`` line.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .datagen_io import (
    DEFAULT_SAMPLES,
    generate_anomaly_dataset,
    load_config,
    write_curves_csv,
    write_dataset_csv,
    write_report,
    write_tables_csv,
)
from .errors import DataError, VmBanditError
from .policies import parse_policy
from .simulator import compare_policies, forced_pull_table

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

POLICY_HELP = (
    "policy specifiers: eps:<epsilon> (epsilon-greedy), epsfirst[:<steps>] (explore first, "
    "default 10% of horizon), ucb1[:<c>] (default c=sqrt 2), thompson[:<a0>:<b0>], random"
)


class UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vmbandit",
        description="Multi-armed-bandit VM allocation simulator.",
        epilog=POLICY_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_default: str):
        p.add_argument("--config", required=True, help="JSON configuration file (or a bundled name such as paper-fleet.json)")
        p.add_argument("--seed", type=int, default=None, help="base seed (default: from config)")
        p.add_argument("--out", default=out_default, help=f"output path (default: {out_default})")

    g = sub.add_parser("generate", help="write a synthetic anomaly-score dataset CSV")
    common(g, "anomaly_scores.csv")
    g.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="hourly samples per VM (default: 5000)")

    for name, help_text, out in (
        ("simulate", "run one policy over replicated episodes", "report.json"),
        ("compare", "compare several policies under common random numbers", "comparison.json"),
    ):
        p = sub.add_parser(name, help=help_text, epilog=POLICY_HELP)
        common(p, out)
        if name == "simulate":
            p.add_argument("--policy", default=None, help="policy specifier (default: from config)")
            p.add_argument("--format", choices=("json", "csv"), default="json", help="report format (default: json)")
        else:
            p.add_argument("--policies", default=None, help="comma-separated policy specifiers (default: from config)")
            p.add_argument("--csv", default=None, help="also write the curve CSV here")
        p.add_argument("--horizon", type=int, default=None, help="steps per episode (default: from config)")
        p.add_argument("--runs", type=int, default=None, help="replications (default: from config, else 100)")
        p.add_argument("--threads", type=int, default=1, help="worker processes; results do not depend on it")

    t = sub.add_parser("tables", help="per-VM mean reward and regret with every VM pulled each step")
    common(t, "tables.csv")
    t.add_argument("--horizon", type=int, default=500, help="forced pulls per VM (default: 500)")
    return parser


def _pick(value, default):
    return default if value is None else value


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    seed = _pick(args.seed, cfg.seed)
    ds = generate_anomaly_dataset(cfg.fleet, args.samples, seed)
    write_dataset_csv(ds, args.out)
    means = " ".join(f"{n}={m:.4f}" for n, m in zip(ds.columns, ds.scores.mean(axis=0)))
    print(f"rows={ds.n_samples} columns={len(ds.columns)} seed={seed} out={args.out}")
    print(f"column means: {means}")
    return EXIT_OK


def _resolve_run(args, cfg):
    horizon = _pick(args.horizon, cfg.horizon)
    runs = _pick(args.runs, cfg.replications)
    seed = _pick(args.seed, cfg.seed)
    return horizon, runs, seed


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.policy is not None:
        policy = parse_policy(args.policy)
    elif len(cfg.policies) == 1:
        policy = cfg.policies[0]
    else:
        raise UsageError("simulate needs --policy (or exactly one policy in the config)", "")
    horizon, runs, seed = _resolve_run(args, cfg)
    report = compare_policies(cfg.fleet, [policy], horizon, runs, seed, workers=args.threads, min_policies=1)
    write_report(report, args.out, args.format)
    res = report.results[0]
    print(f"policy={res.policy} horizon={horizon} runs={runs} seed={seed} out={args.out}")
    for d, curve in res.summary.curves.items():
        print(
            f"final cumulative {d} regret: mean={curve.final_mean:.4f} median={curve.final_median:.4f} "
            f"min={curve.final_min:.4f} max={curve.final_max:.4f}"
        )
    freqs = " ".join(f"{n}={f:.4f}" for n, f in zip(cfg.fleet.names, res.summary.allocation_frequency))
    print(f"allocation frequency: {freqs}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if args.policies is not None:
        policies = [parse_policy(s) for s in args.policies.split(",") if s.strip()]
    else:
        policies = list(cfg.policies)
    horizon, runs, seed = _resolve_run(args, cfg)
    report = compare_policies(cfg.fleet, policies, horizon, runs, seed, workers=args.threads)
    write_report(report, args.out, "json")
    if args.csv:
        write_curves_csv(report, args.csv)
    print(f"horizon={horizon} runs={runs} seed={seed} out={args.out}" + (f" csv={args.csv}" if args.csv else ""))
    width = max(len(r.policy) for r in report.results)
    print(f"{'rank':>4}  {'policy':<{width}}  {'oracle_mean':>12}  {'oracle_median':>13}  {'ideal_mean':>12}")
    for rank, r in enumerate(report.results, start=1):
        o, i = r.summary["oracle"], r.summary["ideal"]
        print(f"{rank:>4}  {r.policy:<{width}}  {o.final_mean:>12.4f}  {o.final_median:>13.4f}  {i.final_mean:>12.4f}")
    return EXIT_OK


def cmd_tables(args) -> int:
    cfg = load_config(args.config)
    seed = _pick(args.seed, cfg.seed)
    rows = forced_pull_table(cfg.fleet, args.horizon, seed)
    write_tables_csv(rows, cfg.fleet, args.out)
    print(f"horizon={args.horizon} seed={seed} out={args.out}")
    print(f"{'name':<6} {'p':>5} {'reward':>10} {'regret':>10}")
    for s in rows:
        arm = cfg.fleet.arms[s.arm_id]
        print(f"{arm.name:<6} {arm.preference_probability:>5} {s.mean_reward:>10.7f} {s.mean_ideal_regret:>10.7f}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "tables": cmd_tables,
}


def _fail(kind: str, message: str) -> None:
    print(f"error[{kind}]: {' '.join(str(message).split())}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1", "")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        _fail("usage", exc)
        return EXIT_CONFIG
    except DataError as exc:
        _fail("data", exc)
        return EXIT_CONFIG
    except (VmBanditError, ValueError) as exc:
        _fail("config", exc)
        return EXIT_CONFIG
    except OSError as exc:
        _fail("io", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
