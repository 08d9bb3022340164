from __future__ import annotations

import argparse
import asyncio
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from .campaign import DEFAULT_RUNS, DEFAULT_VALUE_DOMAIN, run_campaign, summarize
from .checker import evaluate
from .config import ConfigError, load_config, load_env_file, lookup, merge_config
from .files import emit_report
from .model import InvalidConfigError, Protocol, SystemConfig, validate_config
from .oracle import DEFAULT_BOUND, DEFAULT_MAX_STEPS, OracleRefusal, oracle_enumerate
from .progress import progress_bar
from .scenarios import ScenarioError, async_partition_lower_bound, partition_lower_bound, run_scenario
from .schemas import FORMATS, TEXT, CampaignReport, OracleReport, RunReport, ScenarioFile, load_scenario, render
from .shm_engine import DEFAULT_STEP_BUDGET, SchedulerError
from .sync_engine import AdversaryError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}
DEFAULT_LOG_LEVEL = "quiet"
DEFAULT_ROUND_SLACK = 1
DEFAULT_LOG_PREVIEW = 40

PROTOCOLS = [protocol.value for protocol in Protocol]
ORACLE_TRB = "trb"

USAGE_ERRORS = (
    ScenarioError,
    ConfigError,
    InvalidConfigError,
    AdversaryError,
    SchedulerError,
    OracleRefusal,
)


@dataclass(frozen=True)
class Settings:
    command: str
    fmt: str
    out: Optional[Path]
    seed: int
    log_level: str
    replay_seed: Optional[int] = None
    scenario: Optional[Path] = None
    protocol: Optional[str] = None
    n: int = 0
    t: int = 0
    variant: Optional[str] = None
    runs: int = DEFAULT_RUNS
    concurrency: int = 4
    value_domain: int = DEFAULT_VALUE_DOMAIN
    bound: int = DEFAULT_BOUND
    max_steps: int = DEFAULT_MAX_STEPS
    round_slack: int = DEFAULT_ROUND_SLACK
    step_budget: int = DEFAULT_STEP_BUDGET
    log_preview: int = DEFAULT_LOG_PREVIEW
    progress: bool = False


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the verb from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to a configuration file", default=argparse.SUPPRESS)
    common.add_argument("--env-file", help="Path to a .env file", default=argparse.SUPPRESS)
    common.add_argument(
        "--log-level", choices=sorted(LOG_LEVELS), help="quiet, info or trace", default=argparse.SUPPRESS
    )
    common.add_argument("--format", choices=FORMATS, help="Report format", default=argparse.SUPPRESS)
    common.add_argument("--out", help="Write the report to this file instead of stdout", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="Campaign seed; for run, replaces the scenario seed", default=argparse.SUPPRESS)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(
        prog="ksetlab",
        description="ksetlab – simulate and check k-set agreement protocols",
        parents=[common],
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", parents=[common], help="Run a scenario file and check every property")
    run_cmd.add_argument("scenario", help="Scenario file (YAML or JSON)")

    fuzz_cmd = commands.add_parser("fuzz", parents=[common], help="Run a seeded fuzz campaign")
    fuzz_cmd.add_argument("protocol", choices=PROTOCOLS)
    fuzz_cmd.add_argument("n", type=int)
    fuzz_cmd.add_argument("t", type=int)
    fuzz_cmd.add_argument("--runs", type=int, help="Number of runs", default=None)
    fuzz_cmd.add_argument("--concurrency", type=int, help="Number of worker tasks", default=None)

    oracle_cmd = commands.add_parser("oracle", parents=[common], help="Exhaustively check a small instance")
    oracle_cmd.add_argument("protocol", choices=[*PROTOCOLS, ORACLE_TRB])
    oracle_cmd.add_argument("n", type=int)
    oracle_cmd.add_argument("t", type=int)
    oracle_cmd.add_argument("--bound", type=int, help="Refuse spaces with more runs than this", default=None)

    bound_cmd = commands.add_parser(
        "lower-bound", parents=[common], help="Print a lower-bound witness scenario"
    )
    bound_cmd.add_argument("variant", choices=["sync", "async"])
    bound_cmd.add_argument("n", type=int)
    bound_cmd.add_argument("t", type=int)
    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> Settings:
    parser = build_parser()
    args = parser.parse_args(argv)

    load_env_file(getattr(args, "env_file", None))
    config_data = load_config(getattr(args, "config", None))

    cli_overrides: Dict[str, Any] = {}
    for key in ("format", "out", "log_level"):
        value = getattr(args, key, None)
        if value is not None:
            cli_overrides[key] = value
    if getattr(args, "runs", None) is not None:
        cli_overrides.setdefault("fuzz", {})["runs"] = args.runs
    if getattr(args, "concurrency", None) is not None:
        cli_overrides.setdefault("fuzz", {})["concurrency"] = args.concurrency
    if getattr(args, "bound", None) is not None:
        cli_overrides.setdefault("oracle", {})["bound"] = args.bound
    merged = merge_config(config_data, cli_overrides)

    def number(key: str, env: Optional[str], default: Optional[int], minimum: int = 0) -> Optional[int]:
        raw = lookup(merged, key)
        if raw is None and env:
            raw = os.environ.get(env) or None
        if raw is None:
            return default
        try:
            value = int(raw)
        except (TypeError, ValueError):
            parser.error(f"{key} must be an integer, got {raw!r}")
        if value < minimum:
            parser.error(f"{key} must be >= {minimum}")
        return value

    fmt = str(lookup(merged, "format") or TEXT)
    if fmt not in FORMATS:
        parser.error(f"format must be one of {', '.join(FORMATS)}")

    log_level = str(lookup(merged, "log_level") or os.environ.get("KSA_LOG_LEVEL") or DEFAULT_LOG_LEVEL).lower()
    if log_level not in LOG_LEVELS:
        parser.error(f"log level must be one of {', '.join(sorted(LOG_LEVELS))}, got {log_level!r}")

    out_value = lookup(merged, "out")
    out = Path(out_value).expanduser() if out_value else None

    # a scenario keeps its own seed unless --seed is given; the configured seed drives campaigns
    replay_seed: Optional[int] = getattr(args, "seed", None)
    seed = replay_seed
    if seed is None:
        seed = number("fuzz.seed", None, None)
    if seed is None:
        seed = number("seed", "KSA_SEED", 0)

    default_concurrency = min(8, max(2, os.cpu_count() or 4))
    return Settings(
        command=args.command,
        fmt=fmt,
        out=out,
        seed=seed,
        log_level=log_level,
        replay_seed=replay_seed,
        scenario=Path(args.scenario) if getattr(args, "scenario", None) else None,
        protocol=getattr(args, "protocol", None),
        n=getattr(args, "n", 0),
        t=getattr(args, "t", 0),
        variant=getattr(args, "variant", None),
        runs=number("fuzz.runs", "KSA_FUZZ_RUNS", DEFAULT_RUNS),
        concurrency=number("fuzz.concurrency", "KSA_CONCURRENCY", default_concurrency, minimum=1),
        value_domain=number("fuzz.value_domain", None, DEFAULT_VALUE_DOMAIN, minimum=1),
        bound=number("oracle.bound", "KSA_ORACLE_BOUND", DEFAULT_BOUND, minimum=1),
        max_steps=number("oracle.max_steps", None, DEFAULT_MAX_STEPS, minimum=1),
        round_slack=number("engine.round_slack", None, DEFAULT_ROUND_SLACK),
        step_budget=number("engine.step_budget", None, DEFAULT_STEP_BUDGET, minimum=1),
        log_preview=number("report.log_preview", None, DEFAULT_LOG_PREVIEW),
        progress=sys.stderr.isatty(),
    )  # type: ignore[arg-type]


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def cmd_run(settings: Settings) -> int:
    assert settings.scenario is not None
    scenario = load_scenario(settings.scenario)
    record = run_scenario(
        scenario, settings.replay_seed, round_slack=settings.round_slack, step_budget=settings.step_budget
    )
    verdicts = evaluate(record, scenario.expected)
    report = RunReport.from_record(scenario, record, verdicts, log_preview=settings.log_preview)
    emit_report(render(report, settings.fmt), settings.out)
    if not report.passed:
        failed = ", ".join(verdict.name for verdict in verdicts if not verdict.passed)
        print(f"Violated: {failed}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_fuzz(settings: Settings) -> int:
    protocol = Protocol(settings.protocol)
    validate_config(SystemConfig(settings.n, settings.t, protocol))
    seed = settings.seed
    bar = progress_bar(settings.runs, f"fuzz {protocol.value}", enabled=settings.progress)
    try:
        outcomes = asyncio.run(
            run_campaign(
                protocol,
                settings.n,
                settings.t,
                settings.runs,
                seed,
                concurrency=settings.concurrency,
                value_domain=settings.value_domain,
                round_slack=settings.round_slack,
                step_budget=settings.step_budget,
                progress=bar,
            )
        )
    finally:
        bar.close()
    summary = summarize(protocol, settings.n, settings.t, seed, outcomes)
    emit_report(render(CampaignReport.from_summary(summary), settings.fmt), settings.out)
    return EXIT_OK if summary.passed else EXIT_VIOLATION


def cmd_oracle(settings: Settings) -> int:
    if settings.protocol == ORACLE_TRB:
        cfg = SystemConfig(settings.n, settings.t, Protocol.TRB_OPTIMAL)
        space: Optional[str] = ORACLE_TRB
    else:
        cfg = SystemConfig(settings.n, settings.t, Protocol(settings.protocol))
        space = None
    summary = oracle_enumerate(cfg, space, bound=settings.bound, max_steps=settings.max_steps)
    emit_report(render(OracleReport.from_summary(summary), settings.fmt), settings.out)
    return EXIT_OK if summary.passed else EXIT_VIOLATION


def cmd_lower_bound(settings: Settings) -> int:
    build = partition_lower_bound if settings.variant == "sync" else async_partition_lower_bound
    scenario = build(settings.n, settings.t)
    emit_report(render(ScenarioFile.from_scenario(scenario), settings.fmt), settings.out)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Settings], int]] = {
    "run": cmd_run,
    "fuzz": cmd_fuzz,
    "oracle": cmd_oracle,
    "lower-bound": cmd_lower_bound,
}


def run(settings: Settings) -> int:
    try:
        return COMMANDS[settings.command](settings)
    except OracleRefusal as exc:
        print(f"Refused: {exc} (estimated {exc.estimate} runs)", file=sys.stderr)
        return EXIT_USAGE
    except USAGE_ERRORS as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    try:
        settings = parse_arguments(argv)
    except ConfigError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    configure_logging(settings.log_level)
    log.debug("settings: %s", settings)
    return run(settings)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
