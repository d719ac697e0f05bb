"""Command-line harness: validate, oracle, train, evaluate, sweep, export-builtin.

Exit codes: 0 ok, 1 validation failure, 2 usage or parse error, 3 no attack
path, 4 state budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .agent import AgentConfig, config_dict, config_from_dict, desk_config, stats_csv, train_agent
from .env import ActionKind
from .metrics import evaluate_configuration
from .nn import save_checkpoint
from .oracle import DEFAULT_MAX_STATES, StateBudgetExceeded, shortest_attack_path
from .scenario import (
    CyberScenario,
    ParseError,
    ValidationError,
    builtin_scenario,
    dump_scenario,
    load_scenario_file,
    preadded_count,
    validate,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_NO_PATH, EXIT_BUDGET = 0, 1, 2, 3, 4
OUT_ENV = "CYBERWEAK_OUT"


class UsageError(Exception):
    pass


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "cyberweak-out")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(args: argparse.Namespace) -> CyberScenario:
    """Scenario from ``--builtin P`` or a positional path; raises on bad input."""
    if args.builtin is not None:
        if args.path:
            raise UsageError("give either a scenario file or --builtin, not both")
        try:
            return builtin_scenario(args.builtin, args.subset_seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if not args.path:
        raise UsageError("a scenario file or --builtin P is required")
    return load_scenario_file(args.path)


def _load_or_exit(args: argparse.Namespace) -> CyberScenario | int:
    try:
        return _load(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except OSError as exc:
        _err(f"cannot read {args.path}: {exc.strerror or exc}")
        return EXIT_USAGE
    except ParseError as exc:
        _err(f"{args.path}: {exc}")
        return EXIT_USAGE
    except ValidationError as exc:
        for v in exc.violations:
            print(v)
        return EXIT_INVALID


def _load_config(args: argparse.Namespace) -> AgentConfig:
    base = desk_config()
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load config {args.config}: {exc}") from exc
        if not isinstance(values, dict):
            raise UsageError("config file must hold a JSON object")
    if getattr(args, "episodes", None) is not None:
        values["episodes"] = args.episodes
    try:
        return config_from_dict(values, base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _describe(s: CyberScenario, args: argparse.Namespace) -> dict:
    if args.builtin is not None:
        return {"builtin": args.builtin, "subset_seed": args.subset_seed, "preadded_policies": preadded_count(s)}
    return {"path": str(args.path), "preadded_policies": preadded_count(s) if s.key_policies else None}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    loaded = _load_or_exit(args)
    if isinstance(loaded, int):
        return loaded
    violations = validate(loaded)
    for v in violations:
        print(v)
    if violations:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    loaded = _load_or_exit(args)
    if isinstance(loaded, int):
        return loaded
    try:
        path = shortest_attack_path(loaded, args.max_states)
    except StateBudgetExceeded as exc:
        _err(str(exc))
        return EXIT_BUDGET
    if path is None:
        print("no attack path")
        return EXIT_NO_PATH
    print(f"length {path.length}")
    for n, a in enumerate(path.actions, start=1):
        extra = f"  [{loaded.addable_rules[a.target]}]" if a.kind == ActionKind.ADD_ACL else ""
        print(f"{n:3d}. {a}{extra}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    loaded = _load_or_exit(args)
    if isinstance(loaded, int):
        return loaded
    try:
        config = _load_config(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = _out_dir(args)
    result = train_agent(loaded, config, args.seed)
    (out / "stats.csv").write_text(stats_csv(result.stats), encoding="utf-8")
    save_checkpoint(str(out / "checkpoint.bin"), result.checkpoint())
    manifest = {
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": args.seed,
        "scenario": _describe(loaded, args),
        "scenario_sha256": hashlib.sha256(dump_scenario(loaded).encode("utf-8")).hexdigest(),
        "config": config_dict(config),
        "summary": result.stats.summary(),
        "files": ["stats.csv", "checkpoint.bin"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    summary = result.stats.summary()
    print(f"episodes {summary['episodes']} successes {summary['successes']} best_length {summary['best_length']}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    loaded = _load_or_exit(args)
    if isinstance(loaded, int):
        return loaded
    try:
        config = _load_config(args) if args.mode == "rl" else None
        if args.n < 1:
            raise UsageError("--n must be at least 1")
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        report = evaluate_configuration(loaded, args.n, args.mode, config, args.seed, max_states=args.max_states)
    except StateBudgetExceeded as exc:
        _err(str(exc))
        return EXIT_BUDGET
    text = report.to_csv()
    if args.out:
        out = _out_dir(args)
        (out / "weakness.csv").write_text(text, encoding="utf-8")
        (out / "weakness.json").write_text(json.dumps(report.to_document(), indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _parse_policies(text: str) -> list[int]:
    try:
        values = sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError as exc:
        raise UsageError(f"--policies must be comma-separated integers, got {text!r}") from exc
    if not values or any(not 0 <= v <= 3 for v in values):
        raise UsageError("--policies values must lie in 0..3")
    return values


def sweep_rows(policies: list[int], runs: int, seed: int, mode: str,
               config: AgentConfig | None = None, max_states: int = DEFAULT_MAX_STATES) -> list[list]:
    """Rows ``p, run, length, sec`` followed by one ``p, mean, ...`` row per p.

    Run ``r`` for policy count ``p`` uses the pre-added subset drawn with seed
    ``seed + r`` and, in rl mode, trains with that same seed.
    """
    rows: list[list] = []
    for p in policies:
        lengths, secs = [], []
        for r in range(runs):
            s = builtin_scenario(p, seed + r)
            report = evaluate_configuration(s, 1, mode, config, seed + r, max_states=max_states)
            length = report.records[0].length
            lengths.append(length)
            secs.append(report.sec_value)
            rows.append([p, r, length, f"{report.sec_value:g}"])
        rows.append([p, "mean", f"{sum(lengths) / runs:g}", f"{sum(secs) / runs:g}"])
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        policies = _parse_policies(args.policies)
        if args.runs < 1:
            raise UsageError("--runs must be at least 1")
        config = _load_config(args) if args.mode == "rl" else None
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        rows = sweep_rows(policies, args.runs, args.seed, args.mode, config, args.max_states)
    except StateBudgetExceeded as exc:
        _err(str(exc))
        return EXIT_BUDGET
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "run", "length", "sec"])
    w.writerows(rows)
    out = _out_dir(args)
    (out / f"sweep_{args.mode}.csv").write_text(buf.getvalue(), encoding="utf-8")
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_export_builtin(args: argparse.Namespace) -> int:
    try:
        s = builtin_scenario(args.policies, args.subset_seed)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    text = dump_scenario(s)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("path", nargs="?", help="scenario JSON file")
    p.add_argument("--builtin", type=int, metavar="P", help="built-in scenario with P pre-added key policies")
    p.add_argument("--subset-seed", type=int, default=0, help="seed choosing which key policies are pre-added")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyberweak", description="Cyberspace configuration weakness analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    _scenario_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="exact shortest attack path")
    _scenario_args(p)
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("train", help="train a DDPG attacker")
    _scenario_args(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON object of agent settings")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./cyberweak-out)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="weakness score of one configuration")
    _scenario_args(p)
    p.add_argument("--n", type=int, default=60, help="number of attackers")
    p.add_argument("--mode", choices=("oracle", "rl"), default="oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int)
    p.add_argument("--config")
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="attack path length against pre-added key policies")
    p.add_argument("--policies", default="0,1,2,3")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("oracle", "rl"), default="oracle")
    p.add_argument("--episodes", type=int)
    p.add_argument("--config")
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-builtin", help="write the built-in scenario as JSON")
    p.add_argument("--policies", type=int, default=0)
    p.add_argument("--subset-seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_builtin)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
