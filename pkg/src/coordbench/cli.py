"""Command-line entry point: gen, run, sweep, report, viz."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import engine, runner, tasks, topology
from .policies import LlmConfig, PolicySpec, build_policy
from .runner import GraphTemplate, SweepSpec
from .tasks import TaskKind
from .topology import Family, GraphSpec, Variant


class ConfigError(Exception):
    """Malformed or missing configuration; maps to exit code 2."""


def _parse_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"bad --param {pair!r}, expected key=value")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fp:
            data = yaml.safe_load(fp)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def policy_from_config(data: dict) -> PolicySpec:
    section = data.get("policy", {}) or {}
    kind = section.get("kind", "scripted")
    llm = None
    if kind == "llm":
        llm_section = section.get("llm")
        if not isinstance(llm_section, dict):
            raise ConfigError("llm policy requires a policy.llm section")
        try:
            llm = LlmConfig(**llm_section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad policy.llm section: {exc}") from exc
    try:
        return PolicySpec(kind=kind, llm=llm, rng_seed=section.get("rng_seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _template_from_entry(entry) -> GraphTemplate:
    if isinstance(entry, str):
        return GraphTemplate(family=Family.parse(entry))
    if isinstance(entry, dict) and "family" in entry:
        return GraphTemplate(
            family=Family.parse(entry["family"]), params=entry.get("params", {}) or {}
        )
    raise ConfigError(f"bad family entry: {entry!r}")


def sweep_from_config(data: dict, out_override: str | None = None) -> SweepSpec:
    section = data.get("sweep")
    if not isinstance(section, dict):
        raise ConfigError("config needs a 'sweep' section")
    try:
        spec = SweepSpec(
            tasks=[TaskKind.parse(t) for t in section.get("tasks", [])],
            families=[_template_from_entry(f) for f in section.get("families", [])],
            variants=[Variant.parse(v) for v in section.get("variants", ["base"])],
            sizes=list(section.get("sizes", runner.DEFAULT_SIZES)),
            seeds_per_cell=section.get("seeds_per_cell", 5),
            policy=policy_from_config(data),
            max_rounds_cap=section.get("max_rounds_cap", engine.DEFAULT_MAX_ROUNDS_CAP),
            out=out_override or section.get("out", "results.jsonl"),
            workers=section.get("workers", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not spec.tasks:
        raise ConfigError("sweep.tasks must list at least one task")
    if not spec.families:
        raise ConfigError("sweep.families must list at least one family")
    return spec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coordbench",
        description="Topology-aware multi-agent coordination benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a graph and write its edge list")
    gen.add_argument("--family", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--variant", default="base")
    gen.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    gen.add_argument("--out", help="output path (default: stdout)")

    run = sub.add_parser("run", help="run one episode and print its record")
    _add_episode_args(run)
    run.add_argument("--out", help="append the record to this JSONL file")

    swp = sub.add_parser("sweep", help="execute a sweep described by a config file")
    swp.add_argument("--config", required=True)
    swp.add_argument("--out", help="override the output path from the config")

    rep = sub.add_parser("report", help="aggregate a results file into a table")
    rep.add_argument("results", help="JSONL results file")
    rep.add_argument("--out", help="write the table here instead of stdout")

    viz = sub.add_parser("viz", help="run one episode and emit a decorated DOT graph")
    _add_episode_args(viz)
    viz.add_argument("--out", help="output path (default: stdout)")

    return parser


def _add_episode_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--task", required=True)
    sub.add_argument("--family", required=True)
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--variant", default="base")
    sub.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    sub.add_argument("--policy", choices=["scripted", "llm"], default="scripted")
    sub.add_argument("--config", help="config file (required for --policy llm)")
    sub.add_argument(
        "--max-rounds-cap", type=int, default=engine.DEFAULT_MAX_ROUNDS_CAP
    )


def _episode_policy(args) -> PolicySpec:
    if args.policy == "llm":
        if not args.config:
            raise ConfigError("--policy llm requires --config with a policy.llm section")
        return policy_from_config(load_config(args.config))
    return PolicySpec()


def _cmd_gen(args) -> int:
    spec = GraphSpec(
        family=Family.parse(args.family),
        n=args.n,
        seed=args.seed,
        params=_parse_params(args.param),
    )
    g = topology.rewrite(topology.generate(spec), Variant.parse(args.variant))
    if args.out:
        topology.save_edgelist(g, args.out)
    else:
        topology.write_edgelist(g, sys.stdout)
    return 0


def _run_episode_record(args) -> runner.RunRecord:
    task = TaskKind.parse(args.task)
    template = GraphTemplate(family=Family.parse(args.family), params=_parse_params(args.param))
    return runner.run_cell(
        task,
        template,
        Variant.parse(args.variant),
        args.n,
        args.seed,
        _episode_policy(args),
        max_rounds_cap=args.max_rounds_cap,
    )


def _cmd_run(args) -> int:
    record = _run_episode_record(args)
    line = record.to_json()
    print(line)
    if args.out:
        with open(args.out, "a", encoding="utf-8") as fp:
            fp.write(line + "\n")
    return 0


def _cmd_sweep(args) -> int:
    spec = sweep_from_config(load_config(args.config), out_override=args.out)
    new_records = runner.sweep(spec)
    print(f"wrote {len(new_records)} new records to {spec.out}")
    return 0


def _cmd_report(args) -> int:
    path = Path(args.results)
    if not path.exists():
        raise ConfigError(f"results file not found: {path}")
    records = runner.load_records(path)
    if not records:
        raise ConfigError(f"results file is empty: {path}")
    text = runner.format_report(runner.aggregate(records))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_viz(args) -> int:
    task = TaskKind.parse(args.task)
    template = GraphTemplate(family=Family.parse(args.family), params=_parse_params(args.param))
    base = topology.generate(template.spec(args.n, args.seed))
    g = topology.rewrite(base, Variant.parse(args.variant))
    budget = topology.round_budget(g, task)
    if budget.T > args.max_rounds_cap:
        raise ConfigError(
            f"budget T={budget.T} exceeds cap {args.max_rounds_cap}; nothing to draw"
        )
    policy = build_policy(_episode_policy(args), task)
    episode_seed = topology.mix_seed(args.seed, "episode", task.value)
    result = engine.run_episode(
        g, task, policy, budget, episode_seed, max_rounds_cap=args.max_rounds_cap
    )
    dot = runner.export_dot(g, tasks.score(task, g, result.final_answers))
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "viz": _cmd_viz,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (topology.ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
