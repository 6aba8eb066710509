"""Sweep orchestration, metric records, aggregation, and report/DOT output.

Results persist as JSON lines, one record per episode, keyed by
(task, family, variant, n, seed, policy) so interrupted sweeps resume by
skipping cells already on disk.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from statistics import mean
from typing import Iterable, Iterator

from . import engine, tasks, topology
from .policies import PolicySpec, build_policy
from .tasks import TaskKind
from .topology import Family, GraphSpec, Graph, Variant, default_params, mix_seed

STATUS_OK = "ok"
STATUS_POLICY_ERROR = "policy_error"
STATUS_BUDGET_EXCEEDED = "budget_exceeded"

EXCLUDED = "excluded"
DEFAULT_SIZES = (4, 8, 16, 50, 100)


class EmptySampleError(ValueError):
    """Latency statistics need at least one sample."""


@dataclass(frozen=True)
class GraphTemplate:
    """A graph family plus params, instantiated at each sweep size."""

    family: Family
    params: dict = field(default_factory=dict)

    def spec(self, n: int, seed: int) -> GraphSpec:
        params = self.params or default_params(self.family, n)
        return GraphSpec(family=self.family, n=n, seed=seed, params=params)


@dataclass
class SweepSpec:
    """One benchmark sweep: the cross product of tasks, topologies, sizes, seeds."""

    tasks: list[TaskKind]
    families: list[GraphTemplate]
    variants: list[Variant] = field(default_factory=lambda: [Variant.BASE])
    sizes: list[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    seeds_per_cell: int = 5
    policy: PolicySpec = field(default_factory=PolicySpec)
    max_rounds_cap: int = engine.DEFAULT_MAX_ROUNDS_CAP
    out: str | Path = "results.jsonl"
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if list(self.sizes) != sorted(set(self.sizes)):
            raise ValueError(f"sizes must be strictly increasing, got {self.sizes}")
        if self.seeds_per_cell < 1:
            raise ValueError(f"seeds_per_cell must be >= 1, got {self.seeds_per_cell}")
        if self.max_rounds_cap < 1:
            raise ValueError(f"max_rounds_cap must be >= 1, got {self.max_rounds_cap}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


CellKey = tuple[str, str, str, int, int, str]


@dataclass
class RunRecord:
    """One episode's metric row, the unit of persistence and aggregation."""

    task: str
    family: str
    variant: str
    n: int
    seed: int
    policy: str
    status: str
    success: bool
    graded: float
    budget_T: int
    early_stabilization: int
    tokens_prompt: int
    tokens_completion: int
    tokens_total: int
    tokens_estimated: bool
    wall_time: float
    timestamp: float

    def __post_init__(self) -> None:
        if self.tokens_total != self.tokens_prompt + self.tokens_completion:
            raise ValueError("tokens_total must equal tokens_prompt + tokens_completion")
        if self.status != STATUS_OK and self.success:
            raise ValueError(f"status {self.status!r} cannot be a success")

    @property
    def key(self) -> CellKey:
        return (self.task, self.family, self.variant, self.n, self.seed, self.policy)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


def run_cell(
    task: TaskKind,
    template: GraphTemplate,
    variant: Variant,
    n: int,
    seed: int,
    policy_spec: PolicySpec,
    max_rounds_cap: int = engine.DEFAULT_MAX_ROUNDS_CAP,
) -> RunRecord:
    """Generate, rewrite, budget, run, and score one episode."""
    base = topology.generate(template.spec(n, seed))
    g = topology.rewrite(base, variant)
    budget = topology.round_budget(g, task)
    common = dict(
        task=task.value,
        family=template.family.value,
        variant=variant.value,
        n=n,
        seed=seed,
        policy=policy_spec.describe(),
        budget_T=budget.T,
        timestamp=time.time(),
    )
    if budget.T > max_rounds_cap:
        return RunRecord(
            status=STATUS_BUDGET_EXCEEDED,
            success=False,
            graded=0.0,
            early_stabilization=0,
            tokens_prompt=0,
            tokens_completion=0,
            tokens_total=0,
            tokens_estimated=False,
            wall_time=0.0,
            **common,
        )
    policy = build_policy(policy_spec, task)
    episode_seed = mix_seed(seed, "episode", task.value)
    start = time.perf_counter()
    try:
        result = engine.run_episode(
            g, task, policy, budget, episode_seed, max_rounds_cap=max_rounds_cap
        )
    except engine.PolicyError:
        return RunRecord(
            status=STATUS_POLICY_ERROR,
            success=False,
            graded=0.0,
            early_stabilization=0,
            tokens_prompt=0,
            tokens_completion=0,
            tokens_total=0,
            tokens_estimated=False,
            wall_time=time.perf_counter() - start,
            **common,
        )
    wall = time.perf_counter() - start
    sc = tasks.score(task, g, result.final_answers)
    total = engine.TokenUsage()
    for usage in result.per_agent_tokens:
        total = total + usage
    return RunRecord(
        status=STATUS_OK,
        success=sc.success,
        graded=sc.graded,
        early_stabilization=result.early_stabilization,
        tokens_prompt=total.prompt,
        tokens_completion=total.completion,
        tokens_total=total.total,
        tokens_estimated=total.estimated,
        wall_time=wall,
        **common,
    )


def iter_cells(spec: SweepSpec) -> Iterator[tuple[TaskKind, GraphTemplate, Variant, int, int]]:
    for task in spec.tasks:
        for template in spec.families:
            for variant in spec.variants:
                for n in spec.sizes:
                    for seed in range(spec.seeds_per_cell):
                        yield task, template, variant, n, seed


def load_records(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                records.append(RunRecord.from_json(line))
    return records


def sweep(spec: SweepSpec) -> list[RunRecord]:
    """Run every cell of the sweep, appending records to spec.out.

    Cells whose key is already present in the output file are skipped, so a
    killed sweep resumes where it stopped. Episodes may run concurrently;
    records are written in deterministic cell order by a single writer.
    """
    out = Path(spec.out)
    existing: set[CellKey] = set()
    if out.exists():
        existing = {rec.key for rec in load_records(out)}
    policy_name = spec.policy.describe()
    todo = [
        cell
        for cell in iter_cells(spec)
        if (cell[0].value, cell[1].family.value, cell[2].value, cell[3], cell[4], policy_name)
        not in existing
    ]

    def run_one(cell: tuple) -> RunRecord:
        task, template, variant, n, seed = cell
        return run_cell(task, template, variant, n, seed, spec.policy, spec.max_rounds_cap)

    new_records: list[RunRecord] = []
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "a", encoding="utf-8") as fp:
        if spec.workers == 1:
            results: Iterable[RunRecord] = map(run_one, todo)
            for rec in results:
                fp.write(rec.to_json() + "\n")
                fp.flush()
                new_records.append(rec)
        else:
            with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                for rec in pool.map(run_one, todo):
                    fp.write(rec.to_json() + "\n")
                    fp.flush()
                    new_records.append(rec)
    return new_records


@dataclass(frozen=True)
class CellStats:
    """Aggregated metrics for one (task, topology, n) cell."""

    success_rate: float | str
    rounds: int | str
    tokens_k: int | str
    runtime: float | str
    count: int


def topology_label(record: RunRecord) -> str:
    """Column grouping: the family for base graphs, the rewrite kind otherwise."""
    return record.family if record.variant == Variant.BASE.value else record.variant


def aggregate(records: Iterable[RunRecord]) -> dict[tuple[str, str, int], CellStats]:
    """Reduce records to per-cell means.

    Matching aggregates its graded score; the binary tasks average success.
    Token cost is the per-cell mean total, in thousands. Cells where every
    run blew the round cap collapse to the "excluded" sentinel.
    """
    deduped: dict[CellKey, RunRecord] = {}
    for rec in records:
        deduped.setdefault(rec.key, rec)
    if not deduped:
        raise ValueError("no records to aggregate")
    groups: dict[tuple[str, str, int], list[RunRecord]] = {}
    for rec in deduped.values():
        groups.setdefault((rec.task, topology_label(rec), rec.n), []).append(rec)
    table: dict[tuple[str, str, int], CellStats] = {}
    for cell, recs in groups.items():
        included = [r for r in recs if r.status != STATUS_BUDGET_EXCEEDED]
        if not included:
            table[cell] = CellStats(EXCLUDED, EXCLUDED, EXCLUDED, EXCLUDED, len(recs))
            continue
        task = TaskKind.parse(cell[0])
        if task is TaskKind.MATCHING:
            rate = mean(r.graded for r in included)
        else:
            rate = mean(1.0 if r.success else 0.0 for r in included)
        table[cell] = CellStats(
            success_rate=round(rate, 4),
            rounds=max(r.budget_T for r in included),
            tokens_k=round(mean(r.tokens_total for r in included) / 1000),
            runtime=round(mean(r.wall_time for r in included), 3),
            count=len(recs),
        )
    return table


_METRIC_ROWS = (
    ("Success Rate", "success_rate"),
    ("Rounds", "rounds"),
    ("Token Cost (x1000)", "tokens_k"),
    ("Runtime (sec)", "runtime"),
)


def format_report(table: dict[tuple[str, str, int], CellStats]) -> str:
    """Text table: per task, one row per metric, columns grouped by topology and n."""
    tasks_seen = sorted({cell[0] for cell in table})
    labels = sorted({cell[1] for cell in table})
    sizes = sorted({cell[2] for cell in table})
    columns = [(label, n) for label in labels for n in sizes]
    header = ["task", "metric"] + [f"{label}/n={n}" for label, n in columns]
    rows = [header]
    for task in tasks_seen:
        for title, attr in _METRIC_ROWS:
            row = [task, title]
            for label, n in columns:
                stats = table.get((task, label, n))
                row.append("-" if stats is None else str(getattr(stats, attr)))
            rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OutputSizeStats:
    min: int
    max: int
    mean: float
    total: int


@dataclass(frozen=True)
class LatencyStats:
    """Trial-level latency and throughput summary."""

    p50: float
    p95: float
    throughput: float
    count: int
    output_size_stats: OutputSizeStats | None = None

    def __post_init__(self) -> None:
        if self.p50 > self.p95:
            raise ValueError("p50 cannot exceed p95")


def nearest_rank(sorted_samples: list[float], q: float) -> float:
    """Percentile as the sorted sample at 1-indexed rank ceil(q * count)."""
    rank = max(math.ceil(q * len(sorted_samples)), 1)
    return sorted_samples[rank - 1]


def latency_stats(
    samples: list[float],
    total_elapsed: float,
    outputs: list[int] | None = None,
) -> LatencyStats:
    """p50/p95 latency (nearest-rank), throughput, and output-size summary."""
    if not samples:
        raise EmptySampleError("latency_stats needs at least one sample")
    if total_elapsed <= 0:
        raise ValueError(f"total_elapsed must be positive, got {total_elapsed}")
    ordered = sorted(samples)
    size_stats = None
    if outputs:
        size_stats = OutputSizeStats(
            min=min(outputs), max=max(outputs), mean=mean(outputs), total=sum(outputs)
        )
    return LatencyStats(
        p50=nearest_rank(ordered, 0.5),
        p95=nearest_rank(ordered, 0.95),
        throughput=len(samples) / total_elapsed,
        count=len(samples),
        output_size_stats=size_stats,
    )


def export_dot(g: Graph, score: tasks.TaskScore) -> str:
    """Undirected DOT graph with node fills and edge colors from the score.

    Node and edge ordering is fixed so output is byte-identical across runs.
    """
    lines = ["graph episode {", "  node [shape=circle, style=filled];"]
    for u in range(g.n):
        color = score.node_classes.get(u, tasks.GRAY)
        lines.append(f'  {u} [fillcolor="{color}"];')
    for u, v in g.edges:
        color = score.edge_classes.get((u, v), tasks.GRAY)
        lines.append(f'  {u} -- {v} [color="{color}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
