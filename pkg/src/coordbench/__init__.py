"""coordbench: topology-aware multi-agent coordination simulator and benchmark harness."""

from .engine import (
    AgentAction,
    AgentView,
    BudgetExceededError,
    EpisodeResult,
    Message,
    PolicyError,
    TokenUsage,
    check_stabilization,
    run_episode,
)
from .policies import LlmConfig, Policy, PolicySpec, build_policy, scripted_policy
from .runner import (
    GraphTemplate,
    LatencyStats,
    RunRecord,
    SweepSpec,
    aggregate,
    export_dot,
    latency_stats,
    run_cell,
    sweep,
)
from .tasks import INVALID, NO_ANSWER, TaskKind, TaskScore, parse_answer, score
from .topology import (
    Family,
    Graph,
    GraphSpec,
    RoundBudget,
    Variant,
    diameter,
    generate,
    rewrite,
    round_budget,
)

__version__ = "0.1.0"

__all__ = [
    "AgentAction",
    "AgentView",
    "BudgetExceededError",
    "EpisodeResult",
    "Family",
    "Graph",
    "GraphSpec",
    "GraphTemplate",
    "INVALID",
    "LatencyStats",
    "LlmConfig",
    "Message",
    "NO_ANSWER",
    "Policy",
    "PolicyError",
    "PolicySpec",
    "RoundBudget",
    "RunRecord",
    "SweepSpec",
    "TaskKind",
    "TaskScore",
    "TokenUsage",
    "Variant",
    "aggregate",
    "build_policy",
    "check_stabilization",
    "diameter",
    "export_dot",
    "generate",
    "latency_stats",
    "parse_answer",
    "rewrite",
    "round_budget",
    "run_cell",
    "run_episode",
    "score",
    "scripted_policy",
    "sweep",
]
