"""Synchronous round-based episode execution.

Every round each agent sees only messages sent to it in the previous round,
produces per-neighbor messages plus a current answer, and all actions take
effect simultaneously. Actions are applied in ascending agent-ID order so a
transcript is byte-reproducible for a fixed policy and seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence, TextIO

from .tasks import NO_ANSWER, TaskContext, TaskKind, build_task_contexts, parse_answer
from .topology import Graph, RoundBudget

if TYPE_CHECKING:
    from .policies import Policy

DEFAULT_MAX_ROUNDS_CAP = 40
DEFAULT_MESSAGE_CAP = 2000


class PolicyError(RuntimeError):
    """A policy raised or kept returning malformed actions past its retries."""


class BudgetExceededError(RuntimeError):
    """The round budget is over the configured cap; the episode is skipped."""


@dataclass(frozen=True)
class Message:
    round: int
    src: int
    dst: int
    content: str


@dataclass(frozen=True)
class TokenUsage:
    prompt: int = 0
    completion: int = 0
    estimated: bool = False

    @property
    def total(self) -> int:
        return self.prompt + self.completion

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.prompt + other.prompt,
            self.completion + other.completion,
            self.estimated or other.estimated,
        )


@dataclass(frozen=True)
class AgentView:
    """Everything one agent may see when acting in one round."""

    self_id: int
    neighbors: tuple[int, ...]
    inbox: tuple[Message, ...]
    round: int
    total_rounds: int
    task_context: TaskContext


@dataclass
class AgentAction:
    """One agent's output for one round.

    outbox maps neighbor ID to message text (missing neighbors get nothing).
    Policies either set answer directly or put free text in raw_answer for
    the task parser to reduce.
    """

    outbox: dict[int, str] = field(default_factory=dict)
    answer: object = NO_ANSWER
    raw_answer: str | None = None
    tokens: TokenUsage = field(default_factory=TokenUsage)


@dataclass
class EpisodeResult:
    final_answers: list
    early_stabilization: int
    transcript: list[Message]
    per_agent_tokens: list[TokenUsage]
    answers_by_round: list[tuple]


def check_stabilization(answers_by_round: Sequence[tuple]) -> int:
    """First round index from which every later snapshot is unchanged."""
    if not answers_by_round:
        raise ValueError("need at least one round of answers")
    r = len(answers_by_round) - 1
    while r > 0 and answers_by_round[r - 1] == answers_by_round[r]:
        r -= 1
    return r


def run_episode(
    g: Graph,
    task: TaskKind,
    policy: "Policy",
    budget: RoundBudget,
    seed: int,
    *,
    max_rounds_cap: int | None = DEFAULT_MAX_ROUNDS_CAP,
    message_cap: int = DEFAULT_MESSAGE_CAP,
) -> EpisodeResult:
    """Run exactly budget.T synchronous rounds of one task on one graph.

    Agent actions may be computed concurrently (policy.parallelism > 1) but
    are always applied in ascending agent-ID order, so observable behavior
    matches a single-threaded run.
    """
    if max_rounds_cap is not None and budget.T > max_rounds_cap:
        raise BudgetExceededError(
            f"budget T={budget.T} exceeds the max-rounds cap {max_rounds_cap}"
        )
    n = g.n
    contexts = build_task_contexts(task, g, seed)
    memories: list[dict] = [{} for _ in range(n)]
    tokens = [TokenUsage() for _ in range(n)]
    answers: list = [NO_ANSWER] * n
    inboxes: list[list[Message]] = [[] for _ in range(n)]
    transcript: list[Message] = []
    snapshots: list[tuple] = []

    def act_one(view: AgentView) -> AgentAction:
        u = view.self_id
        attempts = policy.retries + 1
        last_error: Exception | None = None
        for _ in range(attempts):
            try:
                action = policy.act(view, memories[u])
            except Exception as exc:  # noqa: BLE001 - surfaced as PolicyError below
                last_error = exc
                continue
            bad_targets = set(action.outbox) - set(view.neighbors)
            if bad_targets:
                last_error = ValueError(
                    f"agent {u} addressed non-neighbors {sorted(bad_targets)}"
                )
                continue
            return action
        raise PolicyError(f"agent {u} failed in round {view.round}") from last_error

    pool = ThreadPoolExecutor(max_workers=policy.parallelism) if policy.parallelism > 1 else None
    try:
        for r in range(budget.T):
            views = [
                AgentView(
                    self_id=u,
                    neighbors=g.neighbors(u),
                    inbox=tuple(inboxes[u]),
                    round=r,
                    total_rounds=budget.T,
                    task_context=contexts[u],
                )
                for u in range(n)
            ]
            if pool is not None:
                actions = list(pool.map(act_one, views))
            else:
                actions = [act_one(v) for v in views]
            next_inboxes: list[list[Message]] = [[] for _ in range(n)]
            for u in range(n):
                action = actions[u]
                for dst in sorted(action.outbox):
                    content = action.outbox[dst][:message_cap]
                    msg = Message(round=r, src=u, dst=dst, content=content)
                    transcript.append(msg)
                    next_inboxes[dst].append(msg)
                if action.raw_answer is not None:
                    answers[u] = parse_answer(task, action.raw_answer, contexts[u])
                else:
                    answers[u] = action.answer
                tokens[u] = tokens[u] + action.tokens
            inboxes = next_inboxes
            snapshots.append(tuple(answers))
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    return EpisodeResult(
        final_answers=list(answers),
        early_stabilization=check_stabilization(snapshots),
        transcript=transcript,
        per_agent_tokens=tokens,
        answers_by_round=snapshots,
    )


def _escape(content: str) -> str:
    return (
        content.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def write_transcript(transcript: Sequence[Message], fp: TextIO) -> None:
    """One message per line: round, src, dst, content, tab-separated."""
    for msg in transcript:
        fp.write(f"{msg.round}\t{msg.src}\t{msg.dst}\t{_escape(msg.content)}\n")


def format_transcript(transcript: Sequence[Message]) -> str:
    return "".join(
        f"{m.round}\t{m.src}\t{m.dst}\t{_escape(m.content)}\n" for m in transcript
    )
