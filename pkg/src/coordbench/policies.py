"""Agent behaviors: deterministic reference solvers plus an HTTP chat-model policy.

The scripted references exist to validate the engine and the scorers, not to
model what a language model does. Each one solves its task with a classic
local rule (flooding, greedy locking, mutual proposals, local-max join) and
speaks a compact "k=v;k=v" message encoding so transcripts stay diffable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .engine import AgentAction, AgentView, TokenUsage
from .tasks import TaskKind


class LlmCallError(RuntimeError):
    """Chat endpoint kept failing past the configured retry count."""


@dataclass(frozen=True)
class LlmConfig:
    """Connection settings for an OpenAI-style chat-completion endpoint."""

    url: str
    model: str
    temperature: float = 0.0
    timeout: float = 60.0
    retries: int = 2
    template: str = "default"
    auth_env: str | None = None
    parallelism: int = 4

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")


@dataclass(frozen=True)
class PolicySpec:
    """Which behavior drives the agents: a scripted reference or a chat model."""

    kind: str = "scripted"
    llm: LlmConfig | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("scripted", "llm"):
            raise ValueError(f"policy kind must be 'scripted' or 'llm', got {self.kind!r}")
        if self.kind == "llm" and self.llm is None:
            raise ValueError("llm policy requires an LlmConfig")

    def describe(self) -> str:
        return "scripted" if self.kind == "scripted" else f"llm:{self.llm.model}"


class Policy:
    """Base agent behavior. The engine owns one memory dict per agent and
    passes it back on every act() call; policies must not share state across
    agents so acts can run concurrently."""

    parallelism = 1
    retries = 0

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        raise NotImplementedError


def encode_fields(fields: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in fields.items())


def decode_fields(content: str) -> dict[str, str]:
    out = {}
    for part in content.split(";"):
        if "=" in part:
            k, _, v = part.partition("=")
            out[k] = v
    return out


def _broadcast(view: AgentView, content: str) -> dict[int, str]:
    return {v: content for v in view.neighbors}


class MinFloodConsensus(Policy):
    """Track the minimum bit seen so far and rebroadcast it every round.

    The global minimum reaches every agent within diameter rounds.
    """

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        if "min" not in memory:
            memory["min"] = view.task_context.extras["initial_bit"]
        for msg in view.inbox:
            fields = decode_fields(msg.content)
            if "min" in fields:
                memory["min"] = min(memory["min"], int(fields["min"]))
        content = encode_fields({"min": memory["min"]})
        return AgentAction(outbox=_broadcast(view, content), answer=memory["min"])


class MaxIdLeader(Policy):
    """Flood the largest agent ID seen; claim leadership while it is your own."""

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        if "max" not in memory:
            memory["max"] = view.self_id
        for msg in view.inbox:
            fields = decode_fields(msg.content)
            if "max" in fields:
                memory["max"] = max(memory["max"], int(fields["max"]))
        content = encode_fields({"max": memory["max"]})
        return AgentAction(outbox=_broadcast(view, content), answer=view.self_id == memory["max"])


class GreedyColoring(Policy):
    """ID-priority greedy coloring over the shared (max degree + 1) palette.

    Everyone announces (color, locked) each round. An unlocked agent locks
    when its ID beats every neighbor currently sharing its color, otherwise
    it moves to the smallest color absent from the latest announcements. At
    most one neighbor of any conflict locks per round, so conflicts drain.
    """

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        palette = view.task_context.extras["palette_size"]
        if view.round == 0:
            memory["color"] = 0
            memory["locked"] = False
        else:
            seen = {}
            for msg in view.inbox:
                fields = decode_fields(msg.content)
                if "color" in fields:
                    seen[msg.src] = int(fields["color"])
            if not memory["locked"]:
                sharers = [src for src, c in seen.items() if c == memory["color"]]
                if all(src < view.self_id for src in sharers):
                    memory["locked"] = True
                else:
                    taken = set(seen.values())
                    memory["color"] = next(c for c in range(palette) if c not in taken)
        content = encode_fields({"color": memory["color"], "locked": int(memory["locked"])})
        return AgentAction(outbox=_broadcast(view, content), answer=memory["color"])


class MutualProposalMatching(Policy):
    """Pair formation by reciprocal proposals.

    Unmatched agents point at their lowest-ID neighbor still believed
    unmatched; a pair locks when both point at each other (accepting any
    other proposer could double-match an agent). Matched agents keep
    announcing their status so neighbors re-target. The lowest eligible pair
    always ends up mutual, so the final matching is maximal.
    """

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        matched_neighbors: set[int] = memory.setdefault("matched_neighbors", set())
        partner = memory.get("partner")
        proposals: set[int] = set()
        for msg in view.inbox:
            fields = decode_fields(msg.content)
            if fields.get("status") == "1":
                matched_neighbors.add(msg.src)
            if fields.get("pick") == str(view.self_id):
                proposals.add(msg.src)
        if partner is None:
            last_pick = memory.get("pick")
            if last_pick is not None and last_pick in proposals:
                partner = memory["partner"] = last_pick
        if partner is not None:
            content = encode_fields({"status": 1})
            return AgentAction(outbox=_broadcast(view, content), answer=partner)
        candidates = [v for v in view.neighbors if v not in matched_neighbors]
        pick = memory["pick"] = min(candidates) if candidates else None
        fields = {"status": 0}
        if pick is not None:
            fields["pick"] = pick
        content = encode_fields(fields)
        return AgentAction(outbox=_broadcast(view, content), answer=None)


class LocalMaxCover(Policy):
    """Cover edges by the locally dominant endpoint.

    Agents announce membership and their count of uncovered incident edges;
    for each edge still uncovered, the endpoint with the larger
    (uncovered-degree, ID) joins. The first exchange resolves every edge at
    once; later rounds only mop up stale views.
    """

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        states: dict[int, tuple[int, int]] = memory.setdefault("states", {})
        for msg in view.inbox:
            fields = decode_fields(msg.content)
            if "cover" in fields:
                states[msg.src] = (int(fields["cover"]), int(fields["udeg"]))
        in_cover = memory.get("in_cover", False)

        def uncovered(v: int) -> bool:
            return not in_cover and states.get(v, (0, 0))[0] == 0

        if not in_cover and view.round > 0:
            udeg = sum(1 for v in view.neighbors if uncovered(v))
            for v in view.neighbors:
                if uncovered(v):
                    v_udeg = states.get(v, (0, len(view.neighbors)))[1]
                    if (udeg, view.self_id) > (v_udeg, v):
                        in_cover = memory["in_cover"] = True
                        break
        udeg = 0 if in_cover else sum(1 for v in view.neighbors if uncovered(v))
        content = encode_fields({"cover": int(in_cover), "udeg": udeg})
        return AgentAction(outbox=_broadcast(view, content), answer=bool(in_cover))


_SCRIPTED: dict[TaskKind, type[Policy]] = {
    TaskKind.CONSENSUS: MinFloodConsensus,
    TaskKind.LEADER_ELECTION: MaxIdLeader,
    TaskKind.COLORING: GreedyColoring,
    TaskKind.MATCHING: MutualProposalMatching,
    TaskKind.VERTEX_COVER: LocalMaxCover,
}


def scripted_policy(task: TaskKind) -> Policy:
    return _SCRIPTED[task]()


def build_policy(spec: PolicySpec, task: TaskKind) -> Policy:
    if spec.kind == "scripted":
        return scripted_policy(task)
    return LlmPolicy(spec.llm)


# --- chat-model policy ------------------------------------------------------

_PROMPTS_DIR = Path(__file__).parent / "prompts"
_SECTION_SEPARATOR = "\n---\n"


@dataclass(frozen=True)
class PromptTemplate:
    system: str
    user: str


def load_template(identifier: str) -> PromptTemplate:
    """Load a prompt template by bundled name or filesystem path.

    The user section must state the remaining-round count and the FINAL:
    answer convention; templates missing either are rejected up front.
    """
    path = Path(identifier)
    if not path.suffix:
        path = _PROMPTS_DIR / f"{identifier}.txt"
    text = path.read_text(encoding="utf-8")
    if _SECTION_SEPARATOR not in text:
        raise ValueError(f"template {identifier!r} is missing the '---' system/user separator")
    system, user = text.split(_SECTION_SEPARATOR, 1)
    if "{remaining_rounds}" not in user:
        raise ValueError(f"template {identifier!r} must mention {{remaining_rounds}}")
    if "FINAL:" not in user and "FINAL:" not in system:
        raise ValueError(f"template {identifier!r} must state the FINAL: answer marker")
    return PromptTemplate(system=system.strip(), user=user.strip())


def render_prompt(template: PromptTemplate, view: AgentView) -> list[dict]:
    ctx = view.task_context
    inbox_lines = "\n".join(
        f"FROM agent {m.src}: {m.content}" for m in view.inbox
    ) or "(no messages)"
    user = template.user.format(
        self_id=view.self_id,
        n=ctx.extras["n"],
        neighbors=", ".join(str(v) for v in view.neighbors),
        round=view.round + 1,
        total_rounds=view.total_rounds,
        remaining_rounds=view.total_rounds - view.round,
        task_instructions=ctx.instructions,
        answer_domain=ctx.answer_domain,
        inbox=inbox_lines,
    )
    return [
        {"role": "system", "content": template.system},
        {"role": "user", "content": user},
    ]


def parse_outbox(text: str, neighbors: tuple[int, ...]) -> dict[int, str]:
    """Extract "TO <id>: ..." / "TO ALL: ..." message lines; unknown targets
    are dropped rather than failing the round."""
    outbox: dict[int, str] = {}
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped.upper().startswith("TO "):
            continue
        target, sep, body = stripped[3:].partition(":")
        if not sep:
            continue
        target = target.strip()
        body = body.strip()
        if target.upper() == "ALL":
            for v in neighbors:
                outbox[v] = body
        elif target.isdigit() and int(target) in neighbors:
            outbox[int(target)] = body
    return outbox


def call_llm(config: LlmConfig, messages: list[dict]) -> tuple[str, TokenUsage]:
    """One chat-completion call with retries.

    Returns the assistant text and token usage. When the endpoint omits
    usage, both counts are estimated as ceil(chars / 4) and flagged so they
    are never mistaken for endpoint-reported numbers.
    """
    headers = {"Content-Type": "application/json"}
    if config.auth_env:
        token = os.environ.get(config.auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    body = {
        "model": config.model,
        "temperature": config.temperature,
        "messages": messages,
    }
    last_error: Exception | None = None
    for _ in range(config.retries + 1):
        try:
            resp = httpx.post(config.url, json=body, headers=headers, timeout=config.timeout)
            resp.raise_for_status()
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            last_error = exc
            continue
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            tokens = TokenUsage(int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
        else:
            prompt_chars = sum(len(m["content"]) for m in messages)
            tokens = TokenUsage(
                math.ceil(prompt_chars / 4), math.ceil(len(text) / 4), estimated=True
            )
        return text, tokens
    raise LlmCallError(
        f"chat call to {config.url} failed after {config.retries + 1} attempts"
    ) from last_error


class LlmPolicy(Policy):
    """Drives each agent with one chat-completion call per round.

    The reply's "TO ..." lines become the outbox and the full text is kept
    as the raw answer for FINAL: parsing. Calls for different agents may run
    concurrently up to the configured parallelism.
    """

    retries = 0  # transport retries happen inside call_llm

    def __init__(self, config: LlmConfig):
        self.config = config
        self.parallelism = config.parallelism
        self.template = load_template(config.template)

    def act(self, view: AgentView, memory: dict) -> AgentAction:
        messages = render_prompt(self.template, view)
        text, tokens = call_llm(self.config, messages)
        return AgentAction(
            outbox=parse_outbox(text, view.neighbors),
            raw_answer=text,
            tokens=tokens,
        )
