"""The five coordination tasks: answer domains, scoring rules, visual classes.

Answers are plain Python values per task (color index, partner ID or None,
yes/no booleans, consensus bit) plus two module-level markers: INVALID for
unparseable responses and NO_ANSWER for agents that never committed. Scorers
treat both markers as failures; VertexCover additionally surfaces them as an
explicit orange visual class.
"""

from __future__ import annotations

import enum
import random
import re
from dataclasses import dataclass, field

from .topology import Graph, mix_seed

GREEN = "green"
BLUE = "blue"
ORANGE = "orange"
RED = "red"
GRAY = "gray"


class _Marker:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return f"<{self.name}>"


INVALID = _Marker("invalid")
NO_ANSWER = _Marker("no-answer")


def is_marker(answer: object) -> bool:
    return isinstance(answer, _Marker)


class TaskKind(enum.Enum):
    COLORING = "coloring"
    MATCHING = "matching"
    VERTEX_COVER = "vertexcover"
    LEADER_ELECTION = "leaderelection"
    CONSENSUS = "consensus"

    @property
    def is_global(self) -> bool:
        """Global agreement tasks; the rest are edge/neighborhood-local."""
        return self in (TaskKind.LEADER_ELECTION, TaskKind.CONSENSUS)

    @property
    def is_local(self) -> bool:
        return not self.is_global

    @classmethod
    def parse(cls, name: str) -> "TaskKind":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for task in cls:
            if task.value == key:
                return task
        raise ValueError(f"unknown task: {name!r}")


@dataclass(frozen=True)
class TaskContext:
    """Per-agent task briefing handed to policies and the answer parser."""

    task: TaskKind
    instructions: str
    answer_domain: str
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TaskScore:
    """Outcome of scoring one episode's final answers.

    graded is the Matching partial-credit score; for the binary tasks it is
    simply success as 0/1. node_classes and edge_classes drive the DOT export.
    """

    success: bool
    graded: float
    node_classes: dict[int, str] = field(default_factory=dict)
    edge_classes: dict[tuple[int, int], str] = field(default_factory=dict)


def _is_int(answer: object) -> bool:
    return type(answer) is int


def _is_bool(answer: object) -> bool:
    return type(answer) is bool


def score_coloring(g: Graph, answers: list) -> TaskScore:
    """Valid iff every edge gets two distinct colors from the (max degree + 1)
    palette. Conflicting edges go red; an invalid answer conflicts with every
    incident edge."""
    palette = g.max_degree() + 1
    bad = {u for u, a in enumerate(answers) if not (_is_int(a) and 0 <= a < palette)}
    edge_classes: dict[tuple[int, int], str] = {}
    conflicted: set[int] = set()
    for u, v in g.edges:
        clash = u in bad or v in bad or answers[u] == answers[v]
        edge_classes[(u, v)] = RED if clash else GREEN
        if clash:
            conflicted.update((u, v))
    node_classes = {
        u: ORANGE if u in bad else (RED if u in conflicted else GREEN) for u in range(g.n)
    }
    success = not bad and not any(cls == RED for cls in edge_classes.values())
    return TaskScore(success, 1.0 if success else 0.0, node_classes, edge_classes)


def score_matching(g: Graph, answers: list) -> TaskScore:
    """Partial-credit pairing score: 1 - inconsistent/|V|.

    An agent is inconsistent when it (a) selected a non-neighbor or itself,
    (b) selected a neighbor that did not select it back, (c) selected None
    while some neighbor also selected None (an idle pair; both endpoints
    count), or (d) gave no parseable answer.
    """
    n = g.n
    inconsistent: set[int] = set()
    one_sided: set[int] = set()
    reciprocal: set[int] = set()
    for u in range(n):
        a = answers[u]
        if a is None:
            if any(answers[w] is None for w in g.neighbors(u)):
                inconsistent.add(u)
        elif _is_int(a) and a in g.neighbors(u):
            if answers[a] == u:
                reciprocal.add(u)
            else:
                one_sided.add(u)
                inconsistent.add(u)
        else:
            inconsistent.add(u)  # non-neighbor, self, marker, junk
    graded = 1.0 - len(inconsistent) / n
    node_classes = {}
    for u in range(n):
        if u in reciprocal:
            node_classes[u] = GREEN
        elif u in one_sided:
            node_classes[u] = ORANGE
        elif u in inconsistent:
            node_classes[u] = RED
        else:
            node_classes[u] = GRAY
    edge_classes = {
        (u, v): GREEN if answers[u] == v and answers[v] == u else GRAY for u, v in g.edges
    }
    return TaskScore(not inconsistent, graded, node_classes, edge_classes)


def score_vertex_cover(g: Graph, answers: list) -> TaskScore:
    """Valid iff every edge has a Yes endpoint and all answers parse.

    A cover member is redundant (blue) when dropping it still leaves a cover,
    which holds exactly when the other endpoint of each of its edges is also
    in the cover; otherwise it is essential (green).
    """
    bad = {u for u, a in enumerate(answers) if not _is_bool(a)}
    cover = {u for u, a in enumerate(answers) if a is True}
    edge_classes = {
        (u, v): GRAY if u in cover or v in cover else RED for u, v in g.edges
    }
    covers_all = RED not in edge_classes.values()
    node_classes: dict[int, str] = {}
    for u in range(g.n):
        if u in bad:
            node_classes[u] = ORANGE
        elif u in cover:
            # dropping u still covers everything iff the cover is whole and
            # the far endpoint of each of u's edges is also a member
            redundant = covers_all and all(v in cover for v in g.neighbors(u))
            node_classes[u] = BLUE if redundant else GREEN
        else:
            node_classes[u] = GRAY
    success = not bad and RED not in edge_classes.values()
    return TaskScore(success, 1.0 if success else 0.0, node_classes, edge_classes)


def score_leader_election(g: Graph, answers: list) -> TaskScore:
    """Valid iff exactly one agent answers Yes."""
    bad = {u for u, a in enumerate(answers) if not _is_bool(a)}
    leaders = [u for u, a in enumerate(answers) if a is True]
    node_classes: dict[int, str] = {}
    for u in range(g.n):
        if u in bad:
            node_classes[u] = ORANGE
        elif u in leaders:
            node_classes[u] = GREEN if len(leaders) == 1 else RED
        else:
            node_classes[u] = GRAY
    edge_classes = {(u, v): GRAY for u, v in g.edges}
    success = not bad and len(leaders) == 1
    return TaskScore(success, 1.0 if success else 0.0, node_classes, edge_classes)


def score_consensus(g: Graph, answers: list) -> TaskScore:
    """Valid iff all agents output the same bit. Edges between agreeing
    neighbors are green, disagreement or invalid endpoints red."""
    bad = {u for u, a in enumerate(answers) if not (_is_int(a) and a in (0, 1))}
    edge_classes = {}
    disagreeing: set[int] = set()
    for u, v in g.edges:
        clash = u in bad or v in bad or answers[u] != answers[v]
        edge_classes[(u, v)] = RED if clash else GREEN
        if clash:
            disagreeing.update((u, v))
    unanimous = not bad and len({answers[u] for u in range(g.n)}) == 1
    node_classes = {
        u: ORANGE if u in bad else (RED if u in disagreeing else GREEN) for u in range(g.n)
    }
    return TaskScore(unanimous, 1.0 if unanimous else 0.0, node_classes, edge_classes)


_SCORERS = {
    TaskKind.COLORING: score_coloring,
    TaskKind.MATCHING: score_matching,
    TaskKind.VERTEX_COVER: score_vertex_cover,
    TaskKind.LEADER_ELECTION: score_leader_election,
    TaskKind.CONSENSUS: score_consensus,
}


def score(task: TaskKind, g: Graph, answers: list) -> TaskScore:
    if len(answers) != g.n:
        raise ValueError(f"expected {g.n} answers, got {len(answers)}")
    return _SCORERS[task](g, answers)


_FINAL_RE = re.compile(r"final\s*:", re.IGNORECASE)


def parse_answer(task: TaskKind, raw: str | None, context: TaskContext) -> object:
    """Reduce an agent's free text to a task answer.

    Takes the first token after the last "FINAL:" marker (case-insensitive)
    and validates it against the task's answer domain; anything else is
    INVALID. Neighbor-ness of Matching picks is deliberately left to the
    scorer so a bad pick is scored, not discarded.
    """
    if not raw:
        return INVALID
    matches = list(_FINAL_RE.finditer(raw))
    if not matches:
        return INVALID
    tail = raw[matches[-1].end():].lstrip()
    line = tail.splitlines()[0] if tail else ""
    token = line.split()[0].strip(".,;:!\"'") if line.split() else ""
    if not token:
        return INVALID
    lowered = token.lower()
    if task is TaskKind.COLORING:
        palette = context.extras["palette_size"]
        if _to_int(token) is not None and 0 <= _to_int(token) < palette:
            return _to_int(token)
    elif task is TaskKind.MATCHING:
        if lowered == "none":
            return None
        value = _to_int(token)
        if value is not None and 0 <= value < context.extras["n"]:
            return value
    elif task in (TaskKind.VERTEX_COVER, TaskKind.LEADER_ELECTION):
        if lowered in ("yes", "no"):
            return lowered == "yes"
    elif task is TaskKind.CONSENSUS:
        if token in ("0", "1"):
            return int(token)
    return INVALID


def _to_int(token: str) -> int | None:
    try:
        return int(token)
    except ValueError:
        return None


_INSTRUCTIONS = {
    TaskKind.COLORING: (
        "Pick a color for yourself so that no neighbor ends up with the same "
        "color. The shared palette has {palette_size} colors, numbered 0 to "
        "{max_color}."
    ),
    TaskKind.MATCHING: (
        "Pair up with exactly one neighbor. A pair only counts when both "
        "sides pick each other. If every neighbor is already paired, answer "
        "none."
    ),
    TaskKind.VERTEX_COVER: (
        "Decide whether to join the coordinating set. Every link must have "
        "at least one endpoint in the set; keep the set as small as you can."
    ),
    TaskKind.LEADER_ELECTION: (
        "Exactly one agent in the whole network must end up answering yes "
        "(the leader); everyone else must answer no."
    ),
    TaskKind.CONSENSUS: (
        "Your initial bit is {initial_bit}. All agents must end up answering "
        "the same bit; agree on one value through your messages."
    ),
}

_ANSWER_DOMAINS = {
    TaskKind.COLORING: "an integer color from 0 to {max_color}",
    TaskKind.MATCHING: "a neighbor's agent ID, or the word none",
    TaskKind.VERTEX_COVER: "yes or no",
    TaskKind.LEADER_ELECTION: "yes or no",
    TaskKind.CONSENSUS: "0 or 1",
}


def build_task_contexts(task: TaskKind, g: Graph, seed: int) -> list[TaskContext]:
    """Per-agent contexts for one episode. Consensus draws each agent's
    initial bit from the episode seed; Coloring publishes the palette size."""
    palette = g.max_degree() + 1
    rng = random.Random(mix_seed(seed, "initial-bits"))
    bits = [rng.getrandbits(1) for _ in range(g.n)]
    contexts = []
    for u in range(g.n):
        extras = {"n": g.n}
        if task is TaskKind.COLORING:
            extras["palette_size"] = palette
        if task is TaskKind.CONSENSUS:
            extras["initial_bit"] = bits[u]
        text_args = {
            "palette_size": palette,
            "max_color": palette - 1,
            "initial_bit": extras.get("initial_bit", ""),
        }
        contexts.append(
            TaskContext(
                task=task,
                instructions=_INSTRUCTIONS[task].format(**text_args),
                answer_domain=_ANSWER_DOMAINS[task].format(**text_args),
                extras=extras,
            )
        )
    return contexts
