from __future__ import annotations

import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coordbench.tasks import (
    BLUE,
    GRAY,
    GREEN,
    INVALID,
    NO_ANSWER,
    ORANGE,
    RED,
    TaskContext,
    TaskKind,
    build_task_contexts,
    parse_answer,
    score,
    score_coloring,
    score_consensus,
    score_leader_election,
    score_matching,
    score_vertex_cover,
)
from coordbench.topology import Family, Graph, GraphSpec, generate

from conftest import complete_graph, cycle_graph, path_graph


# --- independent oracles -------------------------------------------------------

def oracle_matching_inconsistent(g: Graph, answers) -> set[int]:
    """Rule-by-rule reimplementation of the inconsistency count, kept separate
    from the scorer on purpose."""
    bad = set()
    neighbor_sets = {u: set(g.neighbors(u)) for u in range(g.n)}
    for u in range(g.n):
        a = answers[u]
        if a is None:
            # idle pair: an unmatched agent next to another unmatched agent
            for w in neighbor_sets[u]:
                if answers[w] is None:
                    bad.add(u)
                    break
        elif type(a) is int and a != u and a in neighbor_sets[u]:
            if answers[a] != u:
                bad.add(u)  # one-sided selection
        else:
            bad.add(u)  # non-neighbor, self, or unparseable
    return bad


def oracle_cover_redundant(g: Graph, cover: set[int], u: int) -> bool:
    """Literal subset recheck: does the cover minus u still cover every edge?"""
    reduced = cover - {u}
    return all(a in reduced or b in reduced for a, b in g.edges)


def atlas_connected_graphs(max_n: int = 6):
    """Connected graphs up to isomorphism, 2 <= n <= max_n."""
    for ag in nx.graph_atlas_g():
        n = ag.number_of_nodes()
        if 2 <= n <= max_n and nx.is_connected(ag):
            yield Graph(n, [(int(u), int(v)) for u, v in ag.edges()])


def random_matching_answers(g: Graph, rng: random.Random):
    answers = []
    for u in range(g.n):
        roll = rng.random()
        if roll < 0.35:
            answers.append(rng.choice(g.neighbors(u)))
        elif roll < 0.6:
            answers.append(None)
        elif roll < 0.8:
            answers.append(rng.randrange(g.n))  # may be self or a non-neighbor
        elif roll < 0.9:
            answers.append(rng.randrange(-2, g.n + 2))
        else:
            answers.append(INVALID)
    return answers


# --- coloring --------------------------------------------------------------------

def test_coloring_triangle_all_distinct():
    sc = score_coloring(complete_graph(3), [0, 1, 2])
    assert sc.success and sc.graded == 1.0
    assert all(cls == GREEN for cls in sc.edge_classes.values())


def test_coloring_adjacent_equal_fails():
    sc = score_coloring(path_graph(4), [0, 0, 1, 0])
    assert not sc.success
    assert sc.edge_classes[(0, 1)] == RED
    assert sc.edge_classes[(1, 2)] == GREEN


def test_coloring_cycle_two_colors():
    sc = score_coloring(cycle_graph(4), [0, 1, 0, 1])
    assert sc.success


def test_coloring_invalid_answer_marks_incident_edges():
    sc = score_coloring(path_graph(3), [0, INVALID, 0])
    assert not sc.success
    assert sc.node_classes[1] == ORANGE
    assert sc.edge_classes[(0, 1)] == RED and sc.edge_classes[(1, 2)] == RED


def test_coloring_out_of_palette_is_invalid():
    # path max degree 2 -> palette {0, 1, 2}
    sc = score_coloring(path_graph(3), [0, 3, 0])
    assert not sc.success
    assert sc.node_classes[1] == ORANGE


def test_coloring_matches_edge_enumeration_on_random_graphs():
    rng = random.Random(7)
    for seed in range(30):
        family = rng.choice(list(Family))
        n = rng.choice([4, 8, 16, 50])
        g = generate(GraphSpec(family, n=n, seed=seed))
        palette = g.max_degree() + 1
        colors = [rng.randrange(palette) for _ in range(n)]
        expected = all(colors[u] != colors[v] for u, v in g.edges)
        assert score_coloring(g, colors).success == expected


# --- matching --------------------------------------------------------------------

def test_matching_two_reciprocal_pairs():
    sc = score_matching(path_graph(4), [1, 0, 3, 2])
    assert sc.success and sc.graded == 1.0
    assert sc.edge_classes[(0, 1)] == GREEN
    assert sc.edge_classes[(1, 2)] == GRAY


def test_matching_one_sided_selection():
    # agent 0 points at 1, but 1 pairs with 2; agent 3's None is consistent
    sc = score_matching(path_graph(4), [1, 2, 1, None])
    assert not sc.success
    assert sc.graded == pytest.approx(0.75)
    assert sc.node_classes[0] == ORANGE
    assert sc.node_classes[1] == GREEN and sc.node_classes[2] == GREEN
    assert sc.node_classes[3] == GRAY


def test_matching_everyone_invalid_scores_zero():
    g = path_graph(4)
    sc = score_matching(g, [3, 3, 0, 0])  # every pick is a non-neighbor
    assert sc.graded == 0.0


def test_matching_idle_pair_marks_both_endpoints():
    sc = score_matching(path_graph(2), [None, None])
    assert sc.graded == 0.0
    assert sc.node_classes[0] == RED and sc.node_classes[1] == RED


def test_matching_self_selection_is_inconsistent():
    sc = score_matching(path_graph(2), [0, 0])
    assert sc.node_classes[0] == RED  # picked itself
    assert sc.node_classes[1] == ORANGE  # its pick isn't reciprocated
    assert sc.graded == 0.0


def test_matching_matches_brute_force_oracle_on_atlas():
    rng = random.Random(123)
    graphs = list(atlas_connected_graphs(6))
    assert len(graphs) == 142
    for g in graphs:
        for _ in range(1000):
            answers = random_matching_answers(g, rng)
            expected_bad = oracle_matching_inconsistent(g, answers)
            sc = score_matching(g, answers)
            assert sc.graded == pytest.approx(1.0 - len(expected_bad) / g.n)
            assert sc.success == (not expected_bad)


@given(st.integers(min_value=2, max_value=8), st.integers())
@settings(max_examples=60, deadline=None)
def test_matching_graded_bounds(n, seed):
    rng = random.Random(seed)
    g = path_graph(n)
    sc = score_matching(g, random_matching_answers(g, rng))
    assert 0.0 <= sc.graded <= 1.0
    assert sc.success == (sc.graded == 1.0)


# --- vertex cover ----------------------------------------------------------------

def star4() -> Graph:
    return Graph(4, [(0, 1), (0, 2), (0, 3)])


def test_cover_center_only_succeeds():
    sc = score_vertex_cover(star4(), [True, False, False, False])
    assert sc.success
    assert sc.node_classes[0] == GREEN  # essential


def test_cover_extra_leaf_is_redundant():
    sc = score_vertex_cover(star4(), [True, True, False, False])
    assert sc.success
    assert sc.node_classes[1] == BLUE
    assert sc.node_classes[0] == GREEN


def test_cover_uncovered_edge_fails():
    sc = score_vertex_cover(path_graph(3), [True, False, False])
    assert not sc.success
    assert sc.edge_classes[(1, 2)] == RED


def test_cover_invalid_answer_is_orange_and_fails():
    sc = score_vertex_cover(path_graph(3), [True, True, NO_ANSWER])
    assert not sc.success
    assert sc.node_classes[2] == ORANGE


def test_cover_redundancy_matches_subset_recheck():
    rng = random.Random(99)
    for seed in range(40):
        n = rng.randrange(4, 11)
        g = generate(GraphSpec(rng.choice(list(Family)), n=n, seed=seed))
        answers = [rng.random() < 0.6 for _ in range(n)]
        cover = {u for u in range(n) if answers[u]}
        sc = score_vertex_cover(g, answers)
        for u in cover:
            expected = BLUE if oracle_cover_redundant(g, cover, u) else GREEN
            assert sc.node_classes[u] == expected, (seed, u)


def test_cover_adding_uncovered_edge_never_rescues_a_failure():
    rng = random.Random(5)
    for seed in range(30):
        n = rng.randrange(4, 10)
        g = generate(GraphSpec(Family.SCALE_FREE, n=n, seed=seed))
        answers = [rng.random() < 0.3 for _ in range(n)]
        if score_vertex_cover(g, answers).success:
            continue
        non_edges = [
            (u, v)
            for u in range(n)
            for v in range(u + 1, n)
            if v not in g.neighbors(u)
        ]
        for extra in non_edges:
            bigger = Graph(n, list(g.edges) + [extra])
            assert not score_vertex_cover(bigger, answers).success


# --- leader election ---------------------------------------------------------------

def test_leader_exactly_one_yes():
    sc = score_leader_election(path_graph(4), [False, False, True, False])
    assert sc.success
    assert sc.node_classes[2] == GREEN
    assert sc.node_classes[0] == GRAY


def test_leader_two_yes_fails():
    sc = score_leader_election(path_graph(4), [True, True, False, False])
    assert not sc.success
    assert sc.node_classes[0] == RED and sc.node_classes[1] == RED


def test_leader_zero_yes_fails():
    assert not score_leader_election(path_graph(4), [False] * 4).success


def test_leader_invalid_blocks_success():
    assert not score_leader_election(path_graph(3), [True, INVALID, False]).success


# --- consensus ----------------------------------------------------------------------

def test_consensus_unanimous():
    sc = score_consensus(complete_graph(4), [1, 1, 1, 1])
    assert sc.success
    assert all(cls == GREEN for cls in sc.edge_classes.values())


def test_consensus_single_dissenter_on_k4():
    sc = score_consensus(complete_graph(4), [0, 1, 1, 1])
    assert not sc.success
    reds = [e for e, cls in sc.edge_classes.items() if cls == RED]
    assert sorted(reds) == [(0, 1), (0, 2), (0, 3)]


def test_consensus_invalid_blocks_unanimity():
    assert not score_consensus(path_graph(4), [0, 0, INVALID, 0]).success


def test_consensus_flipping_one_answer_breaks_success():
    rng = random.Random(1)
    for seed in range(10):
        g = generate(GraphSpec(Family.DELAUNAY, n=8, seed=seed))
        bit = rng.randint(0, 1)
        answers = [bit] * g.n
        assert score_consensus(g, answers).success
        for u in range(g.n):
            flipped = list(answers)
            flipped[u] = 1 - bit
            assert not score_consensus(g, flipped).success


def test_binary_tasks_graded_equals_success():
    g = path_graph(4)
    cases = [
        (TaskKind.COLORING, [0, 1, 0, 1]),
        (TaskKind.COLORING, [0, 0, 0, 0]),
        (TaskKind.VERTEX_COVER, [False, True, True, False]),
        (TaskKind.VERTEX_COVER, [False] * 4),
        (TaskKind.LEADER_ELECTION, [False, True, False, False]),
        (TaskKind.LEADER_ELECTION, [True] * 4),
        (TaskKind.CONSENSUS, [1, 1, 1, 1]),
        (TaskKind.CONSENSUS, [1, 0, 1, 1]),
    ]
    for task, answers in cases:
        sc = score(task, g, answers)
        assert sc.graded in (0.0, 1.0)
        assert (sc.graded == 1.0) == sc.success


def test_score_rejects_wrong_answer_count():
    with pytest.raises(ValueError):
        score(TaskKind.CONSENSUS, path_graph(3), [0, 1])


# --- answer parsing ----------------------------------------------------------------

def ctx(task: TaskKind, **extras) -> TaskContext:
    extras.setdefault("n", 4)
    return TaskContext(task=task, instructions="", answer_domain="", extras=extras)


def test_parse_coloring_marker_extraction():
    c = ctx(TaskKind.COLORING, palette_size=3)
    assert parse_answer(TaskKind.COLORING, "thinking... FINAL: 2", c) == 2
    assert parse_answer(TaskKind.COLORING, "FINAL: 5", c) is INVALID
    assert parse_answer(TaskKind.COLORING, "final: 1", c) == 1


def test_parse_matching_none_keyword():
    c = ctx(TaskKind.MATCHING)
    assert parse_answer(TaskKind.MATCHING, "FINAL: none", c) is None
    assert parse_answer(TaskKind.MATCHING, "FINAL: None.", c) is None
    assert parse_answer(TaskKind.MATCHING, "FINAL: 2", c) == 2
    assert parse_answer(TaskKind.MATCHING, "FINAL: 9", c) is INVALID


def test_parse_consensus_domain():
    c = ctx(TaskKind.CONSENSUS)
    assert parse_answer(TaskKind.CONSENSUS, "FINAL: 7", c) is INVALID
    assert parse_answer(TaskKind.CONSENSUS, "FINAL: 1", c) == 1


def test_parse_uses_last_marker():
    c = ctx(TaskKind.CONSENSUS)
    text = "FINAL: 0\nwait, reconsidering\nFINAL: 1"
    assert parse_answer(TaskKind.CONSENSUS, text, c) == 1


def test_parse_yes_no_tasks():
    c = ctx(TaskKind.VERTEX_COVER)
    assert parse_answer(TaskKind.VERTEX_COVER, "FINAL: Yes", c) is True
    assert parse_answer(TaskKind.VERTEX_COVER, "FINAL: no!", c) is False
    assert parse_answer(TaskKind.VERTEX_COVER, "FINAL: maybe", c) is INVALID


def test_parse_missing_marker_or_empty():
    c = ctx(TaskKind.CONSENSUS)
    assert parse_answer(TaskKind.CONSENSUS, "the answer is 1", c) is INVALID
    assert parse_answer(TaskKind.CONSENSUS, "", c) is INVALID
    assert parse_answer(TaskKind.CONSENSUS, None, c) is INVALID
    assert parse_answer(TaskKind.CONSENSUS, "FINAL:", c) is INVALID


# --- task contexts -----------------------------------------------------------------

def test_contexts_carry_palette_and_bits():
    g = cycle_graph(4)
    coloring = build_task_contexts(TaskKind.COLORING, g, seed=0)
    assert all(c.extras["palette_size"] == 3 for c in coloring)
    consensus = build_task_contexts(TaskKind.CONSENSUS, g, seed=0)
    bits = [c.extras["initial_bit"] for c in consensus]
    assert all(b in (0, 1) for b in bits)
    again = build_task_contexts(TaskKind.CONSENSUS, g, seed=0)
    assert bits == [c.extras["initial_bit"] for c in again]


def test_task_kind_classes():
    assert TaskKind.CONSENSUS.is_global
    assert TaskKind.LEADER_ELECTION.is_global
    assert TaskKind.COLORING.is_local
    assert TaskKind.MATCHING.is_local
    assert TaskKind.VERTEX_COVER.is_local
    assert TaskKind.parse("vertex-cover") is TaskKind.VERTEX_COVER
    with pytest.raises(ValueError):
        TaskKind.parse("gossip")
