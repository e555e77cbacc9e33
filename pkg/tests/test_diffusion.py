import io
import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from emocontagion.diffusion import (
    CreateContext,
    DiffusionGraph,
    action_matrix,
    edge_xi,
    estimate_central_user,
    gamma,
    inflow,
    laplacian_step,
    outflow,
    trace_sum,
    write_report_csv,
)
from emocontagion.errors import DomainError, ParameterError, ShapeError
from emocontagion.ingest import ProfileTable, extract_star_graph, parse_event_log, write_event_log
from emocontagion.model import ActionKind, FollowState, HistoryMatrix, StarGraph, Window, make_edge
from emocontagion.similarity import ProfileEmbedding, SimilarityProviders

from helpers import correlated_pair, ev, record, store_of

TOPICS = ("sports", "music")
W = Window(0, 14)


def hm(values, topics=TOPICS):
    values = np.asarray(values, dtype=float)
    return HistoryMatrix(values, topics, values.shape[1])


def trace_oracle(A):
    """Tr(sqrt(A)^T sqrt(A)) by explicit matrix product."""
    R = np.sqrt(A)
    return float(np.trace(R.T @ R))


UNIT = ProfileEmbedding([1.0, 0.0])


def emb_with_similarity(s):
    return ProfileEmbedding([s, math.sqrt(1 - s * s)])


class TestTraceSum:
    def test_small(self):
        assert trace_sum(np.array([[1, 2], [3, 4]])) == 10

    def test_zero(self):
        assert trace_sum(np.zeros((3, 5))) == 0

    def test_random_7x11(self):
        rng = np.random.default_rng(0)
        A = rng.random((7, 11)) * 10
        assert abs(trace_sum(A) - trace_oracle(A)) < 1e-9

    def test_negative_entry(self):
        with pytest.raises(DomainError):
            trace_sum(np.array([[1.0, -0.5]]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        A, B = rng.random((4, 6)), rng.random((4, 6))
        assert trace_sum(A + B) == pytest.approx(trace_sum(A) + trace_sum(B), rel=1e-12)


class TestInflow:
    def test_cell_of_15(self):
        v = np.zeros((2, 14))
        v[0, 3] = 15
        assert inflow(hm(v)) == 15

    def test_empty(self):
        assert inflow(HistoryMatrix.zeros(TOPICS, 14)) == 0

    def test_adding_play_never_decreases(self):
        rng = random.Random(1)
        events = []
        last = 0.0
        for k in range(40):
            events.append(ev("play", day=rng.randrange(14), topic=rng.choice(TOPICS), video=f"v{k}"))
            cur = inflow(make_edge("n1", events, W, TOPICS).watch)
            assert cur >= last
            last = cur


class TestGamma:
    def test_empty_cell(self):
        assert gamma([], FollowState()) == 0

    def test_like_age_zero_followed(self):
        assert gamma([ev("like", day=2)], FollowState(True)) == 1

    def test_like_age_three(self):
        assert gamma([ev("like", day=5, post_day=2)], FollowState(True)) == pytest.approx(0.049787, abs=1e-6)
        assert gamma([ev("like", day=5, post_day=2)], FollowState(True)) == math.exp(-3)

    def test_not_followed_halves(self):
        assert gamma([ev("like", day=5, post_day=2)], FollowState(False)) == math.exp(-3) / 2

    def test_follow_state_at_action_day(self):
        fs = FollowState.replay([ev("follow", day=4)])
        assert gamma([ev("share", day=3)], fs) == 0.5
        assert gamma([ev("share", day=4)], fs) == 1.0

    def test_follow_events_add_nothing(self):
        assert gamma([ev("follow", day=1), ev("unfollow", day=2)], FollowState(True)) == 0

    def test_negative_age(self):
        from emocontagion.model import ActivityEvent

        bad = ActivityEvent.__new__(ActivityEvent)
        for name, value in dict(actor="c", action=ActionKind.LIKE, creator="n1", event_day=1,
                                video="v", topic="sports", post_day=3).items():
            object.__setattr__(bad, name, value)
        with pytest.raises(DomainError):
            gamma([bad], FollowState())

    def test_create_without_plays(self):
        cell = [ev("create", day=3, video="mine")]
        assert gamma(cell, FollowState(True), CreateContext((), None)) == 0

    def test_create_uses_content_factors(self):
        rho = 1 - math.exp(-1)
        made, seen = correlated_pair(rho, seed=9)
        store = store_of([record("mine", made, sentiment=1), record("w1", seen, sentiment=1),
                          record("w2", seen, sentiment=-1)])
        providers = SimilarityProviders(ProfileTable(), store)
        plays = (ev("play", day=1, video="w1"), ev("play", day=2, video="w2"), ev("play", day=9, video="w1"))
        cell = [ev("create", day=3, video="mine")]
        # watched before day 3: w1 (age 2 -> 4), w2 (age 1 -> 2): dc = 3, de = 0.75
        got = gamma(cell, FollowState(True), CreateContext(plays, providers))
        assert got == pytest.approx(3 * 0.75, abs=1e-9)


def brute_force_U(edge, providers):
    """Independent per-event summation of every action's weight into its cell."""
    U = np.zeros((len(TOPICS), W.days))
    for e in edge.events:
        if e.action in (ActionKind.PLAY, ActionKind.FOLLOW, ActionKind.UNFOLLOW):
            continue
        followed = False
        for f in sorted(edge.follow_timeline, key=lambda x: x.event_day):
            if f.event_day <= e.event_day:
                followed = f.action is ActionKind.FOLLOW
        df = 1.0 if followed else 0.5
        dc = de = 1.0
        if e.action is ActionKind.CREATE:
            watched = [p for p in edge.events if p.action is ActionKind.PLAY and p.event_day <= e.event_day]
            if not watched:
                dc, de = 0.0, 0.5
            else:
                mine = providers.content[e.video]
                scores = []
                agree = 0
                for p in watched:
                    other = providers.content[p.video]
                    a = max(1, e.event_day - p.event_day)
                    rd = min(1 - 1e-6, max(0.0, np.corrcoef(mine.visual, other.visual)[0, 1]))
                    rq = min(1 - 1e-6, max(0.0, np.corrcoef(mine.audio, other.audio)[0, 1]))
                    scores.append(-a * math.log(1 - rd) - a * math.log(1 - rq))
                    agree += other.sentiment == mine.sentiment
                dc = sum(scores) / len(scores)
                de = 0.5 + 0.5 * agree / len(watched)
        U[TOPICS.index(e.topic), e.event_day] += math.exp(-(e.event_day - e.post_day)) * df * dc * de
    return U


def random_edge(seed, n_events=60):
    rng = random.Random(seed)
    nprng = np.random.default_rng(seed)
    kinds = ["play"] * 4 + ["like", "share", "download", "create", "follow", "unfollow"]
    events, records = [], []
    for k in range(n_events):
        day = rng.randrange(W.days)
        kind = rng.choice(kinds)
        e = ev(kind, day=day, post_day=day - rng.randint(0, min(day, 4)), topic=rng.choice(TOPICS), video=f"v{k}")
        events.append(e)
        if e.video:
            records.append(record(e.video, nprng.normal(size=16), nprng.normal(size=8), rng.choice([1, -1])))
    return make_edge("n1", events, W, TOPICS), SimilarityProviders(ProfileTable(), store_of(records))


class TestActionMatrix:
    def test_only_plays(self):
        edge = make_edge("n1", [ev("play", day=d) for d in range(5)], W, TOPICS)
        assert not action_matrix(edge).values.any()

    def test_single_like(self):
        edge = make_edge("n1", [ev("follow", day=0), ev("like", day=3)], W, TOPICS)
        U = action_matrix(edge)
        assert U["sports", 3] == 1
        assert U.values.sum() == 1

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_per_event_brute_force(self, seed):
        edge, providers = random_edge(seed)
        np.testing.assert_allclose(action_matrix(edge, providers).values, brute_force_U(edge, providers),
                                   rtol=1e-12, atol=1e-12)


class TestOutflow:
    def test_zero_U(self):
        assert outflow(HistoryMatrix.zeros(TOPICS, 3), UNIT, emb_with_similarity(0.3)) == 0

    def test_similarity_one(self):
        assert outflow(hm([[15, 0, 0], [0, 0, 0]]), UNIT, UNIT) == 15

    def test_similarity_065(self):
        assert outflow(hm([[10, 0, 0], [0, 5, 0]]), UNIT, emb_with_similarity(0.65)) == pytest.approx(9.75, abs=1e-12)

    def test_negative_similarity_clamped(self):
        assert outflow(hm([[3.0, 0, 0], [0, 0, 0]]), UNIT, ProfileEmbedding([-1.0, 0.0])) == 0

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            outflow(hm([[1.0], [1.0]]), UNIT, ProfileEmbedding([1.0, 0.0, 0.0]))


def engaged_vs_passive():
    """Edge B: 15 plays, each liked the same day. Edge D: 150 plays, no reactions. Both followed."""
    events = [ev("follow", "B", day=0), ev("follow", "D", day=0)]
    for k in range(15):
        events.append(ev("play", "B", day=2, video=f"b{k}"))
        events.append(ev("like", "B", day=2, video=f"b{k}"))
    events += [ev("play", "D", day=5, video=f"d{k}") for k in range(150)]
    return make_edge("B", [e for e in events if e.creator == "B"], W, TOPICS), make_edge(
        "D", [e for e in events if e.creator == "D"], W, TOPICS
    )


class TestEdgeXi:
    def test_engaged_edge_has_lower_xi(self):
        b, d = engaged_vs_passive()
        fb = edge_xi(b.watch, action_matrix(b), UNIT, UNIT)
        fd = edge_xi(d.watch, action_matrix(d), UNIT, UNIT)
        assert fb.xi == 0 and fd.xi == 150
        assert fd.inflow == 150
        assert fb.xi < fd.xi

    def test_no_activity(self):
        z = HistoryMatrix.zeros(TOPICS, 14)
        assert edge_xi(z, z, UNIT, UNIT).xi == 0

    def test_per_topic_restriction(self):
        watch = hm([[4, 0, 1], [0, 2, 0]])
        U = hm([[1, 0, 0], [0, 0.5, 0]])
        f = edge_xi(watch, U, UNIT, emb_with_similarity(0.5))
        assert f.per_topic["sports"].inflow == 5 and f.per_topic["sports"].outflow == pytest.approx(0.5)
        assert f.per_topic["music"].xi == pytest.approx(2 - 0.25)
        assert f.inflow == 7 and f.xi == f.inflow - f.outflow

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            edge_xi(HistoryMatrix.zeros(TOPICS, 3), HistoryMatrix.zeros(TOPICS, 4), UNIT, UNIT)

    def test_causality_decay(self):
        flows = []
        for age in range(6):
            e = make_edge("n1", [ev("play", day=8, post_day=8 - age), ev("like", day=8, post_day=8 - age)], W, TOPICS)
            flows.append(edge_xi(e.watch, action_matrix(e), UNIT, UNIT))
        for a, b in zip(flows, flows[1:]):
            assert a.outflow > b.outflow and a.xi < b.xi

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_homophily_monotone(self, s1, s2):
        edge, providers = random_edge(3)
        U = action_matrix(edge, providers)
        assert trace_sum(U) > 0
        lo, hi = sorted((s1, s2))
        assume(hi - lo > 1e-9)
        assert edge_xi(edge.watch, U, UNIT, emb_with_similarity(hi)).xi < edge_xi(
            edge.watch, U, UNIT, emb_with_similarity(lo)
        ).xi


def star_of(events, central="c"):
    buf = io.StringIO()
    write_event_log(events, buf)
    return extract_star_graph(parse_event_log(buf.getvalue(), W, TOPICS), central)


class TestEstimateCentralUser:
    def test_single_edge(self, identical_providers):
        rep = estimate_central_user(star_of([ev("play", "n1", day=1), ev("like", "n1", day=1)]), identical_providers)
        (flows,) = rep.edges.values()
        assert (rep.total_inflow, rep.total_outflow, rep.total_xi) == (flows.inflow, flows.outflow, flows.xi)

    def test_two_edges_additive(self, identical_providers):
        events = [ev("play", "n1", day=1), ev("like", "n1", day=3, post_day=1), ev("play", "n2", day=2, video="x"),
                  ev("play", "n2", day=4, video="y")]
        rep = estimate_central_user(star_of(events), identical_providers)
        assert rep.total_xi == rep.edges["n1"].xi + rep.edges["n2"].xi
        assert rep.total_inflow == 3

    def test_engaged_vs_passive_via_star(self, identical_providers):
        b, d = engaged_vs_passive()
        rep = estimate_central_user(StarGraph("c", (b, d), W, TOPICS), identical_providers)
        assert rep.edges["B"].xi < rep.edges["D"].xi

    def test_csv_layout(self, identical_providers):
        rep = estimate_central_user(star_of([ev("play", "n1", day=1), ev("like", "n2", day=1)]), identical_providers)
        buf = io.StringIO()
        write_report_csv([rep], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "central,neighbor,topic,inflow,outflow,xi"
        assert lines[1:] == [
            "c,n1,sports,1.0,0.0,1.0",
            "c,n1,*,1.0,0.0,1.0",
            "c,n2,sports,0.0,0.5,-0.5",
            "c,n2,*,0.0,0.5,-0.5",
            "c,*,*,1.0,0.5,0.5",
        ]


class TestLaplacianStep:
    def test_two_node_hand_step(self):
        g = laplacian_step(DiffusionGraph([[0, 1], [1, 0]], [1, 0]), 0.1)
        np.testing.assert_allclose(g.phi, [0.9, 0.1], atol=1e-15)

    def test_uniform_state_fixed(self):
        rng = np.random.default_rng(0)
        T = rng.random((5, 5))
        np.fill_diagonal(T, 0)
        g = laplacian_step(DiffusionGraph(T, np.full(5, 2.5)), 0.05)
        np.testing.assert_allclose(g.phi, 2.5, atol=1e-14)

    def test_conservation_for_symmetric(self):
        rng = np.random.default_rng(1)
        T = rng.random((6, 6))
        T = T + T.T
        np.fill_diagonal(T, 0)
        phi = rng.random(6)
        g = laplacian_step(DiffusionGraph(T, phi), 0.05)
        assert abs(g.phi.sum() - phi.sum()) < 1e-12

    def test_unstable(self):
        with pytest.raises(ParameterError):
            laplacian_step(DiffusionGraph([[0, 5], [5, 0]], [1, 0]), 0.5)
        with pytest.raises(ParameterError):
            laplacian_step(DiffusionGraph([[0, 1], [1, 0]], [1, 0]), 0)

    def test_validation(self):
        with pytest.raises(DomainError):
            DiffusionGraph([[1, 0], [0, 0]], [0, 0])
        with pytest.raises(DomainError):
            DiffusionGraph([[0, -1], [0, 0]], [0, 0])
        with pytest.raises(ShapeError):
            DiffusionGraph([[0, 1], [1, 0]], [0, 0, 0])

    def test_from_report(self, identical_providers):
        events = [ev("follow", "n1"), ev("play", "n1", day=1), ev("like", "n1", day=1)]
        g = DiffusionGraph.from_report(estimate_central_user(star_of(events), identical_providers))
        assert g.weights[1, 0] == 1 and g.weights[0, 1] == 1
