"""Inflow/outflow estimation on star graphs, plus a small global diffusion oracle.

For a central user ``c`` and neighbor ``i``:

* inflow  ``I_i = sum(W_i)``, the number of plays of ``i``'s content,
* outflow ``O_i = max(0, p_i . p_c) * sum(U_i)`` where every action-matrix
  cell holds ``sum_l exp(-age_l) * d_f * d_c * d_e``,
* contagion ``xi_i = I_i - O_i`` (lower means stronger contagion).

Edges are evaluated in isolation and summed, so one neighbor's events never
influence another neighbor's flows.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParameterError, ShapeError
from .ingest import EventLog, extract_star_graph
from .model import ActionKind, ActivityEvent, FollowState, HistoryMatrix, StarEdge, StarGraph
from .similarity import ProfileEmbedding, SimilarityProviders, delta_c, delta_e, profile_similarity


def _as_array(A) -> np.ndarray:
    return A.values if isinstance(A, HistoryMatrix) else np.asarray(A, dtype=float)


def _row_sums(values: np.ndarray) -> list[float]:
    return [math.fsum(row) for row in values]


def trace_sum(A) -> float:
    """``Tr(sqrt(A)^T sqrt(A))`` with entrywise square root, i.e. the entry sum.

    Accumulated row by row (topic-major) so per-row totals add up exactly.
    """
    values = _as_array(A)
    if values.size and values.min() < 0:
        raise DomainError("trace_sum is defined for nonnegative matrices only")
    return sum(_row_sums(values), 0.0)


def inflow(watch: HistoryMatrix) -> float:
    return trace_sum(watch)


@dataclass(frozen=True)
class CreateContext:
    """What a create action on one edge is compared against."""

    plays: tuple[ActivityEvent, ...]
    providers: SimilarityProviders | None


def create_factors(ev: ActivityEvent, ctx: CreateContext) -> tuple[float, float]:
    """``(delta_c, delta_e)`` for a create event against the edge's earlier plays.

    Watched videos count if played on or before the creation day; their age is
    the number of days between play and creation. No plays gives ``(0, 1/2)``.
    """
    watched = [p for p in ctx.plays if p.event_day <= ev.event_day]
    if not watched:
        return 0.0, 0.5
    providers = ctx.providers
    dc = delta_c(ev.video, [(p.video, ev.event_day - p.event_day) for p in watched], providers)
    made = providers.content_lookup(ev.video).sentiment
    de = delta_e(made, [providers.content_lookup(p.video).sentiment for p in watched])
    return dc, de


def gamma_terms(
    cell: Iterable[ActivityEvent], follow_state: FollowState, ctx: CreateContext | None = None
) -> list[float]:
    terms = []
    for ev in cell:
        if ev.action.is_reaction:
            dc = de = 1.0
        elif ev.action is ActionKind.CREATE:
            if ctx is None:
                raise ValueError("create actions need a CreateContext")
            dc, de = create_factors(ev, ctx)
        else:
            # plays feed the watch matrix; follow/unfollow only shape delta_f
            continue
        if ev.age < 0:
            raise DomainError(f"negative age on video {ev.video}")
        terms.append(math.exp(-ev.age) * follow_state.delta_f(ev.event_day) * dc * de)
    return terms


def gamma(cell: Iterable[ActivityEvent], follow_state: FollowState, ctx: CreateContext | None = None) -> float:
    """Decayed, follow/content/sentiment-weighted action score of one cell."""
    return math.fsum(gamma_terms(cell, follow_state, ctx))


def action_matrix(edge: StarEdge, providers: SimilarityProviders | None = None) -> HistoryMatrix:
    topics = edge.watch.topics
    values = np.zeros((len(topics), edge.watch.window_days))
    ctx = CreateContext(edge.plays, providers)
    row_of = {t: i for i, t in enumerate(topics)}
    for (topic, col), cell in edge.actions.items():
        values[row_of[topic], col] = gamma(cell, edge.follow_state, ctx)
    return HistoryMatrix(values, topics, edge.watch.window_days)


def homophily(p_c: ProfileEmbedding, p_i: ProfileEmbedding) -> float:
    """Profile similarity with negative values clamped to zero."""
    return max(0.0, profile_similarity(p_i, p_c))


def outflow(U: HistoryMatrix, p_c: ProfileEmbedding, p_i: ProfileEmbedding) -> float:
    sim = homophily(p_c, p_i)
    return sum((sim * r for r in _row_sums(_as_array(U))), 0.0)


@dataclass(frozen=True)
class TopicFlow:
    inflow: float
    outflow: float
    xi: float


@dataclass(frozen=True)
class EdgeFlows:
    inflow: float
    outflow: float
    xi: float
    per_topic: Mapping[str, TopicFlow] = field(default_factory=dict)


def edge_xi(watch: HistoryMatrix, U: HistoryMatrix, p_c: ProfileEmbedding, p_i: ProfileEmbedding) -> EdgeFlows:
    if not watch.compatible_with(U):
        raise ShapeError("watch and action matrices differ in topics or window")
    sim = homophily(p_c, p_i)
    per_topic = {}
    total_in = 0.0
    total_out = 0.0
    for topic, w_row, u_row in zip(watch.topics, _row_sums(watch.values), _row_sums(U.values)):
        o_row = sim * u_row
        total_in += w_row
        total_out += o_row
        if w_row or o_row:
            per_topic[topic] = TopicFlow(w_row, o_row, w_row - o_row)
    return EdgeFlows(total_in, total_out, total_in - total_out, per_topic)


@dataclass(frozen=True)
class ContagionReport:
    central: str
    edges: Mapping[str, EdgeFlows]
    total_inflow: float
    total_outflow: float
    total_xi: float

    @property
    def kappa(self) -> float:
        """Relative contagion ``O / I`` (higher means stronger)."""
        return self.total_outflow / self.total_inflow if self.total_inflow else math.nan


def aggregate(central: str, edges: Mapping[str, EdgeFlows]) -> ContagionReport:
    total_in = total_out = total_xi = 0.0
    for flows in edges.values():
        total_in += flows.inflow
        total_out += flows.outflow
        total_xi += flows.xi
    return ContagionReport(central, dict(edges), total_in, total_out, total_xi)


def estimate_edge(edge: StarEdge, p_c: ProfileEmbedding, providers: SimilarityProviders) -> EdgeFlows:
    U = action_matrix(edge, providers)
    return edge_xi(edge.watch, U, p_c, providers.profile_embedding(edge.neighbor))


def estimate_central_user(star: StarGraph, providers: SimilarityProviders) -> ContagionReport:
    p_c = providers.profile_embedding(star.central)
    edges = {e.neighbor: estimate_edge(e, p_c, providers) for e in star.edges}
    return aggregate(star.central, edges)


# -- batch evaluation --------------------------------------------------------

_worker_state: tuple | None = None


def _init_worker(log, providers, initial_followed):
    global _worker_state
    _worker_state = (log, providers, initial_followed)


def _estimate_one(central: str) -> ContagionReport:
    log, providers, initial_followed = _worker_state
    return estimate_central_user(extract_star_graph(log, central, initial_followed), providers)


def estimate_many(
    log: EventLog,
    centrals: Sequence[str],
    providers: SimilarityProviders,
    workers: int = 1,
    initial_followed: bool = False,
) -> list[ContagionReport]:
    """Reports for each central user, in the order given, for any worker count."""
    if workers <= 1 or len(centrals) <= 1:
        return [
            estimate_central_user(extract_star_graph(log, c, initial_followed), providers) for c in centrals
        ]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(log, providers, initial_followed)
    ) as pool:
        return list(pool.map(_estimate_one, centrals))


# -- report serialization ----------------------------------------------------

REPORT_COLUMNS = ("central", "neighbor", "topic", "inflow", "outflow", "xi")


def _fmt(x: float) -> str:
    return repr(float(x))


def report_rows(report: ContagionReport) -> list[tuple[str, ...]]:
    """Per-topic rows, a ``topic=*`` row per neighbor, and a ``neighbor=*`` total."""
    rows = []
    c = report.central
    for neighbor, flows in report.edges.items():
        for topic, tf in flows.per_topic.items():
            rows.append((c, neighbor, topic, _fmt(tf.inflow), _fmt(tf.outflow), _fmt(tf.xi)))
        rows.append((c, neighbor, "*", _fmt(flows.inflow), _fmt(flows.outflow), _fmt(flows.xi)))
    rows.append((c, "*", "*", _fmt(report.total_inflow), _fmt(report.total_outflow), _fmt(report.total_xi)))
    return rows


def write_report_csv(reports: Iterable[ContagionReport], fh: IO[str], header: bool = True) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(REPORT_COLUMNS)
    for report in reports:
        writer.writerows(report_rows(report))


# -- global diffusion oracle -------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiffusionGraph:
    """Dense weighted digraph with a scalar state per node.

    ``weights[i, j]`` is the (possibly asymmetric) edge velocity ``T_ij``.
    """

    weights: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        T = np.array(self.weights, dtype=float)
        phi = np.array(self.phi, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or phi.shape != (T.shape[0],):
            raise ShapeError(f"weights {T.shape} and state {phi.shape} do not describe one graph")
        if (T < 0).any():
            raise DomainError("edge weights must be nonnegative")
        if np.any(np.diag(T) != 0):
            raise DomainError("edge weights must have a zero diagonal")
        T.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "weights", T)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return len(self.phi)

    def laplacian(self) -> np.ndarray:
        return np.diag(self.weights.sum(axis=1)) - self.weights

    @classmethod
    def from_report(cls, report: ContagionReport, phi=None) -> "DiffusionGraph":
        """Star with the central user at node 0.

        Speed-matching weights: ``T[c, i]`` carries the outflow toward ``i`` and
        ``T[i, c]`` the inflow from ``i``.
        """
        n = len(report.edges) + 1
        T = np.zeros((n, n))
        for k, flows in enumerate(report.edges.values(), start=1):
            T[0, k] = flows.outflow
            T[k, 0] = flows.inflow
        return cls(T, np.zeros(n) if phi is None else phi)


def laplacian_step(g: DiffusionGraph, dt: float) -> DiffusionGraph:
    """One explicit Euler step of ``dPhi/dt = -(D - A) Phi`` with ``A = T``."""
    if dt <= 0:
        raise ParameterError("dt must be positive")
    max_rate = float(g.weights.sum(axis=1).max()) if g.n else 0.0
    if dt * max_rate > 1.0:
        raise ParameterError(f"dt={dt} unstable: dt * max row sum = {dt * max_rate:.4g} > 1")
    return DiffusionGraph(g.weights, g.phi - dt * (g.laplacian() @ g.phi))
