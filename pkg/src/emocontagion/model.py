"""Domain types, the day grid, and per-edge history construction."""

from __future__ import annotations

import bisect
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, RangeError, SchemaError, ShapeError


class ActionKind(str, Enum):
    PLAY = "play"
    LIKE = "like"
    DOWNLOAD = "download"
    SHARE = "share"
    CREATE = "create"
    FOLLOW = "follow"
    UNFOLLOW = "unfollow"

    @property
    def carries_video(self) -> bool:
        return self not in (ActionKind.FOLLOW, ActionKind.UNFOLLOW)

    @property
    def is_reaction(self) -> bool:
        """Like, share and download: reactions scored with unit content factors."""
        return self in (ActionKind.LIKE, ActionKind.SHARE, ActionKind.DOWNLOAD)


# Actions that land in the action matrix (plays feed only the watch matrix).
OUTFLOW_ACTIONS = (ActionKind.LIKE, ActionKind.DOWNLOAD, ActionKind.SHARE, ActionKind.CREATE)


@dataclass(frozen=True)
class Topic:
    id: str
    display_name: str = ""

    def __post_init__(self):
        if not self.id:
            raise SchemaError("topic id must be nonempty", field="topic")


def topic_ids(topics: Iterable[Topic | str]) -> tuple[str, ...]:
    """Normalize a topic collection to an ordered tuple of unique ids."""
    ids = tuple(t.id if isinstance(t, Topic) else Topic(t).id for t in topics)
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate topic ids in topic set", field="topic")
    return ids


@dataclass(frozen=True, slots=True)
class ActivityEvent:
    """One timestamped action of ``actor``.

    For video-bearing actions ``creator`` is the user the video is attributed
    to; for follow/unfollow it is the target user. A ``create`` event names
    the neighbor the new post is attributed to in ``creator``.
    """

    actor: str
    action: ActionKind
    creator: str
    event_day: int
    video: str | None = None
    topic: str | None = None
    post_day: int | None = None

    def __post_init__(self):
        if self.event_day < 0:
            raise DataError(f"event_day must be >= 0, got {self.event_day}", field="day")
        if self.action.carries_video:
            for name in ("video", "topic", "post_day"):
                if getattr(self, name) is None:
                    raise SchemaError(f"{self.action.value} event requires '{name}'", field=name)
            if self.post_day > self.event_day:
                raise DataError(
                    f"post_day {self.post_day} is after event day {self.event_day}",
                    field="post_day",
                )
        else:
            for name in ("video", "topic", "post_day"):
                if getattr(self, name) is not None:
                    raise SchemaError(f"{self.action.value} event must not carry '{name}'", field=name)

    @property
    def age(self) -> int | None:
        """Days between posting and this action."""
        if self.post_day is None:
            return None
        return self.event_day - self.post_day


@dataclass(frozen=True)
class Profile:
    user_id: str
    age_years: int
    gender: str
    language: str
    city: str
    follower_count: int

    def __post_init__(self):
        if not 1 <= self.age_years <= 120:
            raise RangeError(f"age {self.age_years} outside [1, 120] for user {self.user_id}")
        if self.follower_count < 0:
            raise RangeError(f"negative follower count for user {self.user_id}")


@dataclass(frozen=True)
class Window:
    """Half-open day range ``[start_day, start_day + days)``."""

    start_day: int = 0
    days: int = 56

    def __post_init__(self):
        if self.days < 1:
            raise RangeError(f"window must span at least one day, got {self.days}")

    @property
    def end_day(self) -> int:
        return self.start_day + self.days

    def __contains__(self, day: int) -> bool:
        return self.start_day <= day < self.end_day

    def column(self, day: int) -> int:
        if day not in self:
            raise DataError(f"day {day} outside window [{self.start_day}, {self.end_day})", field="day")
        return day - self.start_day


@dataclass(frozen=True, eq=False)
class HistoryMatrix:
    """Nonnegative topics x days matrix (watch counts or action weights)."""

    values: np.ndarray
    topics: tuple[str, ...]
    window_days: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.topics), self.window_days):
            raise ShapeError(
                f"matrix shape {values.shape} does not match "
                f"{len(self.topics)} topics x {self.window_days} days"
            )
        if values.size and values.min() < 0:
            raise DataError("history matrix entries must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "topics", tuple(self.topics))

    @classmethod
    def zeros(cls, topics: Sequence[str], window_days: int) -> "HistoryMatrix":
        return cls(np.zeros((len(topics), window_days)), tuple(topics), window_days)

    def row(self, topic: str) -> np.ndarray:
        return self.values[self.topics.index(topic)]

    def __getitem__(self, key):
        topic, col = key
        return float(self.values[self.topics.index(topic), col])

    def compatible_with(self, other: "HistoryMatrix") -> bool:
        return self.topics == other.topics and self.window_days == other.window_days


@dataclass(frozen=True)
class FollowState:
    """Follow status toward one neighbor as a step function of the day.

    The status on day ``d`` is the one in force after every follow/unfollow
    event dated ``<= d`` has been applied, in chronological order.
    """

    initial: bool = False
    change_days: tuple[int, ...] = ()
    states: tuple[bool, ...] = ()

    @classmethod
    def replay(cls, timeline: Iterable[ActivityEvent], initial: bool = False) -> "FollowState":
        end_of_day: dict[int, bool] = {}
        current = initial
        # stable sort keeps file order for same-day toggles
        for ev in sorted(timeline, key=lambda e: e.event_day):
            if ev.action is ActionKind.FOLLOW:
                current = True
            elif ev.action is ActionKind.UNFOLLOW:
                current = False
            else:
                raise SchemaError(f"{ev.action.value} event in follow timeline")
            end_of_day[ev.event_day] = current
        days: list[int] = []
        states: list[bool] = []
        prev = initial
        for day in sorted(end_of_day):
            if end_of_day[day] != prev:
                days.append(day)
                states.append(end_of_day[day])
                prev = end_of_day[day]
        return cls(initial, tuple(days), tuple(states))

    def followed(self, day: int) -> bool:
        i = bisect.bisect_right(self.change_days, day)
        return self.states[i - 1] if i else self.initial

    def delta_f(self, day: int) -> float:
        return 1.0 if self.followed(day) else 0.5


@dataclass(frozen=True)
class EdgeHistories:
    watch: HistoryMatrix
    # (topic, column) -> outflow events in that cell, input order preserved
    actions: Mapping[tuple[str, int], tuple[ActivityEvent, ...]]
    follow_state: FollowState


@dataclass(frozen=True)
class StarEdge:
    neighbor: str
    watch: HistoryMatrix
    actions: Mapping[tuple[str, int], tuple[ActivityEvent, ...]]
    follow_state: FollowState
    follow_timeline: tuple[ActivityEvent, ...]
    plays: tuple[ActivityEvent, ...]
    events: tuple[ActivityEvent, ...]


@dataclass(frozen=True)
class StarGraph:
    central: str
    edges: tuple[StarEdge, ...]
    window: Window
    topics: tuple[str, ...]
    skipped_self_events: int = 0
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for pos, edge in enumerate(self.edges):
            if edge.neighbor == self.central:
                raise DataError(f"central user {self.central} cannot be its own neighbor")
            if edge.neighbor in index:
                raise DataError(f"duplicate edge for neighbor {edge.neighbor}")
            index[edge.neighbor] = pos
        object.__setattr__(self, "_index", index)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def neighbors(self) -> tuple[str, ...]:
        return tuple(e.neighbor for e in self.edges)

    def edge(self, neighbor: str) -> StarEdge:
        return self.edges[self._index[neighbor]]


UNIX_EPOCH_DATE = dt.date(1970, 1, 1)


def _as_utc(timestamp: dt.datetime) -> dt.datetime:
    if timestamp.tzinfo is None:
        return timestamp.replace(tzinfo=dt.timezone.utc)
    return timestamp.astimezone(dt.timezone.utc)


def day_offset(timestamp: dt.datetime, window_start: dt.date) -> int:
    """Signed whole UTC days from ``window_start`` midnight to ``timestamp``."""
    origin = dt.datetime.combine(window_start, dt.time(0), tzinfo=dt.timezone.utc)
    return (_as_utc(timestamp) - origin) // dt.timedelta(days=1)


def day_index(timestamp: dt.datetime, window_start: dt.date) -> int:
    """Floor of whole UTC days elapsed since ``window_start`` (midnight UTC)."""
    offset = day_offset(timestamp, window_start)
    if offset < 0:
        raise RangeError(f"timestamp {timestamp.isoformat()} precedes window start {window_start}")
    return offset


def parse_timestamp(text: str) -> dt.datetime:
    """ISO-8601 parse accepting a trailing ``Z``; naive values are taken as UTC."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return _as_utc(dt.datetime.fromisoformat(text))


def build_edge_histories(
    events: Iterable[ActivityEvent],
    window: Window,
    topics: Sequence[str],
    initial_followed: bool = False,
) -> EdgeHistories:
    """Tally one edge's events into its watch matrix, action cells and follow state."""
    topics = tuple(topics)
    row_of = {t: i for i, t in enumerate(topics)}
    watch = np.zeros((len(topics), window.days))
    actions: dict[tuple[str, int], list[ActivityEvent]] = defaultdict(list)
    timeline = []
    for ev in events:
        col = window.column(ev.event_day)
        if not ev.action.carries_video:
            timeline.append(ev)
            continue
        if ev.topic not in row_of:
            raise SchemaError(f"unknown topic '{ev.topic}'", field="topic")
        if ev.age < 0:
            raise DataError(f"negative age for video {ev.video}", field="post_day")
        if ev.action is ActionKind.PLAY:
            watch[row_of[ev.topic], col] += 1
        else:
            actions[(ev.topic, col)].append(ev)
    return EdgeHistories(
        watch=HistoryMatrix(watch, topics, window.days),
        actions={k: tuple(v) for k, v in actions.items()},
        follow_state=FollowState.replay(timeline, initial_followed),
    )


def make_edge(
    neighbor: str,
    events: Sequence[ActivityEvent],
    window: Window,
    topics: Sequence[str],
    initial_followed: bool = False,
) -> StarEdge:
    """Build a :class:`StarEdge` from the central user's events toward ``neighbor``."""
    for ev in events:
        if ev.creator != neighbor:
            raise DataError(f"event targets {ev.creator}, not edge neighbor {neighbor}")
    hist = build_edge_histories(events, window, topics, initial_followed)
    return StarEdge(
        neighbor=neighbor,
        watch=hist.watch,
        actions=hist.actions,
        follow_state=hist.follow_state,
        follow_timeline=tuple(
            sorted((e for e in events if not e.action.carries_video), key=lambda e: e.event_day)
        ),
        plays=tuple(
            sorted((e for e in events if e.action is ActionKind.PLAY), key=lambda e: e.event_day)
        ),
        events=tuple(events),
    )
