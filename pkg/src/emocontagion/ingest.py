"""Newline-delimited JSON readers/writers and star-graph extraction.

Three file formats are understood, one JSON object per line:

events::

    {"actor": str, "action": "play|like|download|share|create|follow|unfollow",
     "video": str?, "topic": str?, "creator": str, "post_day": int?, "day": int}

profiles::

    {"user": str, "age": int, "gender": str, "language": str, "city": str, "followers": int}

embeddings::

    {"video": str, "visual": [float, ...], "audio": [float, ...], "sentiment": 1 | -1}

With ``timestamps=True`` the ``day`` and ``post_day`` fields hold ISO-8601
timestamps instead of integer day indices.
"""

from __future__ import annotations

import datetime as dt
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import ConflictError, ContagionError, DataError, NotFoundError, ParseError, SchemaError
from .model import (
    ActionKind,
    ActivityEvent,
    Profile,
    StarGraph,
    Window,
    day_offset,
    make_edge,
    parse_timestamp,
    topic_ids,
)

log = logging.getLogger(__name__)

EVENT_FIELDS = frozenset({"actor", "action", "video", "topic", "creator", "post_day", "day"})
PROFILE_FIELDS = frozenset({"user", "age", "gender", "language", "city", "followers"})
EMBEDDING_FIELDS = frozenset({"video", "visual", "audio", "sentiment"})
VECTOR_FIELDS = frozenset({"user", "vector"})

_ACTIONS = {a.value: a for a in ActionKind}


@dataclass
class EventLog:
    """Day-sorted, validated events plus the topic set and window they live in."""

    events: tuple[ActivityEvent, ...]
    topics: tuple[str, ...]
    window: Window
    rejected: int = 0
    rejection_messages: tuple[str, ...] = ()
    _by_actor: dict | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.events)

    def by_actor(self, actor: str) -> tuple[ActivityEvent, ...]:
        if self._by_actor is None:
            index = defaultdict(list)
            for ev in self.events:
                index[ev.actor].append(ev)
            self._by_actor = {k: tuple(v) for k, v in index.items()}
        return self._by_actor.get(actor, ())

    @property
    def actors(self) -> tuple[str, ...]:
        self.by_actor("")
        return tuple(sorted(self._by_actor))


class ProfileTable(dict):
    """``user_id -> Profile`` mapping that raises :class:`NotFoundError` on misses."""

    def __missing__(self, key):
        raise NotFoundError(f"no profile for user '{key}'")


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    video_id: str
    visual: np.ndarray
    audio: np.ndarray
    sentiment: int

    def __post_init__(self):
        if self.sentiment not in (1, -1):
            raise SchemaError(f"sentiment must be +1 or -1, got {self.sentiment!r}", field="sentiment")


class EmbeddingStore(dict):
    """``video_id -> EmbeddingRecord`` with uniform vector dimensions."""

    visual_dim: int | None = None
    audio_dim: int | None = None

    def __missing__(self, key):
        raise NotFoundError(f"no embedding for video '{key}'")

    def add(self, rec: EmbeddingRecord, line: int | None = None) -> None:
        if self.visual_dim is None:
            self.visual_dim, self.audio_dim = len(rec.visual), len(rec.audio)
        elif (len(rec.visual), len(rec.audio)) != (self.visual_dim, self.audio_dim):
            raise SchemaError(
                f"vector dims ({len(rec.visual)}, {len(rec.audio)}) differ from file dims "
                f"({self.visual_dim}, {self.audio_dim})",
                line=line,
                field="visual",
            )
        if rec.video_id in self:
            raise ConflictError(f"duplicate embedding for video '{rec.video_id}'", line=line, field="video")
        self[rec.video_id] = rec


# -- low-level helpers -------------------------------------------------------


def _lines(stream) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for non-blank lines of bytes/text input."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for number, raw in enumerate(stream, start=1):
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
        text = text.strip()
        if text:
            yield number, text


def _decode(text: str, line: int, allowed: frozenset[str]) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=line) from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", line=line)
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SchemaError(f"unexpected field '{extra[0]}'", line=line, field=extra[0])
    return obj


def _require(obj: dict, name: str, kind, line: int, optional: bool = False):
    value = obj.get(name)
    if value is None:
        if optional:
            return None
        raise SchemaError(f"missing field '{name}'", line=line, field=name)
    ok = isinstance(value, kind) and not (kind is int and isinstance(value, bool))
    if kind is str and ok and not value:
        ok = False
    if not ok:
        raise SchemaError(f"field '{name}' has invalid value {value!r}", line=line, field=name)
    return value


# -- events ------------------------------------------------------------------


def _event_from_record(obj: dict, line: int, day_of) -> ActivityEvent:
    actor = _require(obj, "actor", str, line)
    action_name = _require(obj, "action", str, line)
    action = _ACTIONS.get(action_name)
    if action is None:
        raise SchemaError(f"unknown action '{action_name}'", line=line, field="action")
    creator = _require(obj, "creator", str, line)
    day = day_of(obj, "day", line)
    if action.carries_video:
        video = _require(obj, "video", str, line)
        topic = _require(obj, "topic", str, line)
        post_day = day_of(obj, "post_day", line)
    else:
        for name in ("video", "topic", "post_day"):
            if obj.get(name) is not None:
                raise SchemaError(f"{action_name} record must not carry '{name}'", line=line, field=name)
        video = topic = post_day = None
    try:
        return ActivityEvent(actor, action, creator, day, video, topic, post_day)
    except SchemaError as exc:
        raise type(exc)(str(exc), line=line, field=exc.field) from None


def parse_event_log(
    stream,
    window: Window | None = None,
    topics: Sequence[str] | None = None,
    *,
    timestamps: bool = False,
    window_start: dt.date | None = None,
    lenient: bool = False,
) -> EventLog:
    """Parse and validate an events stream into a day-sorted :class:`EventLog`.

    ``topics`` declares the topic set; when omitted it is the sorted set of
    topics seen in the file. Events dated outside ``window`` are rejected.
    In timestamp mode day indices count from ``window_start`` (default: the
    UTC date of the earliest event). With ``lenient=True`` bad lines are
    skipped and counted instead of aborting the parse.
    """
    window = window or Window()
    declared = topic_ids(topics) if topics is not None else None
    rejected: list[str] = []

    def fail(exc: ContagionError):
        if not lenient:
            raise exc
        rejected.append(str(exc))

    records: list[tuple[int, dict]] = []
    for line, text in _lines(stream):
        try:
            records.append((line, _decode(text, line, EVENT_FIELDS)))
        except SchemaError as exc:
            fail(exc)

    if timestamps:
        parsed_ts: dict[tuple[int, str], dt.datetime] = {}

        def ts_of(obj, name, line):
            key = (line, name)
            if key not in parsed_ts:
                raw = _require(obj, name, str, line)
                try:
                    parsed_ts[key] = parse_timestamp(raw)
                except ValueError:
                    raise SchemaError(f"field '{name}' is not an ISO-8601 timestamp", line=line, field=name) from None
            return parsed_ts[key]

        if window_start is None:
            earliest = None
            for line, obj in records:
                try:
                    ts = ts_of(obj, "day", line)
                except SchemaError:
                    continue
                earliest = ts if earliest is None or ts < earliest else earliest
            window_start = earliest.date() if earliest else dt.date(1970, 1, 1)

        def day_of(obj, name, line):
            offset = day_offset(ts_of(obj, name, line), window_start)
            if name == "day" and offset < 0:
                raise DataError(f"timestamp precedes window start {window_start}", line=line, field=name)
            return offset
    else:

        def day_of(obj, name, line):
            return _require(obj, name, int, line)

    events: list[ActivityEvent] = []
    seen_topics: set[str] = set()
    for line, obj in records:
        try:
            ev = _event_from_record(obj, line, day_of)
            if ev.event_day not in window:
                raise DataError(
                    f"day {ev.event_day} outside window [{window.start_day}, {window.end_day})",
                    line=line,
                    field="day",
                )
            if ev.topic is not None:
                if declared is not None and ev.topic not in declared:
                    raise SchemaError(f"undeclared topic '{ev.topic}'", line=line, field="topic")
                seen_topics.add(ev.topic)
        except SchemaError as exc:
            fail(exc)
            continue
        events.append(ev)

    if rejected:
        log.warning("skipped %d invalid event records", len(rejected))
    events.sort(key=lambda e: e.event_day)
    return EventLog(
        events=tuple(events),
        topics=declared if declared is not None else tuple(sorted(seen_topics)),
        window=window,
        rejected=len(rejected),
        rejection_messages=tuple(rejected[:20]),
    )


def event_to_record(ev: ActivityEvent) -> dict:
    rec = {"actor": ev.actor, "action": ev.action.value}
    if ev.video is not None:
        rec["video"] = ev.video
        rec["topic"] = ev.topic
    rec["creator"] = ev.creator
    if ev.post_day is not None:
        rec["post_day"] = ev.post_day
    rec["day"] = ev.event_day
    return rec


def write_event_log(events: Iterable[ActivityEvent], fh: IO[str]) -> int:
    n = 0
    for ev in events:
        fh.write(json.dumps(event_to_record(ev), separators=(",", ":")))
        fh.write("\n")
        n += 1
    return n


# -- profiles ----------------------------------------------------------------


def parse_profiles(stream) -> ProfileTable:
    """Parse a profiles stream. Duplicate user ids raise :class:`ConflictError`."""
    table = ProfileTable()
    for line, text in _lines(stream):
        obj = _decode(text, line, PROFILE_FIELDS)
        user = _require(obj, "user", str, line)
        if user in table:
            raise ConflictError(f"duplicate profile for user '{user}'", line=line, field="user")
        # RangeError from Profile propagates unchanged
        table[user] = Profile(
            user_id=user,
            age_years=_require(obj, "age", int, line),
            gender=_require(obj, "gender", str, line),
            language=_require(obj, "language", str, line),
            city=_require(obj, "city", str, line),
            follower_count=_require(obj, "followers", int, line),
        )
    return table


def write_profiles(profiles: Iterable[Profile], fh: IO[str]) -> None:
    for p in profiles:
        rec = {
            "user": p.user_id,
            "age": p.age_years,
            "gender": p.gender,
            "language": p.language,
            "city": p.city,
            "followers": p.follower_count,
        }
        fh.write(json.dumps(rec, separators=(",", ":")))
        fh.write("\n")


# -- embeddings --------------------------------------------------------------


def _vector(obj: dict, name: str, line: int) -> np.ndarray:
    raw = _require(obj, name, list, line)
    if not raw or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw):
        raise SchemaError(f"field '{name}' must be a nonempty list of numbers", line=line, field=name)
    vec = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise SchemaError(f"field '{name}' contains non-finite values", line=line, field=name)
    return vec


def parse_embeddings(stream) -> EmbeddingStore:
    store = EmbeddingStore()
    for line, text in _lines(stream):
        obj = _decode(text, line, EMBEDDING_FIELDS)
        sentiment = _require(obj, "sentiment", int, line)
        if sentiment not in (1, -1):
            raise SchemaError(f"sentiment must be 1 or -1, got {sentiment}", line=line, field="sentiment")
        rec = EmbeddingRecord(
            video_id=_require(obj, "video", str, line),
            visual=_vector(obj, "visual", line),
            audio=_vector(obj, "audio", line),
            sentiment=sentiment,
        )
        store.add(rec, line)
    return store


def write_embeddings(records: Iterable[EmbeddingRecord], fh: IO[str], digits: int = 5) -> None:
    for rec in records:
        line = {
            "video": rec.video_id,
            "visual": [round(float(x), digits) for x in rec.visual],
            "audio": [round(float(x), digits) for x in rec.audio],
            "sentiment": int(rec.sentiment),
        }
        fh.write(json.dumps(line, separators=(",", ":")))
        fh.write("\n")


def parse_profile_vectors(stream) -> dict[str, np.ndarray]:
    """Read ``{"user", "vector"}`` overrides, unit-normalizing each vector."""
    out: dict[str, np.ndarray] = {}
    for line, text in _lines(stream):
        obj = _decode(text, line, VECTOR_FIELDS)
        user = _require(obj, "user", str, line)
        vec = _vector(obj, "vector", line)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise SchemaError("profile vector has zero norm", line=line, field="vector")
        if user in out:
            raise ConflictError(f"duplicate vector for user '{user}'", line=line, field="user")
        out[user] = vec / norm
    return out


def load(path: str | Path, parser, **kwargs):
    """Open ``path`` in binary mode and hand it to ``parser``."""
    with open(path, "rb") as fh:
        return parser(fh, **kwargs)


# -- star graphs -------------------------------------------------------------


def extract_star_graph(log: EventLog, central: str, initial_followed: bool = False) -> StarGraph:
    """Build the localized star graph of ``central`` from its own actions.

    One edge per distinct user whose content ``central`` engaged with or whom
    it followed/unfollowed. Edges are ordered by neighbor id. Events that
    target ``central`` itself are left out and counted.
    """
    own = log.by_actor(central)
    if not own:
        raise NotFoundError(f"central user '{central}' does not appear as an actor")
    per_neighbor: dict[str, list[ActivityEvent]] = defaultdict(list)
    skipped = 0
    for ev in own:
        if ev.creator == central:
            skipped += 1
            continue
        per_neighbor[ev.creator].append(ev)
    edges = tuple(
        make_edge(n, per_neighbor[n], log.window, log.topics, initial_followed) for n in sorted(per_neighbor)
    )
    return StarGraph(central, edges, log.window, log.topics, skipped_self_events=skipped)
