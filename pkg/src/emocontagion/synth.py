"""Seeded synthetic social-activity corpora.

Generative process, per central user ``u``:

1. ``u`` gets a profile, a topic-interest distribution (flat Dirichlet over
   all topics) and a style vector.
2. ``u`` has about ``avg_neighbors`` neighbors. The first ``close_friends``
   are followed from day 0, draw more attention, and copy each profile
   attribute of ``u`` with probability ``(1 + h) / 2``; the others are
   discovered creators that copy attributes with probability ``h``
   (``h = homophily_level``). Neighbor style vectors are correlated with
   ``u``'s style with weight ``sqrt(h)``.
3. On each active day ``u`` plays Poisson(``plays_per_day``) videos. A play
   picks a neighbor by attention weight, a topic from ``u``'s interests and a
   reaction age (geometric, mean ``reaction_latency_mean_days``); the video is
   the neighbor's post on that topic from ``age`` days earlier, so replays of
   the same post share one video id.
4. Each play is liked / shared / downloaded on the same day with the
   configured probabilities, multiplied by ``negative_engagement_boost``
   for negative-sentiment videos.
5. On an active day ``u`` creates a post with probability ``create``. Its
   topic follows what ``u`` has watched so far, it is attributed to the
   neighbor whose content on that topic ``u`` watched most, and its sentiment
   mirrors a random video watched on that edge.
6. Discovered neighbors may be followed some days after the first play;
   followed neighbors may later be unfollowed.

Video embeddings are ``topic centroid + 0.7 * creator style + noise`` in
64 dimensions for both the visual and the audio vector; correlation between
a user's posts and a neighbor's therefore rises with ``homophily_level``.

Randomness comes from named sub-streams of one seed (``SeedSequence`` keyed
by CRC32 of the stream name and the user index), so the draws of one part of
the process do not move when another part changes.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import EmbeddingRecord, EmbeddingStore, EventLog, ProfileTable, write_embeddings, write_event_log, write_profiles
from .model import ActionKind, ActivityEvent, Profile, Window

EMBEDDING_DIM = 64
STYLE_WEIGHT = 0.7
NOISE_SCALE = 1.0
EMBEDDING_DIGITS = 5

GENDERS = ("female", "male")
LANGUAGES = ("hindi", "tamil", "telugu", "bengali", "marathi", "kannada")
CITIES = (
    "delhi", "mumbai", "chennai", "kolkata", "pune", "jaipur",
    "lucknow", "hyderabad", "patna", "indore", "bhopal", "surat",
)


@dataclass(frozen=True)
class EngagementRates:
    like: float = 0.12
    share: float = 0.03
    download: float = 0.04
    create: float = 0.15
    follow: float = 0.25
    unfollow: float = 0.10


@dataclass(frozen=True)
class SynthConfig:
    n_central: int = 48
    avg_neighbors: int = 30
    weeks: int = 8
    topics: int = 10
    negative_fraction: float = 0.3
    homophily_level: float = 0.3
    reaction_latency_mean_days: float = 1.5
    engagement_rate: EngagementRates = field(default_factory=EngagementRates)
    seed: int = 0
    plays_per_day: float = 12.0
    active_day_prob: float = 0.85
    close_friends: int = 5
    close_attention: float = 4.0
    negative_engagement_boost: float = 1.5

    def __post_init__(self):
        if isinstance(self.engagement_rate, dict):
            object.__setattr__(self, "engagement_rate", EngagementRates(**self.engagement_rate))
        probs = {
            "negative_fraction": self.negative_fraction,
            "homophily_level": self.homophily_level,
            "active_day_prob": self.active_day_prob,
            **{f"engagement_rate.{k}": v for k, v in asdict(self.engagement_rate).items()},
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if self.weeks < 1 or self.topics < 1 or self.n_central < 1 or self.avg_neighbors < 1:
            raise ConfigError("weeks, topics, n_central and avg_neighbors must be >= 1")
        if self.reaction_latency_mean_days < 0 or self.plays_per_day < 0:
            raise ConfigError("reaction latency and plays per day must be nonnegative")
        if self.close_friends < 0 or self.close_attention <= 0 or self.negative_engagement_boost < 0:
            raise ConfigError("close_friends, close_attention and negative_engagement_boost out of range")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("like", "share", "download"):
            if getattr(self.engagement_rate, name) * max(1.0, self.negative_engagement_boost) > 1.0:
                raise ConfigError(f"boosted {name} probability exceeds 1")

    @property
    def window(self) -> Window:
        return Window(0, 7 * self.weeks)

    def topic_ids(self) -> tuple[str, ...]:
        return tuple(f"t{k:03d}" for k in range(self.topics))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        return cls(**data)

    def with_(self, **changes) -> "SynthConfig":
        return replace(self, **changes)


@dataclass
class Corpus:
    log: EventLog
    profiles: ProfileTable
    embeddings: EmbeddingStore
    centrals: tuple[str, ...]

    def __iter__(self):
        # unpacks as (log, profiles, embeddings)
        return iter((self.log, self.profiles, self.embeddings))

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "events": out / "events.jsonl",
            "profiles": out / "profiles.jsonl",
            "embeddings": out / "embeddings.jsonl",
        }
        with open(paths["events"], "w", encoding="utf-8", newline="\n") as fh:
            write_event_log(self.log.events, fh)
        with open(paths["profiles"], "w", encoding="utf-8", newline="\n") as fh:
            write_profiles(self.profiles.values(), fh)
        with open(paths["embeddings"], "w", encoding="utf-8", newline="\n") as fh:
            write_embeddings(self.embeddings.values(), fh, digits=EMBEDDING_DIGITS)
        return paths


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode()), *index]))


def _random_profile(rng: np.random.Generator, user: str) -> Profile:
    return Profile(
        user_id=user,
        age_years=int(np.clip(round(rng.normal(27, 9)), 13, 75)),
        gender=GENDERS[rng.integers(len(GENDERS))],
        language=LANGUAGES[rng.integers(len(LANGUAGES))],
        city=CITIES[rng.integers(len(CITIES))],
        follower_count=int(rng.lognormal(5.0, 2.0)),
    )


def _homophilous_profile(rng: np.random.Generator, user: str, anchor: Profile, copy_prob: float) -> Profile:
    fresh = _random_profile(rng, user)
    copy = rng.random(5) < copy_prob
    return Profile(
        user_id=user,
        age_years=int(np.clip(anchor.age_years + rng.integers(-2, 3), 1, 120)) if copy[0] else fresh.age_years,
        gender=anchor.gender if copy[1] else fresh.gender,
        language=anchor.language if copy[2] else fresh.language,
        city=anchor.city if copy[3] else fresh.city,
        follower_count=int(anchor.follower_count * rng.uniform(0.5, 2.0)) if copy[4] else fresh.follower_count,
    )


def _geometric_ages(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    if mean == 0:
        rng.random(size)  # keep the stream aligned
        return np.zeros(size, dtype=np.int64)
    return rng.geometric(1.0 / (1.0 + mean), size=size) - 1


def _embedding(centroid: np.ndarray, style: np.ndarray, noise: np.ndarray) -> np.ndarray:
    return np.round(centroid + STYLE_WEIGHT * style + NOISE_SCALE * noise, EMBEDDING_DIGITS)


def _topic_centroids(cfg: SynthConfig) -> np.ndarray:
    rows = [substream(cfg.seed, "topic-centroid", k).normal(size=(2, EMBEDDING_DIM)) for k in range(cfg.topics)]
    return np.stack(rows)  # (topics, 2, dim): visual, audio


class _CentralGenerator:
    def __init__(self, cfg: SynthConfig, index: int, centroids: np.ndarray):
        self.cfg = cfg
        self.index = index
        self.central = f"u{index:03d}"
        self.centroids = centroids
        self.topics = cfg.topic_ids()
        self.days = cfg.window.days
        self.events: list[ActivityEvent] = []
        self.profiles: list[Profile] = []
        self.records: list[EmbeddingRecord] = []

    def run(self):
        cfg = self.cfg
        rng_p = substream(cfg.seed, "profiles", self.index)
        me = _random_profile(rng_p, self.central)
        self.profiles.append(me)

        scale = substream(cfg.seed, "neighbor-count", self.index).lognormal(0.0, 0.3)
        m = max(cfg.close_friends + 1, int(round(cfg.avg_neighbors * scale)))
        n_close = min(cfg.close_friends, m)
        self.neighbors = [f"{self.central}n{j:04d}" for j in range(m)]
        h = cfg.homophily_level
        for j, nbr in enumerate(self.neighbors):
            copy_prob = (1 + h) / 2 if j < n_close else h
            self.profiles.append(_homophilous_profile(substream(cfg.seed, "neighbor-profile", self.index, j), nbr, me, copy_prob))
        attention = substream(cfg.seed, "attention", self.index).exponential(1.0, size=m)
        attention[:n_close] = cfg.close_attention
        attention /= attention.sum()

        rng_s = substream(cfg.seed, "style", self.index)
        my_style = rng_s.normal(size=(2, EMBEDDING_DIM))
        self.styles = np.sqrt(h) * my_style + np.sqrt(1 - h) * rng_s.normal(size=(m, 2, EMBEDDING_DIM))
        interest = substream(cfg.seed, "interest", self.index).dirichlet(np.ones(cfg.topics))

        self._plays(attention, interest)
        self._creates(my_style, interest)
        self._follows(n_close)

    def _plays(self, attention, interest):
        cfg = self.cfg
        rng = substream(self.cfg.seed, "activity", self.index)
        self.active = rng.random(self.days) < cfg.active_day_prob
        counts = rng.poisson(cfg.plays_per_day, size=self.days) * self.active
        total = int(counts.sum())
        days = np.repeat(np.arange(self.days), counts)
        nbr = np.searchsorted(np.cumsum(attention), rng.random(total) * attention.sum(), side="right")
        nbr = np.minimum(nbr, len(attention) - 1)
        topic = np.minimum(
            np.searchsorted(np.cumsum(interest), rng.random(total) * interest.sum(), side="right"), cfg.topics - 1
        )
        ages = _geometric_ages(rng, cfg.reaction_latency_mean_days, total)
        u_react = rng.random((3, total))

        # one video per (neighbor, post day, topic); ids in first-seen order
        video_index: dict[tuple[int, int, int], int] = {}
        keys = []
        for j, d, t, a in zip(nbr.tolist(), days.tolist(), topic.tolist(), ages.tolist()):
            key = (j, d - a, t)
            if key not in video_index:
                video_index[key] = len(video_index)
                keys.append(key)
        rng_v = substream(cfg.seed, "video-content", self.index)
        noise = rng_v.normal(size=(len(keys), 2, EMBEDDING_DIM))
        negative = substream(cfg.seed, "video-sentiment", self.index).random(len(keys)) < cfg.negative_fraction
        video_ids = [f"{self.neighbors[j]}:{p}:{self.topics[t]}" for j, p, t in keys]
        for k, (j, p, t) in enumerate(keys):
            vis = _embedding(self.centroids[t, 0], self.styles[j, 0], noise[k, 0])
            aud = _embedding(self.centroids[t, 1], self.styles[j, 1], noise[k, 1])
            self.records.append(EmbeddingRecord(video_ids[k], vis, aud, -1 if negative[k] else 1))

        rates = cfg.engagement_rate
        reaction_kinds = (
            (ActionKind.LIKE, rates.like),
            (ActionKind.SHARE, rates.share),
            (ActionKind.DOWNLOAD, rates.download),
        )
        self.play_log: list[tuple[int, int, int, int]] = []  # (day, neighbor, topic, video index)
        for i, (j, d, t, a) in enumerate(zip(nbr.tolist(), days.tolist(), topic.tolist(), ages.tolist())):
            v = video_index[(j, d - a, t)]
            vid = video_ids[v]
            creator = self.neighbors[j]
            self.events.append(ActivityEvent(self.central, ActionKind.PLAY, creator, d, vid, self.topics[t], d - a))
            self.play_log.append((d, j, t, v))
            boost = cfg.negative_engagement_boost if negative[v] else 1.0
            for r, (kind, p) in enumerate(reaction_kinds):
                if u_react[r, i] < p * boost:
                    self.events.append(ActivityEvent(self.central, kind, creator, d, vid, self.topics[t], d - a))
        self.video_sentiment = [-1 if n else 1 for n in negative]

    def _creates(self, my_style, interest):
        cfg = self.cfg
        rng = substream(cfg.seed, "create", self.index)
        decide = rng.random(self.days)
        pick_topic = rng.random(self.days)
        pick_mimic = rng.random(self.days)
        noise = rng.normal(size=(self.days, 2, EMBEDDING_DIM))
        topic_plays = np.zeros(cfg.topics)
        edge_topic_plays: dict[tuple[int, int], int] = {}
        edge_videos: dict[int, list[int]] = {}
        plays_by_day: dict[int, list[tuple[int, int, int]]] = {}
        for d, j, t, v in self.play_log:
            plays_by_day.setdefault(d, []).append((j, t, v))
        n_created = 0
        for d in range(self.days):
            for j, t, v in plays_by_day.get(d, ()):
                topic_plays[t] += 1
                edge_topic_plays[(j, t)] = edge_topic_plays.get((j, t), 0) + 1
                edge_videos.setdefault(j, []).append(v)
            if not self.active[d] or decide[d] >= cfg.engagement_rate.create or not topic_plays.any():
                continue
            cdf = np.cumsum(topic_plays)
            t = min(int(np.searchsorted(cdf, pick_topic[d] * cdf[-1], side="right")), cfg.topics - 1)
            candidates = [(cnt, -j) for (j, tt), cnt in edge_topic_plays.items() if tt == t]
            j = -max(candidates)[1]
            watched = edge_videos[j]
            sentiment = self.video_sentiment[watched[min(int(pick_mimic[d] * len(watched)), len(watched) - 1)]]
            vid = f"{self.central}:c{n_created}"
            n_created += 1
            vis = _embedding(self.centroids[t, 0], my_style[0], noise[d, 0])
            aud = _embedding(self.centroids[t, 1], my_style[1], noise[d, 1])
            self.records.append(EmbeddingRecord(vid, vis, aud, sentiment))
            self.events.append(
                ActivityEvent(self.central, ActionKind.CREATE, self.neighbors[j], d, vid, self.topics[t], d)
            )

    def _follows(self, n_close):
        cfg = self.cfg
        first_play: dict[int, int] = {}
        for d, j, _, _ in self.play_log:
            first_play.setdefault(j, d)
        for j, nbr in enumerate(self.neighbors):
            rng = substream(cfg.seed, "follow", self.index, j)
            u_follow, u_unfollow = rng.random(2)
            follow_lag, unfollow_lag = rng.geometric(0.25, size=2)
            if j < n_close:
                follow_day = 0
            elif j in first_play and u_follow < cfg.engagement_rate.follow:
                follow_day = first_play[j] + int(follow_lag) - 1
            else:
                continue
            if follow_day >= self.days:
                continue
            self.events.append(ActivityEvent(self.central, ActionKind.FOLLOW, nbr, follow_day))
            unfollow_day = follow_day + int(unfollow_lag)
            if u_unfollow < cfg.engagement_rate.unfollow and unfollow_day < self.days:
                self.events.append(ActivityEvent(self.central, ActionKind.UNFOLLOW, nbr, unfollow_day))


def generate(cfg: SynthConfig) -> Corpus:
    """Generate a corpus; identical configs give identical corpora."""
    centroids = _topic_centroids(cfg)
    events: list[ActivityEvent] = []
    profiles = ProfileTable()
    store = EmbeddingStore()
    centrals = []
    for i in range(cfg.n_central):
        gen = _CentralGenerator(cfg, i, centroids)
        gen.run()
        centrals.append(gen.central)
        events.extend(gen.events)
        for p in gen.profiles:
            profiles[p.user_id] = p
        for rec in gen.records:
            store.add(rec)
    events.sort(key=lambda e: e.event_day)
    log = EventLog(tuple(events), cfg.topic_ids(), cfg.window)
    return Corpus(log, profiles, store, tuple(centrals))


def config_json(cfg: SynthConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)
