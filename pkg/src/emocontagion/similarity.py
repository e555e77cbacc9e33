"""Homophily and content-similarity factors.

* profile similarity: dot product of unit profile embeddings
* content correlation: Pearson correlation of visual / audio embeddings
* ``delta_c``: age-weighted log-scaled semantic score of a created video
  against the videos watched before it
* ``delta_e``: sentiment agreement in ``[1/2, 1]``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateInputError, NotFoundError, ShapeError
from .ingest import EmbeddingRecord, EmbeddingStore, ProfileTable
from .model import Profile

UNIT_NORM_TOL = 1e-9
FOLLOWER_LOG10_MAX = 8.0


@dataclass(frozen=True, eq=False)
class ProfileEmbedding:
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=float)
        if abs(np.linalg.norm(vec) - 1.0) > UNIT_NORM_TOL:
            raise ShapeError(f"profile embedding must have unit norm, got {np.linalg.norm(vec)}")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @classmethod
    def normalized(cls, vector) -> "ProfileEmbedding":
        vec = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise DegenerateInputError("cannot normalize a zero vector")
        return cls(vec / norm)

    @property
    def dim(self) -> int:
        return len(self.vector)


@dataclass(frozen=True)
class CorrelationConfig:
    rho_clamp_min: float = 0.0
    rho_clamp_max: float = 1.0 - 1e-6
    age_floor: int = 1

    def __post_init__(self):
        if not 0.0 <= self.rho_clamp_min < self.rho_clamp_max < 1.0:
            raise ConfigError("need 0 <= rho_clamp_min < rho_clamp_max < 1")
        if self.age_floor < 1:
            raise ConfigError("age_floor must be >= 1")


class ProfileEmbedder:
    """Transparent feature embedding of profiles.

    Layout: ``[age, log-followers, one-hot gender, one-hot language, one-hot city]``
    where age is min-max scaled over [1, 120] and ``log10(1 + followers)``
    over [0, 8] (clipped), followed by L2 normalization. Category vocabularies
    are the sorted distinct values seen when the embedder is fitted.
    """

    CATEGORICAL = ("gender", "language", "city")

    def __init__(self, vocab: Mapping[str, Sequence[str]]):
        self.vocab = {k: tuple(vocab[k]) for k in self.CATEGORICAL}
        self._offsets = {}
        offset = 2
        for k in self.CATEGORICAL:
            self._offsets[k] = {v: offset + i for i, v in enumerate(self.vocab[k])}
            offset += len(self.vocab[k])
        self.dim = offset

    @classmethod
    def fit(cls, profiles: Iterable[Profile]) -> "ProfileEmbedder":
        profiles = list(profiles)
        return cls({k: sorted({getattr(p, k) for p in profiles}) for k in cls.CATEGORICAL})

    def features(self, p: Profile) -> np.ndarray:
        vec = np.zeros(self.dim)
        vec[0] = (p.age_years - 1) / 119.0
        vec[1] = min(math.log10(1 + p.follower_count) / FOLLOWER_LOG10_MAX, 1.0)
        for k in self.CATEGORICAL:
            value = getattr(p, k)
            try:
                vec[self._offsets[k][value]] = 1.0
            except KeyError:
                raise NotFoundError(f"{k} '{value}' not in embedder vocabulary") from None
        return vec

    def embed(self, p: Profile) -> ProfileEmbedding:
        return ProfileEmbedding.normalized(self.features(p))


def embed_profile(p: Profile, embedder: ProfileEmbedder | None = None) -> ProfileEmbedding:
    """Embed one profile; without an embedder the vocabulary is just ``p`` itself."""
    embedder = embedder or ProfileEmbedder.fit([p])
    return embedder.embed(p)


def profile_similarity(a: ProfileEmbedding, b: ProfileEmbedding) -> float:
    if a.dim != b.dim:
        raise ShapeError(f"embedding dims differ: {a.dim} vs {b.dim}")
    if a is b or np.array_equal(a.vector, b.vector):
        # unit vectors: exact, whatever the rounding of the dot product
        return 1.0
    return min(1.0, max(-1.0, float(np.dot(a.vector, b.vector))))


def content_correlation(x, y) -> float:
    """Pearson correlation ``E[(x - mx)(y - my)] / (sd(x) sd(y))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"vectors must be 1-D of equal length, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise DegenerateInputError("correlation needs at least two components")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(np.dot(xc, xc) / len(x))
    sy = math.sqrt(np.dot(yc, yc) / len(y))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("correlation undefined for a constant vector")
    rho = float(np.dot(xc, yc) / len(x)) / (sx * sy)
    return min(1.0, max(-1.0, rho))


def clamp_rho(rho: float, config: CorrelationConfig) -> float:
    return min(config.rho_clamp_max, max(config.rho_clamp_min, rho))


def semantic_term(rho_visual: float, rho_audio: float, age: int, config: CorrelationConfig) -> float:
    """Score of one (created, watched) pair: ``-a log(1 - rho_D) - a log(1 - rho_Q)``."""
    a = max(age, config.age_floor)
    rd = clamp_rho(rho_visual, config)
    rq = clamp_rho(rho_audio, config)
    return -a * math.log1p(-rd) - a * math.log1p(-rq)


@dataclass
class SimilarityProviders:
    """Read-only lookups backing the homophily and content factors.

    Profile embeddings come from ``overrides`` when the user has one, else
    from the feature embedder fitted on ``profiles``.
    """

    profiles: ProfileTable
    content: EmbeddingStore
    config: CorrelationConfig = field(default_factory=CorrelationConfig)
    overrides: Mapping[str, np.ndarray] = field(default_factory=dict)
    embedder: ProfileEmbedder | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.embedder is None:
            self.embedder = ProfileEmbedder.fit(self.profiles.values())

    def profile_embedding(self, user: str) -> ProfileEmbedding:
        emb = self._cache.get(user)
        if emb is None:
            if user in self.overrides:
                emb = ProfileEmbedding.normalized(self.overrides[user])
            else:
                emb = self.embedder.embed(self.profiles[user])
            self._cache[user] = emb
        return emb

    def content_lookup(self, video: str) -> EmbeddingRecord:
        return self.content[video]


def delta_c(
    created: str,
    watched: Sequence[tuple[str, int]],
    providers: SimilarityProviders,
    config: CorrelationConfig | None = None,
) -> float:
    """Mean age-weighted semantic score of ``created`` over ``(video, age)`` pairs."""
    if not watched:
        raise DegenerateInputError("delta_c needs at least one watched video")
    config = config or providers.config
    made = providers.content_lookup(created)
    terms = []
    for video, age in watched:
        rec = providers.content_lookup(video)
        terms.append(
            semantic_term(
                content_correlation(made.visual, rec.visual),
                content_correlation(made.audio, rec.audio),
                age,
                config,
            )
        )
    return math.fsum(terms) / len(terms)


def delta_e(created_sentiment: int, watched_sentiments: Sequence[int]) -> float:
    if not len(watched_sentiments):
        raise DegenerateInputError("delta_e needs at least one watched sentiment")
    agree = sum(1 for s in watched_sentiments if s == created_sentiment)
    return 0.5 + 0.5 * agree / len(watched_sentiments)
