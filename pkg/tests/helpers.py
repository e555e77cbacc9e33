import numpy as np
from emocontagion.ingest import EmbeddingRecord, EmbeddingStore
from emocontagion.model import ActionKind, ActivityEvent, Profile


def ev(action, creator="n1", day=0, video=None, topic="sports", post_day=None, actor="c"):
    action = ActionKind(action)
    if action.carries_video:
        video = video or f"{creator}-v{day}"
        post_day = day if post_day is None else post_day
    else:
        video = topic = post_day = None
    return ActivityEvent(actor, action, creator, day, video, topic, post_day)


def profile(user, age=25, gender="f", language="hi", city="delhi", followers=100):
    return Profile(user, age, gender, language, city, followers)


def correlated_pair(rho, dim=64, seed=0):
    """Two vectors whose Pearson correlation is exactly ``rho`` (to rounding)."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=dim)
    b = rng.normal(size=dim)
    a = (a - a.mean()) / a.std()
    b = b - b.mean()
    b -= a * (a @ b) / (a @ a)
    b /= b.std()
    return a, rho * a + np.sqrt(1 - rho * rho) * b


def store_of(records):
    store = EmbeddingStore()
    for r in records:
        store.add(r)
    return store


def record(video, visual, audio=None, sentiment=1):
    visual = np.asarray(visual, dtype=float)
    return EmbeddingRecord(video, visual, visual if audio is None else np.asarray(audio, float), sentiment)
