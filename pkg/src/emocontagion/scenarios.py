"""Paired synthetic experiments along the scenario axes.

Each trial generates a baseline corpus and a variant corpus from the same
seed; the variant changes one config axis. The metric is relative contagion
``kappa = O / I`` per central user, averaged over central users with nonzero
inflow, then over trials.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Callable, Iterable, Sequence

from .diffusion import estimate_many
from .errors import ConfigError, DegenerateScenarioError
from .similarity import SimilarityProviders
from .synth import SynthConfig, generate

Transform = Callable[[SynthConfig], SynthConfig]

PRESETS: dict[str, Transform] = {
    "negative_sentiment": lambda c: replace(c, negative_fraction=min(1.0, c.negative_fraction + 0.4)),
    "more_neighbors": lambda c: replace(c, avg_neighbors=2 * c.avg_neighbors),
    "homophilic_neighbors": lambda c: replace(c, homophily_level=min(1.0, c.homophily_level + 0.4)),
    "topic_diversity": lambda c: replace(c, topics=2 * c.topics),
}

# expected sign of the change
EXPECTED_DIRECTION = {
    "negative_sentiment": "increase",
    "more_neighbors": "decrease",
    "homophilic_neighbors": "increase",
    "topic_diversity": "decrease",
}

SCENARIO_COLUMNS = ("preset", "trial", "baseline_kappa", "variant_kappa", "pct_change")


@dataclass(frozen=True)
class CorpusMetric:
    kappa: float
    xi: float  # mean total xi over central users
    users: int


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    baseline: CorpusMetric
    variant: CorpusMetric

    @property
    def pct_change(self) -> float:
        return pct_change(self.baseline.kappa, self.variant.kappa)


@dataclass(frozen=True)
class ScenarioResult:
    preset: str
    baseline_metric: float
    variant_metric: float
    pct_change: float
    direction: str
    baseline_xi: float
    variant_xi: float
    trials: tuple[TrialResult, ...]


def pct_change(baseline: float, variant: float) -> float:
    if not baseline > 0:
        raise DegenerateScenarioError(f"baseline metric must be positive, got {baseline}")
    return 100.0 * (variant - baseline) / baseline


def corpus_metric(cfg: SynthConfig) -> CorpusMetric:
    corpus = generate(cfg)
    providers = SimilarityProviders(corpus.profiles, corpus.embeddings)
    reports = estimate_many(corpus.log, corpus.centrals, providers)
    live = [r for r in reports if r.total_inflow > 0]
    if not live:
        raise DegenerateScenarioError(f"no central user has nonzero inflow (seed {cfg.seed})")
    return CorpusMetric(
        kappa=math.fsum(r.kappa for r in live) / len(live),
        xi=math.fsum(r.total_xi for r in live) / len(live),
        users=len(live),
    )


def _resolve(preset) -> tuple[str, Transform]:
    if callable(preset):
        return getattr(preset, "__name__", "custom"), preset
    try:
        return preset, PRESETS[preset]
    except KeyError:
        raise ConfigError(f"unknown preset '{preset}'; choose from {sorted(PRESETS)}") from None


def trial_config(base: SynthConfig, k: int) -> SynthConfig:
    return replace(base, seed=(base.seed + k) % 2**64)


def _map(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_scenarios(
    presets: Sequence, base: SynthConfig | None = None, n_trials: int = 20, workers: int = 1
) -> list[ScenarioResult]:
    """Run several presets; trial ``k`` of every preset shares one baseline corpus."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    base = base or SynthConfig()
    resolved = [_resolve(p) for p in presets]
    configs = [trial_config(base, k) for k in range(n_trials)]
    baselines = _map(corpus_metric, configs, workers)
    variant_cfgs = [fn(cfg) for _, fn in resolved for cfg in configs]
    variants = _map(corpus_metric, variant_cfgs, workers)

    results = []
    for p, (name, _) in enumerate(resolved):
        trials = tuple(
            TrialResult(k, configs[k].seed, baselines[k], variants[p * n_trials + k]) for k in range(n_trials)
        )
        b = math.fsum(t.baseline.kappa for t in trials) / n_trials
        v = math.fsum(t.variant.kappa for t in trials) / n_trials
        change = pct_change(b, v)
        results.append(
            ScenarioResult(
                preset=name,
                baseline_metric=b,
                variant_metric=v,
                pct_change=change,
                direction="increase" if change >= 0 else "decrease",
                baseline_xi=math.fsum(t.baseline.xi for t in trials) / n_trials,
                variant_xi=math.fsum(t.variant.xi for t in trials) / n_trials,
                trials=trials,
            )
        )
    return results


def run_scenario(preset, base: SynthConfig | None = None, n_trials: int = 20, workers: int = 1) -> ScenarioResult:
    """Paired baseline/variant comparison for one preset name or config transform."""
    return run_scenarios([preset], base, n_trials, workers)[0]


def write_scenario_csv(results: Iterable[ScenarioResult], fh: IO[str], header: bool = True) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(SCENARIO_COLUMNS)
    for res in results:
        for t in res.trials:
            writer.writerow((res.preset, t.trial, repr(t.baseline.kappa), repr(t.variant.kappa), repr(t.pct_change)))
        writer.writerow((res.preset, "mean", repr(res.baseline_metric), repr(res.variant_metric), repr(res.pct_change)))
