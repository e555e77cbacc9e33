"""Command-line interface.

Every command writes its outputs plus ``manifest.json`` into ``--out``.
Exit codes: 0 ok, 2 bad input data, 3 unknown user or missing file,
4 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import re
import sys
from collections import Counter
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .bench import cost_model, run_local_bench
from .diffusion import estimate_many, write_report_csv
from .errors import (
    ConfigError,
    ContagionError,
    DegenerateScenarioError,
    NotFoundError,
    ParameterError,
)
from .ingest import EventLog, load, parse_embeddings, parse_event_log, parse_profile_vectors, parse_profiles
from .model import OUTFLOW_ACTIONS, ActionKind, Window
from .scenarios import PRESETS, run_scenarios, write_scenario_csv
from .similarity import SimilarityProviders
from .synth import SynthConfig, generate

EXIT_OK, EXIT_SCHEMA, EXIT_NOT_FOUND, EXIT_CONFIG = 0, 2, 3, 4
MANIFEST = "manifest.json"

log = logging.getLogger("emocontagion")


# -- helpers -----------------------------------------------------------------


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def safe_name(user: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", user)


def write_manifest(out: Path, command: str, config: dict, inputs: dict, seed: int, outputs: list[Path]) -> Path:
    manifest = {
        "tool": "emocontagion",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in sorted(inputs.items()) if p},
        "outputs": sorted(str(p.relative_to(out)) for p in outputs),
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _config_snapshot(args: argparse.Namespace) -> dict:
    skip = {"func", "out", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _window(args) -> Window:
    if args.window_days < 1:
        raise ConfigError("--window-days must be >= 1")
    return Window(0, args.window_days)


def _window_start(args) -> dt.date | None:
    if args.window_start is None:
        return None
    try:
        return dt.date.fromisoformat(args.window_start)
    except ValueError:
        raise ConfigError(f"--window-start '{args.window_start}' is not a YYYY-MM-DD date") from None


def _read_events(args) -> EventLog:
    if not args.events:
        raise ConfigError("--events is required")
    topics = [t for t in args.topics.split(",") if t] if args.topics else None
    return load(
        args.events,
        parse_event_log,
        window=_window(args),
        topics=topics,
        timestamps=args.timestamps,
        window_start=_window_start(args),
        lenient=args.lenient,
    )


def _providers(args) -> SimilarityProviders:
    if not args.profiles or not args.embeddings:
        raise ConfigError("--profiles and --embeddings are required")
    overrides = load(args.profile_vectors, parse_profile_vectors) if args.profile_vectors else {}
    return SimilarityProviders(
        load(args.profiles, parse_profiles), load(args.embeddings, parse_embeddings), overrides=overrides
    )


def _centrals(args, events: EventLog) -> list[str]:
    ids = list(dict.fromkeys(args.central)) if args.central else list(events.actors)
    known = set(events.actors)
    for c in ids:
        if c not in known:
            raise NotFoundError(f"central user '{c}' does not appear as an actor")
    return ids


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _event_inputs(args) -> dict:
    return {"events": args.events, "profiles": args.profiles, "embeddings": args.embeddings,
            "profile_vectors": args.profile_vectors}


# -- commands ----------------------------------------------------------------


def cmd_ingest(args) -> list[Path]:
    events = _read_events(args)
    summary = {
        "events": len(events),
        "rejected": events.rejected,
        "rejection_messages": list(events.rejection_messages),
        "actors": len(events.actors),
        "topics": list(events.topics),
        "window_days": events.window.days,
        "actions": dict(sorted(Counter(e.action.value for e in events.events).items())),
    }
    if args.profiles:
        summary["profiles"] = len(load(args.profiles, parse_profiles))
    if args.embeddings:
        summary["embeddings"] = len(load(args.embeddings, parse_embeddings))
    out = _out(args)
    path = out / "ingest_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{summary['events']} events, {summary['rejected']} rejected, {summary['actors']} actors")
    return [path]


SUMMARY_COLUMNS = ("central", "edges", "inflow", "outflow", "xi", "kappa")


def cmd_estimate(args) -> list[Path]:
    events = _read_events(args)
    providers = _providers(args)
    ids = _centrals(args, events)
    reports = estimate_many(events, ids, providers, workers=args.workers)
    out = _out(args)
    written = []
    for report in reports:
        path = out / f"report_{safe_name(report.central)}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_report_csv([report], fh)
        written.append(path)
    path = out / "summary.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for r in reports:
            writer.writerow((r.central, len(r.edges), repr(r.total_inflow), repr(r.total_outflow),
                             repr(r.total_xi), repr(r.kappa)))
    written.append(path)
    print(f"estimated {len(reports)} central users -> {out}")
    return written


DAILY_COLUMNS = ("day", "plays", "likes", "shares", "downloads", "creates", "follows", "unfollows", "near_contagion")
_DAILY_ACTIONS = (
    ActionKind.PLAY, ActionKind.LIKE, ActionKind.SHARE, ActionKind.DOWNLOAD,
    ActionKind.CREATE, ActionKind.FOLLOW, ActionKind.UNFOLLOW,
)
NEAR_CONTAGION_TOL = 0.1


def daily_rows(events: EventLog, central: str) -> list[tuple]:
    """Per-day action counts of ``central``; self-targeted events are left out.

    A day is flagged ``near_contagion`` when it has plays and the count of
    outflow actions (like, share, download, create) is within 10% of them.
    """
    counts = [Counter() for _ in range(events.window.days)]
    for ev in events.by_actor(central):
        if ev.creator != central:
            counts[events.window.column(ev.event_day)][ev.action] += 1
    rows = []
    for col, c in enumerate(counts):
        inflow = c[ActionKind.PLAY]
        outflow = sum(c[a] for a in OUTFLOW_ACTIONS)
        near = int(inflow > 0 and abs(inflow - outflow) / max(inflow, 1) < NEAR_CONTAGION_TOL)
        rows.append((events.window.start_day + col, *(c[a] for a in _DAILY_ACTIONS), near))
    return rows


def cmd_report(args) -> list[Path]:
    events = _read_events(args)
    ids = _centrals(args, events)
    out = _out(args)
    written = []
    for central in ids:
        path = out / f"daily_{safe_name(central)}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(DAILY_COLUMNS)
            writer.writerows(daily_rows(events, central))
        written.append(path)
    print(f"wrote daily activity for {len(ids)} users -> {out}")
    return written


def _synth_config(args) -> SynthConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("--config must hold a JSON object")
    for key in ("n_central", "avg_neighbors", "weeks", "n_topics", "negative_fraction", "homophily_level",
                "reaction_latency_mean_days", "plays_per_day"):
        value = getattr(args, key, None)
        if value is not None:
            data["topics" if key == "n_topics" else key] = value
    data["seed"] = args.seed
    try:
        return SynthConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"bad synth config: {exc}") from None


def cmd_synth(args) -> list[Path]:
    cfg = _synth_config(args)
    corpus = generate(cfg)
    out = _out(args)
    paths = corpus.write(out)
    config_path = out / "synth_config.json"
    config_path.write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{len(corpus.log)} events, {len(corpus.profiles)} profiles, {len(corpus.embeddings)} videos -> {out}")
    return [*paths.values(), config_path]


def cmd_scenario(args) -> list[Path]:
    presets = args.preset or list(PRESETS)
    for p in presets:
        if p not in PRESETS:
            raise ConfigError(f"unknown preset '{p}'; choose from {sorted(PRESETS)}")
    results = run_scenarios(presets, _synth_config(args), n_trials=args.trials, workers=args.workers)
    out = _out(args)
    path = out / "scenarios.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_scenario_csv(results, fh)
    for r in results:
        print(f"{r.preset}: kappa {r.baseline_metric:.4f} -> {r.variant_metric:.4f} ({r.pct_change:+.2f}%, {r.direction})")
    return [path]


def cmd_bench(args) -> list[Path]:
    out = _out(args)
    written = []
    if args.events:
        if not args.profiles or not args.embeddings:
            raise ConfigError("--profiles and --embeddings are required with --events")
        topics = [t for t in args.topics.split(",") if t] if args.topics else None
        report = run_local_bench(
            args.events, args.profiles, args.embeddings,
            repetitions=args.repetitions, workers=args.workers,
            centrals=args.central or None, window=_window(args), topics=topics,
        )
        path = out / "bench.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            report.write_csv(fh)
        written.append(path)
        for phase in ("parse", "extract", "estimate"):
            print(f"{phase}: median {report.median(phase):.1f} ms, peak {int(report.median(phase, 'peak_mem_bytes'))} B")
    est = cost_model(args.cost_c, args.cost_m)
    cost = {
        "C": est.C,
        "M": est.M,
        "global_storage_bytes": est.global_storage_bytes,
        "global_compute_seconds": est.global_compute_seconds,
        "local_storage_bytes": est.local_storage_bytes,
        "local_compute_seconds": est.local_compute_seconds,
        "reduction_factor": est.reduction_factor,
    }
    path = out / "cost_model.json"
    path.write_text(json.dumps(cost, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    print(f"global: {est.global_storage_bytes / 1e12:.2f} TB, {est.global_compute_seconds / 86400:.2f} days; "
          f"reduction x{est.reduction_factor:.0f}")
    return written


# -- parser ------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--events", help="events NDJSON file")
    p.add_argument("--profiles", help="profiles NDJSON file")
    p.add_argument("--embeddings", help="video embeddings NDJSON file")
    p.add_argument("--profile-vectors", help="optional precomputed profile vectors NDJSON file")
    p.add_argument("--central", action="append", help="central user id (repeatable; default: every actor)")
    p.add_argument("--window-days", type=int, default=56)
    p.add_argument("--window-start", help="YYYY-MM-DD day 0 for --timestamps (default: earliest event)")
    p.add_argument("--topics", help="comma-separated declared topic ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--lenient", action="store_true", help="skip invalid event lines instead of failing")
    p.add_argument("--timestamps", action="store_true", help="event days are ISO-8601 timestamps")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with SynthConfig fields")
    p.add_argument("--n-central", type=int)
    p.add_argument("--avg-neighbors", type=int)
    p.add_argument("--weeks", type=int)
    p.add_argument("--n-topics", type=int)
    p.add_argument("--negative-fraction", type=float)
    p.add_argument("--homophily-level", type=float)
    p.add_argument("--reaction-latency-mean-days", type=float)
    p.add_argument("--plays-per-day", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emocontagion", description="Localized emotion-contagion estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("ingest", parents=[common], help="validate input files and summarize them")
    p.set_defaults(func=cmd_ingest)
    p = sub.add_parser("estimate", parents=[common], help="inflow/outflow/xi per central user")
    p.set_defaults(func=cmd_estimate)
    p = sub.add_parser("report", parents=[common], help="daily activity table per central user")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    _synth_flags(p)
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("scenario", parents=[common], help="paired synthetic scenario experiments")
    _synth_flags(p)
    p.add_argument("--preset", action="append", help=f"one of {', '.join(PRESETS)} (repeatable; default all)")
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_scenario)
    p = sub.add_parser("bench", parents=[common], help="cost model and local estimator timings")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--cost-c", type=float, default=50)
    p.add_argument("--cost-m", type=float, default=1461)
    p.set_defaults(func=cmd_bench)
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (NotFoundError, FileNotFoundError)):
        return EXIT_NOT_FOUND
    if isinstance(exc, (ConfigError, ParameterError, DegenerateScenarioError)):
        return EXIT_CONFIG
    # schema, range, shape and the remaining data errors
    return EXIT_SCHEMA


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        outputs = args.func(args)
        inputs = _event_inputs(args)
        if getattr(args, "config", None):
            inputs["config"] = args.config
        write_manifest(Path(args.out), args.command, _config_snapshot(args), inputs, args.seed, outputs)
    except (ContagionError, FileNotFoundError) as exc:
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
