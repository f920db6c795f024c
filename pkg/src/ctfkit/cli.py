"""Command-line entry points: validate, serve, synth, analyze."""

from __future__ import annotations

import json
import os
import sys
from datetime import timedelta

import click
import yaml

from . import reports as reports_mod
from .engine import Game
from .events import EventStore, ImportFailed, export_events, load_log
from .model import load_config, save_config, validate_config
from .synth import CohortSpec, all_asset_bytes, generate


def parse_duration(text: str) -> timedelta:
    """Accepts plain seconds or a number with an s/m/h/d suffix."""
    text = text.strip()
    units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
    if text and text[-1] in units:
        return timedelta(seconds=float(text[:-1]) * units[text[-1]])
    return timedelta(seconds=float(text))


@click.group()
def main() -> None:
    """Jeopardy CTF game core with built-in event-log analytics."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--secrets", "secrets_path", type=click.Path(exists=True))
def validate(config_path: str, secrets_path: str | None) -> None:
    """Check a game definition and list every invariant violation."""
    config = load_config(config_path, secrets_path)
    violations = validate_config(config)
    if violations:
        for v in violations:
            click.echo(f"violation: {v}")
        sys.exit(1)
    click.echo(f"{config.game_id}: ok ({len(config.challenges)} challenges, "
               f"{len(config.chains)} chains, {len(config.players)} players)")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--secrets", "secrets_path", type=click.Path(exists=True))
@click.option("--listen", default="127.0.0.1:8000", show_default=True)
@click.option("--log", "log_path", type=click.Path(),
              help="Event log file (created if missing).")
@click.option("--assets-dir", type=click.Path(exists=True),
              help="Directory holding asset files named by asset_id.")
def serve(config_path: str, secrets_path: str | None, listen: str,
          log_path: str | None, assets_dir: str | None) -> None:
    """Run the HTTP/JSON game service."""
    import uvicorn

    from .service import create_app

    config = load_config(config_path, secrets_path)
    violations = validate_config(config)
    if violations:
        for v in violations:
            click.echo(f"violation: {v}", err=True)
        raise SystemExit(1)
    assets = {}
    if assets_dir:
        for name in os.listdir(assets_dir):
            with open(os.path.join(assets_dir, name), "rb") as fh:
                assets[name] = fh.read()
    store = EventStore(log_path) if log_path else EventStore()
    game = Game(config, store, assets=assets)
    app = create_app(game)
    host, _, port = listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--secrets", "secrets_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth(spec_path: str, config_path: str, secrets_path: str | None, out_dir: str) -> None:
    """Generate a labeled synthetic event log from a cohort spec."""
    with open(spec_path, "r", encoding="utf-8") as fh:
        spec = CohortSpec.from_dict(yaml.safe_load(fh) or {})
    config = load_config(config_path, secrets_path)
    events, truth, full_config = generate(spec, config)
    os.makedirs(out_dir, exist_ok=True)

    log_path = os.path.join(out_dir, "events.log")
    export_events(events, log_path)

    truth_path = os.path.join(out_dir, "ground_truth.jsonl")
    with open(truth_path, "w", encoding="utf-8") as fh:
        for exp in truth.expected:
            fh.write(json.dumps(
                {"kind": exp.kind, "players": list(exp.players),
                 "challenge": exp.challenge_id}, sort_keys=True) + "\n")

    roster_path = os.path.join(out_dir, "config_full.yaml")
    save_config(full_config, roster_path)
    click.echo(f"wrote {len(events)} events, {len(truth.expected)} planted incidents")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--secrets", "secrets_path", type=click.Path(exists=True))
@click.option("--reports", "report_list", default="all", show_default=True,
              help="Comma-separated subset of: "
                   + ",".join(reports_mod.REPORT_NAMES) + " (or 'all').")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--marks", "marks_path", type=click.Path(exists=True))
@click.option("--window", default=None, help="Vicinity window, e.g. 10m.")
@click.option("--min-displays", default=11, show_default=True, type=int)
@click.option("--session-gap", default="30m", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def analyze(log_path: str, config_path: str, secrets_path: str | None,
            report_list: str, out_dir: str, marks_path: str | None,
            window: str | None, min_displays: int, session_gap: str,
            seed: int) -> None:
    """Run the analytics over an event log and write report files."""
    try:
        config = load_config(config_path, secrets_path)
    except Exception as exc:
        click.echo(f"error: cannot read config {config_path}: {exc}", err=True)
        raise SystemExit(1)
    try:
        log = load_log(log_path)
    except ImportFailed as exc:
        click.echo(f"error: {log_path}: {exc}", err=True)
        raise SystemExit(1)
    marks = None
    if marks_path:
        try:
            marks = reports_mod.read_marks(marks_path)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(1)
    selected = (
        reports_mod.REPORT_NAMES
        if report_list == "all"
        else tuple(r.strip() for r in report_list.split(",") if r.strip())
    )
    try:
        written = reports_mod.analyze(
            log,
            config,
            out_dir,
            reports=selected,
            marks=marks,
            vicinity_window=parse_duration(window) if window else None,
            min_displays=min_displays,
            session_gap=parse_duration(session_gap),
            seed=seed,
        )
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(1)
    for path in written:
        click.echo(path)


if __name__ == "__main__":
    main()
