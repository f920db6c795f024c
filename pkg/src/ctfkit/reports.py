"""Report rendering: machine-readable delimited tables, human-readable text,
and matplotlib figures written alongside them.

Outputs are deterministic: analyzing the same log twice yields byte-identical
files.

File inventory (per selected report):
  incidents     -> incidents.jsonl, incidents.txt
  hints         -> hint_latency.csv, plotdata_hint_latency.csv,
                   fig_hint_latency.png
  metrics       -> player_metrics.csv
  correlations  -> correlations.csv
  plots         -> plotdata_vicinity_sweep.csv, fig_vicinity_sweep.png,
                   plotdata_chain_deltas.csv, fig_chain_deltas.png
"""

from __future__ import annotations

import csv
import json
import os
from datetime import timedelta
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import analytics  # noqa: E402
from .model import GameConfig, GameEvent  # noqa: E402

REPORT_NAMES = ("incidents", "hints", "metrics", "correlations", "plots")

_PNG_METADATA = {"Software": "ctfkit"}


def _save_fig(fig, path: str) -> None:
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_incidents(out_dir: str, incidents: Sequence[analytics.Incident]) -> list[str]:
    jsonl = os.path.join(out_dir, "incidents.jsonl")
    with open(jsonl, "w", encoding="utf-8") as fh:
        for inc in incidents:
            fh.write(json.dumps(inc.to_record(), sort_keys=True) + "\n")
    txt = os.path.join(out_dir, "incidents.txt")
    with open(txt, "w", encoding="utf-8") as fh:
        if not incidents:
            fh.write("No incidents detected.\n")
        for inc in incidents:
            fh.write(
                f"[{inc.severity.upper():6s}] {inc.kind}: "
                f"players={','.join(inc.players)} "
                f"challenges={','.join(inc.challenge_ids)} "
                f"evidence={json.dumps(inc.evidence, sort_keys=True)}\n"
            )
    return [jsonl, txt]


def write_hint_latency(
    out_dir: str, stats: Sequence[analytics.HintLatencyStats]
) -> list[str]:
    summary = os.path.join(out_dir, "hint_latency.csv")
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(
            ["hint_id", "challenge_id", "display_count", "n_latencies",
             "median_seconds", "mean_seconds", "q1_seconds", "q3_seconds"]
        )
        for s in stats:
            w.writerow(
                [s.hint_id, s.challenge_id, s.display_count, len(s.latencies),
                 f"{s.median:.3f}", f"{s.mean:.3f}", f"{s.q1:.3f}", f"{s.q3:.3f}"]
            )
    plotdata = os.path.join(out_dir, "plotdata_hint_latency.csv")
    with open(plotdata, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["hint_id", "latency_seconds"])
        for s in stats:
            for lat in s.latencies:
                w.writerow([s.hint_id, f"{lat:.3f}"])

    fig_path = os.path.join(out_dir, "fig_hint_latency.png")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if stats:
        data = [s.latencies for s in stats if s.latencies]
        labels = [s.hint_id for s in stats if s.latencies]
        if data:
            ax.boxplot(data, tick_labels=labels, showmeans=True)
            ax.set_yscale("log")
    ax.set_ylabel("time from hint display to correct flag [s]")
    ax.set_xlabel("hint")
    ax.set_title("Hint latency distributions (means as triangles)")
    fig.autofmt_xdate(rotation=45)
    fig.tight_layout()
    _save_fig(fig, fig_path)
    return [summary, plotdata, fig_path]


def write_metrics(out_dir: str, metrics: Sequence[analytics.PlayerMetrics]) -> list[str]:
    path = os.path.join(out_dir, "player_metrics.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(
            ["player_id", "total_score", "bonus_inclusive_score",
             "wrong_flag_count", "session_duration_seconds",
             "first_to_last_solve_seconds"]
        )
        for m in metrics:
            w.writerow(
                [m.player_id, m.total_score, m.bonus_inclusive_score,
                 m.wrong_flag_count, f"{m.session_duration:.3f}",
                 "" if m.first_to_last_solve is None else f"{m.first_to_last_solve:.3f}"]
            )
    return [path]


def write_correlations(out_dir: str, cells: Sequence[analytics.CorrelationCell]) -> list[str]:
    path = os.path.join(out_dir, "correlations.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["variable_x", "variable_y", "n", "rho", "p_value", "masked", "reason"])
        for c in cells:
            w.writerow(
                [c.variable_x, c.variable_y, c.n,
                 "" if c.rho is None else f"{c.rho:.6f}",
                 "" if c.p_value is None else f"{c.p_value:.6f}",
                 int(c.masked), c.reason or ""]
            )
    return [path]


def write_vicinity_sweep(
    out_dir: str, sweep: dict[str, list[tuple[float, int]]]
) -> list[str]:
    plotdata = os.path.join(out_dir, "plotdata_vicinity_sweep.csv")
    with open(plotdata, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["challenge_id", "window_seconds", "cumulative_pairs"])
        for cid in sorted(sweep):
            for window_s, count in sweep[cid]:
                w.writerow([cid, f"{window_s:.0f}", count])

    fig_path = os.path.join(out_dir, "fig_vicinity_sweep.png")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for cid in sorted(sweep):
        points = sweep[cid]
        ax.step(
            [p[0] / 60.0 for p in points],
            [p[1] for p in points],
            where="post",
            label=cid,
        )
    ax.set_xlabel("window [min]")
    ax.set_ylabel("cumulative pairs of same-challenge solves")
    ax.set_title("Pairs of players solving the same challenge within a window")
    if sweep:
        ax.legend(fontsize="x-small", ncol=2)
    fig.tight_layout()
    _save_fig(fig, fig_path)
    return [plotdata, fig_path]


def write_chain_deltas(
    out_dir: str,
    deltas: dict[tuple[str, str, str], list[tuple[str, float]]],
    config: GameConfig,
) -> list[str]:
    plotdata = os.path.join(out_dir, "plotdata_chain_deltas.csv")
    with open(plotdata, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(
            ["chain_id", "predecessor", "challenge_id", "player_id",
             "delta_seconds", "min_solve_seconds"]
        )
        for (chain_id, a, b) in sorted(deltas):
            min_b = config.challenge(b).min_solve_seconds
            for player, delta in sorted(deltas[(chain_id, a, b)]):
                w.writerow([chain_id, a, b, player, f"{delta:.3f}", f"{min_b:.0f}"])

    fig_path = os.path.join(out_dir, "fig_chain_deltas.png")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    keys = sorted(deltas)
    for x, key in enumerate(keys):
        values = [d for _p, d in deltas[key]]
        if values:
            ax.scatter([x] * len(values), values, s=12, alpha=0.6)
        min_b = config.challenge(key[2]).min_solve_seconds
        ax.hlines(min_b, x - 0.3, x + 0.3, colors="tab:blue")
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels([f"{a}→{b}" for _c, a, b in keys], fontsize="small")
    ax.set_yscale("log")
    ax.set_ylabel("time between consecutive chain solves [s]")
    ax.set_title("Chain solve deltas (lines mark the minimal possible solve time)")
    fig.tight_layout()
    _save_fig(fig, fig_path)
    return [plotdata, fig_path]


def read_marks(path: str) -> dict[str, dict[str, float]]:
    """External marks table: CSV with a player_id column; every other column
    is one mark variable."""
    marks: dict[str, dict[str, float]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "player_id" not in reader.fieldnames:
            raise ValueError(f"{path}: missing player_id column")
        for row in reader:
            pid = row.pop("player_id")
            marks[pid] = {
                k: float(v) for k, v in row.items() if v not in (None, "")
            }
    return marks


def analyze(
    log: Sequence[GameEvent],
    config: GameConfig,
    out_dir: str,
    reports: Sequence[str] = REPORT_NAMES,
    marks: Optional[dict[str, dict[str, float]]] = None,
    vicinity_window: Optional[timedelta] = None,
    min_displays: int = 11,
    session_gap: timedelta = timedelta(minutes=30),
    seed: int = 0,
) -> list[str]:
    """Run the selected analyses over a log and write their report files.

    Returns the list of written paths."""
    unknown = set(reports) - set(REPORT_NAMES)
    if unknown:
        raise ValueError(f"unknown reports: {sorted(unknown)}")
    os.makedirs(out_dir, exist_ok=True)
    window = vicinity_window or config.vicinity_window
    written: list[str] = []
    if "incidents" in reports:
        incidents = analytics.incident_report(log, config, vicinity_window=window)
        written += write_incidents(out_dir, incidents)
    if "hints" in reports:
        stats = analytics.hint_latency_report(log, config, min_displays=min_displays)
        written += write_hint_latency(out_dir, stats)
    if "metrics" in reports:
        metrics = analytics.player_metrics(log, config, session_gap=session_gap)
        written += write_metrics(out_dir, metrics)
    if "correlations" in reports:
        metrics = analytics.player_metrics(log, config, session_gap=session_gap)
        cells = analytics.correlation_report(metrics, marks or {}, seed=seed)
        written += write_correlations(out_dir, cells)
    if "plots" in reports:
        _inc, sweep = analytics.detect_time_vicinity(log, window)
        written += write_vicinity_sweep(out_dir, sweep)
        _inc2, deltas = analytics.detect_quick_chain_solves(log, config)
        written += write_chain_deltas(out_dir, deltas, config)
    return written
