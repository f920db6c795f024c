"""Event-log analyses: flag-sharing detectors, hint-latency statistics,
per-player activity metrics, and rank correlation against external marks.

Every function here is a pure function of (log, config): same inputs, same
outputs. Detector findings are evidence for instructors, never automated
verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Any, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .model import GameConfig, GameEvent, InvalidArgument, normalize_flag

SEVERITY = {"time_vicinity": "weak", "cross_flag": "strong",
            "missing_download": "strong", "quick_chain_solve": "strong"}

_SEVERITY_ORDER = {"strong": 0, "weak": 1}


@dataclass(frozen=True)
class Incident:
    kind: str
    players: tuple[str, ...]
    challenge_ids: tuple[str, ...]
    evidence: dict[str, Any]
    severity: str

    def key(self) -> tuple[str, tuple[str, ...], str]:
        return (self.kind, self.players, self.challenge_ids[0])

    def sort_key(self):
        at = self.evidence.get("at") or self.evidence.get("later_at") or ""
        return (_SEVERITY_ORDER[self.severity], self.players, at, self.kind,
                self.challenge_ids)

    def to_record(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "severity": self.severity,
            "players": list(self.players),
            "challenges": list(self.challenge_ids),
            "evidence": self.evidence,
        }


@dataclass
class HintLatencyStats:
    hint_id: str
    challenge_id: str
    display_count: int
    latencies: list[float]  # seconds, one per displaying player who solved
    median: float = 0.0
    mean: float = 0.0
    q1: float = 0.0
    q3: float = 0.0

    def finalize(self) -> "HintLatencyStats":
        if self.latencies:
            arr = np.asarray(sorted(self.latencies))
            self.median = float(np.median(arr))
            self.mean = float(np.mean(arr))
            self.q1 = float(np.quantile(arr, 0.25))
            self.q3 = float(np.quantile(arr, 0.75))
        return self


@dataclass(frozen=True)
class CorrelationResult:
    variable_x: str
    variable_y: str
    n: int
    rho: float
    p_value: Optional[float]


@dataclass
class PlayerMetrics:
    player_id: str
    total_score: int = 0
    bonus_inclusive_score: int = 0
    wrong_flag_count: int = 0
    session_duration: float = 0.0  # seconds of gap-bounded active time
    first_to_last_solve: Optional[float] = None  # seconds; needs >= 2 solves


def _correct_submissions(log: Sequence[GameEvent]) -> list[GameEvent]:
    return [
        e for e in log
        if e.kind == "flag_submission" and e.payload["verdict"] == "correct"
    ]


def detect_time_vicinity(
    log: Sequence[GameEvent],
    window: timedelta,
    sweep_step: timedelta = timedelta(minutes=1),
) -> tuple[list[Incident], dict[str, list[tuple[float, int]]]]:
    """Pairs of distinct players who solved the same challenge within
    ``window`` of each other. Pairs are unordered: no direction is inferred.

    Also returns, per challenge, the cumulative pair count for a sweep of
    window values (one-minute steps from 0 up to ``window``), for plotting.
    """
    if window <= timedelta(0):
        raise InvalidArgument("window must be positive")
    by_challenge: dict[str, list[GameEvent]] = {}
    for e in _correct_submissions(log):
        by_challenge.setdefault(e.payload["challenge"], []).append(e)

    incidents: list[Incident] = []
    deltas_by_challenge: dict[str, list[float]] = {}
    for cid, solves in by_challenge.items():
        solves.sort(key=lambda e: e.at)
        deltas: list[float] = []
        for i in range(len(solves)):
            for j in range(i + 1, len(solves)):
                a, b = solves[i], solves[j]
                if a.player_id == b.player_id:
                    continue
                delta = (b.at - a.at).total_seconds()
                deltas.append(delta)
                if delta <= window.total_seconds():
                    pair = tuple(sorted((a.player_id, b.player_id)))
                    incidents.append(
                        Incident(
                            kind="time_vicinity",
                            players=pair,
                            challenge_ids=(cid,),
                            evidence={
                                "earlier_seq": a.seq,
                                "later_seq": b.seq,
                                "earlier_at": a.at.isoformat(),
                                "later_at": b.at.isoformat(),
                                "delta_seconds": delta,
                            },
                            severity=SEVERITY["time_vicinity"],
                        )
                    )
        deltas_by_challenge[cid] = deltas

    step = sweep_step.total_seconds()
    n_steps = int(window.total_seconds() // step)
    sweep: dict[str, list[tuple[float, int]]] = {}
    for cid, deltas in deltas_by_challenge.items():
        sweep[cid] = [
            (k * step, sum(1 for d in deltas if d <= k * step))
            for k in range(n_steps + 1)
        ]
    return incidents, sweep


def detect_cross_flag(log: Sequence[GameEvent], config: GameConfig) -> list[Incident]:
    """Submissions whose text is the correct flag of a *different* challenge.

    Fires on wrong and rejected_locked verdicts; never on a submission whose
    text matches its own challenge's flag. Evidence includes the time gap to
    the earliest correct submission of that flag by anyone (signed; None if
    the flag's challenge was never solved)."""
    flag_to_challenge = {
        normalize_flag(c.flag): c.challenge_id for c in config.challenges
    }
    earliest_correct: dict[str, GameEvent] = {}
    for e in _correct_submissions(log):
        earliest_correct.setdefault(e.payload["challenge"], e)

    incidents = []
    for e in log:
        if e.kind != "flag_submission":
            continue
        if e.payload["verdict"] not in ("wrong", "rejected_locked"):
            continue
        text = normalize_flag(e.payload["submitted"])
        source = flag_to_challenge.get(text)
        if source is None or source == e.payload["challenge"]:
            continue
        solved = earliest_correct.get(source)
        gap = (e.at - solved.at).total_seconds() if solved else None
        incidents.append(
            Incident(
                kind="cross_flag",
                players=(e.player_id,),
                challenge_ids=(e.payload["challenge"], source),
                evidence={
                    "seq": e.seq,
                    "at": e.at.isoformat(),
                    "verdict": e.payload["verdict"],
                    "flag_of_challenge": source,
                    "submitted_to": e.payload["challenge"],
                    "gap_to_first_solve_seconds": gap,
                    "first_solve_seq": solved.seq if solved else None,
                },
                severity=SEVERITY["cross_flag"],
            )
        )
    return incidents


def detect_missing_download(
    log: Sequence[GameEvent],
    config: GameConfig,
    require_all_assets: bool = False,
) -> list[Incident]:
    """Correct solves of asset-bearing challenges with no prior download of a
    required file by that player.

    By default downloading ANY required asset clears the challenge; strict
    mode requires all of them. Challenges without required assets never
    fire; one incident at most per (player, challenge)."""
    required: dict[str, set[str]] = {}
    for c in config.challenges:
        ids = {a.asset_id for a in c.assets if a.required_for_solve}
        if ids:
            required[c.challenge_id] = ids

    downloads: dict[tuple[str, str], set[str]] = {}  # (player, challenge) -> assets
    asset_owner = {
        a.asset_id: c.challenge_id for c in config.challenges for a in c.assets
    }
    incidents = []
    for e in log:
        if e.kind == "file_download":
            cid = asset_owner.get(e.payload["asset"])
            if cid is not None:
                downloads.setdefault((e.player_id, cid), set()).add(e.payload["asset"])
        elif e.kind == "flag_submission" and e.payload["verdict"] == "correct":
            cid = e.payload["challenge"]
            need = required.get(cid)
            if not need:
                continue
            got = downloads.get((e.player_id, cid), set()) & need
            ok = got == need if require_all_assets else bool(got)
            if not ok:
                incidents.append(
                    Incident(
                        kind="missing_download",
                        players=(e.player_id,),
                        challenge_ids=(cid,),
                        evidence={
                            "seq": e.seq,
                            "at": e.at.isoformat(),
                            "required_assets": sorted(need),
                            "downloaded_before_solve": sorted(got),
                        },
                        severity=SEVERITY["missing_download"],
                    )
                )
    return incidents


def detect_quick_chain_solves(
    log: Sequence[GameEvent], config: GameConfig
) -> tuple[list[Incident], dict[tuple[str, str, str], list[tuple[str, float]]]]:
    """Per player and consecutive chain pair (a, b): delta = solve(b) −
    solve(a); incident iff delta is strictly below b's minimal possible solve
    time. Also returns all deltas per pair for plotting."""
    solve_at: dict[tuple[str, str], GameEvent] = {}
    for e in _correct_submissions(log):
        solve_at.setdefault((e.player_id, e.payload["challenge"]), e)
    players = {pid for (pid, _c) in solve_at}

    incidents = []
    deltas: dict[tuple[str, str, str], list[tuple[str, float]]] = {}
    for chain in config.chains:
        for a, b in zip(chain.members, chain.members[1:]):
            key = (chain.chain_id, a, b)
            deltas[key] = []
            min_b = config.challenge(b).min_solve_seconds
            for pid in sorted(players):
                ea = solve_at.get((pid, a))
                eb = solve_at.get((pid, b))
                if ea is None or eb is None:
                    continue
                delta = (eb.at - ea.at).total_seconds()
                deltas[key].append((pid, delta))
                if delta < min_b:
                    incidents.append(
                        Incident(
                            kind="quick_chain_solve",
                            players=(pid,),
                            challenge_ids=(b, a),
                            evidence={
                                "chain_id": chain.chain_id,
                                "predecessor_seq": ea.seq,
                                "seq": eb.seq,
                                "at": eb.at.isoformat(),
                                "delta_seconds": delta,
                                "min_solve_seconds": min_b,
                            },
                            severity=SEVERITY["quick_chain_solve"],
                        )
                    )
    return incidents, deltas


def hint_latency_report(
    log: Sequence[GameEvent], config: GameConfig, min_displays: int = 11
) -> list[HintLatencyStats]:
    """Per-hint latency distributions: time from a player's hint display to
    their own later correct solve of that hint's challenge.

    Hints displayed fewer than ``min_displays`` times are excluded (the
    default keeps only hints used more than 10 times)."""
    if min_displays < 1:
        raise InvalidArgument("min_displays must be >= 1")
    hints = config.all_hints()
    displays: dict[str, dict[str, GameEvent]] = {}  # hint -> player -> first display
    for e in log:
        if e.kind == "hint_display":
            displays.setdefault(e.payload["hint"], {}).setdefault(e.player_id, e)
    solve_at: dict[tuple[str, str], GameEvent] = {}
    for e in _correct_submissions(log):
        solve_at.setdefault((e.player_id, e.payload["challenge"]), e)

    out = []
    for hint_id, per_player in sorted(displays.items()):
        hint = hints.get(hint_id)
        if hint is None:
            continue
        if len(per_player) < min_displays:
            continue
        latencies = []
        for pid, disp in per_player.items():
            solved = solve_at.get((pid, hint.challenge_id))
            if solved is not None and solved.at > disp.at:
                latencies.append((solved.at - disp.at).total_seconds())
        out.append(
            HintLatencyStats(
                hint_id=hint_id,
                challenge_id=hint.challenge_id,
                display_count=len(per_player),
                latencies=sorted(latencies),
            ).finalize()
        )
    return out


def player_metrics(
    log: Sequence[GameEvent],
    config: GameConfig,
    session_gap: timedelta = timedelta(minutes=30),
) -> list[PlayerMetrics]:
    """Per-player activity metrics: scores (with and without bonus
    challenges), wrong-flag count, gap-bounded session time, and the span
    from first to last solve."""
    if session_gap <= timedelta(0):
        raise InvalidArgument("session_gap must be positive")
    points = {c.challenge_id: c.points for c in config.challenges}
    is_bonus = {c.challenge_id: c.is_bonus for c in config.challenges}
    hint_costs = {h.hint_id: h.cost for h in config.all_hints().values()}

    metrics: dict[str, PlayerMetrics] = {}
    events_by_player: dict[str, list[GameEvent]] = {}
    solved: set[tuple[str, str]] = set()
    displayed: set[tuple[str, str]] = set()
    solve_times: dict[str, list] = {}
    for e in log:
        m = metrics.setdefault(e.player_id, PlayerMetrics(player_id=e.player_id))
        events_by_player.setdefault(e.player_id, []).append(e)
        if e.kind == "flag_submission":
            cid = e.payload["challenge"]
            if e.payload["verdict"] == "wrong":
                m.wrong_flag_count += 1
            elif e.payload["verdict"] == "correct" and (e.player_id, cid) not in solved:
                solved.add((e.player_id, cid))
                pts = points.get(cid, 0)
                m.bonus_inclusive_score += pts
                if not is_bonus.get(cid, False):
                    m.total_score += pts
                solve_times.setdefault(e.player_id, []).append(e.at)
        elif e.kind == "hint_display":
            hid = e.payload["hint"]
            if (e.player_id, hid) not in displayed:
                displayed.add((e.player_id, hid))
                cost = hint_costs.get(hid, 0)
                m.total_score -= cost
                m.bonus_inclusive_score -= cost

    gap = session_gap.total_seconds()
    for pid, events in events_by_player.items():
        duration = 0.0
        run_start = run_end = events[0].at
        for e in events[1:]:
            if (e.at - run_end).total_seconds() <= gap:
                run_end = e.at
            else:
                duration += (run_end - run_start).total_seconds()
                run_start = run_end = e.at
        duration += (run_end - run_start).total_seconds()
        metrics[pid].session_duration = duration
        times = solve_times.get(pid, [])
        if len(times) >= 2:
            metrics[pid].first_to_last_solve = (max(times) - min(times)).total_seconds()
    return sorted(metrics.values(), key=lambda m: m.player_id)


# ---------------------------------------------------------------------------
# Rank correlation

def spearman(
    xs: Sequence[float],
    ys: Sequence[float],
    permutations: int = 10_000,
    seed: int = 0,
) -> CorrelationResult:
    """Spearman's rank correlation: Pearson correlation of average-tie rank
    vectors, with a seeded two-sided permutation p-value.

    ``permutations=0`` skips the p-value (rho only)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InvalidArgument("inputs must be equal-length vectors")
    n = len(xs)
    if n < 3:
        raise InvalidArgument("need at least 3 observations")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise InvalidArgument("constant input has undefined rank correlation")

    rx = rankdata(xs, method="average")
    ry = rankdata(ys, method="average")
    rho = _pearson(rx, ry)

    p_value = None
    if permutations > 0:
        rng = np.random.default_rng(seed)
        rxc = rx - rx.mean()
        ryc = ry - ry.mean()
        denom = math.sqrt(float(rxc @ rxc) * float(ryc @ ryc))
        # All permutations at once: argsort of a random matrix gives one
        # uniform permutation per row.
        order = np.argsort(rng.random((permutations, n)), axis=1)
        perm = (ryc[order] @ rxc) / denom
        hits = int(np.sum(np.abs(perm) >= abs(rho) - 1e-12))
        p_value = (hits + 1) / (permutations + 1)
    return CorrelationResult("x", "y", n=n, rho=rho, p_value=p_value)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    return float((ac @ bc) / math.sqrt(float(ac @ ac) * float(bc @ bc)))


@dataclass(frozen=True)
class CorrelationCell:
    variable_x: str
    variable_y: str
    n: int
    rho: Optional[float]
    p_value: Optional[float]
    masked: bool
    reason: Optional[str] = None


METRIC_VARIABLES = (
    "total_score",
    "bonus_inclusive_score",
    "wrong_flag_count",
    "session_duration",
    "first_to_last_solve",
)


def correlation_report(
    metrics: Sequence[PlayerMetrics],
    external_marks: dict[str, dict[str, float]],
    alpha: float = 0.05,
    permutations: int = 10_000,
    seed: int = 0,
) -> list[CorrelationCell]:
    """Upper-triangular correlation matrix over game metrics and external
    mark columns; entries with p above ``alpha`` (or fewer than 3 overlapping
    players) are masked with a reason.

    ``external_marks`` maps player_id to a mark-name → value row; players
    missing either variable are excluded pairwise."""
    columns: dict[str, dict[str, float]] = {}
    for var in METRIC_VARIABLES:
        col = {}
        for m in metrics:
            v = getattr(m, var)
            if v is not None:
                col[m.player_id] = float(v)
        columns[var] = col
    mark_names = sorted({name for row in external_marks.values() for name in row})
    for name in mark_names:
        columns[f"mark:{name}"] = {
            pid: float(row[name])
            for pid, row in external_marks.items()
            if name in row
        }

    names = list(columns)
    cells = []
    for i, x in enumerate(names):
        for y in names[i + 1:]:
            shared = sorted(columns[x].keys() & columns[y].keys())
            if len(shared) < 3:
                cells.append(CorrelationCell(x, y, len(shared), None, None, True,
                                             "fewer than 3 overlapping players"))
                continue
            xs = [columns[x][p] for p in shared]
            ys = [columns[y][p] for p in shared]
            try:
                r = spearman(xs, ys, permutations=permutations, seed=seed)
            except InvalidArgument as exc:
                cells.append(CorrelationCell(x, y, len(shared), None, None, True, str(exc)))
                continue
            masked = r.p_value is not None and r.p_value > alpha
            cells.append(
                CorrelationCell(
                    x, y, r.n, r.rho, r.p_value, masked,
                    f"p > {alpha}" if masked else None,
                )
            )
    return cells


def incident_report(
    log: Sequence[GameEvent],
    config: GameConfig,
    vicinity_window: Optional[timedelta] = None,
) -> list[Incident]:
    """Run all four detectors and merge their findings into one
    deterministic list, strongest evidence first."""
    window = vicinity_window or config.vicinity_window
    vicinity, _sweep = detect_time_vicinity(log, window)
    cross = detect_cross_flag(log, config)
    missing = detect_missing_download(log, config)
    quick, _deltas = detect_quick_chain_solves(log, config)
    merged = vicinity + cross + missing + quick
    merged.sort(key=lambda i: i.sort_key())
    return merged
