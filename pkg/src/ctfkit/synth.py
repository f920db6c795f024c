"""Synthetic cohort generator: labeled event logs with honest players and
planted misbehavior (flag sharing, premature chain solves, cross-flag
submissions, solves without required downloads).

All logs are produced by driving the real game engine, so they are valid by
construction and replayable. Generation is deterministic for a fixed seed.

Honest players all follow one shared timeline, each shifted by a per-player
stride strictly larger than the vicinity window plus all jitter. That makes
the honesty margins exact: no two honest players can solve the same
challenge within the window, no honest chain delta can dip below the
minimal solve time, and every required file is downloaded before its solve.
A detector finding against an honest player is therefore always a bug.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Any, Optional, Sequence

from .engine import Game, GameState
from .events import EventStore
from .model import (
    Challenge,
    Chain,
    FileAsset,
    GameConfig,
    GameEvent,
    Hint,
    InvalidArgument,
    PlayerRecord,
)


class ConsistencyViolation(RuntimeError):
    def __init__(self, seq: int, reason: str):
        super().__init__(f"event seq {seq}: {reason}")
        self.seq = seq


@dataclass(frozen=True)
class CohortSpec:
    seed: int = 0
    n_honest: int = 20
    n_colluding_pairs: int = 0
    n_non_downloaders: int = 0
    # Lognormal solve-time parameters per difficulty: (median seconds, sigma).
    solve_time: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {
            "basic": (90.0, 0.5),
            "medium": (240.0, 0.6),
            "advanced": (480.0, 0.7),
        }
    )
    # Honest separation beyond the vicinity window; must stay positive.
    vicinity_margin_seconds: float = 600.0
    # Honest chain deltas exceed min_solve_seconds by at least this much.
    chain_margin_seconds: float = 30.0
    # Per-player constant schedule shift, sampled in [0, jitter_seconds].
    jitter_seconds: float = 60.0

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> "CohortSpec":
        kwargs = dict(doc)
        if "solve_time" in kwargs:
            kwargs["solve_time"] = {
                k: tuple(v) for k, v in kwargs["solve_time"].items()
            }
        return CohortSpec(**kwargs)


@dataclass(frozen=True)
class ExpectedIncident:
    kind: str
    players: tuple[str, ...]
    challenge_id: str


@dataclass
class GroundTruth:
    expected: list[ExpectedIncident] = field(default_factory=list)

    def keys(self) -> set[tuple[str, tuple[str, ...], str]]:
        return {(e.kind, e.players, e.challenge_id) for e in self.expected}


def asset_bytes(asset_id: str) -> bytes:
    return f"asset-content:{asset_id}\n".encode()


def build_game_config(
    n_challenges: int = 8,
    n_chains: int = 1,
    opens_at: Optional[datetime] = None,
    game_id: str = "synth-game",
    vicinity_window: timedelta = timedelta(minutes=10),
) -> GameConfig:
    """A parameterized jeopardy game: cycling point values in 5-25, flags in
    FLAG{...} form, a required file asset on every third challenge, a pair
    of hints on the first two challenges, and trailing 3-member chains."""
    if n_challenges < 3 * n_chains + 1:
        raise InvalidArgument("not enough challenges for the requested chains")
    opens = opens_at or datetime(2026, 3, 1, tzinfo=timezone.utc)
    categories = ("basic", "medium", "advanced")
    point_cycle = (5, 10, 15, 20, 25)

    chains = []
    chain_member_ids: set[str] = set()
    for k in range(n_chains):
        start = n_challenges - 3 * (n_chains - k)
        members = tuple(f"ch{j + 1:02d}" for j in range(start, start + 3))
        chain_member_ids.update(members)
        chains.append(Chain(chain_id=f"chain{k + 1}", members=members))
    chain_min_solve: dict[str, float] = {}
    for chain in chains:
        chain_min_solve[chain.members[0]] = 20.0
        chain_min_solve[chain.members[1]] = 75.0
        chain_min_solve[chain.members[2]] = 120.0

    challenges = []
    for j in range(n_challenges):
        cid = f"ch{j + 1:02d}"
        hints: tuple[Hint, ...] = ()
        if j < 2:
            hints = (
                Hint(f"{cid}-h1", cid, 0, "which tool to use", f"Free hint for {cid}."),
                Hint(f"{cid}-h2", cid, 5, "concrete next step", f"Paid hint for {cid}."),
            )
        assets: tuple[FileAsset, ...] = ()
        if j % 3 == 0:
            aid = f"{cid}-file"
            assets = (
                FileAsset(
                    asset_id=aid,
                    challenge_id=cid,
                    filename=f"{cid}.bin",
                    content_digest=hashlib.sha256(asset_bytes(aid)).hexdigest(),
                    required_for_solve=True,
                ),
            )
        challenges.append(
            Challenge(
                challenge_id=cid,
                title=f"Challenge {j + 1}",
                category=categories[j % 3],
                points=point_cycle[j % 5],
                flag=f"FLAG{{{game_id}-{cid}}}",
                hints=hints,
                assets=assets,
                min_solve_seconds=chain_min_solve.get(cid, 20.0),
            )
        )
    return GameConfig(
        game_id=game_id,
        title="Synthetic jeopardy game",
        opens_at=opens,
        closes_at=opens + timedelta(days=60),
        challenges=tuple(challenges),
        chains=tuple(chains),
        anonymization_salt=b"synth-salt",
        vicinity_window=vicinity_window,
        flag_format=r"FLAG\{.*\}",
    )


def all_asset_bytes(config: GameConfig) -> dict[str, bytes]:
    return {
        a.asset_id: asset_bytes(a.asset_id)
        for c in config.challenges
        for a in c.assets
    }


@dataclass(frozen=True)
class _Slot:
    """Shared per-challenge timeline offsets, seconds from block start."""

    view: float
    downloads: tuple[tuple[str, float], ...]
    hint: Optional[tuple[str, float]]
    wrong: float
    solve: float
    feedback: Optional[float]


def _build_timeline(
    config: GameConfig, spec: CohortSpec, rng: random.Random
) -> dict[str, _Slot]:
    """One schedule shape shared by every player; per-player variation is a
    constant shift plus sub-gap noise, so every margin below survives it."""
    chain_members = {m for ch in config.chains for m in ch.members}
    timeline: dict[str, _Slot] = {}
    t = 15.0
    for idx, c in enumerate(config.challenges):
        view = t
        cursor = view
        downloads = []
        for a in c.assets:
            cursor += 6.0
            downloads.append((a.asset_id, cursor))
        hint = None
        if idx < 2 and c.hints:
            cursor += 8.0
            hint = (c.hints[0].hint_id, cursor)
        wrong = cursor + 7.0
        median, sigma = spec.solve_time.get(c.category.removeprefix("bonus-"), (120.0, 0.5))
        sample = rng.lognormvariate(math.log(median), sigma)
        if c.challenge_id in chain_members:
            floor = c.min_solve_seconds + spec.chain_margin_seconds + 5.0
            sample = min(max(sample, floor), floor + 60.0)
        else:
            sample = min(max(sample, 45.0), 900.0)
        solve = view + max(sample, wrong - view + 5.0)
        feedback = solve + 5.0 if idx == 0 else None
        timeline[c.challenge_id] = _Slot(
            view=view,
            downloads=tuple(downloads),
            hint=hint,
            wrong=wrong,
            solve=solve,
            feedback=feedback,
        )
        t = solve + 40.0
    return timeline


@dataclass(frozen=True)
class _Action:
    at: datetime
    order: int  # stable tie-break
    player: str
    op: str
    args: tuple


def generate(
    spec: CohortSpec, config: GameConfig
) -> tuple[list[GameEvent], GroundTruth, GameConfig]:
    """Produce (event log, ground truth, config with the generated roster).

    Colluding pairs plant one same-flag solve inside the vicinity window,
    one cross-flag submission (the still-locked second chain member's flag
    submitted to the chain head), and one premature chain solve.
    Non-downloaders solve one asset-bearing challenge without fetching its
    required file. Everyone else stays strictly inside the honesty margins.
    """
    if min(spec.n_honest, spec.n_colluding_pairs, spec.n_non_downloaders) < 0:
        raise InvalidArgument("cohort counts must be non-negative")
    if spec.vicinity_margin_seconds <= 0 or spec.chain_margin_seconds <= 0:
        raise InvalidArgument("honesty margins must be positive")
    if spec.n_colluding_pairs > 0 and not config.chains:
        raise InvalidArgument("colluding pairs require at least one chain")

    rng = random.Random(spec.seed)
    window = config.vicinity_window.total_seconds()
    stride = window + spec.vicinity_margin_seconds + 2 * spec.jitter_seconds

    chain_members = {m for ch in config.chains for m in ch.members}
    non_chain = [c for c in config.challenges if c.challenge_id not in chain_members]
    asset_challenges = [
        c
        for c in non_chain
        if any(a.required_for_solve for a in c.assets)
    ]
    if spec.n_non_downloaders > 0 and not asset_challenges:
        raise InvalidArgument("non-downloaders require a non-chain asset challenge")
    if spec.n_colluding_pairs > 0 and not non_chain:
        raise InvalidArgument("colluding pairs require a non-chain challenge")
    vicinity_target = non_chain[0].challenge_id if non_chain else None

    timeline = _build_timeline(config, spec, rng)

    roster: list[PlayerRecord] = []

    def add_player(pid: str) -> str:
        roster.append(
            PlayerRecord(
                player_id=pid,
                display_name=f"Student {pid.upper()}",
                auth_token=f"token-{pid}",
            )
        )
        return pid

    honest = [add_player(f"h{i + 1:03d}") for i in range(spec.n_honest)]
    pairs = [
        (add_player(f"src{i + 1:02d}"), add_player(f"cop{i + 1:02d}"))
        for i in range(spec.n_colluding_pairs)
    ]
    nodl = [add_player(f"nd{i + 1:02d}") for i in range(spec.n_non_downloaders)]

    actions: list[_Action] = []
    counter = 0

    def act(at: datetime, player: str, op: str, *args) -> None:
        nonlocal counter
        actions.append(_Action(at, counter, player, op, args))
        counter += 1

    def noise() -> float:
        return rng.uniform(0.0, 2.0)  # below every timeline gap

    def run_schedule(
        pid: str,
        block_start: datetime,
        skip_solve: frozenset[str] = frozenset(),
        skip_downloads: frozenset[str] = frozenset(),
    ) -> dict[str, datetime]:
        shift = timedelta(seconds=rng.uniform(0.0, spec.jitter_seconds))
        base = block_start + shift

        def at(offset: float) -> datetime:
            return base + timedelta(seconds=offset + noise())

        act(at(0.0), pid, "login")
        solves: dict[str, datetime] = {}
        for c in config.challenges:
            slot = timeline[c.challenge_id]
            act(at(slot.view), pid, "view", c.challenge_id)
            if c.challenge_id not in skip_downloads:
                for asset_id, off in slot.downloads:
                    act(at(off), pid, "download", asset_id)
            if slot.hint and rng.random() < 0.8:
                act(at(slot.hint[1]), pid, "hint", slot.hint[0])
            if rng.random() < 0.3:
                act(at(slot.wrong), pid, "submit", c.challenge_id,
                    f"nope-{rng.randrange(10 ** 6)}")
            if c.challenge_id not in skip_solve:
                solve_at = at(slot.solve)
                act(solve_at, pid, "submit", c.challenge_id, c.flag)
                solves[c.challenge_id] = solve_at
                if slot.feedback is not None:
                    act(at(slot.feedback), pid, "feedback", c.challenge_id,
                        rng.randint(1, 5))
        return solves

    truth = GroundTruth()
    base = config.opens_at + timedelta(minutes=2)
    block = 0

    def next_block() -> datetime:
        nonlocal block
        start = base + timedelta(seconds=block * stride)
        block += 1
        return start

    for pid in honest:
        run_schedule(pid, next_block())

    for src, cop in pairs:
        # Copier's block comes first; the source runs one stride later, then
        # the copier resubmits the source's flag shortly after the source
        # solves, so the copy lands inside the vicinity window.
        chain = config.chains[0]
        m1, m2 = chain.members[0], chain.members[1]
        cop_solves = run_schedule(
            cop, next_block(), skip_solve=frozenset({vicinity_target, m2})
        )
        src_solves = run_schedule(src, next_block())

        target_cfg = config.challenge(vicinity_target)
        lag = rng.uniform(30.0, max(31.0, window * 0.8))
        act(src_solves[vicinity_target] + timedelta(seconds=lag),
            cop, "submit", vicinity_target, target_cfg.flag)
        truth.expected.append(
            ExpectedIncident(
                "time_vicinity", tuple(sorted((src, cop))), vicinity_target
            )
        )

        # Cross-flag: the still-locked m2 flag submitted to m1 before the
        # copier has solved m1.
        m1_solve = cop_solves[m1]
        act(m1_solve - timedelta(seconds=rng.uniform(30.0, 50.0)),
            cop, "submit", m1, config.challenge(m2).flag)
        truth.expected.append(ExpectedIncident("cross_flag", (cop,), m1))

        # Premature chain solve of m2 right after m1, below its minimal
        # possible solve time.
        min_m2 = config.challenge(m2).min_solve_seconds
        quick = rng.uniform(5.0, max(6.0, min_m2 * 0.7))
        act(m1_solve + timedelta(seconds=quick), cop, "submit", m2,
            config.challenge(m2).flag)
        truth.expected.append(ExpectedIncident("quick_chain_solve", (cop,), m2))

    for pid in nodl:
        target = asset_challenges[0]
        run_schedule(
            pid, next_block(), skip_downloads=frozenset({target.challenge_id})
        )
        truth.expected.append(
            ExpectedIncident("missing_download", (pid,), target.challenge_id)
        )

    actions.sort(key=lambda a: (a.at, a.order))
    if actions and actions[-1].at >= config.closes_at:
        raise InvalidArgument(
            "generated schedule overruns closes_at; widen the game window"
        )

    full_config = replace(config, players=tuple(roster))
    game = Game(full_config, EventStore(), assets=all_asset_bytes(full_config))
    for a in actions:
        if a.op == "login":
            game.login(a.player, a.at)
        elif a.op == "view":
            game.view_challenge(a.player, a.args[0], a.at)
        elif a.op == "download":
            game.download_asset(a.player, a.args[0], a.at)
        elif a.op == "hint":
            game.display_hint(a.player, a.args[0], a.at)
        elif a.op == "submit":
            game.submit_flag(a.player, a.args[0], a.args[1], a.at)
        elif a.op == "feedback":
            game.record_feedback(a.player, a.args[0], a.args[1], None, a.at)
    return game.store.snapshot(), truth, full_config


def replay(
    events: Sequence[GameEvent],
    config: GameConfig,
    assets: Optional[dict[str, bytes]] = None,
) -> GameState:
    """Feed a log back through the engine's adjudication path and verify the
    engine reproduces it event for event.

    Any divergence (for example a logged correct verdict for a locked
    challenge) raises ConsistencyViolation naming the offending seq."""
    game = Game(config, EventStore(), assets=assets or all_asset_bytes(config))
    checked = 0

    def verify_through(upto: int) -> None:
        nonlocal checked
        produced = game.store.snapshot()
        while checked < min(upto, len(produced)):
            got = produced[checked]
            want = events[checked]
            if got.to_record() != want.to_record():
                raise ConsistencyViolation(
                    want.seq, f"engine produced {got.to_record()} instead"
                )
            checked += 1

    for e in events:
        if e.seq <= checked:
            continue  # already produced as a side effect (e.g. unlock)
        try:
            if e.kind == "login":
                game.login(e.player_id, e.at)
            elif e.kind == "challenge_view":
                game.view_challenge(e.player_id, e.payload["challenge"], e.at)
            elif e.kind == "file_download":
                game.download_asset(e.player_id, e.payload["asset"], e.at)
            elif e.kind == "hint_display":
                game.display_hint(e.player_id, e.payload["hint"], e.at)
            elif e.kind == "hint_offer":
                game.pending_hint_offers(e.player_id, e.at)
            elif e.kind == "flag_submission":
                game.submit_flag(
                    e.player_id, e.payload["challenge"], e.payload["submitted"], e.at
                )
            elif e.kind == "feedback_submit":
                game.record_feedback(
                    e.player_id,
                    e.payload["challenge"],
                    e.payload["rating"],
                    e.payload.get("comment"),
                    e.at,
                )
            elif e.kind == "challenge_unlock":
                raise ConsistencyViolation(
                    e.seq, "unlock event without a causing correct submission"
                )
        except ConsistencyViolation:
            raise
        except Exception as exc:
            raise ConsistencyViolation(e.seq, f"engine rejected event: {exc}") from exc
        verify_through(len(game.store))
        if checked < e.seq:
            raise ConsistencyViolation(e.seq, "engine did not produce this event")

    verify_through(len(events))
    if len(game.store) != len(events):
        raise ConsistencyViolation(
            len(events) + 1, "engine produced extra trailing events"
        )
    return game.state
