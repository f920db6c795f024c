"""Game rules over the event store: visibility and linear unlocking, flag
adjudication with immediate response, hint economics, scoring, scoreboard,
post-solve feedback, and timed hint offers.

All state is derived purely from the event log; rebuilding from the log
always reproduces the live state.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Optional

from .events import EventStore
from .model import (
    Challenge,
    GameConfig,
    GameEvent,
    Hint,
    InvalidArgument,
    ScoreboardEntry,
    alias_for,
    normalize_flag,
    with_added_hint,
)


class NotFound(LookupError):
    pass


class Forbidden(PermissionError):
    pass


class RejectedLocked(PermissionError):
    """Operation on a chain member whose predecessor is unsolved."""


class PreconditionViolation(RuntimeError):
    pass


@dataclass
class PlayerState:
    solved: dict[str, datetime] = field(default_factory=dict)
    hints_displayed: set[str] = field(default_factory=set)
    hints_offered: set[str] = field(default_factory=set)
    feedback_given: set[str] = field(default_factory=set)
    first_view: dict[str, datetime] = field(default_factory=dict)
    score: int = 0
    logged_in: bool = False
    last_solve_at: Optional[datetime] = None


@dataclass
class GameState:
    """Replayable derived state: solves, hint displays, scores, solve counts."""

    players: dict[str, PlayerState] = field(default_factory=dict)
    solve_counts: dict[str, int] = field(default_factory=dict)

    def player(self, player_id: str) -> PlayerState:
        return self.players.setdefault(player_id, PlayerState())

    def apply(self, event: GameEvent, points: dict[str, int], hint_costs: dict[str, int]) -> None:
        ps = self.player(event.player_id)
        if event.kind == "login":
            ps.logged_in = True
        elif event.kind == "challenge_view":
            ps.first_view.setdefault(event.payload["challenge"], event.at)
        elif event.kind == "flag_submission":
            if event.payload["verdict"] == "correct":
                cid = event.payload["challenge"]
                if cid not in ps.solved:
                    ps.solved[cid] = event.at
                    ps.score += points.get(cid, 0)
                    ps.last_solve_at = event.at
                    self.solve_counts[cid] = self.solve_counts.get(cid, 0) + 1
        elif event.kind == "hint_display":
            hid = event.payload["hint"]
            if hid not in ps.hints_displayed:
                ps.hints_displayed.add(hid)
                ps.score -= hint_costs.get(hid, 0)
        elif event.kind == "hint_offer":
            ps.hints_offered.add(event.payload["hint"])
        elif event.kind == "feedback_submit":
            ps.feedback_given.add(event.payload["challenge"])
        # challenge_unlock carries no state: unlocking is derived from solves.

    def fingerprint(self) -> str:
        """Order-independent digest of the full derived state, for
        replay-determinism checks."""
        h = hashlib.sha256()
        for pid in sorted(self.players):
            ps = self.players[pid]
            h.update(pid.encode())
            h.update(str(sorted((c, t.isoformat()) for c, t in ps.solved.items())).encode())
            h.update(str(sorted(ps.hints_displayed)).encode())
            h.update(str(sorted(ps.hints_offered)).encode())
            h.update(str(sorted(ps.feedback_given)).encode())
            h.update(str(ps.score).encode())
        h.update(str(sorted(self.solve_counts.items())).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class Verdict:
    verdict: str
    points_awarded: int = 0


class Game:
    """One running game. Mutating operations are serialized through a single
    lock; reads run against the latest applied state."""

    def __init__(
        self,
        config: GameConfig,
        store: Optional[EventStore] = None,
        assets: Optional[dict[str, bytes]] = None,
    ):
        self.config = config
        self.store = store if store is not None else EventStore()
        self.assets = assets or {}
        self.state = GameState()
        self._lock = threading.Lock()
        self._rebuild_indexes()
        for event in self.store.snapshot():
            self._apply(event)

    def _rebuild_indexes(self) -> None:
        self._challenges = {c.challenge_id: c for c in self.config.challenges}
        self._hints = self.config.all_hints()
        self._points = {c.challenge_id: c.points for c in self.config.challenges}
        self._hint_costs = {h.hint_id: h.cost for h in self._hints.values()}

    def _apply(self, event: GameEvent) -> None:
        self.state.apply(event, self._points, self._hint_costs)

    def _append(self, player_id: str, kind: str, payload: dict[str, Any], at: datetime) -> GameEvent:
        event = self.store.append(player_id, kind, payload, at)
        self._apply(event)
        return event

    # -- visibility -------------------------------------------------------

    def is_open(self, now: datetime) -> bool:
        return self.config.opens_at <= now <= self.config.closes_at

    def is_unlocked(self, player_id: str, challenge_id: str) -> bool:
        chain = self.config.chain_of(challenge_id)
        if chain is None:
            return True
        pred = chain.predecessor(challenge_id)
        if pred is None:
            return True
        return pred in self.state.player(player_id).solved

    def visible_challenges(self, player_id: str, now: datetime) -> list[dict[str, Any]]:
        """Challenges this player may see: every non-chain challenge plus
        chain members whose predecessor they solved. Never includes flags or
        hint bodies; hints are summarized as cost and topic only."""
        if self.config.player(player_id) is None:
            raise NotFound(f"unknown player {player_id!r}")
        ps = self.state.player(player_id)
        out = []
        for c in self.config.challenges:
            if not self.is_unlocked(player_id, c.challenge_id):
                continue
            out.append(
                {
                    "challenge_id": c.challenge_id,
                    "title": c.title,
                    "category": c.category,
                    "points": c.points,
                    "solved": c.challenge_id in ps.solved,
                    "hints": [
                        {
                            "hint_id": h.hint_id,
                            "cost": h.cost,
                            "topic_label": h.topic_label,
                            "displayed": h.hint_id in ps.hints_displayed,
                        }
                        for h in c.hints
                        if h.is_released(now)
                    ],
                }
            )
        return out

    def view_challenge(self, player_id: str, challenge_id: str, now: datetime) -> dict[str, Any]:
        """Full challenge description; logs a challenge_view event."""
        c = self._challenges.get(challenge_id)
        if c is None or self.config.player(player_id) is None:
            raise NotFound(challenge_id)
        if not self.is_unlocked(player_id, challenge_id):
            raise RejectedLocked(challenge_id)
        with self._lock:
            self._append(player_id, "challenge_view", {"challenge": challenge_id}, now)
        ps = self.state.player(player_id)
        return {
            "challenge_id": c.challenge_id,
            "title": c.title,
            "category": c.category,
            "points": c.points,
            "solved": challenge_id in ps.solved,
            "assets": [
                {"asset_id": a.asset_id, "filename": a.filename} for a in c.assets
            ],
            "hints": [
                {
                    "hint_id": h.hint_id,
                    "cost": h.cost,
                    "topic_label": h.topic_label,
                    "displayed": h.hint_id in ps.hints_displayed,
                }
                for h in c.hints
                if h.is_released(now)
            ],
        }

    # -- adjudication -----------------------------------------------------

    def submit_flag(self, player_id: str, challenge_id: str, text: str, now: datetime) -> Verdict:
        """Adjudicate a flag with an immediate verdict. Every call (including
        rejections) appends a flag_submission event with the submitted text;
        wrong submissions are unlimited and never change the score."""
        c = self._challenges.get(challenge_id)
        if c is None:
            raise NotFound(challenge_id)
        if self.config.player(player_id) is None:
            raise NotFound(player_id)
        submitted = normalize_flag(text)
        with self._lock:
            ps = self.state.player(player_id)
            if not self.is_open(now):
                verdict = "rejected_closed"
            elif not self.is_unlocked(player_id, challenge_id):
                verdict = "rejected_locked"
            elif challenge_id in ps.solved:
                verdict = "rejected_already_solved"
            elif submitted == normalize_flag(c.flag):
                verdict = "correct"
            else:
                verdict = "wrong"
            self._append(
                player_id,
                "flag_submission",
                {"challenge": challenge_id, "submitted": submitted, "verdict": verdict},
                now,
            )
            if verdict != "correct":
                return Verdict(verdict)
            chain = self.config.chain_of(challenge_id)
            if chain is not None:
                succ = chain.successor(challenge_id)
                if succ is not None:
                    self._append(player_id, "challenge_unlock", {"challenge": succ}, now)
            return Verdict("correct", points_awarded=c.points)

    # -- hints ------------------------------------------------------------

    def display_hint(self, player_id: str, hint_id: str, now: datetime) -> str:
        """First display deducts the cost once and logs hint_display; repeats
        return the body free of charge with no new event."""
        h = self._hints.get(hint_id)
        if h is None or not h.is_released(now):
            # Unreleased backup hints are indistinguishable from nonexistent.
            raise NotFound(hint_id)
        if self.config.player(player_id) is None:
            raise NotFound(player_id)
        if not self.is_unlocked(player_id, h.challenge_id):
            raise RejectedLocked(h.challenge_id)
        with self._lock:
            ps = self.state.player(player_id)
            if hint_id not in ps.hints_displayed:
                self._append(player_id, "hint_display", {"hint": hint_id}, now)
        return h.body

    def add_hint(
        self,
        instructor_id: str,
        challenge_id: str,
        hint: Hint,
        now: datetime,
        released_at: Optional[datetime] = None,
    ) -> str:
        """Instructor-only mid-game hint insertion (backup hints)."""
        caller = self.config.player(instructor_id)
        if caller is None or caller.role != "instructor":
            raise Forbidden("instructor role required")
        if challenge_id not in self._challenges:
            raise NotFound(challenge_id)
        if hint.hint_id in self._hints:
            raise PreconditionViolation(f"hint id {hint.hint_id!r} already exists")
        stored = Hint(
            hint_id=hint.hint_id,
            challenge_id=challenge_id,
            cost=hint.cost,
            topic_label=hint.topic_label,
            body=hint.body,
            released_at=released_at if released_at is not None else now,
        )
        with self._lock:
            self.config = with_added_hint(self.config, stored)
            self._rebuild_indexes()
        return stored.hint_id

    def pending_hint_offers(self, player_id: str, now: datetime) -> list[dict[str, str]]:
        """Offer the first undisplayed hint of any unsolved challenge the
        player first viewed longer than hint_offer_dwell ago. Each (player,
        hint) pair is offered at most once; emitting appends hint_offer."""
        ps = self.state.player(player_id)
        offers = []
        with self._lock:
            for c in self.config.challenges:
                if c.challenge_id in ps.solved:
                    continue
                viewed = ps.first_view.get(c.challenge_id)
                if viewed is None or now - viewed < self.config.hint_offer_dwell:
                    continue
                for h in c.hints:
                    if not h.is_released(now):
                        continue
                    if h.hint_id in ps.hints_displayed:
                        continue
                    if h.hint_id not in ps.hints_offered:
                        self._append(
                            player_id,
                            "hint_offer",
                            {"challenge": c.challenge_id, "hint": h.hint_id},
                            now,
                        )
                        offers.append({"challenge_id": c.challenge_id, "hint_id": h.hint_id})
                    break  # only the first undisplayed hint per challenge
        return offers

    # -- scoreboard & feedback -------------------------------------------

    def login(self, player_id: str, now: datetime) -> GameEvent:
        if self.config.player(player_id) is None:
            raise NotFound(player_id)
        with self._lock:
            return self._append(player_id, "login", {}, now)

    def scoreboard(self) -> list[ScoreboardEntry]:
        """Anonymized standings: score descending, earlier last solve wins
        ties, then alias; ranks contiguous from 1."""
        rows = []
        for pid, ps in self.state.players.items():
            if not ps.logged_in:
                continue
            rows.append(
                (
                    alias_for(pid, self.config.anonymization_salt),
                    ps.score,
                    ps.last_solve_at,
                )
            )
        rows.sort(
            key=lambda r: (
                -r[1],
                r[2].timestamp() if r[2] is not None else float("inf"),
                r[0],
            )
        )
        return [
            ScoreboardEntry(alias=a, score=s, last_solve_at=t, rank=i + 1)
            for i, (a, s, t) in enumerate(rows)
        ]

    def record_feedback(
        self,
        player_id: str,
        challenge_id: str,
        rating: int,
        comment: Optional[str],
        now: datetime,
    ) -> GameEvent:
        """Post-solve challenge feedback; one per (player, challenge)."""
        if challenge_id not in self._challenges:
            raise NotFound(challenge_id)
        if not 1 <= rating <= 5:
            raise InvalidArgument("rating must be 1-5")
        with self._lock:
            ps = self.state.player(player_id)
            if challenge_id not in ps.solved:
                raise PreconditionViolation("feedback requires a prior solve")
            if challenge_id in ps.feedback_given:
                raise PreconditionViolation("feedback already recorded")
            payload: dict[str, Any] = {"challenge": challenge_id, "rating": rating}
            if comment:
                payload["comment"] = comment
            return self._append(player_id, "feedback_submit", payload, now)

    def feedback_report(self) -> list[dict[str, Any]]:
        out = []
        for e in self.store.query(kinds=["feedback_submit"]):
            out.append(
                {
                    "challenge_id": e.payload["challenge"],
                    "alias": alias_for(e.player_id, self.config.anonymization_salt),
                    "rating": e.payload["rating"],
                    "comment": e.payload.get("comment"),
                    "at": e.at,
                }
            )
        return out

    # -- assets -----------------------------------------------------------

    def download_asset(self, player_id: str, asset_id: str, now: datetime) -> bytes:
        """Serve asset bytes; every retrieval (including repeats) logs
        file_download."""
        found = self.config.asset(asset_id)
        if found is None:
            raise NotFound(asset_id)
        challenge, asset = found
        if not self.is_unlocked(player_id, challenge.challenge_id):
            raise RejectedLocked(challenge.challenge_id)
        data = self.assets.get(asset_id)
        if data is None:
            raise NotFound(f"no bytes stored for asset {asset_id!r}")
        if asset.content_digest:
            digest = hashlib.sha256(data).hexdigest()
            if digest != asset.content_digest:
                raise PreconditionViolation(f"asset {asset_id!r} digest mismatch")
        with self._lock:
            self._append(player_id, "file_download", {"asset": asset_id}, now)
        return data


def rebuild_state(events: list[GameEvent], config: GameConfig) -> GameState:
    """Derive GameState from raw events alone (replay path)."""
    points = {c.challenge_id: c.points for c in config.challenges}
    hint_costs = {h.hint_id: h.cost for h in config.all_hints().values()}
    state = GameState()
    for e in events:
        state.apply(e, points, hint_costs)
    return state
