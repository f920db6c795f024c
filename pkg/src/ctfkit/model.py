"""Static game definition (challenges, hints, chains, players) and the shared
event vocabulary.

All values here are immutable after construction and safe to share across
threads. Config files are YAML; flags and auth tokens may live in a separate
secrets file so a game definition can be published after the game ends.
"""

from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Any, Optional

import yaml

CATEGORIES = (
    "basic",
    "medium",
    "advanced",
    "bonus-basic",
    "bonus-medium",
    "bonus-advanced",
)

EVENT_KINDS = (
    "login",
    "challenge_view",
    "file_download",
    "flag_submission",
    "hint_display",
    "hint_offer",
    "challenge_unlock",
    "feedback_submit",
)

VERDICTS = (
    "correct",
    "wrong",
    "rejected_locked",
    "rejected_closed",
    "rejected_already_solved",
)

# Payload schema per event kind: (required fields, optional fields).
PAYLOAD_FIELDS: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    "login": (frozenset(), frozenset()),
    "challenge_view": (frozenset({"challenge"}), frozenset()),
    "file_download": (frozenset({"asset"}), frozenset()),
    "flag_submission": (
        frozenset({"challenge", "submitted", "verdict"}),
        frozenset(),
    ),
    "hint_display": (frozenset({"hint"}), frozenset()),
    "hint_offer": (frozenset({"challenge", "hint"}), frozenset()),
    "challenge_unlock": (frozenset({"challenge"}), frozenset()),
    "feedback_submit": (
        frozenset({"challenge", "rating"}),
        frozenset({"comment"}),
    ),
}


class InvalidArgument(ValueError):
    """A caller-supplied value violates an operation precondition."""


def utc_ms(dt: datetime) -> datetime:
    """Normalize a datetime to UTC with millisecond precision."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def ts_to_iso(dt: datetime) -> str:
    dt = utc_ms(dt)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def iso_to_ts(text: str) -> datetime:
    if not text.endswith("Z"):
        raise InvalidArgument(f"timestamp must be UTC ('Z' suffix): {text!r}")
    return datetime.strptime(text[:-1], "%Y-%m-%dT%H:%M:%S.%f").replace(
        tzinfo=timezone.utc
    )


def normalize_flag(text: str) -> str:
    """Canonical flag form used by both adjudication and the cross-flag
    detector: trimmed, no case folding."""
    return text.strip()


@dataclass(frozen=True)
class Hint:
    hint_id: str
    challenge_id: str
    cost: int
    topic_label: str
    body: str
    released_at: Optional[datetime] = None

    def is_released(self, now: datetime) -> bool:
        return self.released_at is None or self.released_at <= now


@dataclass(frozen=True)
class FileAsset:
    asset_id: str
    challenge_id: str
    filename: str
    content_digest: str
    required_for_solve: bool = False


@dataclass(frozen=True)
class Challenge:
    challenge_id: str
    title: str
    category: str
    points: int
    flag: str
    hints: tuple[Hint, ...] = ()
    assets: tuple[FileAsset, ...] = ()
    min_solve_seconds: float = 20.0
    is_bonus: bool = False


@dataclass(frozen=True)
class Chain:
    chain_id: str
    members: tuple[str, ...]

    def predecessor(self, challenge_id: str) -> Optional[str]:
        idx = self.members.index(challenge_id)
        return self.members[idx - 1] if idx > 0 else None

    def successor(self, challenge_id: str) -> Optional[str]:
        idx = self.members.index(challenge_id)
        return self.members[idx + 1] if idx + 1 < len(self.members) else None


@dataclass(frozen=True)
class PlayerRecord:
    player_id: str
    display_name: str
    auth_token: str
    role: str = "player"  # player | instructor


@dataclass(frozen=True)
class GameConfig:
    game_id: str
    title: str
    opens_at: datetime
    closes_at: datetime
    challenges: tuple[Challenge, ...] = ()
    chains: tuple[Chain, ...] = ()
    players: tuple[PlayerRecord, ...] = ()
    anonymization_salt: bytes = b""
    hint_offer_dwell: timedelta = timedelta(minutes=30)
    vicinity_window: timedelta = timedelta(minutes=10)
    flag_format: Optional[str] = None  # regex; None = no format constraint
    points_range: tuple[int, int] = (5, 25)

    def challenge(self, challenge_id: str) -> Optional[Challenge]:
        return self._challenge_index().get(challenge_id)

    def _challenge_index(self) -> dict[str, Challenge]:
        return {c.challenge_id: c for c in self.challenges}

    def chain_of(self, challenge_id: str) -> Optional[Chain]:
        for chain in self.chains:
            if challenge_id in chain.members:
                return chain
        return None

    def player(self, player_id: str) -> Optional[PlayerRecord]:
        for p in self.players:
            if p.player_id == player_id:
                return p
        return None

    def asset(self, asset_id: str) -> Optional[tuple[Challenge, FileAsset]]:
        for c in self.challenges:
            for a in c.assets:
                if a.asset_id == asset_id:
                    return c, a
        return None

    def all_hints(self) -> dict[str, Hint]:
        return {h.hint_id: h for c in self.challenges for h in c.hints}


@dataclass(frozen=True)
class GameEvent:
    seq: int
    at: datetime
    player_id: str
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "seq": self.seq,
            "at": ts_to_iso(self.at),
            "player": self.player_id,
            "kind": self.kind,
        }
        rec.update(self.payload)
        return rec

    @staticmethod
    def from_record(rec: dict[str, Any]) -> "GameEvent":
        for f in ("seq", "at", "player", "kind"):
            if f not in rec:
                raise InvalidArgument(f"missing field {f!r}")
        kind = rec["kind"]
        if kind not in PAYLOAD_FIELDS:
            raise InvalidArgument(f"unknown event kind {kind!r}")
        required, optional = PAYLOAD_FIELDS[kind]
        payload = {k: v for k, v in rec.items() if k not in ("seq", "at", "player", "kind")}
        missing = required - payload.keys()
        if missing:
            raise InvalidArgument(f"{kind}: missing payload fields {sorted(missing)}")
        unknown = payload.keys() - required - optional
        if unknown:
            raise InvalidArgument(f"{kind}: unknown fields {sorted(unknown)}")
        if kind == "flag_submission" and payload["verdict"] not in VERDICTS:
            raise InvalidArgument(f"unknown verdict {payload['verdict']!r}")
        return GameEvent(
            seq=int(rec["seq"]),
            at=iso_to_ts(rec["at"]),
            player_id=rec["player"],
            kind=kind,
            payload=payload,
        )


@dataclass(frozen=True)
class ScoreboardEntry:
    alias: str
    score: int
    last_solve_at: Optional[datetime]
    rank: int


# Word lists for readable scoreboard pseudonyms.
_ADJECTIVES = (
    "amber", "bold", "brisk", "calm", "clever", "crimson", "daring", "dusky",
    "eager", "fuzzy", "gentle", "golden", "hasty", "icy", "jolly", "keen",
    "lucky", "mellow", "nimble", "olive", "plucky", "quiet", "rapid", "rusty",
    "silent", "sly", "swift", "tidy", "vivid", "wily", "witty", "zesty",
)
_ANIMALS = (
    "badger", "bison", "crane", "dingo", "falcon", "ferret", "gecko", "heron",
    "ibis", "jackal", "koala", "lemur", "lynx", "marmot", "mole", "newt",
    "ocelot", "otter", "panda", "puffin", "quail", "raven", "seal", "shrew",
    "stoat", "swan", "tapir", "toad", "viper", "walrus", "wombat", "yak",
)


def alias_for(player_id: str, salt: bytes) -> str:
    """Deterministic, non-reversible scoreboard pseudonym for a player.

    Same (player_id, salt) always maps to the same alias; a different salt
    gives an unrelated alias. Collisions within one roster are caught by
    validate_config.
    """
    if not player_id:
        raise InvalidArgument("player_id must be non-empty")
    digest = hmac.new(salt, player_id.encode("utf-8"), hashlib.sha256).digest()
    adj = _ADJECTIVES[digest[0] % len(_ADJECTIVES)]
    animal = _ANIMALS[digest[1] % len(_ANIMALS)]
    suffix = digest[2:4].hex()
    return f"{adj}-{animal}-{suffix}"


def validate_config(config: GameConfig) -> list[str]:
    """Return every invariant violation in the game definition.

    An empty list means the config is valid. Violations are data, not
    exceptions: callers decide whether to refuse startup or just report.
    """
    violations: list[str] = []
    if config.opens_at >= config.closes_at:
        violations.append("opens_at must precede closes_at")
    if config.vicinity_window <= timedelta(0):
        violations.append("vicinity_window must be positive")
    if config.hint_offer_dwell <= timedelta(0):
        violations.append("hint_offer_dwell must be positive")

    flag_pattern = re.compile(config.flag_format) if config.flag_format else None

    seen_challenges: set[str] = set()
    lo, hi = config.points_range
    for c in config.challenges:
        if c.challenge_id in seen_challenges:
            violations.append(f"duplicate challenge id {c.challenge_id!r}")
        seen_challenges.add(c.challenge_id)
        if c.category not in CATEGORIES:
            violations.append(f"challenge {c.challenge_id!r}: unknown category {c.category!r}")
        if not (lo <= c.points <= hi):
            violations.append(
                f"challenge {c.challenge_id!r}: points {c.points} outside range {lo}-{hi}"
            )
        if not c.flag.strip():
            violations.append(f"challenge {c.challenge_id!r}: empty flag")
        elif flag_pattern and not flag_pattern.fullmatch(normalize_flag(c.flag)):
            violations.append(
                f"challenge {c.challenge_id!r}: flag does not match format {config.flag_format!r}"
            )
        if c.min_solve_seconds <= 0:
            violations.append(f"challenge {c.challenge_id!r}: min_solve_seconds must be positive")
        if c.is_bonus != c.category.startswith("bonus"):
            violations.append(
                f"challenge {c.challenge_id!r}: is_bonus inconsistent with category"
            )
        for h in c.hints:
            if h.cost < 0:
                violations.append(f"hint {h.hint_id!r}: negative cost")
            if not h.topic_label.strip():
                violations.append(f"hint {h.hint_id!r}: empty topic_label")
            if h.challenge_id != c.challenge_id:
                violations.append(
                    f"hint {h.hint_id!r}: challenge_id mismatch ({h.challenge_id!r})"
                )

    hint_ids = [h.hint_id for c in config.challenges for h in c.hints]
    for hid in sorted({h for h in hint_ids if hint_ids.count(h) > 1}):
        violations.append(f"duplicate hint id {hid!r}")

    asset_ids = [a.asset_id for c in config.challenges for a in c.assets]
    for aid in sorted({a for a in asset_ids if asset_ids.count(a) > 1}):
        violations.append(f"duplicate asset id {aid!r}")
    for c in config.challenges:
        for a in c.assets:
            if not a.filename:
                violations.append(f"asset {a.asset_id!r}: empty filename")

    chained: set[str] = set()
    for chain in config.chains:
        if len(chain.members) < 2:
            violations.append(f"chain {chain.chain_id!r}: fewer than 2 members")
        for member in chain.members:
            if member not in seen_challenges:
                violations.append(
                    f"chain {chain.chain_id!r}: unknown challenge {member!r}"
                )
            elif member in chained:
                violations.append(
                    f"chain {chain.chain_id!r}: challenge {member!r} appears in multiple chains"
                )
            chained.add(member)

    seen_players: set[str] = set()
    seen_tokens: set[str] = set()
    aliases: dict[str, str] = {}
    for p in config.players:
        if p.player_id in seen_players:
            violations.append(f"duplicate player id {p.player_id!r}")
        seen_players.add(p.player_id)
        if p.auth_token in seen_tokens:
            violations.append(f"duplicate auth token (player {p.player_id!r})")
        seen_tokens.add(p.auth_token)
        if p.role not in ("player", "instructor"):
            violations.append(f"player {p.player_id!r}: unknown role {p.role!r}")
        if p.player_id:
            a = alias_for(p.player_id, config.anonymization_salt)
            if a in aliases:
                violations.append(
                    f"alias collision between {aliases[a]!r} and {p.player_id!r}"
                )
            aliases[a] = p.player_id
    return violations


# ---------------------------------------------------------------------------
# Config file I/O (YAML). Durations are seconds; timestamps ISO-8601 UTC.

def _duration(value: Any) -> timedelta:
    return timedelta(seconds=float(value))


def config_to_dict(config: GameConfig, include_secrets: bool = True) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "game_id": config.game_id,
        "title": config.title,
        "opens_at": ts_to_iso(config.opens_at),
        "closes_at": ts_to_iso(config.closes_at),
        "anonymization_salt": config.anonymization_salt.hex(),
        "hint_offer_dwell_seconds": config.hint_offer_dwell.total_seconds(),
        "vicinity_window_seconds": config.vicinity_window.total_seconds(),
        "points_range": list(config.points_range),
        "challenges": [],
        "chains": [
            {"chain_id": ch.chain_id, "members": list(ch.members)}
            for ch in config.chains
        ],
        "players": [],
    }
    if config.flag_format:
        doc["flag_format"] = config.flag_format
    for c in config.challenges:
        cd: dict[str, Any] = {
            "challenge_id": c.challenge_id,
            "title": c.title,
            "category": c.category,
            "points": c.points,
            "min_solve_seconds": c.min_solve_seconds,
        }
        if include_secrets:
            cd["flag"] = c.flag
        if c.hints:
            cd["hints"] = [
                {
                    "hint_id": h.hint_id,
                    "cost": h.cost,
                    "topic_label": h.topic_label,
                    "body": h.body,
                    **(
                        {"released_at": ts_to_iso(h.released_at)}
                        if h.released_at
                        else {}
                    ),
                }
                for h in c.hints
            ]
        if c.assets:
            cd["assets"] = [
                {
                    "asset_id": a.asset_id,
                    "filename": a.filename,
                    "content_digest": a.content_digest,
                    "required_for_solve": a.required_for_solve,
                }
                for a in c.assets
            ]
        doc["challenges"].append(cd)
    for p in config.players:
        pd: dict[str, Any] = {
            "player_id": p.player_id,
            "display_name": p.display_name,
            "role": p.role,
        }
        if include_secrets:
            pd["auth_token"] = p.auth_token
        doc["players"].append(pd)
    return doc


def config_from_dict(
    doc: dict[str, Any], secrets: Optional[dict[str, Any]] = None
) -> GameConfig:
    secret_flags = (secrets or {}).get("flags", {})
    secret_tokens = (secrets or {}).get("tokens", {})

    challenges = []
    for cd in doc.get("challenges", []):
        cid = cd["challenge_id"]
        hints = tuple(
            Hint(
                hint_id=hd["hint_id"],
                challenge_id=cid,
                cost=int(hd.get("cost", 0)),
                topic_label=hd.get("topic_label", ""),
                body=hd.get("body", ""),
                released_at=(
                    iso_to_ts(hd["released_at"]) if "released_at" in hd else None
                ),
            )
            for hd in cd.get("hints", [])
        )
        assets = tuple(
            FileAsset(
                asset_id=ad["asset_id"],
                challenge_id=cid,
                filename=ad["filename"],
                content_digest=ad.get("content_digest", ""),
                required_for_solve=bool(ad.get("required_for_solve", False)),
            )
            for ad in cd.get("assets", [])
        )
        category = cd["category"]
        challenges.append(
            Challenge(
                challenge_id=cid,
                title=cd.get("title", cid),
                category=category,
                points=int(cd["points"]),
                flag=cd.get("flag", secret_flags.get(cid, "")),
                hints=hints,
                assets=assets,
                min_solve_seconds=float(cd.get("min_solve_seconds", 20)),
                is_bonus=category.startswith("bonus"),
            )
        )
    chains = tuple(
        Chain(chain_id=chd["chain_id"], members=tuple(chd["members"]))
        for chd in doc.get("chains", [])
    )
    players = tuple(
        PlayerRecord(
            player_id=pd["player_id"],
            display_name=pd.get("display_name", pd["player_id"]),
            auth_token=pd.get("auth_token", secret_tokens.get(pd["player_id"], "")),
            role=pd.get("role", "player"),
        )
        for pd in doc.get("players", [])
    )
    return GameConfig(
        game_id=doc["game_id"],
        title=doc.get("title", doc["game_id"]),
        opens_at=iso_to_ts(doc["opens_at"]),
        closes_at=iso_to_ts(doc["closes_at"]),
        challenges=tuple(challenges),
        chains=chains,
        players=players,
        anonymization_salt=bytes.fromhex(doc.get("anonymization_salt", "")),
        hint_offer_dwell=_duration(doc.get("hint_offer_dwell_seconds", 1800)),
        vicinity_window=_duration(doc.get("vicinity_window_seconds", 600)),
        flag_format=doc.get("flag_format"),
        points_range=tuple(doc.get("points_range", (5, 25))),  # type: ignore[arg-type]
    )


def load_config(path: str, secrets_path: Optional[str] = None) -> GameConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    secrets = None
    if secrets_path:
        with open(secrets_path, "r", encoding="utf-8") as fh:
            secrets = yaml.safe_load(fh)
    return config_from_dict(doc, secrets)


def save_config(config: GameConfig, path: str, include_secrets: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(
            config_to_dict(config, include_secrets=include_secrets),
            fh,
            sort_keys=False,
        )


def with_added_hint(config: GameConfig, hint: Hint) -> GameConfig:
    """Return a config with a hint appended to its challenge (mid-game
    backup-hint insertion)."""
    challenges = tuple(
        replace(c, hints=c.hints + (hint,)) if c.challenge_id == hint.challenge_id else c
        for c in config.challenges
    )
    return replace(config, challenges=challenges)
