import hashlib
from datetime import datetime, timedelta, timezone

import pytest

from ctfkit.engine import Game
from ctfkit.events import EventStore
from ctfkit.model import (
    Chain,
    Challenge,
    FileAsset,
    GameConfig,
    Hint,
    PlayerRecord,
)

T0 = datetime(2026, 3, 1, 9, 0, tzinfo=timezone.utc)


def t(seconds: float) -> datetime:
    return T0 + timedelta(seconds=seconds)


def make_config(**overrides) -> GameConfig:
    """Five free challenges plus a 3-member chain [c6, c7, c8]."""
    asset_data = b"binary blob for c1\n"
    challenges = [
        Challenge(
            challenge_id="c1",
            title="Warmup",
            category="basic",
            points=5,
            flag="FLAG{one}",
            hints=(
                Hint("c1-h1", "c1", 0, "which tool to use", "Use strings."),
                Hint("c1-h2", "c1", 5, "the actual answer", "It is in plain sight."),
            ),
            assets=(
                FileAsset(
                    "c1-file", "c1", "dump.bin",
                    hashlib.sha256(asset_data).hexdigest(),
                    required_for_solve=True,
                ),
            ),
        ),
        Challenge("c2", "Cipher", "basic", 10, "FLAG{two}"),
        Challenge("c3", "Web", "medium", 15, "FLAG{three}"),
        Challenge("c4", "Forensics", "medium", 20, "FLAG{four}"),
        Challenge("c5", "Pwn", "advanced", 25, "FLAG{five}"),
        Challenge("c6", "Chain head", "medium", 15, "FLAG{six}", min_solve_seconds=20),
        Challenge("c7", "Chain mid", "medium", 15, "FLAG{seven}", min_solve_seconds=75),
        Challenge("c8", "Chain end", "advanced", 25, "FLAG{eight}", min_solve_seconds=120),
    ]
    players = (
        PlayerRecord("s001", "Alice Example", "tok-s001"),
        PlayerRecord("s002", "Bob Example", "tok-s002"),
        PlayerRecord("s003", "Carol Example", "tok-s003"),
        PlayerRecord("t001", "Prof Example", "tok-t001", role="instructor"),
    )
    defaults = dict(
        game_id="a1",
        title="Assignment 1",
        opens_at=T0,
        closes_at=T0 + timedelta(days=26),
        challenges=tuple(challenges),
        chains=(Chain("chain1", ("c6", "c7", "c8")),),
        players=players,
        anonymization_salt=b"salt-a1",
        flag_format=r"FLAG\{.*\}",
    )
    defaults.update(overrides)
    return GameConfig(**defaults)


ASSETS = {"c1-file": b"binary blob for c1\n"}


@pytest.fixture
def config() -> GameConfig:
    return make_config()


@pytest.fixture
def game(config) -> Game:
    return Game(config, EventStore(), assets=dict(ASSETS))
