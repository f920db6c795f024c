import json
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from ctfkit.engine import Game
from ctfkit.events import EventStore
from ctfkit.service import create_app

from conftest import ASSETS, T0, make_config


class Clock:
    def __init__(self):
        self.now = T0

    def advance(self, seconds):
        self.now += timedelta(seconds=seconds)

    def __call__(self):
        return self.now


@pytest.fixture
def setup():
    config = make_config()
    game = Game(config, EventStore(), assets=dict(ASSETS))
    clock = Clock()
    client = TestClient(create_app(game, clock=clock))
    return client, game, clock


def auth(token):
    return {"Authorization": f"Bearer {token}"}


PLAYER = auth("tok-s001")
PLAYER2 = auth("tok-s002")
TEACHER = auth("tok-t001")


class TestAuth:
    def test_missing_token(self, setup):
        client, _, _ = setup
        assert client.get("/api/challenges").status_code == 401

    def test_bad_token_logs_nothing(self, setup):
        client, game, _ = setup
        before = len(game.store)
        r = client.post("/api/challenges/c1/submit", json={"flag": "FLAG{one}"},
                        headers=auth("nope"))
        assert r.status_code == 401
        assert len(game.store) == before

    def test_player_cannot_reach_admin(self, setup):
        client, _, _ = setup
        assert client.get("/api/admin/events", headers=PLAYER).status_code == 403

    def test_instructor_cannot_submit(self, setup):
        client, _, _ = setup
        r = client.post("/api/challenges/c1/submit", json={"flag": "x"},
                        headers=TEACHER)
        assert r.status_code == 403


class TestPlayerFlow:
    def test_login_returns_alias_not_name(self, setup):
        client, _, _ = setup
        body = client.post("/api/login", headers=PLAYER).json()
        assert body["alias"] and "Alice" not in json.dumps(body)

    def test_scoreboard_before_submissions(self, setup):
        client, _, _ = setup
        client.post("/api/login", headers=PLAYER)
        entries = client.get("/api/scoreboard", headers=PLAYER).json()["entries"]
        assert entries == [{"rank": 1, "alias": entries[0]["alias"], "score": 0,
                            "last_solve_at": None}]

    def test_submit_correct(self, setup):
        client, _, _ = setup
        r = client.post("/api/challenges/c3/submit", json={"flag": "FLAG{three}"},
                        headers=PLAYER)
        assert r.json() == {"verdict": "correct", "points": 15}

    def test_challenge_detail_logs_view(self, setup):
        client, game, _ = setup
        client.get("/api/challenges/c1", headers=PLAYER)
        views = game.store.query(kinds=["challenge_view"])
        assert [e.payload["challenge"] for e in views] == ["c1"]

    def test_asset_download_logs_event(self, setup):
        client, game, _ = setup
        r = client.get("/api/assets/c1-file", headers=PLAYER)
        assert r.content == ASSETS["c1-file"]
        assert len(game.store.query(kinds=["file_download"])) == 1

    def test_hint_and_offers_and_feedback(self, setup):
        client, _, clock = setup
        client.get("/api/challenges/c1", headers=PLAYER)
        clock.advance(31 * 60)
        offers = client.get("/api/offers", headers=PLAYER).json()["offers"]
        assert offers == [{"challenge_id": "c1", "hint_id": "c1-h1"}]
        body = client.post("/api/hints/c1-h1/display", headers=PLAYER).json()
        assert body["body"] == "Use strings."
        client.post("/api/challenges/c1/submit", json={"flag": "FLAG{one}"},
                    headers=PLAYER)
        r = client.post("/api/challenges/c1/feedback",
                        json={"rating": 5, "comment": "fun"}, headers=PLAYER)
        assert r.json() == {"accepted": True}
        r2 = client.post("/api/challenges/c1/feedback", json={"rating": 1},
                         headers=PLAYER)
        assert r2.status_code == 409

    def test_locked_chain_member_hidden_and_rejected(self, setup):
        client, _, _ = setup
        listing = client.get("/api/challenges", headers=PLAYER).json()["challenges"]
        assert "c7" not in {c["challenge_id"] for c in listing}
        r = client.post("/api/challenges/c7/submit", json={"flag": "FLAG{seven}"},
                        headers=PLAYER)
        assert r.json()["verdict"] == "rejected_locked"


class TestLeakFreedom:
    def test_player_payloads_never_contain_flags_or_names(self, setup):
        client, game, clock = setup
        flags = [c.flag for c in game.config.challenges]
        names = [p.display_name for p in game.config.players]
        payloads = []

        def grab(r):
            payloads.append(r.text)
            return r

        grab(client.post("/api/login", headers=PLAYER))
        grab(client.get("/api/challenges", headers=PLAYER))
        grab(client.get("/api/challenges/c1", headers=PLAYER))
        grab(client.post("/api/challenges/c6/submit", json={"flag": "FLAG{six}"},
                         headers=PLAYER))
        grab(client.get("/api/challenges", headers=PLAYER))
        grab(client.get("/api/scoreboard", headers=PLAYER))
        clock.advance(40 * 60)
        grab(client.get("/api/offers", headers=PLAYER))
        blob = "\n".join(payloads)
        for flag in flags:
            assert flag not in blob
        for name in names:
            assert name not in blob

    def test_unreleased_hint_is_404(self, setup):
        client, _, _ = setup
        r = client.post("/api/admin/challenges/c1/hints", headers=TEACHER,
                        json={"hint_id": "c1-h9", "topic_label": "backup",
                              "body": "secret", "cost": 0,
                              "released_at": "2027-01-01T00:00:00.000Z"})
        assert r.status_code == 200
        assert client.post("/api/hints/c1-h9/display",
                           headers=PLAYER).status_code == 404


class TestInstructor:
    def test_event_feed_cursor(self, setup):
        client, _, _ = setup
        client.post("/api/login", headers=PLAYER)
        client.post("/api/challenges/c1/submit", json={"flag": "x"}, headers=PLAYER)
        feed = client.get("/api/admin/events", headers=TEACHER).json()
        assert feed["last_seq"] == 2
        tail = client.get("/api/admin/events?since_seq=1", headers=TEACHER).json()
        assert [e["seq"] for e in tail["events"]] == [2]

    def test_added_hint_visible_to_players(self, setup):
        client, _, _ = setup
        client.post("/api/admin/challenges/c2/hints", headers=TEACHER,
                    json={"hint_id": "c2-h9", "topic_label": "nudge",
                          "body": "look closer", "cost": 0})
        listing = client.get("/api/challenges", headers=PLAYER).json()["challenges"]
        c2 = next(c for c in listing if c["challenge_id"] == "c2")
        assert [h["hint_id"] for h in c2["hints"]] == ["c2-h9"]

    def test_reports_and_marks(self, setup):
        client, _, _ = setup
        for c, f in (("c1", "FLAG{one}"), ("c2", "FLAG{two}"), ("c3", "FLAG{three}")):
            client.post(f"/api/challenges/{c}/submit", json={"flag": f},
                        headers=PLAYER)
            client.post(f"/api/challenges/{c}/submit", json={"flag": f},
                        headers=PLAYER2)
        inc = client.get("/api/admin/reports/incidents", headers=TEACHER).json()
        assert "incidents" in inc
        metrics = client.get("/api/admin/reports/metrics", headers=TEACHER).json()
        assert {m["player_id"] for m in metrics["metrics"]} == {"s001", "s002"}
        r = client.post("/api/admin/marks", headers=TEACHER,
                        content="player_id,midterm\ns001,80\ns002,60\ns003,70\n")
        assert r.json() == {"players": 3}
        corr = client.get("/api/admin/reports/correlations", headers=TEACHER).json()
        assert any(c["variable_y"] == "mark:midterm" for c in corr["correlations"])

    def test_export_round_trips(self, setup):
        client, game, _ = setup
        client.post("/api/login", headers=PLAYER)
        text = client.get("/api/admin/export", headers=TEACHER).text
        assert len(text.splitlines()) == len(game.store)
