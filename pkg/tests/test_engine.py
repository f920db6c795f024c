import random
from datetime import timedelta

import pytest

from ctfkit.engine import (
    Forbidden,
    Game,
    NotFound,
    PreconditionViolation,
    RejectedLocked,
    rebuild_state,
)
from ctfkit.events import EventStore
from ctfkit.model import Hint, alias_for

from conftest import ASSETS, make_config, t


def solve(game, player, cid, when):
    flag = game.config.challenge(cid).flag
    return game.submit_flag(player, cid, flag, when)


class TestVisibility:
    def test_chain_head_visible_tail_hidden(self, game):
        ids = {c["challenge_id"] for c in game.visible_challenges("s001", t(10))}
        assert ids == {"c1", "c2", "c3", "c4", "c5", "c6"}

    def test_solving_head_reveals_next(self, game):
        solve(game, "s001", "c6", t(60))
        ids = {c["challenge_id"] for c in game.visible_challenges("s001", t(70))}
        assert "c7" in ids and "c8" not in ids

    def test_chain_end(self, game):
        solve(game, "s001", "c6", t(60))
        solve(game, "s001", "c7", t(200))
        ids = {c["challenge_id"] for c in game.visible_challenges("s001", t(210))}
        assert "c8" in ids
        solve(game, "s001", "c8", t(400))
        ids2 = {c["challenge_id"] for c in game.visible_challenges("s001", t(410))}
        assert ids2 == ids

    def test_unlocking_is_per_player(self, game):
        solve(game, "s001", "c6", t(60))
        ids = {c["challenge_id"] for c in game.visible_challenges("s002", t(70))}
        assert "c7" not in ids

    def test_no_flags_or_hint_bodies_leak(self, game):
        listing = game.visible_challenges("s001", t(10))
        text = str(listing)
        assert "FLAG{" not in text
        assert "strings" not in text  # hint body stays hidden

    def test_unknown_player(self, game):
        with pytest.raises(NotFound):
            game.visible_challenges("ghost", t(10))


class TestSubmit:
    def test_correct_awards_points(self, game):
        verdict = solve(game, "s001", "c3", t(30))
        assert (verdict.verdict, verdict.points_awarded) == ("correct", 15)
        assert game.state.player("s001").score == 15

    def test_unlimited_wrong_submissions_cost_nothing(self, game):
        for i in range(50):
            assert game.submit_flag("s001", "c3", f"no-{i}", t(i)).verdict == "wrong"
        solve(game, "s001", "c3", t(60))
        assert game.state.player("s001").score == 15

    def test_locked_flag_submitted_to_predecessor_then_locked_target(self, game):
        solve(game, "s001", "c6", t(60))
        # c8's flag offered to c7: text mismatch, plain wrong; retained.
        assert game.submit_flag("s001", "c7", "FLAG{eight}", t(70)).verdict == "wrong"
        # same flag to the still-locked c8: rejected but retained.
        assert game.submit_flag("s001", "c8", "FLAG{eight}", t(80)).verdict == "rejected_locked"
        subs = game.store.query(kinds=["flag_submission"], player_id="s001")
        assert [e.payload["verdict"] for e in subs[-2:]] == ["wrong", "rejected_locked"]
        assert subs[-1].payload["submitted"] == "FLAG{eight}"

    def test_resubmit_after_solve(self, game):
        solve(game, "s001", "c1", t(10))
        assert solve(game, "s001", "c1", t(20)).verdict == "rejected_already_solved"

    def test_after_deadline(self, game):
        late = game.config.closes_at + timedelta(seconds=1)
        assert game.submit_flag("s001", "c1", "FLAG{one}", late).verdict == "rejected_closed"
        # reads stay available post-game
        assert game.visible_challenges("s001", late)
        assert game.scoreboard() == []

    def test_flag_trimmed_no_case_fold(self, game):
        assert game.submit_flag("s001", "c2", "  FLAG{two}\n", t(5)).verdict == "correct"
        assert game.submit_flag("s002", "c2", "flag{TWO}", t(6)).verdict == "wrong"

    def test_unknown_challenge_logs_nothing(self, game):
        before = len(game.store)
        with pytest.raises(NotFound):
            game.submit_flag("s001", "c99", "x", t(5))
        assert len(game.store) == before

    def test_correct_appends_unlock_event(self, game):
        solve(game, "s001", "c6", t(60))
        unlocks = game.store.query(kinds=["challenge_unlock"])
        assert [e.payload["challenge"] for e in unlocks] == ["c7"]


class TestHints:
    def test_free_hint_costs_nothing(self, game):
        solve(game, "s001", "c1", t(10))
        game.display_hint("s001", "c1-h1", t(20))
        assert game.state.player("s001").score == 5

    def test_paid_hint_charged_once(self, game):
        body1 = game.display_hint("s001", "c1-h2", t(10))
        body2 = game.display_hint("s001", "c1-h2", t(20))
        assert body1 == body2
        assert game.state.player("s001").score == -5
        assert len(game.store.query(kinds=["hint_display"])) == 1

    def test_hint_cost_can_push_score_negative(self, game):
        # earned 5, paid 5, then a freshly added cost-2 hint: ledger -2.
        solve(game, "s001", "c1", t(5))
        game.display_hint("s001", "c1-h2", t(10))
        assert game.state.player("s001").score == 0
        game.add_hint("t001", "c1", Hint("c1-h3", "c1", 2, "extra", "b"), t(11))
        game.display_hint("s001", "c1-h3", t(12))
        assert game.state.player("s001").score == -2

    def test_hint_of_locked_challenge_rejected(self, game):
        game.add_hint("t001", "c7", Hint("c7-h1", "c7", 0, "setup", "body"), t(5))
        with pytest.raises(RejectedLocked):
            game.display_hint("s001", "c7-h1", t(10))

    def test_unreleased_hint_invisible(self, game):
        game.add_hint(
            "t001", "c1", Hint("c1-h3", "c1", 0, "backup", "later"),
            t(10), released_at=t(3600),
        )
        with pytest.raises(NotFound):
            game.display_hint("s001", "c1-h3", t(20))
        assert game.display_hint("s001", "c1-h3", t(3700)) == "later"


class TestAddHint:
    def test_backup_hint_immediately_listed(self, game):
        game.add_hint("t001", "c2", Hint("c2-h1", "c2", 0, "nudge", "body"), t(100))
        listing = game.visible_challenges("s001", t(101))
        c2 = next(c for c in listing if c["challenge_id"] == "c2")
        assert [h["hint_id"] for h in c2["hints"]] == ["c2-h1"]

    def test_player_cannot_add(self, game):
        with pytest.raises(Forbidden):
            game.add_hint("s001", "c2", Hint("x", "c2", 0, "t", "b"), t(5))

    def test_future_release_gated(self, game):
        game.add_hint("t001", "c2", Hint("c2-h1", "c2", 0, "nudge", "b"),
                      t(100), released_at=t(100 + 3600))
        listing = game.visible_challenges("s001", t(200))
        c2 = next(c for c in listing if c["challenge_id"] == "c2")
        assert c2["hints"] == []


class TestHintOffers:
    def test_offer_after_dwell(self, game):
        game.view_challenge("s001", "c1", t(0))
        assert game.pending_hint_offers("s001", t(29 * 60)) == []
        offers = game.pending_hint_offers("s001", t(31 * 60))
        assert offers == [{"challenge_id": "c1", "hint_id": "c1-h1"}]
        # at most once per (player, hint)
        assert game.pending_hint_offers("s001", t(32 * 60)) == []
        assert len(game.store.query(kinds=["hint_offer"])) == 1

    def test_no_offer_when_solved(self, game):
        game.view_challenge("s001", "c1", t(0))
        solve(game, "s001", "c1", t(50))
        assert game.pending_hint_offers("s001", t(31 * 60)) == []

    def test_no_offer_when_already_displayed(self, game):
        game.view_challenge("s001", "c1", t(0))
        game.display_hint("s001", "c1-h1", t(10))
        offers = game.pending_hint_offers("s001", t(31 * 60))
        # first undisplayed hint is now the paid one
        assert offers == [{"challenge_id": "c1", "hint_id": "c1-h2"}]


class TestScoreboard:
    def test_ranking_and_tie_break(self, game):
        for pid in ("s001", "s002", "s003"):
            game.login(pid, t(0))
        solve(game, "s001", "c3", t(100))          # 15
        solve(game, "s002", "c3", t(200))          # 15, later
        solve(game, "s003", "c4", t(150))          # 20
        board = game.scoreboard()
        assert [e.rank for e in board] == [1, 2, 3]
        assert board[0].score == 20
        assert board[1].alias == alias_for("s001", game.config.anonymization_salt)

    def test_no_display_names_leak(self, game):
        game.login("s001", t(0))
        board_text = str(game.scoreboard())
        assert "Alice" not in board_text and "s001" not in board_text

    def test_only_logged_in_players_listed(self, game):
        game.login("s001", t(0))
        solve(game, "s002", "c1", t(5))  # never logged in
        assert len(game.scoreboard()) == 1


class TestFeedback:
    def test_after_solve_accepted(self, game):
        solve(game, "s001", "c1", t(10))
        game.record_feedback("s001", "c1", 4, "nice", t(20))
        report = game.feedback_report()
        assert report[0]["rating"] == 4
        assert report[0]["alias"] != "s001"

    def test_before_solve_rejected(self, game):
        with pytest.raises(PreconditionViolation):
            game.record_feedback("s001", "c1", 4, None, t(5))

    def test_duplicate_rejected(self, game):
        solve(game, "s001", "c1", t(10))
        game.record_feedback("s001", "c1", 4, None, t(20))
        with pytest.raises(PreconditionViolation):
            game.record_feedback("s001", "c1", 2, None, t(30))


class TestAssets:
    def test_download_logs_every_fetch(self, game):
        data = game.download_asset("s001", "c1-file", t(5))
        assert data == ASSETS["c1-file"]
        game.download_asset("s001", "c1-file", t(6))
        assert len(game.store.query(kinds=["file_download"])) == 2

    def test_locked_asset_rejected(self, config):
        from dataclasses import replace
        from ctfkit.model import FileAsset
        import hashlib
        blob = b"chain asset"
        asset = FileAsset("c7-file", "c7", "x.bin",
                          hashlib.sha256(blob).hexdigest(), True)
        c7 = next(c for c in config.challenges if c.challenge_id == "c7")
        patched = replace(c7, assets=(asset,))
        cfg = replace(config, challenges=tuple(
            patched if c.challenge_id == "c7" else c for c in config.challenges
        ))
        game = Game(cfg, EventStore(), assets={"c7-file": blob, **ASSETS})
        with pytest.raises(RejectedLocked):
            game.download_asset("s001", "c7-file", t(5))


class TestLedgerInvariants:
    def random_run(self, seed: int):
        rng = random.Random(seed)
        config = make_config()
        game = Game(config, EventStore(), assets=dict(ASSETS))
        players = [p.player_id for p in config.players if p.role == "player"]
        clock = 0.0
        for _ in range(60):
            clock += rng.uniform(1, 30)
            pid = rng.choice(players)
            cid = rng.choice([c.challenge_id for c in config.challenges])
            roll = rng.random()
            try:
                if roll < 0.5:
                    game.submit_flag(pid, cid, config.challenge(cid).flag, t(clock))
                elif roll < 0.7:
                    game.submit_flag(pid, cid, f"junk-{rng.random()}", t(clock))
                elif roll < 0.85:
                    hints = config.challenge(cid).hints
                    if hints:
                        game.display_hint(pid, rng.choice(hints).hint_id, t(clock))
                else:
                    game.view_challenge(pid, cid, t(clock))
            except (RejectedLocked, NotFound):
                pass
        return game

    @pytest.mark.parametrize("seed", range(20))
    def test_score_matches_independent_ledger(self, seed):
        game = self.random_run(seed)
        points = {c.challenge_id: c.points for c in game.config.challenges}
        costs = {h.hint_id: h.cost for h in game.config.all_hints().values()}
        for pid, ps in game.state.players.items():
            solved = set()
            displayed = set()
            for e in game.store.query(player_id=pid):
                if e.kind == "flag_submission" and e.payload["verdict"] == "correct":
                    solved.add(e.payload["challenge"])
                elif e.kind == "hint_display":
                    displayed.add(e.payload["hint"])
            expected = sum(points[c] for c in solved) - sum(costs[h] for h in displayed)
            assert ps.score == expected

    def test_replay_matches_live_state(self):
        game = self.random_run(99)
        rebuilt = rebuild_state(game.store.snapshot(), game.config)
        assert rebuilt.fingerprint() == game.state.fingerprint()

    def test_extra_wrong_submissions_change_no_score(self):
        game = self.random_run(5)
        scores = {p: ps.score for p, ps in game.state.players.items()}
        for k in range(20):
            game.submit_flag("s001", "c2", f"extra-{k}", t(10_000 + k))
        for p, s in scores.items():
            assert game.state.player(p).score == s


class TestChainSafety:
    @pytest.mark.parametrize("seed", range(10))
    def test_storm_never_solves_locked(self, seed):
        rng = random.Random(seed)
        config = make_config()
        game = Game(config, EventStore(), assets=dict(ASSETS))
        flags = {c.challenge_id: c.flag for c in config.challenges}
        clock = 0.0
        for _ in range(150):
            clock += rng.uniform(0.1, 5)
            pid = rng.choice(["s001", "s002", "s003"])
            target = rng.choice(list(flags))
            flag = flags[rng.choice(list(flags))]
            game.submit_flag(pid, target, flag, t(clock))
        for e in game.store.query(kinds=["flag_submission"]):
            if e.payload["verdict"] != "correct":
                continue
            cid = e.payload["challenge"]
            chain = config.chain_of(cid)
            if chain is None:
                continue
            pred = chain.predecessor(cid)
            if pred is None:
                continue
            pred_solves = [
                s for s in game.store.query(kinds=["flag_submission"],
                                            player_id=e.player_id,
                                            challenge_id=pred)
                if s.payload["verdict"] == "correct" and s.seq < e.seq
            ]
            assert pred_solves, f"locked solve slipped through at seq {e.seq}"
