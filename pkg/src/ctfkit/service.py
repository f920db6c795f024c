"""HTTP/JSON interface over the engine and analytics.

Auth is a static bearer token per roster entry; there is no registration.
Instructor endpoints reject player tokens and instructors cannot submit
flags in a live game, which keeps detector statistics clean. Responses
never contain flags, unreleased hints, or any identity beyond the
scoreboard alias.
"""

from __future__ import annotations

import io
from datetime import datetime, timezone
from typing import Any, Callable, Optional

from fastapi import Body, Depends, FastAPI, HTTPException, Request, Response

from . import analytics
from .engine import (
    Forbidden,
    Game,
    NotFound,
    PreconditionViolation,
    RejectedLocked,
)
from .model import Hint, InvalidArgument, PlayerRecord, alias_for, iso_to_ts
from .reports import read_marks


def create_app(game: Game, clock: Optional[Callable[[], datetime]] = None) -> FastAPI:
    app = FastAPI(title="ctfkit", docs_url=None, redoc_url=None)
    now = clock or (lambda: datetime.now(timezone.utc))
    tokens = {p.auth_token: p for p in game.config.players}
    marks_upload: dict[str, dict[str, float]] = {}

    def caller(request: Request) -> PlayerRecord:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise HTTPException(401, "missing bearer token")
        player = tokens.get(header[7:].strip())
        if player is None:
            raise HTTPException(401, "invalid token")
        return player

    def instructor(player: PlayerRecord = Depends(caller)) -> PlayerRecord:
        if player.role != "instructor":
            raise HTTPException(403, "instructor role required")
        return player

    def run(fn, *args):
        try:
            return fn(*args)
        except NotFound as exc:
            raise HTTPException(404, str(exc)) from exc
        except Forbidden as exc:
            raise HTTPException(403, str(exc)) from exc
        except RejectedLocked as exc:
            raise HTTPException(403, f"rejected_locked: {exc}") from exc
        except PreconditionViolation as exc:
            raise HTTPException(409, str(exc)) from exc
        except InvalidArgument as exc:
            raise HTTPException(422, str(exc)) from exc

    # -- player endpoints -------------------------------------------------

    @app.post("/api/login")
    def login(player: PlayerRecord = Depends(caller)) -> dict[str, Any]:
        run(game.login, player.player_id, now())
        return {
            "alias": alias_for(player.player_id, game.config.anonymization_salt),
            "role": player.role,
            "game": {"game_id": game.config.game_id, "title": game.config.title},
        }

    @app.get("/api/challenges")
    def challenges(player: PlayerRecord = Depends(caller)) -> dict[str, Any]:
        visible = run(game.visible_challenges, player.player_id, now())
        solved = sum(1 for c in visible if c["solved"])
        score = game.state.player(player.player_id).score
        return {
            "challenges": visible,
            "progress": {"solved": solved, "visible": len(visible), "score": score},
        }

    @app.get("/api/challenges/{challenge_id}")
    def challenge_detail(
        challenge_id: str, player: PlayerRecord = Depends(caller)
    ) -> dict[str, Any]:
        return run(game.view_challenge, player.player_id, challenge_id, now())

    @app.post("/api/challenges/{challenge_id}/submit")
    def submit(
        challenge_id: str,
        body: dict[str, Any] = Body(...),
        player: PlayerRecord = Depends(caller),
    ) -> dict[str, Any]:
        if player.role == "instructor":
            raise HTTPException(403, "instructors cannot submit flags")
        if "flag" not in body:
            raise HTTPException(422, "missing field 'flag'")
        verdict = run(
            game.submit_flag, player.player_id, challenge_id, str(body["flag"]), now()
        )
        return {"verdict": verdict.verdict, "points": verdict.points_awarded}

    @app.get("/api/assets/{asset_id}")
    def download(asset_id: str, player: PlayerRecord = Depends(caller)) -> Response:
        data = run(game.download_asset, player.player_id, asset_id, now())
        return Response(content=data, media_type="application/octet-stream")

    @app.post("/api/hints/{hint_id}/display")
    def display_hint(hint_id: str, player: PlayerRecord = Depends(caller)) -> dict[str, Any]:
        body = run(game.display_hint, player.player_id, hint_id, now())
        return {"hint_id": hint_id, "body": body}

    @app.get("/api/offers")
    def offers(player: PlayerRecord = Depends(caller)) -> dict[str, Any]:
        return {"offers": run(game.pending_hint_offers, player.player_id, now())}

    @app.get("/api/scoreboard")
    def scoreboard(player: PlayerRecord = Depends(caller)) -> dict[str, Any]:
        return {
            "entries": [
                {
                    "rank": e.rank,
                    "alias": e.alias,
                    "score": e.score,
                    "last_solve_at": (
                        e.last_solve_at.isoformat() if e.last_solve_at else None
                    ),
                }
                for e in game.scoreboard()
            ]
        }

    @app.post("/api/challenges/{challenge_id}/feedback")
    def feedback(
        challenge_id: str,
        body: dict[str, Any] = Body(...),
        player: PlayerRecord = Depends(caller),
    ) -> dict[str, Any]:
        if "rating" not in body:
            raise HTTPException(422, "missing field 'rating'")
        run(
            game.record_feedback,
            player.player_id,
            challenge_id,
            int(body["rating"]),
            body.get("comment"),
            now(),
        )
        return {"accepted": True}

    # -- instructor endpoints ---------------------------------------------

    @app.get("/api/admin/events")
    def events(since_seq: int = 0, _i: PlayerRecord = Depends(instructor)) -> dict[str, Any]:
        evs = [
            e.to_record()
            for e in game.store.snapshot()
            if e.seq > since_seq
        ]
        return {"events": evs, "last_seq": game.store.last_seq}

    @app.post("/api/admin/challenges/{challenge_id}/hints")
    def add_hint(
        challenge_id: str,
        body: dict[str, Any] = Body(...),
        caller_rec: PlayerRecord = Depends(instructor),
    ) -> dict[str, Any]:
        for f in ("hint_id", "topic_label", "body"):
            if f not in body:
                raise HTTPException(422, f"missing field {f!r}")
        hint = Hint(
            hint_id=str(body["hint_id"]),
            challenge_id=challenge_id,
            cost=int(body.get("cost", 0)),
            topic_label=str(body["topic_label"]),
            body=str(body["body"]),
        )
        released = (
            iso_to_ts(body["released_at"]) if body.get("released_at") else None
        )
        hint_id = run(
            game.add_hint, caller_rec.player_id, challenge_id, hint, now(), released
        )
        return {"hint_id": hint_id}

    @app.get("/api/admin/reports/{report}")
    def report(report: str, _i: PlayerRecord = Depends(instructor)) -> dict[str, Any]:
        log = game.store.snapshot()
        if report == "incidents":
            return {
                "incidents": [
                    i.to_record()
                    for i in analytics.incident_report(log, game.config)
                ]
            }
        if report == "hints":
            return {
                "hints": [
                    {
                        "hint_id": s.hint_id,
                        "challenge_id": s.challenge_id,
                        "display_count": s.display_count,
                        "n_latencies": len(s.latencies),
                        "median_seconds": s.median,
                        "mean_seconds": s.mean,
                    }
                    for s in analytics.hint_latency_report(log, game.config)
                ]
            }
        if report == "metrics":
            return {
                "metrics": [
                    {
                        "player_id": m.player_id,
                        "total_score": m.total_score,
                        "bonus_inclusive_score": m.bonus_inclusive_score,
                        "wrong_flag_count": m.wrong_flag_count,
                        "session_duration_seconds": m.session_duration,
                        "first_to_last_solve_seconds": m.first_to_last_solve,
                    }
                    for m in analytics.player_metrics(log, game.config)
                ]
            }
        if report == "correlations":
            metrics = analytics.player_metrics(log, game.config)
            cells = analytics.correlation_report(
                metrics, marks_upload, permutations=2000
            )
            return {
                "correlations": [
                    {
                        "variable_x": c.variable_x,
                        "variable_y": c.variable_y,
                        "n": c.n,
                        "rho": c.rho,
                        "p_value": c.p_value,
                        "masked": c.masked,
                        "reason": c.reason,
                    }
                    for c in cells
                ]
            }
        if report == "feedback":
            return {
                "feedback": [
                    {**row, "at": row["at"].isoformat()}
                    for row in game.feedback_report()
                ]
            }
        raise HTTPException(404, f"unknown report {report!r}")

    @app.post("/api/admin/marks")
    async def upload_marks(
        request: Request,
        _i: PlayerRecord = Depends(instructor),
    ) -> dict[str, Any]:
        import csv as _csv

        text = (await request.body()).decode("utf-8")
        reader = _csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or "player_id" not in reader.fieldnames:
            raise HTTPException(422, "marks table needs a player_id column")
        marks_upload.clear()
        for row in reader:
            pid = row.pop("player_id")
            marks_upload[pid] = {
                k: float(v) for k, v in row.items() if v not in (None, "")
            }
        return {"players": len(marks_upload)}

    @app.get("/api/admin/export")
    def export(_i: PlayerRecord = Depends(instructor)) -> Response:
        buf = io.StringIO()
        game.store.export(buf)
        return Response(content=buf.getvalue(), media_type="application/x-ndjson")

    return app
