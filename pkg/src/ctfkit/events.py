"""Append-only event log: the single source of truth for game state and
analytics.

One JSON record per line, UTF-8. Fields: seq, at (ISO-8601 UTC with
milliseconds), player, kind, plus kind-specific payload fields. Unknown
fields are rejected on import. Storage is a single append-only file per
game plus an in-memory index rebuilt by full replay on open.
"""

from __future__ import annotations

import json
import os
from datetime import datetime
from typing import Any, IO, Iterable, Optional

from .model import GameEvent, InvalidArgument, utc_ms


class AppendFailed(RuntimeError):
    """The event could not be made durable; nothing was recorded."""


class ImportFailed(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class PreconditionViolation(RuntimeError):
    pass


def event_to_line(event: GameEvent) -> str:
    return json.dumps(event.to_record(), separators=(",", ":"), sort_keys=False)


def event_from_line(line: str) -> GameEvent:
    return GameEvent.from_record(json.loads(line))


class EventStore:
    """Append-only log with a serialized writer and immutable snapshots.

    If ``path`` is given, every appended event is written and fsynced before
    the append returns; the in-memory index is only updated after the write
    succeeds, so a storage failure leaves the log unchanged.
    """

    def __init__(self, path: Optional[str] = None):
        self._events: list[GameEvent] = []
        self._path = path
        self._fh: Optional[IO[str]] = None
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        self._events.append(event_from_line(line))
                    except (InvalidArgument, json.JSONDecodeError) as exc:
                        raise ImportFailed(line_no, str(exc)) from exc
        if path:
            self._fh = open(path, "a", encoding="utf-8")

    def __len__(self) -> int:
        return len(self._events)

    @property
    def last_seq(self) -> int:
        return self._events[-1].seq if self._events else 0

    @property
    def last_at(self) -> Optional[datetime]:
        return self._events[-1].at if self._events else None

    def append(self, player_id: str, kind: str, payload: dict[str, Any], at: datetime) -> GameEvent:
        """Stamp seq and time, persist, then index. Returns the stored event.

        Time is server-assigned: a caller clock running behind the last
        appended event is clamped forward so log time never regresses.
        """
        at = utc_ms(at)
        if self._events and at < self._events[-1].at:
            at = self._events[-1].at
        event = GameEvent(
            seq=self.last_seq + 1,
            at=at,
            player_id=player_id,
            kind=kind,
            payload=payload,
        )
        if self._fh is not None:
            try:
                self._fh.write(event_to_line(event) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except (OSError, ValueError) as exc:
                raise AppendFailed(str(exc)) from exc
        self._events.append(event)
        return event

    def query(
        self,
        kinds: Optional[Iterable[str]] = None,
        player_id: Optional[str] = None,
        challenge_id: Optional[str] = None,
        time_range: Optional[tuple[datetime, datetime]] = None,
        seq_range: Optional[tuple[int, int]] = None,
    ) -> list[GameEvent]:
        """Events matching every provided filter, in seq order."""
        if time_range and time_range[0] > time_range[1]:
            raise InvalidArgument("inverted time_range")
        if seq_range and seq_range[0] > seq_range[1]:
            raise InvalidArgument("inverted seq_range")
        kind_set = set(kinds) if kinds is not None else None
        out = []
        for e in self._events:
            if kind_set is not None and e.kind not in kind_set:
                continue
            if player_id is not None and e.player_id != player_id:
                continue
            if challenge_id is not None and e.payload.get("challenge") != challenge_id:
                continue
            if time_range and not (time_range[0] <= e.at <= time_range[1]):
                continue
            if seq_range and not (seq_range[0] <= e.seq <= seq_range[1]):
                continue
            out.append(e)
        return out

    def snapshot(self) -> list[GameEvent]:
        return list(self._events)

    def get(self, seq: int) -> Optional[GameEvent]:
        if 1 <= seq <= len(self._events) and self._events[seq - 1].seq == seq:
            return self._events[seq - 1]
        for e in self._events:
            if e.seq == seq:
                return e
        return None

    def export(self, destination: IO[str]) -> int:
        """Write one line per event; returns the count written."""
        count = 0
        for e in self._events:
            destination.write(event_to_line(e) + "\n")
            count += 1
        return count

    def export_path(self, path: str) -> int:
        with open(path, "w", encoding="utf-8") as fh:
            return self.export(fh)

    def import_(self, source: IO[str]) -> int:
        """Load an exported log into an empty store. On a malformed line the
        store is left empty and the error names the line number."""
        if self._events:
            raise PreconditionViolation("import requires an empty store")
        loaded: list[GameEvent] = []
        for line_no, line in enumerate(source, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                loaded.append(event_from_line(line))
            except (InvalidArgument, json.JSONDecodeError) as exc:
                raise ImportFailed(line_no, str(exc)) from exc
        if self._fh is not None:
            for e in loaded:
                self._fh.write(event_to_line(e) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        self._events = loaded
        return len(loaded)

    def import_path(self, path: str) -> int:
        with open(path, "r", encoding="utf-8") as fh:
            return self.import_(fh)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def export_events(events: Iterable[GameEvent], path: str) -> int:
    """Write an event list in the exported line-delimited format."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(event_to_line(e) + "\n")
            count += 1
    return count


def load_log(path: str) -> list[GameEvent]:
    """Read an exported event-log file into a list of events."""
    events: list[GameEvent] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(event_from_line(line))
            except (InvalidArgument, json.JSONDecodeError) as exc:
                raise ImportFailed(line_no, str(exc)) from exc
    return events
