"""Session-based rating study with an append-only event log.

A study presents each subject the same pool of items in a per-subject
deterministic order. Subjects rate one item at a time on three dimensions,
may revise the item they just rated, and are capped at a fixed number of
accepted submissions per UTC day. Every accepted action is appended to
``events.jsonl`` under the storage directory; restarting the service replays
that log and reconstructs the exact same state.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .seeding import item_rng
from .subjective import (
    DIMENSIONS,
    RatingRecord,
    dedupe_latest,
    format_rfc3339,
    parse_rfc3339,
    score_on_grid,
)

EVENTS_FILENAME = "events.jsonl"


class StudyError(Exception):
    """Base class for study service failures."""


class UnknownStudyError(StudyError):
    """Requested study id does not match this service."""


class UnknownSessionError(StudyError):
    """No session with the given id exists."""


class UnknownItemError(StudyError):
    """Referenced item id is not part of the study."""


class RatingValidationError(StudyError):
    """Submitted scores are malformed or off the rating grid."""


class SequenceError(StudyError):
    """Submission targets an item that is neither current nor previous."""


class DailyCapError(StudyError):
    """Subject has already used up today's submission budget."""


@dataclass(frozen=True)
class StudyItem:
    """One clip to be rated, with local media paths."""

    item_id: str
    video_path: Path
    audio_path: Path

    def __post_init__(self):
        if not self.item_id:
            raise ValueError("item_id must be non-empty")

    def to_json_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "video_path": str(self.video_path),
            "audio_path": str(self.audio_path),
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "StudyItem":
        try:
            return cls(
                item_id=str(raw["item_id"]),
                video_path=Path(raw["video_path"]),
                audio_path=Path(raw["audio_path"]),
            )
        except KeyError as exc:
            raise ValueError(f"study item missing key {exc}") from None


@dataclass(frozen=True)
class StudyConfig:
    """Static description of a study: identity, items, seed, cap."""

    study_id: str
    items: tuple[StudyItem, ...]
    randomization_seed: int
    daily_cap: int = 60
    storage_dir: Path | None = None

    def __post_init__(self):
        if not self.study_id:
            raise ValueError("study_id must be non-empty")
        if not self.items:
            raise ValueError("a study needs at least one item")
        ids = [it.item_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate item ids in study config")
        if isinstance(self.daily_cap, bool) or self.daily_cap < 1:
            raise ValueError(f"daily_cap must be a positive integer, got {self.daily_cap!r}")
        if isinstance(self.randomization_seed, bool) or not isinstance(self.randomization_seed, int):
            raise ValueError("randomization_seed must be an integer")

    def to_json_dict(self) -> dict:
        out = {
            "study_id": self.study_id,
            "randomization_seed": self.randomization_seed,
            "daily_cap": self.daily_cap,
            "items": [it.to_json_dict() for it in self.items],
        }
        if self.storage_dir is not None:
            out["storage_dir"] = str(self.storage_dir)
        return out


def load_study_config(path: Path | str, media_base: Path | str | None = None) -> StudyConfig:
    """Read a study config; relative paths resolve against the file's parent.

    media_base, when given, overrides the base directory for relative item
    media paths (storage_dir still resolves against the config's parent).
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    base = path.resolve().parent
    item_base = Path(media_base) if media_base is not None else base

    def _resolve(p: str, root: Path = base) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else root / candidate

    try:
        items = []
        for entry in raw["items"]:
            item = StudyItem.from_json_dict(entry)
            items.append(
                StudyItem(
                    item_id=item.item_id,
                    video_path=_resolve(str(item.video_path), item_base),
                    audio_path=_resolve(str(item.audio_path), item_base),
                )
            )
        storage = raw.get("storage_dir")
        return StudyConfig(
            study_id=str(raw["study_id"]),
            items=tuple(items),
            randomization_seed=int(raw["randomization_seed"]),
            daily_cap=int(raw.get("daily_cap", 60)),
            storage_dir=_resolve(str(storage)) if storage is not None else None,
        )
    except KeyError as exc:
        raise ValueError(f"{path}: config missing key {exc}") from None


def save_study_config(path: Path | str, config: StudyConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SessionView:
    session_id: str
    subject_id: str
    total: int
    completed: int
    complete: bool


@dataclass(frozen=True)
class ItemView:
    """What the rating UI needs to present one step of the walk."""

    complete: bool
    item_id: str | None
    position: int | None
    total: int
    scores: dict[str, float] | None


@dataclass(frozen=True)
class ProgressView:
    completed: int
    total: int
    completed_today: int
    daily_cap: int
    complete: bool


@dataclass
class _SubjectState:
    session_id: str
    subject_id: str
    order: tuple[str, ...]
    cursor: int = 0
    latest: dict[str, dict[str, float]] = field(default_factory=dict)
    daily: Counter = field(default_factory=Counter)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def session_id_for(study_id: str, subject_id: str) -> str:
    """Stable session id: the same subject always resumes the same session."""
    digest = hashlib.blake2b(f"{study_id}:{subject_id}".encode("utf-8"), digest_size=16)
    return digest.hexdigest()


class StudyService:
    """Single-writer study state machine backed by an append-only log.

    All mutating calls are serialized by an internal lock; run one service
    instance per storage directory.
    """

    def __init__(
        self,
        config: StudyConfig,
        storage_dir: Path | str,
        clock: Callable[[], datetime] | None = None,
    ):
        self.config = config
        self.storage_dir = Path(storage_dir)
        self.storage_dir.mkdir(parents=True, exist_ok=True)
        self._events_path = self.storage_dir / EVENTS_FILENAME
        self._clock = clock if clock is not None else _utcnow
        self._lock = threading.Lock()
        self._items_by_id = {it.item_id: it for it in config.items}
        self._by_session: dict[str, _SubjectState] = {}
        self._by_subject: dict[str, _SubjectState] = {}
        self._export_rows: list[RatingRecord] = []
        self._replay()

    # -- identity ----------------------------------------------------------

    def require_study(self, study_id: str) -> None:
        if study_id != self.config.study_id:
            raise UnknownStudyError(f"unknown study: {study_id!r}")

    def media_path(self, item_id: str, kind: str) -> Path:
        if kind not in ("video", "audio"):
            raise ValueError(f"media kind must be 'video' or 'audio', got {kind!r}")
        item = self._items_by_id.get(item_id)
        if item is None:
            raise UnknownItemError(f"unknown item: {item_id!r}")
        return item.video_path if kind == "video" else item.audio_path

    # -- sessions ----------------------------------------------------------

    def create_session(self, subject_id: str) -> SessionView:
        """Start or resume the subject's session; resumption is a no-op."""
        if not isinstance(subject_id, str) or not subject_id.strip():
            raise RatingValidationError("subject_id must be a non-empty string")
        subject_id = subject_id.strip()
        with self._lock:
            state = self._by_subject.get(subject_id)
            if state is None:
                state = self._register_subject(subject_id)
                self._append_event(
                    {
                        "type": "session",
                        "session_id": state.session_id,
                        "subject_id": subject_id,
                        "timestamp": format_rfc3339(self._now()),
                    }
                )
            return self._session_view(state)

    def _register_subject(self, subject_id: str) -> _SubjectState:
        state = _SubjectState(
            session_id=session_id_for(self.config.study_id, subject_id),
            subject_id=subject_id,
            order=subject_order(self.config, subject_id),
        )
        self._by_session[state.session_id] = state
        self._by_subject[subject_id] = state
        return state

    def _session(self, session_id: str) -> _SubjectState:
        state = self._by_session.get(session_id)
        if state is None:
            raise UnknownSessionError(f"unknown session: {session_id!r}")
        return state

    def _session_view(self, state: _SubjectState) -> SessionView:
        total = len(state.order)
        return SessionView(
            session_id=state.session_id,
            subject_id=state.subject_id,
            total=total,
            completed=state.cursor,
            complete=state.cursor >= total,
        )

    # -- reading -----------------------------------------------------------

    def get_item(self, session_id: str, which: str = "current") -> ItemView:
        with self._lock:
            state = self._session(session_id)
            total = len(state.order)
            if which == "current":
                if state.cursor >= total:
                    return ItemView(complete=True, item_id=None, position=None, total=total, scores=None)
                item_id = state.order[state.cursor]
                return ItemView(
                    complete=False,
                    item_id=item_id,
                    position=state.cursor + 1,
                    total=total,
                    scores=None,
                )
            if which == "previous":
                if state.cursor == 0:
                    raise SequenceError("no item has been rated yet")
                item_id = state.order[state.cursor - 1]
                return ItemView(
                    complete=False,
                    item_id=item_id,
                    position=state.cursor,
                    total=total,
                    scores=dict(state.latest[item_id]),
                )
            raise ValueError(f"which must be 'current' or 'previous', got {which!r}")

    def progress(self, session_id: str) -> ProgressView:
        with self._lock:
            state = self._session(session_id)
            return self._progress_view(state, self._today())

    def _progress_view(self, state: _SubjectState, today: date) -> ProgressView:
        total = len(state.order)
        return ProgressView(
            completed=state.cursor,
            total=total,
            completed_today=state.daily[today],
            daily_cap=self.config.daily_cap,
            complete=state.cursor >= total,
        )

    # -- writing -----------------------------------------------------------

    def submit_rating(self, session_id: str, item_id: str, scores: Mapping) -> ProgressView:
        """Accept one rating for the current item, or a revision of the previous one.

        Check order: unknown session, malformed scores, unknown item,
        out-of-sequence item, then the daily cap. Every accepted submission
        counts toward the cap, revisions included.
        """
        with self._lock:
            state = self._session(session_id)
            clean = self._validate_scores(scores)
            if item_id not in self._items_by_id:
                raise UnknownItemError(f"unknown item: {item_id!r}")
            total = len(state.order)
            current = state.order[state.cursor] if state.cursor < total else None
            previous = state.order[state.cursor - 1] if state.cursor > 0 else None
            if item_id != current and item_id != previous:
                raise SequenceError(
                    f"item {item_id!r} is not open for rating; only the current or the "
                    "just-rated item may be submitted"
                )
            ts = self._now()
            today = ts.astimezone(timezone.utc).date()
            if state.daily[today] >= self.config.daily_cap:
                raise DailyCapError(
                    f"daily cap of {self.config.daily_cap} submissions reached for "
                    f"{state.subject_id!r}"
                )
            self._append_event(
                {
                    "type": "rating",
                    "session_id": state.session_id,
                    "subject_id": state.subject_id,
                    "item_id": item_id,
                    "audio_quality": clean["audio_quality"],
                    "consistency": clean["consistency"],
                    "overall": clean["overall"],
                    "timestamp": format_rfc3339(ts),
                }
            )
            self._record_rating(state, item_id, clean, ts)
            return self._progress_view(state, today)

    def _validate_scores(self, scores: Mapping) -> dict[str, float]:
        if not isinstance(scores, Mapping):
            raise RatingValidationError("scores must be a mapping of the three dimensions")
        extra = set(scores) - set(DIMENSIONS)
        if extra:
            raise RatingValidationError(f"unexpected score keys: {sorted(extra)}")
        clean = {}
        for dim in DIMENSIONS:
            if dim not in scores:
                raise RatingValidationError(f"missing score for {dim!r}")
            value = scores[dim]
            if not score_on_grid(value):
                raise RatingValidationError(
                    f"{dim} must be in [1, 5] with 0.1 steps, got {value!r}"
                )
            clean[dim] = float(value)
        return clean

    def _record_rating(self, state: _SubjectState, item_id: str, scores: dict[str, float], ts: datetime) -> None:
        # Shared by live submission and replay so both walk the same path.
        total = len(state.order)
        current = state.order[state.cursor] if state.cursor < total else None
        state.latest[item_id] = dict(scores)
        if item_id == current:
            state.cursor += 1
        state.daily[ts.astimezone(timezone.utc).date()] += 1
        self._export_rows.append(
            RatingRecord(
                subject_id=state.subject_id,
                item_id=item_id,
                audio_quality=scores["audio_quality"],
                consistency=scores["consistency"],
                overall=scores["overall"],
                timestamp=ts,
            )
        )

    # -- export ------------------------------------------------------------

    def export_ratings(self) -> list[RatingRecord]:
        """Latest-wins snapshot of every (subject, item) pair, stably sorted."""
        with self._lock:
            rows = dedupe_latest(self._export_rows)
        rows.sort(key=lambda r: (r.subject_id, r.item_id))
        return rows

    # -- persistence -------------------------------------------------------

    def _now(self) -> datetime:
        ts = self._clock()
        if not isinstance(ts, datetime) or ts.tzinfo is None:
            raise ValueError("clock must return a timezone-aware datetime")
        return ts

    def _today(self) -> date:
        return self._now().astimezone(timezone.utc).date()

    def _append_event(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with self._events_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _replay(self) -> None:
        if not self._events_path.exists():
            return
        with self._events_path.open("r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    self._replay_event(json.loads(line))
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{self._events_path}:{lineno}: {exc}") from None

    def _replay_event(self, event: Mapping) -> None:
        kind = event["type"]
        if kind == "session":
            subject_id = str(event["subject_id"])
            if subject_id not in self._by_subject:
                state = self._register_subject(subject_id)
                if state.session_id != event["session_id"]:
                    raise ValueError(
                        f"session id mismatch for subject {subject_id!r}; "
                        "the log belongs to a different study config"
                    )
            return
        if kind == "rating":
            state = self._by_session.get(str(event["session_id"]))
            if state is None:
                raise ValueError(f"rating for unknown session {event['session_id']!r}")
            scores = {dim: float(event[dim]) for dim in DIMENSIONS}
            for dim, value in scores.items():
                if not score_on_grid(value):
                    raise ValueError(f"logged {dim} is off the rating grid: {value!r}")
            item_id = str(event["item_id"])
            if item_id not in self._items_by_id:
                raise ValueError(f"logged rating references unknown item {item_id!r}")
            self._record_rating(state, item_id, scores, parse_rfc3339(event["timestamp"]))
            return
        raise ValueError(f"unknown event type {kind!r}")


def subject_order(config: StudyConfig, subject_id: str) -> tuple[str, ...]:
    """Item order a subject will see, without touching any service state."""
    order = [it.item_id for it in config.items]
    item_rng(config.randomization_seed, f"order:{subject_id}").shuffle(order)
    return tuple(order)


def make_study_items(pairs: Iterable[tuple[str, Path, Path]]) -> tuple[StudyItem, ...]:
    return tuple(StudyItem(item_id=i, video_path=v, audio_path=a) for i, v, a in pairs)
