"""Tests for the session-based rating study service."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from agavkit.audio import write_wav
from agavkit.study import (
    DailyCapError,
    RatingValidationError,
    SequenceError,
    StudyConfig,
    StudyItem,
    StudyService,
    UnknownItemError,
    UnknownSessionError,
    load_study_config,
    save_study_config,
    session_id_for,
    subject_order,
)

from conftest import make_clip

GOOD = {"audio_quality": 4.0, "consistency": 3.5, "overall": 4.2}


class FakeClock:
    def __init__(self, start: datetime | None = None):
        self.now = start or datetime(2024, 6, 1, 9, 0, 0, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        return self.now

    def advance(self, **kwargs) -> None:
        self.now += timedelta(**kwargs)


def make_config(root: Path, n_items: int = 6, daily_cap: int = 60, seed: int = 11) -> StudyConfig:
    media = root / "media"
    media.mkdir(parents=True, exist_ok=True)
    items = []
    for i in range(n_items):
        video = media / f"clip{i}.mp4"
        audio = media / f"clip{i}.wav"
        video.write_bytes(b"fake-video-" + str(i).encode())
        write_wav(audio, make_clip(seed=100 + i, frames=40))
        items.append(StudyItem(item_id=f"it{i:02d}", video_path=video, audio_path=audio))
    return StudyConfig(
        study_id="toy-study",
        items=tuple(items),
        randomization_seed=seed,
        daily_cap=daily_cap,
    )


def make_service(tmp_path: Path, **kwargs) -> tuple[StudyService, FakeClock]:
    clock = FakeClock()
    config = make_config(tmp_path, **kwargs)
    service = StudyService(config, tmp_path / "state", clock=clock)
    return service, clock


class TestConfig:
    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        raw = {
            "study_id": "s1",
            "randomization_seed": 3,
            "daily_cap": 10,
            "storage_dir": "state",
            "items": [
                {"item_id": "a", "video_path": "media/a.mp4", "audio_path": "media/a.wav"}
            ],
        }
        path = tmp_path / "study.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        cfg = load_study_config(path)
        assert cfg.items[0].video_path == tmp_path / "media" / "a.mp4"
        assert cfg.storage_dir == tmp_path / "state"
        assert cfg.daily_cap == 10

    def test_absolute_paths_kept(self, tmp_path):
        cfg = make_config(tmp_path)
        save_study_config(tmp_path / "study.json", cfg)
        loaded = load_study_config(tmp_path / "study.json")
        assert loaded == cfg

    def test_default_cap(self, tmp_path):
        cfg = make_config(tmp_path)
        assert cfg.daily_cap == 60

    def test_rejects_duplicate_item_ids(self, tmp_path):
        item = StudyItem("x", tmp_path / "v.mp4", tmp_path / "a.wav")
        with pytest.raises(ValueError, match="duplicate"):
            StudyConfig(study_id="s", items=(item, item), randomization_seed=0)

    def test_rejects_empty_items(self):
        with pytest.raises(ValueError, match="at least one"):
            StudyConfig(study_id="s", items=(), randomization_seed=0)

    def test_rejects_bad_cap(self, tmp_path):
        item = StudyItem("x", tmp_path / "v.mp4", tmp_path / "a.wav")
        with pytest.raises(ValueError, match="daily_cap"):
            StudyConfig(study_id="s", items=(item,), randomization_seed=0, daily_cap=0)

    def test_malformed_json_names_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope", encoding="utf-8")
        with pytest.raises(ValueError, match="bad.json"):
            load_study_config(path)


class TestSessions:
    def test_session_id_is_deterministic(self):
        a = session_id_for("study", "alice")
        assert a == session_id_for("study", "alice")
        assert a != session_id_for("study", "bob")
        assert a != session_id_for("other", "alice")
        assert len(a) == 32

    def test_create_then_resume(self, tmp_path):
        service, _ = make_service(tmp_path)
        first = service.create_session("alice")
        again = service.create_session("alice")
        assert first == again
        assert first.completed == 0
        assert first.total == 6
        assert not first.complete

    def test_resume_preserves_progress(self, tmp_path):
        service, _ = make_service(tmp_path)
        view = service.create_session("alice")
        item = service.get_item(view.session_id)
        service.submit_rating(view.session_id, item.item_id, GOOD)
        resumed = service.create_session("alice")
        assert resumed.session_id == view.session_id
        assert resumed.completed == 1

    def test_subjects_get_distinct_orders(self, tmp_path):
        cfg = make_config(tmp_path)
        alice = subject_order(cfg, "alice")
        bob = subject_order(cfg, "bob")
        assert sorted(alice) == sorted(bob) == sorted(it.item_id for it in cfg.items)
        assert alice != bob

    def test_order_is_stable_across_instances(self, tmp_path):
        cfg = make_config(tmp_path)
        assert subject_order(cfg, "carol") == subject_order(cfg, "carol")

    def test_blank_subject_rejected(self, tmp_path):
        service, _ = make_service(tmp_path)
        with pytest.raises(RatingValidationError):
            service.create_session("   ")

    def test_unknown_session(self, tmp_path):
        service, _ = make_service(tmp_path)
        with pytest.raises(UnknownSessionError):
            service.get_item("nope")
        with pytest.raises(UnknownSessionError):
            service.submit_rating("nope", "it00", GOOD)
        with pytest.raises(UnknownSessionError):
            service.progress("nope")


class TestRatingFlow:
    def test_current_follows_subject_order(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        order = subject_order(service.config, "alice")
        for position, item_id in enumerate(order, start=1):
            view = service.get_item(sid)
            assert (view.item_id, view.position, view.total) == (item_id, position, 6)
            assert view.scores is None
            service.submit_rating(sid, item_id, GOOD)
        assert service.get_item(sid).complete

    def test_submission_advances_cursor(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        first = service.get_item(sid).item_id
        progress = service.submit_rating(sid, first, GOOD)
        assert progress.completed == 1
        assert service.get_item(sid).item_id != first

    def test_previous_returns_stored_scores(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        first = service.get_item(sid).item_id
        service.submit_rating(sid, first, GOOD)
        prev = service.get_item(sid, which="previous")
        assert prev.item_id == first
        assert prev.scores == GOOD
        assert prev.position == 1

    def test_revision_does_not_advance(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        first = service.get_item(sid).item_id
        service.submit_rating(sid, first, GOOD)
        second = service.get_item(sid).item_id
        revised = dict(GOOD, overall=1.5)
        progress = service.submit_rating(sid, first, revised)
        assert progress.completed == 1
        assert service.get_item(sid).item_id == second
        assert service.get_item(sid, which="previous").scores == revised

    def test_out_of_sequence_rejected(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        order = subject_order(service.config, "alice")
        with pytest.raises(SequenceError):
            service.submit_rating(sid, order[2], GOOD)

    def test_unknown_item_rejected(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        with pytest.raises(UnknownItemError):
            service.submit_rating(sid, "missing", GOOD)

    def test_previous_before_first_rating(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        with pytest.raises(SequenceError):
            service.get_item(sid, which="previous")

    def test_bad_which_value(self, tmp_path):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        with pytest.raises(ValueError, match="which"):
            service.get_item(sid, which="next")

    def test_revision_allowed_after_completion(self, tmp_path):
        service, _ = make_service(tmp_path, n_items=2)
        sid = service.create_session("alice").session_id
        order = subject_order(service.config, "alice")
        for item_id in order:
            service.submit_rating(sid, item_id, GOOD)
        assert service.progress(sid).complete
        service.submit_rating(sid, order[-1], dict(GOOD, overall=2.0))
        with pytest.raises(SequenceError):
            service.submit_rating(sid, order[0], GOOD)

    @pytest.mark.parametrize(
        "scores",
        [
            {"audio_quality": 4.0, "consistency": 3.5},
            dict(GOOD, extra=1.0),
            dict(GOOD, overall=5.05),
            dict(GOOD, overall=0.9),
            dict(GOOD, overall=True),
            dict(GOOD, overall="4.0"),
            dict(GOOD, overall=float("nan")),
        ],
    )
    def test_malformed_scores_rejected(self, tmp_path, scores):
        service, _ = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        item = service.get_item(sid).item_id
        with pytest.raises(RatingValidationError):
            service.submit_rating(sid, item, scores)
        # Rejected submissions must not advance or consume budget
        assert service.progress(sid).completed == 0
        assert service.progress(sid).completed_today == 0


class TestDailyCap:
    def test_cap_blocks_then_next_day_resets(self, tmp_path):
        service, clock = make_service(tmp_path, daily_cap=3)
        sid = service.create_session("alice").session_id
        for _ in range(3):
            service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        assert service.progress(sid).completed_today == 3
        with pytest.raises(DailyCapError):
            service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        clock.advance(days=1)
        assert service.progress(sid).completed_today == 0
        service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        assert service.progress(sid).completed == 4

    def test_revisions_count_toward_cap(self, tmp_path):
        service, _ = make_service(tmp_path, daily_cap=3)
        sid = service.create_session("alice").session_id
        first = service.get_item(sid).item_id
        service.submit_rating(sid, first, GOOD)
        service.submit_rating(sid, first, dict(GOOD, overall=2.0))
        service.submit_rating(sid, first, dict(GOOD, overall=3.0))
        with pytest.raises(DailyCapError):
            service.submit_rating(sid, service.get_item(sid).item_id, GOOD)

    def test_caps_are_per_subject(self, tmp_path):
        service, _ = make_service(tmp_path, daily_cap=1)
        alice = service.create_session("alice").session_id
        bob = service.create_session("bob").session_id
        service.submit_rating(alice, service.get_item(alice).item_id, GOOD)
        service.submit_rating(bob, service.get_item(bob).item_id, GOOD)
        with pytest.raises(DailyCapError):
            service.submit_rating(alice, service.get_item(alice).item_id, GOOD)

    def test_rejected_submission_not_logged(self, tmp_path):
        service, clock = make_service(tmp_path, daily_cap=1)
        sid = service.create_session("alice").session_id
        service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        with pytest.raises(DailyCapError):
            service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        events = (tmp_path / "state" / "events.jsonl").read_text().splitlines()
        assert len(events) == 2  # one session, one accepted rating


class TestExportAndReplay:
    def test_export_is_latest_wins_and_sorted(self, tmp_path):
        service, clock = make_service(tmp_path, n_items=3)
        for subject in ("bob", "alice"):
            sid = service.create_session(subject).session_id
            item = service.get_item(sid).item_id
            service.submit_rating(sid, item, GOOD)
            clock.advance(minutes=1)
        sid = service.create_session("alice").session_id
        prev = service.get_item(sid, which="previous").item_id
        service.submit_rating(sid, prev, dict(GOOD, overall=1.1))

        rows = service.export_ratings()
        assert [(r.subject_id,) for r in rows] == [("alice",), ("bob",)]
        assert rows[0].overall == 1.1
        assert len(rows) == 2

    def test_export_timestamps_come_from_clock(self, tmp_path):
        service, clock = make_service(tmp_path)
        sid = service.create_session("alice").session_id
        service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        assert service.export_ratings()[0].timestamp == clock.now

    def test_restart_replays_identical_state(self, tmp_path):
        config = make_config(tmp_path, daily_cap=5)
        clock = FakeClock()
        service = StudyService(config, tmp_path / "state", clock=clock)
        sid = service.create_session("alice").session_id
        first = service.get_item(sid).item_id
        service.submit_rating(sid, first, GOOD)
        service.submit_rating(sid, first, dict(GOOD, overall=2.5))
        service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        before = service.progress(sid)
        exported = [r.to_json_dict() for r in service.export_ratings()]
        log_before = (tmp_path / "state" / "events.jsonl").read_bytes()

        reborn = StudyService(config, tmp_path / "state", clock=clock)
        assert reborn.progress(sid) == before
        assert [r.to_json_dict() for r in reborn.export_ratings()] == exported
        assert (tmp_path / "state" / "events.jsonl").read_bytes() == log_before
        assert reborn.get_item(sid).item_id == service.get_item(sid).item_id

    def test_replay_counts_daily_budget(self, tmp_path):
        config = make_config(tmp_path, daily_cap=2)
        clock = FakeClock()
        service = StudyService(config, tmp_path / "state", clock=clock)
        sid = service.create_session("alice").session_id
        service.submit_rating(sid, service.get_item(sid).item_id, GOOD)
        service.submit_rating(sid, service.get_item(sid).item_id, GOOD)

        reborn = StudyService(config, tmp_path / "state", clock=clock)
        with pytest.raises(DailyCapError):
            reborn.submit_rating(sid, reborn.get_item(sid).item_id, GOOD)

    def test_corrupt_log_names_line(self, tmp_path):
        config = make_config(tmp_path)
        state = tmp_path / "state"
        state.mkdir()
        (state / "events.jsonl").write_text('{"type": "nonsense"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="events.jsonl:1"):
            StudyService(config, state)

    def test_log_from_other_study_rejected(self, tmp_path):
        config = make_config(tmp_path)
        service = StudyService(config, tmp_path / "state", clock=FakeClock())
        service.create_session("alice")
        other = StudyConfig(
            study_id="different-study",
            items=config.items,
            randomization_seed=config.randomization_seed,
        )
        with pytest.raises(ValueError, match="different"):
            StudyService(other, tmp_path / "state")

    def test_empty_export(self, tmp_path):
        service, _ = make_service(tmp_path)
        assert service.export_ratings() == []


class TestClockContract:
    def test_naive_clock_rejected(self, tmp_path):
        config = make_config(tmp_path)
        service = StudyService(config, tmp_path / "state", clock=lambda: datetime(2024, 1, 1))
        with pytest.raises(ValueError, match="timezone-aware"):
            service.create_session("alice")

    def test_media_path_lookup(self, tmp_path):
        service, _ = make_service(tmp_path)
        assert service.media_path("it00", "video").name == "clip0.mp4"
        assert service.media_path("it00", "audio").name == "clip0.wav"
        with pytest.raises(UnknownItemError):
            service.media_path("zz", "video")
        with pytest.raises(ValueError, match="kind"):
            service.media_path("it00", "subtitles")
