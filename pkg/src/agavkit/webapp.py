"""HTTP front end for the rating study service.

Thin translation layer: request parsing and status codes live here, all
study semantics live in :mod:`agavkit.study`. Error mapping is fixed:
unknown study/session/item 404, malformed scores 422, out-of-sequence
submissions 409, daily cap 429.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .study import (
    DailyCapError,
    ItemView,
    ProgressView,
    RatingValidationError,
    SequenceError,
    StudyError,
    StudyService,
    UnknownItemError,
    UnknownSessionError,
    UnknownStudyError,
)

_STATUS_BY_ERROR = {
    UnknownStudyError: 404,
    UnknownSessionError: 404,
    UnknownItemError: 404,
    RatingValidationError: 422,
    SequenceError: 409,
    DailyCapError: 429,
}


class SessionRequest(BaseModel):
    study_id: str
    subject_id: str


class RatingRequest(BaseModel):
    item_id: str
    audio_quality: float
    consistency: float
    overall: float


def _progress_json(p: ProgressView) -> dict:
    return {
        "completed": p.completed,
        "total": p.total,
        "completed_today": p.completed_today,
        "daily_cap": p.daily_cap,
        "complete": p.complete,
    }


def _item_json(view: ItemView) -> dict:
    if view.complete:
        return {
            "complete": True,
            "item_id": None,
            "position": None,
            "total": view.total,
            "video_url": None,
            "audio_url": None,
            "scores": None,
        }
    return {
        "complete": False,
        "item_id": view.item_id,
        "position": view.position,
        "total": view.total,
        "video_url": f"/media/{view.item_id}/video",
        "audio_url": f"/media/{view.item_id}/audio",
        "scores": view.scores,
    }


def create_app(service: StudyService, ui_dir: Path | None = None) -> FastAPI:
    """Build the app; with ui_dir, static files are served under / as well."""
    app = FastAPI(title="rating study", docs_url=None, redoc_url=None)

    @app.exception_handler(StudyError)
    async def _study_error(_: Request, exc: StudyError) -> JSONResponse:
        status = _STATUS_BY_ERROR.get(type(exc), 500)
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.post("/api/session")
    def create_session(req: SessionRequest) -> dict:
        service.require_study(req.study_id)
        view = service.create_session(req.subject_id)
        return {
            "session_id": view.session_id,
            "subject_id": view.subject_id,
            "total": view.total,
            "completed": view.completed,
            "complete": view.complete,
        }

    @app.get("/api/session/{session_id}/item")
    def get_item(
        session_id: str,
        which: Literal["current", "previous"] = Query("current"),
    ) -> dict:
        return _item_json(service.get_item(session_id, which))

    @app.post("/api/session/{session_id}/rating")
    def submit_rating(session_id: str, req: RatingRequest) -> dict:
        progress = service.submit_rating(
            session_id,
            req.item_id,
            {
                "audio_quality": req.audio_quality,
                "consistency": req.consistency,
                "overall": req.overall,
            },
        )
        out = _progress_json(progress)
        out["accepted"] = True
        return out

    @app.get("/api/session/{session_id}/progress")
    def get_progress(session_id: str) -> dict:
        return _progress_json(service.progress(session_id))

    @app.get("/api/study/{study_id}/export")
    def export_ratings(study_id: str) -> Response:
        service.require_study(study_id)
        lines = [
            json.dumps(rec.to_json_dict(), sort_keys=True)
            for rec in service.export_ratings()
        ]
        body = "\n".join(lines) + ("\n" if lines else "")
        return Response(content=body, media_type="application/x-ndjson")

    @app.get("/media/{item_id}/{kind}")
    def get_media(item_id: str, kind: Literal["video", "audio"]) -> FileResponse:
        path = service.media_path(item_id, kind)
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"media file missing: {path.name}")
        return FileResponse(path)

    if ui_dir is not None:
        if not ui_dir.is_dir():
            raise ValueError(f"ui directory not found: {ui_dir}")
        # Mounted last so /api and /media keep precedence.
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
