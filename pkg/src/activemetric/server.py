"""HTTP bridge between the active loop and a human labeler (or the web UI)."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .session import Session, SessionError


class AnswerBody(BaseModel):
    answer: str
    query_id: Optional[int] = None


def create_app(session: Session, static_dir: Optional[str | Path] = None) -> FastAPI:
    """Wire one session behind the versioned JSON API.

    GET /v1/query answers with a typed payload instead of an error status:
    {"type": "query" | "computing" | "done", ...}; clients poll on
    "computing". POST /v1/answer rejects stale or duplicate submissions
    with 409 and leaves the session untouched.
    """
    app = FastAPI(title="activemetric", version="1")
    app.state.session = session

    @app.get("/v1/status")
    def status():
        return session.status_payload()

    @app.get("/v1/query")
    def query():
        return session.query_payload()

    @app.post("/v1/answer")
    def answer(body: AnswerBody):
        try:
            return session.submit(body.answer, query_id=body.query_id, source="human")
        except SessionError as exc:
            message = str(exc)
            if "invalid answer" in message:
                raise HTTPException(status_code=400, detail=message) from exc
            raise HTTPException(status_code=409, detail=message) from exc

    @app.get("/v1/metric")
    def metric():
        return session.metric_payload()

    @app.get("/v1/history")
    def history():
        return session.history_payload()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def default_static_dir() -> Optional[Path]:
    """Built frontend bundle, when the repository checkout ships one."""
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def serve(session: Session, host: str = "127.0.0.1", port: int = 8000,
          static_dir: Optional[str | Path] = None) -> None:
    import uvicorn

    app = create_app(session, static_dir=static_dir or default_static_dir())
    uvicorn.run(app, host=host, port=port, log_level="info")
