"""HTTP/JSON surface for live preference labeling.

Endpoints:
  GET  /api/queries/next   oldest pending ticket, or 204 when none
  GET  /api/queries/{id}   one ticket by id (any status)
  POST /api/labels         {"query_id": ..., "preference": 0|1}
  GET  /api/env/{id}/meta  environment descriptor for rendering

The app optionally serves the labeling UI's static bundle at /.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .envs import env_metadata
from .feedback import FeedbackService


class LabelBody(BaseModel):
    query_id: str
    preference: int


def create_app(service: FeedbackService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="teampref feedback service")

    @app.get("/api/queries/next")
    def next_query():
        ticket = service.next_pending()
        if ticket is None:
            return Response(status_code=204)
        return ticket.to_dict()

    @app.get("/api/queries/{query_id}")
    def get_query(query_id: str):
        ticket = service.get(query_id)
        if ticket is None:
            raise HTTPException(status_code=404, detail=f"unknown query {query_id}")
        return ticket.to_dict()

    @app.post("/api/labels")
    def post_label(body: LabelBody):
        result = service.submit_label(body.query_id, body.preference)
        if result == "invalid":
            raise HTTPException(status_code=422, detail="preference must be 0 or 1")
        if result == "not_found":
            raise HTTPException(status_code=404, detail=f"unknown query {body.query_id}")
        if result == "conflict":
            raise HTTPException(status_code=409, detail="query already resolved")
        return {"status": "ok", "query_id": body.query_id}

    @app.get("/api/env/{env_id}/meta")
    def env_meta(env_id: str):
        try:
            return env_metadata(env_id)
        except ValueError as err:
            raise HTTPException(status_code=404, detail=str(err))

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
