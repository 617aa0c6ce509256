"""HTTP/JSON view of a session.

All error responses use the shape {"error": <code>, "message": <text>}.
The layout endpoint serves a cached canonical-JSON byte string so repeated
requests are byte identical.
"""
from __future__ import annotations

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .graph import KINDS
from .session import Session, SessionError


class ScoreEdit(BaseModel):
    ui_score: int = Field(ge=1, le=10)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": code, "message": message})


def create_app(session: Session) -> FastAPI:
    app = FastAPI(title="mrgrank", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request,
                                  exc: RequestValidationError):
        return _error(422, "validation_error", str(exc.errors()))

    @app.exception_handler(SessionError)
    async def _session_handler(request: Request, exc: SessionError):
        return _error(409, "not_ready", str(exc))

    @app.get("/api/rankings")
    def rankings(kind: str = Query(...), top: int = Query(20, ge=0)):
        if kind not in KINDS:
            return _error(400, "bad_kind", "unknown kind %r" % kind)
        try:
            return {"kind": kind, "items": session.rankings(kind, top=top)}
        except SessionError as exc:
            return _error(409, "not_ready", str(exc))

    @app.get("/api/clusters")
    def clusters(kind: str = Query(...), level: int = Query(0)):
        if kind not in KINDS:
            return _error(400, "bad_kind", "unknown kind %r" % kind)
        try:
            return session.clusters_json(kind, level)
        except SessionError as exc:
            return _error(409, "not_ready", str(exc))
        except ValueError as exc:
            return _error(400, "bad_level", str(exc))

    @app.get("/api/layout")
    def layout(kind: str = Query(...), level: int = Query(0)):
        if kind not in KINDS:
            return _error(400, "bad_kind", "unknown kind %r" % kind)
        try:
            body = session.layout_json_bytes(kind, level)
        except SessionError as exc:
            return _error(409, "not_ready", str(exc))
        except ValueError as exc:
            return _error(400, "bad_level", str(exc))
        return Response(content=body, media_type="application/json")

    @app.get("/api/propagation")
    def propagation(source: list[str] = Query(...), top: int = Query(10, ge=1)):
        try:
            return session.propagation_flows(source, top_k=top)
        except SessionError as exc:
            return _error(409, "not_ready", str(exc))
        except KeyError as exc:
            return _error(404, "unknown_cluster", str(exc.args[0]))
        except ValueError as exc:
            return _error(400, "bad_request", str(exc))

    @app.post("/api/items/{item_id}/score")
    def score(item_id: str, body: ScoreEdit):
        try:
            return session.apply_ui_score(item_id, body.ui_score)
        except SessionError as exc:
            return _error(409, "not_ready", str(exc))
        except KeyError as exc:
            return _error(404, "unknown_item", str(exc.args[0]))

    @app.get("/api/items/{item_id}/related")
    def related(item_id: str, top: int = Query(10, ge=1)):
        try:
            return {"id": item_id, "related": session.related(item_id, top=top)}
        except KeyError as exc:
            return _error(404, "unknown_item", str(exc.args[0]))

    @app.get("/api/status")
    def status():
        return {
            "items": session.graph.n_items,
            "kinds": {k: session.graph.kind_slices[k].stop
                      - session.graph.kind_slices[k].start for k in KINDS},
            "solved": session.state is not None,
            "method": session.state.method if session.state else None,
            "has_walks": session.store is not None,
        }

    return app
