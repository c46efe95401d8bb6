"""HTTP surface of the annotation service.

Bodies and errors use JSON; errors carry machine-readable ``code`` fields.
The media endpoint serves local files with byte-range support and redirects
for remote URLs.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Response
from fastapi.responses import JSONResponse, RedirectResponse
from pydantic import BaseModel, Field

from .core import Annotation, TimeSegment
from .service import AnnotationStore, ServiceError, TaskKind


class AnnotationIn(BaseModel):
    """Four answers: what repeats, when it starts/ends, and how many times."""

    description: str
    start_time: float
    end_time: float
    count: int


class SubmissionIn(BaseModel):
    """One rater's answer for a leased task.

    Exactly one of ``validity`` (yes/no task) or ``annotation`` (full task)
    must be present.
    """

    task_id: str
    validity: bool | None = None
    annotation: AnnotationIn | None = None


class TaskOut(BaseModel):
    task_id: str
    clip_id: str
    kind: str
    media_url: str
    lease_expires_at: float


class AckOut(BaseModel):
    task_id: str
    clip_id: str
    clip_state: str


class HealthOut(BaseModel):
    status: str = Field(default="ok")


def submission_json_schema() -> dict:
    """The submission body contract, for recorded-schema tests elsewhere."""
    return SubmissionIn.model_json_schema()


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="repetition annotation service")

    def rater_from(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(
                401, detail={"code": "auth_missing", "message": "bearer token required"}
            )
        token = authorization.removeprefix("Bearer ").strip()
        rater = store.config.tokens.get(token)
        if rater is None:
            raise HTTPException(
                401, detail={"code": "auth_invalid_token", "message": "unknown token"}
            )
        return rater

    @app.exception_handler(ServiceError)
    async def service_error_handler(_, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content=exc.payload())

    @app.get("/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut()

    @app.get("/tasks/next", response_model=TaskOut, responses={204: {"model": None}})
    def next_task(
        kind: str = Query("full"),
        rater: str = Depends(rater_from),
    ):
        try:
            task_kind = TaskKind(kind)
        except ValueError:
            raise HTTPException(
                422,
                detail={
                    "code": "bad_kind",
                    "message": f"kind must be one of {[k.value for k in TaskKind]}",
                    "field": "kind",
                },
            )
        task = store.next_task(rater, task_kind)
        if task is None:
            return Response(status_code=204)
        return TaskOut(
            task_id=task.task_id,
            clip_id=task.clip_id,
            kind=task.kind.value,
            media_url=f"/clips/{task.clip_id}/media",
            lease_expires_at=task.lease[1] if task.lease else 0.0,
        )

    @app.post("/submissions", response_model=AckOut, status_code=201)
    def submit(body: SubmissionIn, rater: str = Depends(rater_from)) -> AckOut:
        if (body.validity is None) == (body.annotation is None):
            raise HTTPException(
                422,
                detail={
                    "code": "bad_payload",
                    "message": "exactly one of validity or annotation is required",
                },
            )
        if body.validity is not None:
            ack = store.submit_validity(body.task_id, rater, body.validity)
        else:
            payload = body.annotation
            assert payload is not None
            annotation = Annotation(
                description=payload.description,
                segment=TimeSegment(payload.start_time, payload.end_time),
                count=payload.count,
                rater_id=rater,
            )
            ack = store.submit_annotation(body.task_id, rater, annotation)
        return AckOut(**ack)

    @app.get("/clips/{clip_id}/media")
    def media(clip_id: str, range_header: str | None = Header(default=None, alias="Range")):
        location = store.media_for(clip_id)
        if location.startswith(("http://", "https://")):
            return RedirectResponse(location, status_code=302)
        return _serve_file(Path(location), range_header)

    @app.get("/export")
    def export(format: str = Query("release")):
        if format != "release":
            raise HTTPException(
                422,
                detail={
                    "code": "bad_format",
                    "message": "only format=release is supported",
                    "field": "format",
                },
            )
        document = store.export_release()
        return Response(content=document, media_type="application/json")

    return app


def _serve_file(path: Path, range_header: str | None) -> Response:
    if not path.is_file():
        raise HTTPException(
            404, detail={"code": "media_missing", "message": f"no media at {path}"}
        )
    data = path.read_bytes()
    total = len(data)
    headers = {"Accept-Ranges": "bytes"}
    if range_header and range_header.startswith("bytes="):
        spec = range_header.removeprefix("bytes=")
        start_s, _, end_s = spec.partition("-")
        try:
            start = int(start_s) if start_s else 0
            end = int(end_s) if end_s else total - 1
        except ValueError:
            raise HTTPException(
                416, detail={"code": "bad_range", "message": f"cannot parse {range_header!r}"}
            )
        if start >= total or end < start:
            raise HTTPException(
                416, detail={"code": "bad_range", "message": "range out of bounds"}
            )
        end = min(end, total - 1)
        headers["Content-Range"] = f"bytes {start}-{end}/{total}"
        return Response(
            content=data[start : end + 1],
            status_code=206,
            media_type="application/octet-stream",
            headers=headers,
        )
    return Response(content=data, media_type="application/octet-stream", headers=headers)
