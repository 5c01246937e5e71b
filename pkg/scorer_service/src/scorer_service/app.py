"""HTTP surface: POST /score and GET /health.

Per-request isolation with order preservation inside a request: the i-th
score always belongs to the i-th item. Malformed bodies are 400 (not
FastAPI's default 422), oversized batches 413, and everything is 503
until a model is loaded.
"""
from __future__ import annotations

import os
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import ScoringModel

DEFAULT_BATCH_LIMIT = 64


class ScoreItem(BaseModel):
    query: str
    passage: str


class ScoreRequest(BaseModel):
    items: list[ScoreItem] = Field(min_length=1)
    model_id: Optional[str] = None


class ScoreResponse(BaseModel):
    scores: list[float]
    model_id: str
    version: str


def create_app(
    model: ScoringModel | None = None,
    batch_limit: int = DEFAULT_BATCH_LIMIT,
    token: str | None = None,
) -> FastAPI:
    app = FastAPI(
        title="scorer-service",
        version="0.1.0",
        description="Relevance scores (raw cross-encoder logits) for query/passage pairs.",
    )
    app.state.model = model
    app.state.batch_limit = batch_limit
    app.state.token = token

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def _auth_failure(request: Request) -> JSONResponse | None:
        if app.state.token is None:
            return None
        header = request.headers.get("authorization", "")
        if header == f"Bearer {app.state.token}":
            return None
        return JSONResponse(status_code=401, content={"detail": "bad or missing token"})

    @app.get("/health")
    async def health():
        model = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "model_id": model.model_id, "version": model.version}

    @app.post("/score", response_model=ScoreResponse)
    async def score(request: Request, body: ScoreRequest):
        denied = _auth_failure(request)
        if denied is not None:
            return denied
        model = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        if len(body.items) > app.state.batch_limit:
            return JSONResponse(
                status_code=413,
                content={"detail": f"batch of {len(body.items)} exceeds limit {app.state.batch_limit}"},
            )
        scores = model.score_batch([(it.query, it.passage) for it in body.items])
        return ScoreResponse(scores=scores, model_id=model.model_id, version=model.version)

    return app


def app_from_env() -> FastAPI:
    """Build the app from SCORER_MODEL / SCORER_BATCH_LIMIT / SCORER_TOKEN."""
    from .model import load_model_from_env

    return create_app(
        model=load_model_from_env(),
        batch_limit=int(os.environ.get("SCORER_BATCH_LIMIT", DEFAULT_BATCH_LIMIT)),
        token=os.environ.get("SCORER_TOKEN"),
    )
