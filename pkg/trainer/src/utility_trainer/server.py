"""Scoring microservice: POST /score over a loaded model artifact."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .model import load_artifact


class ScoreItem(BaseModel):
    id: str
    question: str
    passage: str


class ScoreRequest(BaseModel):
    items: list[ScoreItem]


class ScoredItem(BaseModel):
    id: str
    score: float


class ScoreResponse(BaseModel):
    scores: list[ScoredItem]


def create_app(model_dir: str | Path) -> FastAPI:
    model = load_artifact(model_dir)
    app = FastAPI(title="utility-trainer scoring service")

    @app.get("/health")
    def health():
        return {"status": "ok", "encoder": model.encoder}

    @app.post("/score", response_model=ScoreResponse)
    def score(request: ScoreRequest):
        if not request.items:
            return ScoreResponse(scores=[])
        try:
            values = model.predict_pairs(
                [(item.question, item.passage) for item in request.items]
            )
        except Exception as exc:  # model failure -> 5xx, not a silent 200
            raise HTTPException(status_code=500, detail=f"scoring failed: {exc}") from exc
        return ScoreResponse(
            scores=[
                ScoredItem(id=item.id, score=value)
                for item, value in zip(request.items, values)
            ]
        )

    return app
