"""FastAPI application implementing the provider wire contracts.

POST /embed    {"model", "texts"}                      -> {"dimension", "normalized", "vectors"}
POST /rerank   {"model", "query", "candidates"}        -> {"scores"}
POST /generate {"model", "prompt", "max_new_tokens",
                "top_p"}                               -> {"text"}
GET  /health                                           -> model names + embed dimension

Every error is structured JSON with status >= 400. If an auth token is
configured, requests must carry "Authorization: Bearer <token>".
"""

from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel, Field

from .backends import GatewayError, load_embedder, load_generator, load_reranker


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    embed_model: str = "hash-bow-256"
    rerank_model: str = "token-overlap"
    generate_model: str = "extractive-lite"
    max_batch_size: int = 256
    auth_token: str | None = None


class EmbedRequest(BaseModel):
    model: str
    texts: list[str]


class RerankRequest(BaseModel):
    model: str
    query: str
    candidates: list[str]


class GenerateRequest(BaseModel):
    model: str
    prompt: str
    max_new_tokens: int = Field(ge=1)
    top_p: float = Field(gt=0.0, le=1.0)


def create_app(config: GatewayConfig) -> FastAPI:
    """Load the configured models and wire up the endpoints.

    Model-load failures raise GatewayError here so the process aborts at
    startup instead of failing per-request.
    """
    embedder = load_embedder(config.embed_model)
    probe = embedder.embed(["dimension probe"])
    if len(probe[0]) != embedder.dimension:
        raise GatewayError(
            f"embed model {config.embed_model!r} declares dimension "
            f"{embedder.dimension} but produced {len(probe[0])}"
        )
    reranker = load_reranker(config.rerank_model)
    generator = load_generator(config.generate_model)

    app = FastAPI(title="model-gateway", version="0.1.0")

    def check_auth(request: Request) -> None:
        if config.auth_token is None:
            return
        header = request.headers.get("Authorization", "")
        if header != f"Bearer {config.auth_token}":
            raise HTTPException(status_code=401, detail="invalid or missing token")

    def check_model(requested: str, served: str) -> None:
        if requested != served:
            raise HTTPException(
                status_code=400,
                detail=f"model {requested!r} not served here (serving {served!r})",
            )

    @app.get("/health")
    def health() -> dict:
        return {
            "embed_model": config.embed_model,
            "rerank_model": config.rerank_model,
            "generate_model": config.generate_model,
            "dimension": embedder.dimension,
        }

    @app.post("/embed")
    def embed(body: EmbedRequest, request: Request) -> dict:
        check_auth(request)
        check_model(body.model, config.embed_model)
        if not body.texts:
            raise HTTPException(status_code=400, detail="texts must be nonempty")
        if any(not t for t in body.texts):
            raise HTTPException(status_code=400, detail="empty text in batch")
        if len(body.texts) > config.max_batch_size:
            raise HTTPException(
                status_code=400,
                detail=f"batch of {len(body.texts)} exceeds max {config.max_batch_size}",
            )
        return {
            "dimension": embedder.dimension,
            "normalized": embedder.normalized,
            "vectors": embedder.embed(body.texts),
        }

    @app.post("/rerank")
    def rerank(body: RerankRequest, request: Request) -> dict:
        check_auth(request)
        check_model(body.model, config.rerank_model)
        if not body.candidates:
            raise HTTPException(status_code=400, detail="candidates must be nonempty")
        return {"scores": reranker.score(body.query, body.candidates)}

    @app.post("/generate")
    def generate(body: GenerateRequest, request: Request) -> dict:
        check_auth(request)
        check_model(body.model, config.generate_model)
        return {
            "text": generator.generate(body.prompt, body.max_new_tokens, body.top_p)
        }

    return app
