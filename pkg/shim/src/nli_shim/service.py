"""Local HTTP inference service for NLI entailment and sentence embeddings.

Speaks the engine's provider wire contract: POST /nli with
{premise, hypothesis} returns {entailment}, POST /embed with {text} returns
{vector}; both also take batch bodies ({pairs: [...]} / {texts: [...]}).
GET /meta reports the embedding dimension, GET /health the load state.
Models load at startup; a load failure exits the process nonzero.
"""

import argparse
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Optional

import torch
import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

DEFAULT_NLI_MODEL = "microsoft/deberta-large-mnli"
DEFAULT_EMBED_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


@dataclass(frozen=True)
class ShimConfig:
    nli_model_id: str = DEFAULT_NLI_MODEL
    embed_model_id: str = DEFAULT_EMBED_MODEL
    host: str = "127.0.0.1"
    port: int = 8421
    batch_size: int = 16


class InferenceBundle:
    """Both models, loaded eagerly; forward passes are lock-serialized.

    Inference runs in eval mode under no_grad on a fixed device, so repeated
    identical requests return identical scores.
    """

    def __init__(self, config: ShimConfig):
        from sentence_transformers import SentenceTransformer
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.nli_model_id)
        self.nli_model = AutoModelForSequenceClassification.from_pretrained(
            config.nli_model_id)
        self.nli_model.eval()
        id2label = self.nli_model.config.id2label
        for index, label in id2label.items():
            if str(label).lower() == "entailment":
                self.entailment_index = int(index)
                break
        else:
            raise RuntimeError(
                f"{config.nli_model_id} has no entailment class: {id2label}")
        self.embedder = SentenceTransformer(config.embed_model_id)
        dim_fn = getattr(self.embedder, "get_embedding_dimension", None)
        if dim_fn is None:
            dim_fn = self.embedder.get_sentence_embedding_dimension
        self.embed_dim = int(dim_fn())
        self._lock = threading.Lock()

    def nli_scores(self, pairs: list[tuple[str, str]]) -> list[float]:
        """Entailment-class probabilities for (premise, hypothesis) pairs."""
        scores: list[float] = []
        with self._lock, torch.no_grad():
            for start in range(0, len(pairs), self.config.batch_size):
                chunk = pairs[start:start + self.config.batch_size]
                encoded = self.tokenizer(
                    [p for p, _ in chunk], [h for _, h in chunk],
                    return_tensors="pt", padding=True, truncation=True,
                    max_length=512)
                logits = self.nli_model(**encoded).logits
                probs = torch.softmax(logits, dim=-1)[:, self.entailment_index]
                scores.extend(float(x) for x in probs)
        return scores

    def embed_texts(self, texts: list[str]) -> list[list[float]]:
        with self._lock:
            vectors = self.embedder.encode(
                list(texts), batch_size=self.config.batch_size,
                convert_to_numpy=True, show_progress_bar=False)
        return [[float(x) for x in vector] for vector in vectors]


class NliPair(BaseModel):
    premise: str
    hypothesis: str


class NliBody(BaseModel):
    premise: Optional[str] = None
    hypothesis: Optional[str] = None
    pairs: Optional[list[NliPair]] = None


class EmbedBody(BaseModel):
    text: Optional[str] = None
    texts: Optional[list[str]] = None


def create_app(config: Optional[ShimConfig] = None) -> FastAPI:
    config = config or ShimConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.bundle = InferenceBundle(config)
        yield

    app = FastAPI(title="nli-shim", lifespan=lifespan)
    app.state.bundle = None

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "malformed body"})

    def bundle() -> InferenceBundle:
        loaded = app.state.bundle
        if loaded is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return loaded

    @app.get("/health")
    def health():
        bundle()
        return {"status": "ok"}

    @app.get("/meta")
    def meta():
        loaded = bundle()
        return {
            "embed_dim": loaded.embed_dim,
            "nli_model_id": config.nli_model_id,
            "embed_model_id": config.embed_model_id,
            "batch_size": config.batch_size,
        }

    @app.post("/nli")
    def nli(body: NliBody):
        loaded = bundle()
        if body.pairs is not None:
            scores = loaded.nli_scores([(p.premise, p.hypothesis)
                                        for p in body.pairs])
            return {"entailments": scores}
        if body.premise is None or body.hypothesis is None:
            raise HTTPException(status_code=400,
                                detail="body requires premise and hypothesis")
        return {"entailment": loaded.nli_scores([(body.premise, body.hypothesis)])[0]}

    @app.post("/embed")
    def embed(body: EmbedBody):
        loaded = bundle()
        if body.texts is not None:
            if any(not t for t in body.texts):
                raise HTTPException(status_code=400, detail="empty text")
            return {"vectors": loaded.embed_texts(body.texts)}
        if not body.text:
            raise HTTPException(status_code=400, detail="empty text")
        return {"vector": loaded.embed_texts([body.text])[0]}

    return app


def main(argv: Optional[list[str]] = None) -> None:
    parser = argparse.ArgumentParser(
        prog="nli-shim",
        description="Serve NLI entailment and sentence embeddings over HTTP.")
    parser.add_argument("--nli-model", default=DEFAULT_NLI_MODEL)
    parser.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8421)
    parser.add_argument("--batch-size", type=int, default=16)
    args = parser.parse_args(argv)
    config = ShimConfig(nli_model_id=args.nli_model,
                        embed_model_id=args.embed_model,
                        host=args.host, port=args.port,
                        batch_size=args.batch_size)
    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
