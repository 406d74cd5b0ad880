"""Text serialization and embedding providers.

Two providers share one interface: a deterministic local embedder
(hashed character trigrams, fully offline and reproducible) and a
remote HTTP provider speaking a minimal POST contract compatible with
common embedding endpoints.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmbedError
from .model import TermObject

logger = logging.getLogger(__name__)

EMBED_API_KEY_ENV = "ONTOFORGE_EMBED_API_KEY"

DEFAULT_LOCAL_DIM = 256
DEFAULT_REMOTE_DIM = 1536
DEFAULT_MODEL_NAME = "text-embedding-ada-002"

EmbeddingVector = np.ndarray  # float32, shape (dim,)


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    """Configuration of one embedding provider."""

    kind: str = "deterministic_local"  # or "remote_http"
    model_name: str = DEFAULT_MODEL_NAME
    endpoint: str | None = None
    dim: int = DEFAULT_LOCAL_DIM
    api_key_env: str = EMBED_API_KEY_ENV
    max_concurrency: int = 4

    def __post_init__(self):
        if self.kind not in ("deterministic_local", "remote_http"):
            raise ValueError(f"unknown embedding provider kind {self.kind!r}")
        if self.kind == "remote_http" and not self.endpoint:
            raise ValueError("remote_http embedding provider requires an endpoint")
        if self.dim <= 0:
            raise ValueError("dim must be positive")


def serialize_term(term: TermObject) -> str:
    """Flatten a term to the text that gets embedded.

    Label first; a period and space before the definition when one is
    present; then each relationship as `` <predicate> <target>`` in
    stored order. No trailing whitespace.
    """
    if not term.label:
        raise ValueError("term has no label to serialize")
    text = term.label
    if term.definition:
        text += ". " + term.definition
    for rel in term.relationships:
        text += f" {rel.predicate} {rel.target}"
    return text.rstrip()


# --- deterministic local provider: hashed character trigrams ---

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h


def _trigrams(text: str) -> list[str]:
    if len(text) < 3:
        return [text]
    return [text[i : i + 3] for i in range(len(text) - 2)]


def _embed_local(text: str, dim: int) -> EmbeddingVector:
    counts = np.zeros(dim, dtype=np.float64)
    for gram in _trigrams(text):
        counts[fnv1a_64(gram.encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(counts)
    if norm > 0:
        counts /= norm
    return counts.astype(np.float32)


# --- remote provider ---


def _default_transport(endpoint: str, payload: dict, api_key: str | None) -> dict:
    import requests

    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    resp = requests.post(endpoint, json=payload, headers=headers, timeout=60)
    resp.raise_for_status()
    return resp.json()


def _embed_remote(
    spec: EmbeddingProviderSpec,
    texts: list[str],
    transport,
    retries: int = 3,
    backoff: float = 0.5,
) -> list[EmbeddingVector]:
    payload = {"model": spec.model_name, "input": texts}
    api_key = os.environ.get(spec.api_key_env)
    last_exc: Exception | None = None
    for attempt in range(retries):
        try:
            body = transport(spec.endpoint, payload, api_key)
            rows = body["data"]
            if len(rows) != len(texts):
                raise EmbedError(
                    f"endpoint returned {len(rows)} vectors for {len(texts)} texts"
                )
            out = []
            for row in rows:
                vec = np.asarray(row["embedding"], dtype=np.float32)
                if vec.shape != (spec.dim,):
                    raise EmbedError(
                        f"endpoint returned dim {vec.shape} but provider dim is {spec.dim}"
                    )
                if not np.all(np.isfinite(vec)):
                    raise EmbedError("endpoint returned non-finite values")
                out.append(vec)
            return out
        except EmbedError:
            raise
        except Exception as exc:
            last_exc = exc
            if attempt < retries - 1:
                time.sleep(backoff * (2**attempt))
    raise EmbedError(f"remote embedding failed after {retries} attempts: {last_exc}")


def embed_text(
    provider: EmbeddingProviderSpec, text: str, transport=None
) -> EmbeddingVector:
    """Embed one text. The local provider is bitwise deterministic."""
    if not text:
        raise ValueError("cannot embed empty text")
    if provider.kind == "deterministic_local":
        return _embed_local(text, provider.dim)
    return _embed_remote(provider, [text], transport or _default_transport)[0]


def embed_batch(
    provider: EmbeddingProviderSpec,
    texts: list[str],
    transport=None,
    chunk_size: int = 64,
) -> list[EmbeddingVector]:
    """Order-preserving batch embedding.

    Remote requests are chunked and issued with at most
    ``provider.max_concurrency`` in flight; any failure fails the batch
    atomically with the index of the first failing text.
    """
    if not texts:
        return []
    if provider.kind == "deterministic_local":
        return [_embed_local(t, provider.dim) for t in texts]

    transport = transport or _default_transport
    chunks = [
        (start, texts[start : start + chunk_size])
        for start in range(0, len(texts), chunk_size)
    ]
    results: list[list[EmbeddingVector] | None] = [None] * len(chunks)
    failures: list[tuple[int, Exception]] = []

    def locate_failure(start: int, chunk: list[str], exc: Exception) -> tuple[int, Exception]:
        # Narrow a failed chunk down to the first failing text so the
        # error index is exact; a wholesale outage falls back to the
        # chunk start.
        for offset, text in enumerate(chunk):
            try:
                _embed_remote(provider, [text], transport, retries=1)
            except Exception as single_exc:
                return start + offset, single_exc
        return start, exc

    def run(chunk_idx: int, start: int, chunk: list[str]):
        try:
            results[chunk_idx] = _embed_remote(provider, chunk, transport)
        except Exception as exc:
            failures.append(locate_failure(start, chunk, exc))

    with ThreadPoolExecutor(max_workers=provider.max_concurrency) as pool:
        futures = [
            pool.submit(run, i, start, chunk) for i, (start, chunk) in enumerate(chunks)
        ]
        for future in futures:
            future.result()
    if failures:
        index, exc = min(failures, key=lambda f: f[0])
        raise EmbedError(f"batch embedding failed at index {index}: {exc}", index=index)
    out: list[EmbeddingVector] = []
    for part in results:
        out.extend(part)  # type: ignore[arg-type]
    return out
