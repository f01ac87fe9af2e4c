"""Text-embedding providers and cosine similarity.

The default provider hashes lowercase word tokens into a fixed 512-bucket
term-frequency vector. It needs no external model, is deterministic across
processes, and preserves the relative-similarity ordering the grading and
retrieval paths care about. A live OpenAI-compatible embeddings endpoint can
be configured instead (e.g. one serving all-MiniLM-L6-v2).
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass

import numpy as np
import requests

from chime.errors import BackendError, InvalidInputError

HASHED_DIM = 512
_TOKEN = re.compile(r"[a-z0-9_]+")


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    provider_id: str

    def __post_init__(self) -> None:
        if self.values.ndim != 1 or self.values.size == 0:
            raise InvalidInputError("embedding must be a non-empty 1-D vector")

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Standard cosine similarity, clamped into [-1, 1]."""
    if a.dim != b.dim:
        raise InvalidInputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = a.norm()
    nb = b.norm()
    if na == 0.0 or nb == 0.0:
        raise InvalidInputError("cosine undefined for zero vector")
    value = float(np.dot(a.values, b.values)) / (na * nb)
    return max(-1.0, min(1.0, value))


class EmbeddingProvider:
    provider_id: str = ""

    def embed(self, text: str) -> EmbeddingVector:
        raise NotImplementedError


class HashedBagOfWordsProvider(EmbeddingProvider):
    """Deterministic fallback provider: hashed bag-of-words term frequencies."""

    def __init__(self, dim: int = HASHED_DIM):
        if dim <= 0:
            raise InvalidInputError("embedding dimension must be positive")
        self._dim = dim
        self.provider_id = f"hashed-bow-{dim}"

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise InvalidInputError("cannot embed empty text")
        counts = np.zeros(self._dim, dtype=np.float64)
        for token in _TOKEN.findall(text.lower()):
            # sha1 keeps bucket assignment stable across processes, unlike hash().
            bucket = int.from_bytes(hashlib.sha1(token.encode("utf-8")).digest()[:8], "big")
            counts[bucket % self._dim] += 1.0
        return EmbeddingVector(counts, self.provider_id)


class HttpEmbeddingProvider(EmbeddingProvider):
    """OpenAI-compatible /embeddings endpoint client."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key: str | None = None,
        timeout_seconds: float = 60.0,
        session: requests.Session | None = None,
    ):
        self._url = base_url.rstrip("/") + "/embeddings"
        self._model_id = model_id
        self._api_key = api_key or os.environ.get("CHIME_LLM_API_KEY")
        self._timeout = timeout_seconds
        self._session = session or requests.Session()
        self.provider_id = f"http:{model_id}"

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise InvalidInputError("cannot embed empty text")
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            resp = self._session.post(
                self._url,
                json={"model": self._model_id, "input": text},
                headers=headers,
                timeout=self._timeout,
            )
        except requests.RequestException as exc:
            raise BackendError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"embedding endpoint returned HTTP {resp.status_code}")
        try:
            values = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed embedding payload: {exc}") from exc
        return EmbeddingVector(values, self.provider_id)


def make_provider(
    provider_id: str,
    base_url: str | None = None,
    api_key: str | None = None,
) -> EmbeddingProvider:
    """Build a provider from a config identifier.

    ``hashed`` or ``hashed-bow-<dim>`` selects the local fallback;
    ``http:<model>`` selects the live endpoint (requires ``base_url``).
    """
    if provider_id in ("hashed", "hashed-bow", f"hashed-bow-{HASHED_DIM}"):
        return HashedBagOfWordsProvider()
    if provider_id.startswith("hashed-bow-"):
        return HashedBagOfWordsProvider(int(provider_id.rsplit("-", 1)[1]))
    if provider_id.startswith("http:"):
        if not base_url:
            raise InvalidInputError("http embedding provider needs a base URL")
        return HttpEmbeddingProvider(base_url, provider_id.split(":", 1)[1], api_key=api_key)
    raise InvalidInputError(f"unknown embedding provider: {provider_id!r}")
