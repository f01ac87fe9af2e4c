from chime.llm.chat import (
    ChatBackend,
    ChatMessage,
    ChatRequest,
    LiveChatBackend,
    ScriptedBackend,
    canonical_request_text,
    fingerprint_request,
    fingerprint_text,
)
from chime.llm.embeddings import (
    EmbeddingProvider,
    EmbeddingVector,
    HashedBagOfWordsProvider,
    HttpEmbeddingProvider,
    cosine,
    make_provider,
)

__all__ = [
    "ChatBackend",
    "ChatMessage",
    "ChatRequest",
    "LiveChatBackend",
    "ScriptedBackend",
    "canonical_request_text",
    "fingerprint_request",
    "fingerprint_text",
    "EmbeddingProvider",
    "EmbeddingVector",
    "HashedBagOfWordsProvider",
    "HttpEmbeddingProvider",
    "cosine",
    "make_provider",
]
