"""CHIME: inaccuracy mitigation for LLM-based bug-report question answering.

The pipeline preprocesses issue reports into structured records (separating
code blocks and parsing Java stack traces with a grammar-backed parser),
rewrites incoming questions, answers them with retrieval-augmented
completions, and validates each answer with chain-of-verification follow-ups
plus metamorphic question mutations before anything reaches the user.
"""

__version__ = "0.1.0"

from chime.config import PipelineConfig, load_config, make_backend, make_embedder
from chime.pipeline import ABLATABLE_STAGES, AskResult, ask

__all__ = [
    "ABLATABLE_STAGES",
    "AskResult",
    "PipelineConfig",
    "__version__",
    "ask",
    "load_config",
    "make_backend",
    "make_embedder",
]
