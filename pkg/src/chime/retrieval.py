"""Context selection and grounded answering over the stored corpus.

Records are ranked by cosine similarity between the question embedding and
each record's title+prose embedding; issues named explicitly in the question
are force-included ahead of the ranked hits. The selected snippets are
rendered into one prompt context and answered with a single temperature-0
completion.
"""

from __future__ import annotations

from dataclasses import dataclass

from chime.assets import asset_id, load_asset
from chime.errors import EmptyCorpusError, InvalidInputError
from chime.llm import ChatBackend, ChatRequest, cosine
from chime.issues.model import IssueRecord
from chime.query_prep import extract_issue_numbers
from chime.store import StoredCorpus

DEFAULT_K = 4
SNIPPET_BUDGET = 1600
_PROSE_CHARS = 1200

ANSWER_ASSET = "answer_system_v1.txt"
ANSWER_TEMPLATE_ID = asset_id(ANSWER_ASSET)


@dataclass(frozen=True)
class RetrievedHit:
    key: tuple[str, int]
    score: float
    snippet: str
    forced: bool = False


@dataclass(frozen=True)
class RetrievedContext:
    """Ranked hits plus their rendering as one prompt context block.

    Hits after the forced prefix are in non-increasing score order.
    """

    hits: tuple[RetrievedHit, ...]
    rendered_prompt_context: str


def render_snippet(
    record: IssueRecord, budget: int = SNIPPET_BUDGET, structured: bool = True
) -> str:
    """Title, leading prose, and (in structured mode) the exception headers
    of every parsed trace. Hard-capped at the budget."""
    parts = [record.title]
    if structured:
        prose = record.prose_text.strip()
        if prose:
            parts.append(prose[:_PROSE_CHARS])
        headers: list[str] = []
        for trace in record.stack_traces:
            for header in trace.exception_headers():
                if header not in headers:
                    headers.append(header)
        if headers:
            parts.append("Exceptions: " + "; ".join(headers))
    else:
        # Preprocessing ablated: plain text only, no parsed structure.
        flat = "\n".join((record.prose_text,) + record.code_blocks).strip()
        if flat:
            parts.append(flat[:_PROSE_CHARS])
    return "\n".join(parts)[:budget]


def retrieve(
    question: str,
    store: StoredCorpus,
    k: int = DEFAULT_K,
    snippet_budget: int = SNIPPET_BUDGET,
    structured_snippets: bool = True,
) -> RetrievedContext:
    """Select context records for a question.

    Returns the top-k records by cosine score (ties broken by issue key
    ascending); records whose numbers appear in the question are placed
    first regardless of score, in order of first mention.
    """
    if store.count() == 0:
        raise EmptyCorpusError("the issue store is empty")
    if k < 1:
        raise InvalidInputError("k must be positive")

    embedder = store.embedder
    question_embedding = None
    if embedder is not None:
        try:
            question_embedding = embedder.embed(question)
        except InvalidInputError:
            question_embedding = None

    records = store.all_records()
    scores: dict[tuple[str, int], float] = {}
    for record in records:
        record_embedding = store.embedding(record.key)
        if question_embedding is not None and record_embedding is not None:
            scores[record.key] = cosine(question_embedding, record_embedding)
        else:
            scores[record.key] = 0.0

    by_key = {record.key: record for record in records}
    forced_keys: list[tuple[str, int]] = []
    for number in extract_issue_numbers(question):
        for record in records:
            if record.number == number and record.key not in forced_keys:
                forced_keys.append(record.key)

    ranked = sorted(
        (key for key in by_key if key not in forced_keys),
        key=lambda key: (-scores[key], key),
    )
    total = min(max(k, len(forced_keys)), len(records))
    selected = forced_keys + ranked[: total - len(forced_keys)]

    hits = tuple(
        RetrievedHit(
            key=key,
            score=scores[key],
            snippet=render_snippet(by_key[key], snippet_budget, structured_snippets),
            forced=key in forced_keys,
        )
        for key in selected
    )
    sections = [f"### {hit.key[0]}#{hit.key[1]}\n{hit.snippet}" for hit in hits]
    return RetrievedContext(hits=hits, rendered_prompt_context="\n\n".join(sections))


def build_answer_request(
    question: str, context: RetrievedContext, extra_context: str = ""
) -> ChatRequest:
    blocks = []
    if context.rendered_prompt_context:
        blocks.append("Issue context:\n" + context.rendered_prompt_context)
    if extra_context:
        blocks.append(extra_context)
    blocks.append("Question: " + question)
    return ChatRequest.build(system=load_asset(ANSWER_ASSET), user="\n\n".join(blocks))


def answer(
    question: str,
    context: RetrievedContext,
    llm: ChatBackend,
    extra_context: str = "",
) -> str:
    """One grounded completion; backend errors propagate to the caller."""
    return llm.complete(build_answer_request(question, context, extra_context))
