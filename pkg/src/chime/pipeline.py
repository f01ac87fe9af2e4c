"""End-to-end question answering: classify, transform, retrieve, answer,
then validate the draft before anything reaches the caller.

Every run produces a transcript dict capturing each stage's inputs and
outputs plus a content-derived id, so identical inputs replay to
byte-identical transcripts.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

from chime.errors import BackendError, InvalidInputError
from chime.llm import ChatBackend, EmbeddingProvider
from chime.query_prep import Query, classify_type, extract_issue_numbers, transform
from chime.retrieval import ANSWER_TEMPLATE_ID, DEFAULT_K, RetrievedContext, answer, retrieve
from chime.store import StoredCorpus, plan_query
from chime.validator import DEFAULT_THRESHOLD, validate

ABLATABLE_STAGES = frozenset({"query-preprocessing", "issue-preprocessing", "cove", "mt"})

# Planner gate: structured-lookup wording that retrieval alone handles badly.
_STRUCTURED_HINT = re.compile(
    r"\b(?:labels?|labell?ed|assignees?|assigned|team|backlog|milestone|"
    r"triaged?|open issues|closed issues|last\s+\d+\s+days|older than)\b",
    re.I,
)
_PLAN_MATCH_CAP = 20

_DEGRADED_MARKERS = ("skipped", "unavailable", "disabled", "inconclusive", "low confidence")


@dataclass(frozen=True)
class AskResult:
    final: str
    badge: str  # validated | raw | degraded
    transcript: dict
    transcript_id: str


def _planned_context(question: str, store: StoredCorpus, llm: ChatBackend) -> tuple[dict | None, str]:
    """Run the structured planner when the question asks for a metadata
    lookup; returns the plan record and a rendered context block."""
    if not _STRUCTURED_HINT.search(question):
        return None, ""
    query = plan_query(question, llm)
    rows = store.execute_projected(query) if query.projection else [
        {"repo": record.repo, "number": record.number, "title": record.title}
        for record in store.execute(query)
    ]
    lines = []
    for row in rows[:_PLAN_MATCH_CAP]:
        repo = row.get("repo", "?")
        number = row.get("number", "?")
        rest = ", ".join(
            f"{key}={value}" for key, value in sorted(row.items()) if key not in ("repo", "number")
        )
        lines.append(f"- {repo}#{number}" + (f" ({rest})" if rest else ""))
    plan_record = {
        "filters": [
            {"field": f.field, "op": f.op, "value": f.value} for f in query.filters
        ],
        "projection": list(query.projection),
        "limit": query.limit,
        "select_all": query.select_all,
        "matches": len(rows),
    }
    block = "Matching issues:\n" + "\n".join(lines) if lines else "Matching issues: none"
    return plan_record, block


def _badge(validated: bool, notes: list[str]) -> str:
    if not validated:
        return "raw"
    for note in notes:
        if any(marker in note for marker in _DEGRADED_MARKERS):
            return "degraded"
    return "validated"


def transcript_id_for(transcript: dict) -> str:
    digest = hashlib.sha256(
        json.dumps(transcript, sort_keys=True, ensure_ascii=False).encode("utf-8")
    )
    return digest.hexdigest()[:16]


def ask(
    question: str,
    store: StoredCorpus,
    llm: ChatBackend,
    embed: EmbeddingProvider,
    *,
    k: int = DEFAULT_K,
    threshold: float = DEFAULT_THRESHOLD,
    run_validation: bool = True,
    ablate: tuple[str, ...] = (),
) -> AskResult:
    question = question.strip()
    if not question:
        raise InvalidInputError("question must be non-empty")
    unknown = set(ablate) - ABLATABLE_STAGES
    if unknown:
        raise InvalidInputError(f"unknown ablation stages: {sorted(unknown)}")

    qtype = classify_type(question, llm)
    referenced = extract_issue_numbers(question)

    if "query-preprocessing" in ablate:
        transformed_text, instruction_used = question, None
    else:
        transformed = transform(Query.make(question, qtype), llm)
        transformed_text = transformed.transformed_text
        instruction_used = transformed.instruction_used

    plan_record, plan_block = _planned_context(question, store, llm)

    context: RetrievedContext = retrieve(
        transformed_text,
        store,
        k=k,
        structured_snippets="issue-preprocessing" not in ablate,
    )
    initial = answer(transformed_text, context, llm, extra_context=plan_block)

    notes: list[str] = []
    validation_dict = None
    if run_validation:
        final, validation = validate(
            transformed_text,
            qtype,
            initial,
            llm,
            embed,
            answer_fn=lambda q: answer(q, context, llm, extra_context=plan_block),
            run_cove="cove" not in ablate,
            run_mt="mt" not in ablate,
            threshold=threshold,
        )
        notes.extend(validation.adjudication_notes)
        validation_dict = validation.to_dict()
    else:
        final = initial

    transcript = {
        "question": question,
        "qtype": qtype,
        "referenced_issues": list(referenced),
        "ablated": sorted(ablate),
        "preprocessing": {
            "transformed_question": transformed_text,
            "instruction_used": instruction_used,
        },
        "planning": plan_record,
        "retrieval": {
            "k": k,
            "template_id": ANSWER_TEMPLATE_ID,
            "hits": [
                {
                    "repo": hit.key[0],
                    "number": hit.key[1],
                    "score": round(hit.score, 9),
                    "forced": hit.forced,
                }
                for hit in context.hits
            ],
        },
        "initial_response": initial,
        "validation": validation_dict,
        "final_response": final,
        "notes": notes,
    }
    return AskResult(
        final=final,
        badge=_badge(run_validation, notes),
        transcript=transcript,
        transcript_id=transcript_id_for(transcript),
    )
