"""Question classification and few-shot rewriting ahead of retrieval.

Questions are typed as YN, Fact, or Summary by cheap heuristics, with a
zero-shot backend call only when the heuristics disagree. Typed questions
are then rewritten with a per-type instruction plus example rewrites; the
rewrite is best-effort and falls back to the original text on any backend
failure or whenever the rewrite loses a referenced issue number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from chime.assets import asset_id, load_asset
from chime.errors import BackendError, InvalidInputError, InvalidQueryError
from chime.llm import ChatBackend, ChatRequest

QTYPES = ("YN", "Fact", "Summary")
TASKS = ("T1S", "T1M", "T2", "T3", "T4", "T5")

CLASSIFY_ASSET = "classify_qtype_v1.txt"
TRANSFORM_ASSETS = {
    "YN": "transform_yn_v1.txt",
    "Fact": "transform_fact_v1.txt",
    "Summary": "transform_summary_v1.txt",
}

# Issue references: #-prefixed numbers or standalone 4-7 digit integers.
_ISSUE_NUMBER = re.compile(r"#(\d+)\b|\b(\d{4,7})\b")

_YN_LEADS = frozenset(
    "is are was were do does did has have had can could should would will "
    "must may might".split()
)
_SUMMARY_WORDS = re.compile(r"\b(summari[sz]e|summary|compare|overview|describe)\b", re.I)


def extract_issue_numbers(text: str) -> tuple[int, ...]:
    seen: list[int] = []
    for match in _ISSUE_NUMBER.finditer(text):
        value = int(match.group(1) or match.group(2))
        if value not in seen:
            seen.append(value)
    return tuple(seen)


@dataclass(frozen=True)
class Query:
    text: str
    qtype: str
    task: str | None = None
    referenced_issues: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidQueryError("query text must be non-empty")
        if self.qtype not in QTYPES:
            raise InvalidQueryError(f"unknown query type: {self.qtype!r}")
        if self.task is not None and self.task not in TASKS:
            raise InvalidQueryError(f"unknown task: {self.task!r}")
        present = set(extract_issue_numbers(self.text))
        if not set(self.referenced_issues) <= present:
            raise InvalidQueryError("referenced_issues must appear in the text")

    @classmethod
    def make(cls, text: str, qtype: str, task: str | None = None) -> "Query":
        return cls(
            text=text,
            qtype=qtype,
            task=task,
            referenced_issues=extract_issue_numbers(text),
        )


@dataclass(frozen=True)
class TransformedQuery:
    original: Query
    transformed_text: str
    instruction_used: str

    def __post_init__(self):
        if not self.transformed_text.strip():
            raise InvalidInputError("transformed text must be non-empty")


def build_classify_request(text: str) -> ChatRequest:
    return ChatRequest.build(system=load_asset(CLASSIFY_ASSET), user=text)


def classify_type(text: str, llm: ChatBackend | None = None) -> str:
    """Type a question as YN, Fact, or Summary.

    The backend is consulted only when the leading-word and keyword
    heuristics disagree; without a usable backend reply the summary keyword
    wins (it is the stronger explicit signal).
    """
    words = re.findall(r"[a-z']+", text.lower())
    leads_yn = bool(words) and words[0] in _YN_LEADS
    has_summary_word = _SUMMARY_WORDS.search(text) is not None
    if leads_yn and has_summary_word:
        if llm is not None:
            try:
                reply = llm.complete(build_classify_request(text)).strip().lower()
                for qtype in QTYPES:
                    if reply.startswith(qtype.lower()):
                        return qtype
            except BackendError:
                pass
        return "Summary"
    if leads_yn:
        return "YN"
    if has_summary_word:
        return "Summary"
    return "Fact"


def build_transform_request(query: Query) -> ChatRequest:
    return ChatRequest.build(
        system=load_asset(TRANSFORM_ASSETS[query.qtype]), user=query.text
    )


def transform(query: Query, llm: ChatBackend) -> TransformedQuery:
    """Rewrite the question per its type instruction; best-effort.

    Falls back to the original text on backend failure, an empty rewrite, or
    a rewrite that drops any referenced issue number.
    """
    instruction = asset_id(TRANSFORM_ASSETS[query.qtype])
    try:
        rewritten = llm.complete(build_transform_request(query)).strip()
    except BackendError:
        rewritten = ""
    if not rewritten:
        rewritten = query.text
    kept = set(extract_issue_numbers(rewritten))
    if not set(query.referenced_issues) <= kept:
        rewritten = query.text
    return TransformedQuery(
        original=query, transformed_text=rewritten, instruction_used=instruction
    )
