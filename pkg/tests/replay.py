"""Shared replay fixtures: scripted exchange flows for end-to-end tests.

A "flow" describes one question's full scripted run: the draft answer, the
verification follow-ups and their grounded answers, the three question
mutations and their answers, plus optional synthesis/rephrase completions
and a structured-planner reply. ``flow_pairs`` turns a flow into concrete
(request, response) pairs by building the exact requests the pipeline will
issue against the given store, so scripted backends replay deterministically.
"""

from __future__ import annotations

import json
from pathlib import Path

from chime.ingest import load_local
from chime.issues import preprocess
from chime.llm import ChatRequest, HashedBagOfWordsProvider, ScriptedBackend, canonical_request_text
from chime.pipeline import _planned_context
from chime.retrieval import build_answer_request, retrieve
from chime.store import StoredCorpus, build_plan_request
from chime.validator import (
    build_cove_followups_request,
    build_cove_synthesis_request,
    build_mt_mutate_request,
    build_mt_rephrase_request,
)

DATA_DIR = Path(__file__).parent / "data"
ISSUES_FIXTURE = DATA_DIR / "issues_fixture.jsonl"
BENCHMARK_FIXTURE = DATA_DIR / "benchmark.jsonl"
PARSER_CORPUS = DATA_DIR / "parser_corpus.json"
YN_PHRASES = DATA_DIR / "yn_phrases.json"


def fixture_raws():
    raws, errors = load_local(ISSUES_FIXTURE)
    assert not errors, errors
    return raws


def new_store() -> StoredCorpus:
    store = StoredCorpus(embedder=HashedBagOfWordsProvider())
    for raw in fixture_raws():
        store.insert(preprocess(raw))
    return store


def numbered(lines: list[str]) -> str:
    return "\n".join(f"{i}. {line}" for i, line in enumerate(lines, 1))


# The two worked examples that anchor replay equivalence. The first drafts a
# wrong "No" that verification overturns; the second drafts a wrong "No"
# that survives verification but is overturned by the mutation vote.
SIMILARITY_FLOW = {
    "question": "Is issue 18102 and 18669 similar?",
    "initial": "No, issue 18102 and 18669 are not similar.",
    "followups": [
        "Can issue 18102 and 18669 be considered similar based on their descriptions and reported problems?",
        "Have there been any interactions or dependencies between the teams working on issue 18102 and 18669 that could indicate similarity?",
        "Are the issues 18102 and 18669 related to the same error?",
    ],
    "fanswers": [
        "Yes, based on the descriptions and reported problems, they can be considered similar as both involve ArrayIndexOutOfBoundsException.",
        "Yes, there have been interactions between the teams working on issue 18102 and 18669.",
        "No, issues 18102 and 18669 are not related to same error.",
    ],
    "synthesis": "Yes, issue 18102 and 18669 are similar.",
    "mutations": [
        "Are issues 18102 and 18669 alike?",
        "Do issues 18102 and 18669 resemble each other?",
        "Would you say issue 18102 and issue 18669 are similar?",
    ],
    "manswers": [
        "Yes, issues 18102 and 18669 are alike.",
        "Yes, they resemble each other.",
        "Yes, I would say they are similar.",
    ],
    "winner_index": 0,
    "rephrased": "Yes, issue 18102 and 18669 are similar.",
    "final": "Yes, issue 18102 and 18669 are similar.",
}

STARTUP_OPTION_FLOW = {
    "question": "Does Elasticsearch require the UseG1GC option to be present during issue 18151 startup stage?",
    "initial": "No, Elasticsearch does not require the UseG1GC option to be present during its startup stage in issue 18151.",
    "followups": [
        "Is Elasticsearch the software mentioned in the response?",
        "Is the UseG1GC option not required?",
        "Is issue 18151 not requiring the UseG1GC option?",
    ],
    "fanswers": [
        "Yes, Elasticsearch is mentioned in the response.",
        "No, the UseG1GC option is not required.",
        "No, issue 18151 is not requiring the UseG1GC option.",
    ],
    "mutations": [
        "Is the UseG1GC option necessary for Elasticsearch to be present during its startup stage in issue 18151?",
        "Must the UseG1GC option be included during Elasticsearch's startup stage for issue 18151?",
        "Is it required to have the UseG1GC option present during Elasticsearch's startup stage for issue 18151?",
    ],
    "manswers": [
        "No, the UseG1GC option is not necessary for Elasticsearch's to be present during its startup stage in issue 18151.",
        "Yes, the UseG1GC option must be included during Elasticsearch's startup stage for issue 18151.",
        "Yes, it is required to have the UseG1GC option present during Elasticsearch's startup stage for issue 18151.",
    ],
    "winner_index": 1,
    "rephrased": "Yes, it is required to have the UseG1GC option during Elasticsearch's startup stage .",
    "final": "Yes, it is required to have the UseG1GC option during Elasticsearch's startup stage .",
}

_P3_FLOW = {
    "question": "Is issue 19001 still open?",
    "initial": "Yes, issue 19001 is still open.",
    "followups": [
        "Is issue 19001 currently unresolved?",
        "Has issue 19001 been closed?",
        "Is the transport handshake crash still reproducible?",
    ],
    "fanswers": [
        "Yes, issue 19001 is currently unresolved.",
        "No, issue 19001 has not been closed.",
        "Yes, the crash is still reproducible on the latest snapshot.",
    ],
    "mutations": [
        "Is issue 19001 still unresolved?",
        "Does issue 19001 remain open?",
        "Is the report 19001 yet to be closed?",
    ],
    "manswers": [
        "Yes, issue 19001 is still unresolved.",
        "Yes, issue 19001 remains open.",
        "Yes, report 19001 is yet to be closed.",
    ],
    "winner_index": 0,
    "rephrased": "Yes, issue 19001 is still open.",
    "final": "Yes, issue 19001 is still open.",
}

_P4_FLOW = {
    "question": "Which label marks the heap problem reported in issue 20155?",
    "plan_reply": json.dumps(
        {
            "filters": [{"field": "number", "op": "eq", "value": 20155}],
            "projection": ["repo", "number", "title", "labels"],
        }
    ),
    "initial": "Issue 20155 carries the label `heap-pressure`.",
    "followups": [
        "Which issue carries the label heap-pressure?",
        "Does issue 20155 have any labels besides bug?",
    ],
    "fanswers": [
        "Issue 20155 carries the label `heap-pressure`.",
        "Issue 20155 carries the labels bug and `heap-pressure`.",
    ],
    "mutations": [
        "Which label identifies the heap problem in issue 20155?",
        "What label is attached to the heap report in issue 20155?",
        "Which tag marks issue 20155's heap problem?",
    ],
    "manswers": [
        "Issue 20155 carries the label `heap-pressure`.",
        "Issue 20155 is labeled `heap-pressure`.",
        "The label on issue 20155 is `heap-pressure`.",
    ],
    "final": "The label on issue 20155 is `heap-pressure`.",
}

_P5_SUMMARY = (
    "Issue 18151 reports a node that fails to start with an OutOfMemoryError "
    "during bootstrap unless the UseG1GC JVM option is set; adding the option "
    "fixes startup."
)
_P5_FLOW = {
    "question": "Summarize issue 18151.",
    "initial": _P5_SUMMARY,
    "followups": [
        "Does the summary mention the failing startup?",
        "Which exception appears during bootstrap?",
    ],
    "fanswers": [
        "Issue 18151 fails to start with an OutOfMemoryError during bootstrap unless the UseG1GC option is set.",
        "The bootstrap failure in issue 18151 is an OutOfMemoryError raised until the UseG1GC JVM option is set.",
    ],
    "mutations": [
        "Give an overview of issue 18151.",
        "Describe issue 18151 briefly.",
        "What is issue 18151 about?",
    ],
    "manswers": [
        _P5_SUMMARY,
        "Issue 18151 reports a node failing to start with an OutOfMemoryError during bootstrap unless the UseG1GC JVM option is set.",
        "Issue 18151 is about a startup OutOfMemoryError fixed by setting the UseG1GC JVM option.",
    ],
    "final": _P5_SUMMARY,
}

_P6_FLOW = {
    "question": "Are memory problems increasing across recent reports?",
    "initial": "No, memory problems are not increasing; only issue 20155 reports heap pressure.",
    "followups": [
        "Are memory problems mentioned in more than one recent report?",
        "Is heap pressure limited to a single issue?",
        "Do recent reports show growing memory usage?",
    ],
    "fanswers": [
        "No, only issue 20155 mentions memory problems recently.",
        "Yes, heap pressure is limited to issue 20155.",
        "No, recent reports do not show growing memory usage.",
    ],
    "mutations": [
        "Is the number of memory problems growing in recent reports?",
        "Do recent reports show more memory problems than before?",
        "Are memory issues on the rise lately?",
    ],
    "manswers": [
        "Yes, the number of memory problems is growing in recent reports.",
        "Yes, recent reports show more memory problems than before.",
        "No, memory issues are not on the rise lately.",
    ],
    "winner_index": 0,
    "rephrased": "Yes, memory problems are increasing across recent reports.",
    "final": "Yes, memory problems are increasing across recent reports.",
}

BENCHMARK_FLOWS = {
    "p1": SIMILARITY_FLOW,
    "p2": STARTUP_OPTION_FLOW,
    "p3": _P3_FLOW,
    "p4": _P4_FLOW,
    "p5": _P5_FLOW,
    "p6": _P6_FLOW,
}

# Hand count over BENCHMARK_FLOWS: p6's mutation vote flips a correct "No"
# draft to "Yes", every other pair grades correct.
BENCHMARK_EXPECTED_CORRECT = 5
BENCHMARK_TOTAL = 6
# Without validation the drafts for p1 and p2 grade incorrect ("No" against
# expected "Yes") while p6's correct draft survives.
BENCHMARK_RAW_CORRECT = 4


def flow_pairs(store: StoredCorpus, flow: dict) -> list[tuple[ChatRequest, str]]:
    """Scripted (request, response) pairs for one flow against this store."""
    question = flow["question"]
    pairs: list[tuple[ChatRequest, str]] = []
    plan_block = ""
    if "plan_reply" in flow:
        plan_request = build_plan_request(question)
        pairs.append((plan_request, flow["plan_reply"]))
        planner = ScriptedBackend.from_pairs([(plan_request, flow["plan_reply"])])
        _, plan_block = _planned_context(question, store, planner)

    context = retrieve(question, store)

    def answer_request(text: str) -> ChatRequest:
        return build_answer_request(text, context, extra_context=plan_block)

    pairs.append((answer_request(question), flow["initial"]))
    if flow.get("followups"):
        pairs.append(
            (build_cove_followups_request(question, flow["initial"]), numbered(flow["followups"]))
        )
        for fq, fa in zip(flow["followups"], flow["fanswers"]):
            pairs.append((answer_request(fq), fa))
    if "synthesis" in flow:
        pairs.append(
            (
                build_cove_synthesis_request(
                    question, flow["initial"], list(zip(flow["followups"], flow["fanswers"]))
                ),
                flow["synthesis"],
            )
        )
    if flow.get("mutations"):
        pairs.append((build_mt_mutate_request(question), numbered(flow["mutations"])))
        for mq, ma in zip(flow["mutations"], flow["manswers"]):
            pairs.append((answer_request(mq), ma))
    if "rephrased" in flow:
        winner = flow["manswers"][flow["winner_index"]]
        pairs.append((build_mt_rephrase_request(question, winner), flow["rephrased"]))
    return pairs


def backend_for(store: StoredCorpus, *flows: dict) -> ScriptedBackend:
    pairs = []
    for flow in flows:
        pairs.extend(flow_pairs(store, flow))
    return ScriptedBackend.from_pairs(pairs)


def write_script(path: str | Path, store: StoredCorpus, *flows: dict) -> Path:
    """Serialize flows to a script file loadable by the CLI backend."""
    entries = []
    for flow in flows:
        for request, response in flow_pairs(store, flow):
            entries.append(
                {"match_key_source_text": canonical_request_text(request), "response": response}
            )
    path = Path(path)
    path.write_text(json.dumps(entries, indent=1, ensure_ascii=False), encoding="utf-8")
    return path
