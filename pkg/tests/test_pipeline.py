import json

import pytest

from chime.errors import InvalidInputError, MissingScriptError
from chime.issues import preprocess
from chime.llm import HashedBagOfWordsProvider, ScriptedBackend
from chime.pipeline import ABLATABLE_STAGES, ask, transcript_id_for
from chime.retrieval import build_answer_request, retrieve
from chime.store import Filter, StoredCorpus, StructuredQuery, build_plan_request

import replay


@pytest.fixture()
def similarity_setup(store):
    llm = replay.backend_for(store, replay.SIMILARITY_FLOW)
    return store, llm


def test_ablatable_stage_names():
    assert ABLATABLE_STAGES == {
        "query-preprocessing",
        "issue-preprocessing",
        "cove",
        "mt",
    }


def test_ask_similarity_flow_reaches_corrected_final(similarity_setup):
    store, llm = similarity_setup
    result = ask(replay.SIMILARITY_FLOW["question"], store, llm, store.embedder)
    assert result.final == "Yes, issue 18102 and 18669 are similar."
    assert result.badge == "validated"
    transcript = result.transcript
    assert transcript["qtype"] == "YN"
    assert transcript["referenced_issues"] == [18102, 18669]
    assert transcript["initial_response"] == "No, issue 18102 and 18669 are not similar."
    assert len(transcript["validation"]["cove_followups"]) == 3
    assert transcript["validation"]["cove_intermediate"] == result.final
    forced = [hit for hit in transcript["retrieval"]["hits"] if hit["forced"]]
    assert {hit["number"] for hit in forced} == {18102, 18669}


def test_ask_startup_option_flow(store):
    llm = replay.backend_for(store, replay.STARTUP_OPTION_FLOW)
    result = ask(replay.STARTUP_OPTION_FLOW["question"], store, llm, store.embedder)
    assert result.final == (
        "Yes, it is required to have the UseG1GC option during Elasticsearch's "
        "startup stage ."
    )
    validation = result.transcript["validation"]
    assert validation["cove_intermediate"] == result.transcript["initial_response"]
    assert [q for q, _ in validation["mt_mutations"]] == list(
        replay.STARTUP_OPTION_FLOW["mutations"]
    )
    assert len(validation["cove_followups"]) == 3


def test_ask_without_validation_returns_initial(similarity_setup):
    store, llm = similarity_setup
    result = ask(
        replay.SIMILARITY_FLOW["question"], store, llm, store.embedder,
        run_validation=False,
    )
    assert result.final == "No, issue 18102 and 18669 are not similar."
    assert result.badge == "raw"
    assert result.transcript["validation"] is None
    assert result.transcript["notes"] == []


def test_ask_rejects_empty_question(similarity_setup):
    store, llm = similarity_setup
    with pytest.raises(InvalidInputError):
        ask("   ", store, llm, store.embedder)


def test_ask_rejects_unknown_ablation(similarity_setup):
    store, llm = similarity_setup
    with pytest.raises(InvalidInputError):
        ask("Is it broken?", store, llm, store.embedder, ablate=("retrieval",))


def test_ask_transcripts_are_deterministic(similarity_setup):
    store, llm = similarity_setup
    question = replay.SIMILARITY_FLOW["question"]
    first = ask(question, store, llm, store.embedder)
    second = ask(question, store, llm, store.embedder)
    assert json.dumps(first.transcript, sort_keys=True) == json.dumps(
        second.transcript, sort_keys=True
    )
    assert first.transcript_id == second.transcript_id


def test_transcript_id_sensitive_to_content():
    base = {"question": "q", "final_response": "a"}
    changed = {"question": "q", "final_response": "b"}
    assert transcript_id_for(base) != transcript_id_for(changed)
    assert len(transcript_id_for(base)) == 16


# --------------------------------------------------------------------------
# ablation wiring


def test_ablate_mt_empties_only_mt(store):
    llm = replay.backend_for(store, replay.STARTUP_OPTION_FLOW)
    question = replay.STARTUP_OPTION_FLOW["question"]
    full = ask(question, store, llm, store.embedder)
    ablated = ask(question, store, llm, store.embedder, ablate=("mt",))
    assert ablated.transcript["validation"]["mt_mutations"] == []
    assert "mt disabled" in ablated.transcript["notes"]
    assert ablated.badge == "degraded"
    assert ablated.transcript["ablated"] == ["mt"]
    # upstream stages unchanged by the ablation
    assert ablated.transcript["preprocessing"] == full.transcript["preprocessing"]
    assert ablated.transcript["retrieval"] == full.transcript["retrieval"]
    assert ablated.transcript["initial_response"] == full.transcript["initial_response"]
    assert (
        ablated.transcript["validation"]["cove_followups"]
        == full.transcript["validation"]["cove_followups"]
    )
    assert ablated.final == ablated.transcript["validation"]["cove_intermediate"]


def test_ablate_cove_empties_only_cove(store):
    llm = replay.backend_for(store, replay.STARTUP_OPTION_FLOW)
    question = replay.STARTUP_OPTION_FLOW["question"]
    full = ask(question, store, llm, store.embedder)
    ablated = ask(question, store, llm, store.embedder, ablate=("cove",))
    assert ablated.transcript["validation"]["cove_followups"] == []
    assert "cove disabled" in ablated.transcript["notes"]
    assert ablated.transcript["initial_response"] == full.transcript["initial_response"]
    assert (
        ablated.transcript["validation"]["mt_mutations"]
        == full.transcript["validation"]["mt_mutations"]
    )
    # the mutation vote still overturns the draft
    assert ablated.final == full.final


def test_ablate_query_preprocessing_skips_transform(similarity_setup):
    store, llm = similarity_setup
    question = replay.SIMILARITY_FLOW["question"]
    result = ask(question, store, llm, store.embedder, ablate=("query-preprocessing",))
    preprocessing = result.transcript["preprocessing"]
    assert preprocessing["transformed_question"] == question
    assert preprocessing["instruction_used"] is None


def test_ablate_issue_preprocessing_switches_snippets_flat(fixture_raws):
    store = StoredCorpus(embedder=HashedBagOfWordsProvider())
    try:
        store.insert(preprocess(fixture_raws[2]))
        question = "Does the startup crash repeat?"
        structured_request = build_answer_request(
            question, retrieve(question, store, structured_snippets=True)
        )
        flat_request = build_answer_request(
            question, retrieve(question, store, structured_snippets=False)
        )
        assert structured_request != flat_request
        llm = ScriptedBackend.from_pairs(
            [(structured_request, "structured answer"), (flat_request, "flat answer")]
        )
        kept = ask(question, store, llm, store.embedder, run_validation=False)
        ablated = ask(
            question, store, llm, store.embedder,
            run_validation=False, ablate=("issue-preprocessing",),
        )
        assert kept.final == "structured answer"
        assert ablated.final == "flat answer"
    finally:
        store.close()


# --------------------------------------------------------------------------
# structured planning


def test_planner_runs_for_label_question(store):
    llm = replay.backend_for(store, replay.BENCHMARK_FLOWS["p4"])
    result = ask(replay.BENCHMARK_FLOWS["p4"]["question"], store, llm, store.embedder)
    planning = result.transcript["planning"]
    assert planning is not None
    assert planning["filters"] == [{"field": "number", "op": "eq", "value": 20155}]
    assert planning["matches"] == 1
    assert result.final == "The label on issue 20155 is `heap-pressure`."


def test_planner_skipped_without_structured_wording(similarity_setup):
    store, llm = similarity_setup
    result = ask(replay.SIMILARITY_FLOW["question"], store, llm, store.embedder)
    assert result.transcript["planning"] is None


def test_planner_without_projection_lists_titles(store):
    question = "Which open issues are assigned to jdoe?"
    plan_reply = json.dumps(
        {"filters": [{"field": "assignee", "op": "eq", "value": "jdoe"}]}
    )
    matches = store.execute(
        StructuredQuery(filters=(Filter("assignee", "eq", "jdoe"),))
    )
    assert len(matches) == 2
    block = "Matching issues:\n" + "\n".join(
        f"- {record.repo}#{record.number} (title={record.title})" for record in matches
    )
    context = retrieve(question, store)
    llm = ScriptedBackend.from_pairs(
        [
            (build_plan_request(question), plan_reply),
            (
                build_answer_request(question, context, extra_context=block),
                "jdoe has two assigned issues.",
            ),
        ]
    )
    result = ask(question, store, llm, store.embedder, run_validation=False)
    assert result.final == "jdoe has two assigned issues."
    assert result.transcript["planning"]["matches"] == 2
    assert result.transcript["planning"]["projection"] == []


def test_planner_failure_propagates(store):
    llm = ScriptedBackend.from_pairs([])
    with pytest.raises(MissingScriptError):
        ask("Which label is on it?", store, llm, store.embedder)


# --------------------------------------------------------------------------
# benchmark flow grading end to end


def test_benchmark_flows_grade_as_frozen():
    from chime.evaluator import grade_pair, load_benchmark

    pairs = load_benchmark(str(replay.BENCHMARK_FIXTURE))
    store = replay.new_store()
    try:
        llm = replay.backend_for(store, *replay.BENCHMARK_FLOWS.values())
        embed = store.embedder
        full_correct = 0
        raw_correct = 0
        for pair in pairs:
            result = ask(pair.question, store, llm, embed)
            full_correct += grade_pair(pair, result.final, embed).correct
            raw = ask(pair.question, store, llm, embed, run_validation=False)
            raw_correct += grade_pair(pair, raw.final, embed).correct
        assert full_correct == replay.BENCHMARK_EXPECTED_CORRECT
        assert raw_correct == replay.BENCHMARK_RAW_CORRECT
    finally:
        store.close()
