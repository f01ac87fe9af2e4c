"""Answer validation: verification follow-ups, then question mutations.

Stage one generates follow-up questions about the initial answer, answers
them against the same grounded context, and checks each for consistency
with the initial claim; a contradicting majority triggers one synthesis
completion that regenerates the answer. Stage two asks exactly three
semantically equivalent rephrasings of the question and votes the final
answer from their replies. Users see only the final answer; every exchange
is captured in an ordered transcript.

Consistency is judged by leading yes/no tokens when both texts carry one,
otherwise by embedding similarity against a configurable threshold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

from chime.assets import asset_id, load_asset
from chime.errors import BackendError, InvalidInputError
from chime.llm import ChatBackend, ChatRequest, EmbeddingProvider, cosine

COVE_FOLLOWUPS_ASSET = "cove_followups_v1.txt"
COVE_SYNTHESIS_ASSET = "cove_synthesis_v1.txt"
MT_MUTATE_ASSET = "mt_mutate_v1.txt"
MT_REPHRASE_ASSET = "mt_rephrase_v1.txt"

COVE_FOLLOWUPS_TEMPLATE_ID = asset_id(COVE_FOLLOWUPS_ASSET)
MT_MUTATE_TEMPLATE_ID = asset_id(MT_MUTATE_ASSET)

MAX_FOLLOWUPS = 5
MUTATION_COUNT = 3
DEFAULT_THRESHOLD = 0.7

_YES_LEAD = re.compile(r"^[\s\"'(\[]*(?:yes|yeah|yep|correct|true|indeed)\b", re.I)
_NO_LEAD = re.compile(r"^[\s\"'(\[]*(?:no|nope|false|incorrect)\b", re.I)
_NEGATION = re.compile(r"\b(?:not|never|no)\b|n't\b", re.I)
_NUMBERED = re.compile(r"^\s*(?:\d+\s*[.):-]\s*|[-*]\s+)")


def polarity_of(text: str) -> str | None:
    """Leading-token polarity: 'yes', 'no', or None when neither leads."""
    if _YES_LEAD.match(text):
        return "yes"
    if _NO_LEAD.match(text):
        return "no"
    return None


def _first_sentence(text: str) -> str:
    return re.split(r"[.!?]", text, maxsplit=1)[0]


def _normalized(text: str) -> str:
    return " ".join(text.lower().split()).rstrip(".?!")


def _parse_numbered(reply: str) -> list[str]:
    lines = []
    for line in reply.splitlines():
        stripped = _NUMBERED.sub("", line).strip()
        if stripped:
            lines.append(stripped)
    return lines


def _safe_similarity(embed: EmbeddingProvider, a: str, b: str) -> float:
    try:
        return cosine(embed.embed(a), embed.embed(b))
    except InvalidInputError:
        return 0.0


@dataclass(frozen=True)
class Adjudication:
    verdict: str  # consistent | contradiction
    polarity_votes: dict[str, int]  # affirm / deny / abstain counts
    similarity_scores: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "polarity_votes": dict(self.polarity_votes),
            "similarity_scores": list(self.similarity_scores),
        }


@dataclass
class ValidationTranscript:
    """Ordered record of every exchange made while validating one answer."""

    initial_question: str
    initial_response: str
    cove_followups: list[tuple[str, str]] = field(default_factory=list)
    cove_intermediate: str = ""
    mt_mutations: list[tuple[str, str]] = field(default_factory=list)
    final_response: str = ""
    adjudication_notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "initial_question": self.initial_question,
            "initial_response": self.initial_response,
            "cove_followups": [[q, a] for q, a in self.cove_followups],
            "cove_intermediate": self.cove_intermediate,
            "mt_mutations": [[q, a] for q, a in self.mt_mutations],
            "final_response": self.final_response,
            "adjudication_notes": list(self.adjudication_notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationTranscript":
        return cls(
            initial_question=data["initial_question"],
            initial_response=data["initial_response"],
            cove_followups=[tuple(pair) for pair in data.get("cove_followups", [])],
            cove_intermediate=data.get("cove_intermediate", ""),
            mt_mutations=[tuple(pair) for pair in data.get("mt_mutations", [])],
            final_response=data.get("final_response", ""),
            adjudication_notes=list(data.get("adjudication_notes", [])),
        )


# -- request builders (shared with tests and fixtures) -----------------------


def build_cove_followups_request(question: str, initial: str) -> ChatRequest:
    user = f"Question: {question}\nDraft answer: {initial}"
    return ChatRequest.build(system=load_asset(COVE_FOLLOWUPS_ASSET), user=user)


def build_cove_synthesis_request(
    question: str, initial: str, followups: list[tuple[str, str]]
) -> ChatRequest:
    lines = [f"Question: {question}", f"Draft answer: {initial}", "Verification answers:"]
    for index, (q, a) in enumerate(followups, 1):
        lines.append(f"{index}. Q: {q}")
        lines.append(f"   A: {a}")
    return ChatRequest.build(system=load_asset(COVE_SYNTHESIS_ASSET), user="\n".join(lines))


def build_mt_mutate_request(question: str) -> ChatRequest:
    return ChatRequest.build(system=load_asset(MT_MUTATE_ASSET), user=question)


def build_mt_mutate_retry_request(question: str, previous_reply: str) -> ChatRequest:
    user = (
        f"{question}\n\n"
        "The previous attempt did not produce 3 distinct rephrasings:\n"
        f"{previous_reply}\n"
        "Write 3 new distinct rephrasings."
    )
    return ChatRequest.build(system=load_asset(MT_MUTATE_ASSET), user=user)


def build_mt_rephrase_request(question: str, answer_text: str) -> ChatRequest:
    user = f"Question: {question}\nAnswer: {answer_text}"
    return ChatRequest.build(system=load_asset(MT_REPHRASE_ASSET), user=user)


# -- CoVe stage --------------------------------------------------------------


def cove_generate_followups(
    question: str, initial: str, llm: ChatBackend
) -> tuple[list[str], list[str]]:
    """Backend-generated verification questions, at most five.

    Returns (questions, notes); an empty question list is the skip signal.
    """
    if not initial.strip():
        raise InvalidInputError("initial answer must be non-empty")
    try:
        reply = llm.complete(build_cove_followups_request(question, initial))
    except BackendError:
        return [], ["cove skipped: follow-up generation failed"]
    questions = _parse_numbered(reply)[:MAX_FOLLOWUPS]
    if not questions:
        return [], ["cove skipped: no follow-up questions parsed"]
    return questions, []


def cove_adjudicate(
    initial: str,
    followup_answers: list[str],
    embed: EmbeddingProvider,
    synthesize: Callable[[], str | None] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[str, Adjudication]:
    """Check follow-up answers against the initial answer's claim.

    Each answer affirms or denies via leading-token polarity when both texts
    carry one, otherwise via embedding similarity (affirm at or above the
    threshold, abstain below). A deny majority or a tie regenerates the
    answer through the synthesize callable; an affirm majority keeps the
    initial verbatim.
    """
    if not followup_answers:
        raise InvalidInputError("need at least one follow-up answer")
    initial_polarity = polarity_of(initial)
    votes = {"affirm": 0, "deny": 0, "abstain": 0}
    similarities: list[float] = []
    for answer_text in followup_answers:
        answer_polarity = polarity_of(answer_text)
        if initial_polarity is not None and answer_polarity is not None:
            votes["affirm" if answer_polarity == initial_polarity else "deny"] += 1
        else:
            score = _safe_similarity(embed, answer_text, initial)
            similarities.append(score)
            votes["affirm" if score >= threshold else "abstain"] += 1
    if votes["affirm"] > votes["deny"]:
        verdict = "consistent"
        intermediate = initial
    else:
        verdict = "contradiction"
        regenerated = synthesize() if synthesize is not None else None
        intermediate = regenerated if regenerated else initial
    return intermediate, Adjudication(verdict, votes, tuple(similarities))


# -- MT stage ----------------------------------------------------------------


def _distinct_mutations(question: str, candidates: list[str]) -> bool:
    if len(candidates) < MUTATION_COUNT:
        return False
    normalized = [_normalized(c) for c in candidates[:MUTATION_COUNT]]
    if _normalized(question) in normalized:
        return False
    return len(set(normalized)) == MUTATION_COUNT


def mt_mutate(question: str, llm: ChatBackend) -> tuple[list[str], list[str]]:
    """Exactly three meaning-preserving rephrasings of the question.

    A reply with duplicates (or echoing the original) is re-requested once;
    a still-degenerate reply is accepted with a note when it has three
    lines, otherwise the stage is skipped. Returns (mutations, notes).
    """
    if not question.strip():
        raise InvalidInputError("question must be non-empty")
    try:
        reply = llm.complete(build_mt_mutate_request(question))
    except BackendError:
        return [], ["mt skipped: mutation generation failed"]
    mutations = _parse_numbered(reply)
    if _distinct_mutations(question, mutations):
        return mutations[:MUTATION_COUNT], []

    notes: list[str] = []
    try:
        retry_reply = llm.complete(build_mt_mutate_retry_request(question, reply))
        retry_mutations = _parse_numbered(retry_reply)
        if _distinct_mutations(question, retry_mutations):
            return retry_mutations[:MUTATION_COUNT], []
        if len(retry_mutations) >= MUTATION_COUNT:
            mutations = retry_mutations
    except BackendError:
        pass
    if len(mutations) >= MUTATION_COUNT:
        notes.append("mt mutations accepted with duplicates after one retry")
        return mutations[:MUTATION_COUNT], notes
    notes.append(f"mt skipped: only {len(mutations)} mutations parsed")
    return [], notes


def _is_polarity_ambiguous(text: str, polarity: str) -> bool:
    # A leading token that disagrees with the sentence's negation content.
    negated = _NEGATION.search(_first_sentence(text)) is not None
    return (polarity == "no") != negated


def mt_adjudicate(
    intermediate: str,
    mutated_answers: list[str],
    qtype: str,
    embed: EmbeddingProvider,
    llm: ChatBackend | None = None,
    question: str = "",
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[str, list[str]]:
    """Vote the final answer from the three mutated answers.

    Yes/no questions take the 2-of-3 polarity majority and return the
    earliest clear winning-side answer, rephrased as a direct answer when a
    backend is available. Other types return the answer most similar on
    average to the other two, unless that mean similarity falls below the
    threshold, in which case the draft stands.
    """
    if len(mutated_answers) != MUTATION_COUNT:
        raise InvalidInputError(f"expected {MUTATION_COUNT} mutated answers")
    notes: list[str] = []
    if qtype == "YN":
        polarities = [polarity_of(a) for a in mutated_answers]
        yes_count = polarities.count("yes")
        no_count = polarities.count("no")
        if yes_count == no_count:
            notes.append("mt inconclusive: no polarity majority; draft answer stands")
            return intermediate, notes
        winning = "yes" if yes_count > no_count else "no"
        winner = next(
            a for a, p in zip(mutated_answers, polarities) if p == winning
        )
        if _is_polarity_ambiguous(winner, winning):
            notes.append("mt winner polarity ambiguous; classified by leading token")
        if llm is not None:
            try:
                rephrased = llm.complete(
                    build_mt_rephrase_request(question, winner)
                ).strip()
                return (rephrased or winner), notes
            except BackendError:
                notes.append("mt rephrase unavailable; winning answer returned verbatim")
        return winner, notes

    means: list[float] = []
    for index, answer_text in enumerate(mutated_answers):
        others = [a for j, a in enumerate(mutated_answers) if j != index]
        sims = [_safe_similarity(embed, answer_text, other) for other in others]
        means.append(sum(sims) / len(sims))
    best_index = max(range(len(means)), key=lambda i: (means[i], -i))
    if means[best_index] < threshold:
        notes.append(
            "mt low confidence: mutated answers mutually dissimilar; draft answer stands"
        )
        return intermediate, notes
    return mutated_answers[best_index], notes


# -- composition -------------------------------------------------------------


def validate(
    question: str,
    qtype: str,
    initial: str,
    llm: ChatBackend,
    embed: EmbeddingProvider,
    answer_fn: Callable[[str], str],
    run_cove: bool = True,
    run_mt: bool = True,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[str, ValidationTranscript]:
    """Run both validation stages over an initial answer.

    Every stage degrades gracefully: generation or answering failures skip
    the stage with a note rather than failing the run. The follow-up and
    mutated questions are answered through answer_fn so they stay grounded
    in the same retrieved context as the initial answer.
    """
    if not initial.strip():
        raise InvalidInputError("initial answer must be non-empty")
    notes: list[str] = []
    followups: list[tuple[str, str]] = []
    intermediate = initial

    if run_cove:
        questions, generation_notes = cove_generate_followups(question, initial, llm)
        notes.extend(generation_notes)
        if questions:
            answers: list[str] | None
            try:
                answers = [answer_fn(q) for q in questions]
            except BackendError:
                answers = None
                notes.append("cove skipped: follow-up answering failed")
            if answers is not None:
                followups = list(zip(questions, answers))

                def synthesize() -> str | None:
                    try:
                        return llm.complete(
                            build_cove_synthesis_request(question, initial, followups)
                        ).strip() or None
                    except BackendError:
                        return None

                intermediate, adjudication = cove_adjudicate(
                    initial, answers, embed, synthesize=synthesize, threshold=threshold
                )
                votes = adjudication.polarity_votes
                notes.append(
                    f"cove verdict: {adjudication.verdict}"
                    f" (affirm={votes['affirm']}, deny={votes['deny']},"
                    f" abstain={votes['abstain']})"
                )
                if adjudication.verdict == "contradiction" and intermediate == initial:
                    notes.append("cove synthesis unavailable; initial answer retained")
    else:
        notes.append("cove disabled")

    mutations: list[tuple[str, str]] = []
    final = intermediate
    if run_mt:
        mutation_questions, mutation_notes = mt_mutate(question, llm)
        notes.extend(mutation_notes)
        if len(mutation_questions) == MUTATION_COUNT:
            mutated_answers: list[str] | None
            try:
                mutated_answers = [answer_fn(m) for m in mutation_questions]
            except BackendError:
                mutated_answers = None
                notes.append("mt skipped: mutated answering failed")
            if mutated_answers is not None:
                mutations = list(zip(mutation_questions, mutated_answers))
                final, adjudication_notes = mt_adjudicate(
                    intermediate,
                    mutated_answers,
                    qtype,
                    embed,
                    llm=llm,
                    question=question,
                    threshold=threshold,
                )
                notes.extend(adjudication_notes)
    else:
        notes.append("mt disabled")

    transcript = ValidationTranscript(
        initial_question=question,
        initial_response=initial,
        cove_followups=followups,
        cove_intermediate=intermediate,
        mt_mutations=mutations,
        final_response=final,
        adjudication_notes=notes,
    )
    return final, transcript
