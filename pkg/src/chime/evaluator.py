"""Benchmark harness: grading modes, correctness arithmetic, parser accuracy.

Yes/no answers are graded by deterministic token rules with a zero-shot
backend fallback for unclear phrasings. Factual answers are graded by
element containment when the expected answer names extractable facts
(issue, line, file, label, quoted identifiers), otherwise by embedding
similarity. Summaries are graded by embedding similarity against a
threshold. Correctness is exact rational arithmetic (correct/total as a
fraction of 100%), rounded half-up to one decimal only for display.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable

from chime.assets import load_asset
from chime.errors import BackendError, InvalidInputError
from chime.llm import ChatBackend, ChatRequest, EmbeddingProvider, cosine
from chime.query_prep import QTYPES, TASKS
from chime.validator import polarity_of

YN_CLASSIFY_ASSET = "classify_yn_v1.txt"
DEFAULT_THRESHOLD = 0.7

_NEGATION = re.compile(r"\b(?:not|never|no|none|neither|cannot)\b|n't\b", re.I)

# Fact elements: issue-number lists, line numbers, code file names, backtick
# or quote delimited identifiers, and label-shaped word:word tokens.
_ISSUE_LIST = re.compile(r"\bissues?\s+#?\d+(?:\s*(?:,|and|&|or)\s*#?\d+)*", re.I)
_HASH_NUMBER = re.compile(r"#(\d+)\b")
_STANDALONE_NUMBER = re.compile(r"\b(\d{4,7})\b")
_LINE_NUMBER = re.compile(r"\blines?\s+(\d+)", re.I)
_CODE_FILE = re.compile(r"\b[\w$-]+\.(?:java|kt|kts|scala|groovy|py|js|ts|c|cc|cpp|go|rs)\b")
_BACKTICKED = re.compile(r"`([^`\n]+)`")
_QUOTED = re.compile(r"\"([^\"\n]{1,80})\"|'([^'\n]{1,80})'")
_LABEL_TOKEN = re.compile(r"\b[A-Za-z][\w.-]*:[\w.-]+\b")
_DIGITS = re.compile(r"\d+")


def _first_sentence(text: str) -> str:
    return re.split(r"[.!?]", text, maxsplit=1)[0]


def display_percent(value: Fraction) -> str:
    """One-decimal display with half-up rounding."""
    quantized = Decimal(value.numerator) / Decimal(value.denominator)
    return str(quantized.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def normalize_expected_yn(expected: str) -> str:
    cleaned = expected.strip().strip(".!").lower()
    if cleaned == "yes":
        return "Yes"
    if cleaned == "no":
        return "No"
    raise InvalidInputError(f"yes/no expected answer must normalize to Yes or No: {expected!r}")


@dataclass(frozen=True)
class BenchmarkPair:
    id: str
    question: str
    expected: str
    qtype: str
    task: str
    repo: str = ""

    def __post_init__(self):
        if self.qtype not in QTYPES:
            raise InvalidInputError(f"unknown qtype: {self.qtype!r}")
        if self.task not in TASKS:
            raise InvalidInputError(f"unknown task: {self.task!r}")
        if self.qtype == "YN":
            normalize_expected_yn(self.expected)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkPair":
        try:
            return cls(
                id=str(data["id"]),
                question=data["question"],
                expected=data["expected"],
                qtype=data["qtype"],
                task=data["task"],
                repo=data.get("repo", ""),
            )
        except KeyError as exc:
            raise InvalidInputError(f"benchmark pair missing field {exc}") from exc


def load_benchmark(path: str) -> list[BenchmarkPair]:
    pairs: list[BenchmarkPair] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                pairs.append(BenchmarkPair.from_dict(json.loads(line)))
            except (json.JSONDecodeError, InvalidInputError) as exc:
                raise InvalidInputError(f"{path}:{line_no}: {exc}") from exc
    if not pairs:
        raise InvalidInputError(f"benchmark {path} has no pairs")
    return pairs


@dataclass(frozen=True)
class GradedResult:
    pair_id: str
    response: str
    correct: bool
    score: float | None
    grading_mode: str  # yn | fact-direct | fact-similarity | summary

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "response": self.response,
            "correct": self.correct,
            "score": self.score,
            "grading_mode": self.grading_mode,
        }


# -- yes/no grading ----------------------------------------------------------


def build_grade_yn_request(response: str) -> ChatRequest:
    return ChatRequest.build(system=load_asset(YN_CLASSIFY_ASSET), user=response)


def yn_label(response: str, llm: ChatBackend | None = None) -> str:
    """Map a free-form answer to Yes, No, or Unclear.

    Leading-token polarity first, then a negation scan of the first
    sentence, then one zero-shot backend classification.
    """
    polarity = polarity_of(response)
    if polarity == "yes":
        return "Yes"
    if polarity == "no":
        return "No"
    if _NEGATION.search(_first_sentence(response)):
        return "No"
    if llm is not None:
        try:
            reply = llm.complete(build_grade_yn_request(response)).strip().lower()
            if reply.startswith("yes"):
                return "Yes"
            if reply.startswith("no"):
                return "No"
        except BackendError:
            pass
    return "Unclear"


def grade_yn(response: str, expected: str, llm: ChatBackend | None = None) -> bool:
    return yn_label(response, llm) == normalize_expected_yn(expected)


# -- fact grading ------------------------------------------------------------


def extract_fact_elements(text: str) -> frozenset[str]:
    elements: set[str] = set()
    for match in _ISSUE_LIST.finditer(text):
        for number in _DIGITS.findall(match.group(0)):
            elements.add(f"issue:{int(number)}")
    for number in _HASH_NUMBER.findall(text):
        elements.add(f"issue:{int(number)}")
    for number in _STANDALONE_NUMBER.findall(text):
        elements.add(f"issue:{int(number)}")
    for number in _LINE_NUMBER.findall(text):
        elements.add(f"line:{int(number)}")
    for name in _CODE_FILE.findall(text):
        elements.add(f"file:{name.lower()}")
    for identifier in _BACKTICKED.findall(text):
        elements.add(f"id:{identifier.strip().lower()}")
    for double, single in _QUOTED.findall(text):
        value = (double or single).strip().lower()
        if value:
            elements.add(f"id:{value}")
    for token in _LABEL_TOKEN.findall(text):
        elements.add(f"label:{token.lower()}")
    return frozenset(elements)


def _safe_similarity(embed: EmbeddingProvider, a: str, b: str) -> float:
    try:
        return cosine(embed.embed(a), embed.embed(b))
    except InvalidInputError:
        return 0.0


def grade_fact(
    response: str,
    expected: str,
    embed: EmbeddingProvider,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[bool, str, float | None]:
    """Containment of the expected answer's extracted elements when it has
    any; embedding similarity against the threshold otherwise."""
    expected_elements = extract_fact_elements(expected)
    if expected_elements:
        response_elements = extract_fact_elements(response)
        return expected_elements <= response_elements, "fact-direct", None
    score = _safe_similarity(embed, response, expected)
    return score >= threshold, "fact-similarity", score


def grade_summary(
    response: str,
    expected: str,
    embed: EmbeddingProvider,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[bool, float]:
    if not 0 < threshold < 1:
        raise InvalidInputError("threshold must be in (0, 1)")
    score = _safe_similarity(embed, response, expected)
    return score >= threshold, score


def grade_pair(
    pair: BenchmarkPair,
    response: str,
    embed: EmbeddingProvider,
    llm: ChatBackend | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> GradedResult:
    if pair.qtype == "YN":
        return GradedResult(pair.id, response, grade_yn(response, pair.expected, llm), None, "yn")
    if pair.qtype == "Fact":
        correct, mode, score = grade_fact(response, pair.expected, embed, threshold)
        return GradedResult(pair.id, response, correct, score, mode)
    correct, score = grade_summary(response, pair.expected, embed, threshold)
    return GradedResult(pair.id, response, correct, score, "summary")


# -- correctness (exact arithmetic) -------------------------------------------


@dataclass(frozen=True)
class CorrectnessReport:
    overall_correct: int
    overall_total: int
    groups: dict[str, dict]  # "task/qtype" → {correct, total, percent}
    improvement_points: str | None = None

    @property
    def overall_fraction(self) -> Fraction:
        return Fraction(self.overall_correct, self.overall_total) * 100

    @property
    def overall_percent(self) -> str:
        return display_percent(self.overall_fraction)

    def to_dict(self) -> dict:
        return {
            "overall": {
                "correct": self.overall_correct,
                "total": self.overall_total,
                "percent": self.overall_percent,
            },
            "groups": {key: dict(value) for key, value in sorted(self.groups.items())},
            "improvement_points": self.improvement_points,
        }


def correctness(
    results: list[GradedResult],
    pairs: list[BenchmarkPair] | None = None,
    baseline: CorrectnessReport | None = None,
) -> CorrectnessReport:
    """Eq.-style correctness: correct/total × 100%, exact until display.

    With the benchmark pairs supplied, per-(task, qtype) groups are
    reported; with a baseline report, the overall percentage-point delta is
    included.
    """
    if not results:
        raise InvalidInputError("no graded results")
    overall_correct = sum(1 for r in results if r.correct)
    overall_total = len(results)

    groups: dict[str, dict] = {}
    if pairs is not None:
        by_id = {pair.id: pair for pair in pairs}
        tallies: dict[str, list[int]] = {}
        for result in results:
            pair = by_id.get(result.pair_id)
            if pair is None:
                raise InvalidInputError(f"graded result {result.pair_id!r} has no benchmark pair")
            key = f"{pair.task}/{pair.qtype}"
            tally = tallies.setdefault(key, [0, 0])
            tally[0] += int(result.correct)
            tally[1] += 1
        for key, (correct, total) in tallies.items():
            groups[key] = {
                "correct": correct,
                "total": total,
                "percent": display_percent(Fraction(correct, total) * 100),
            }

    improvement = None
    if baseline is not None:
        delta = (
            Fraction(overall_correct, overall_total) * 100
            - baseline.overall_fraction
        )
        improvement = display_percent(delta)
    return CorrectnessReport(overall_correct, overall_total, groups, improvement)


def render_report_text(report: CorrectnessReport) -> str:
    lines = [f"{'Group':<14}{'Correct':>8}{'Total':>7}{'C%':>8}"]
    for key, group in sorted(report.groups.items()):
        lines.append(
            f"{key:<14}{group['correct']:>8}{group['total']:>7}{group['percent']:>8}"
        )
    lines.append(
        f"{'Overall':<14}{report.overall_correct:>8}{report.overall_total:>7}"
        f"{report.overall_percent:>8}"
    )
    if report.improvement_points is not None:
        lines.append(f"Improv: {report.improvement_points} points")
    return "\n".join(lines) + "\n"


# -- threshold sweep ----------------------------------------------------------


def similarity_scores(
    pairs: list[BenchmarkPair],
    responses: dict[str, str],
    embed: EmbeddingProvider,
) -> list[float]:
    """Scores for the similarity-graded subset (summaries plus facts with no
    extractable elements)."""
    scores: list[float] = []
    for pair in pairs:
        if pair.id not in responses:
            raise InvalidInputError(f"missing response for pair {pair.id!r}")
        if pair.qtype == "YN":
            continue
        if pair.qtype == "Fact" and extract_fact_elements(pair.expected):
            continue
        scores.append(_safe_similarity(embed, responses[pair.id], pair.expected))
    return scores


def threshold_sweep(
    pairs: list[BenchmarkPair],
    responses: dict[str, str],
    embed: EmbeddingProvider,
    thresholds: list[float],
) -> list[tuple[float, float]]:
    """Correctness of the similarity-graded subset at each threshold."""
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidInputError("thresholds must be strictly increasing")
    scores = similarity_scores(pairs, responses, embed)
    curve: list[tuple[float, float]] = []
    for threshold in thresholds:
        if scores:
            correct = sum(1 for score in scores if score >= threshold)
            percent = 100.0 * correct / len(scores)
        else:
            percent = 0.0
        curve.append((threshold, percent))
    return curve


def sweep_from_scores(scores: list[float], thresholds: list[float]) -> list[tuple[float, float]]:
    """Same curve computed from precomputed similarity scores."""
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidInputError("thresholds must be strictly increasing")
    curve = []
    for threshold in thresholds:
        if scores:
            percent = 100.0 * sum(1 for s in scores if s >= threshold) / len(scores)
        else:
            percent = 0.0
        curve.append((threshold, percent))
    return curve


# -- parser accuracy ----------------------------------------------------------


@dataclass(frozen=True)
class ParserAccuracy:
    precision: float
    recall: float
    f1: float
    per_trace: dict[str, dict]
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_trace": {key: dict(value) for key, value in sorted(self.per_trace.items())},
            "degenerate": list(self.degenerate),
        }


def _element_counter(elements: Iterable) -> Counter:
    counter: Counter = Counter()
    for element in elements:
        if hasattr(element, "kind"):
            kind, value = element.kind, element.value
        elif isinstance(element, dict):
            kind, value = element["kind"], element["value"]
        else:
            kind, value = element
        counter[(kind, " ".join(str(value).split()))] += 1
    return counter


def parser_accuracy(
    parsed: dict[str, Iterable], golden: dict[str, Iterable]
) -> ParserAccuracy:
    """Micro-averaged element precision/recall/F1 over id-aligned traces.

    Elements match on (kind, whitespace-normalized value), counted as
    multisets per trace. Ratios with an empty denominator report 1.0 and
    are flagged as degenerate.
    """
    if set(parsed) != set(golden):
        raise InvalidInputError(
            f"trace ids misaligned: parsed={sorted(parsed)} golden={sorted(golden)}"
        )
    matched_total = 0
    parsed_total = 0
    golden_total = 0
    per_trace: dict[str, dict] = {}
    for trace_id in sorted(parsed):
        parsed_counter = _element_counter(parsed[trace_id])
        golden_counter = _element_counter(golden[trace_id])
        matched = sum((parsed_counter & golden_counter).values())
        per_trace[trace_id] = {
            "matched": matched,
            "parsed": sum(parsed_counter.values()),
            "golden": sum(golden_counter.values()),
        }
        matched_total += matched
        parsed_total += sum(parsed_counter.values())
        golden_total += sum(golden_counter.values())

    degenerate: list[str] = []
    if parsed_total:
        precision = Fraction(matched_total, parsed_total)
    else:
        precision = Fraction(1)
        degenerate.append("precision-0/0")
    if golden_total:
        recall = Fraction(matched_total, golden_total)
    else:
        recall = Fraction(1)
        degenerate.append("recall-0/0")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = Fraction(0)
    return ParserAccuracy(
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        per_trace=per_trace,
        degenerate=tuple(degenerate),
    )
