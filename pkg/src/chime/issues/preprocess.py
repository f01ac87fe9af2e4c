"""Issue preprocessing: noise stripping, code/prose separation, trace parsing.

Raw issue text is cleaned line by line (timestamps, memory addresses,
thread-dump banners), fenced code blocks are separated from prose, and JVM
stack traces are recovered from both. Parsing is a line-level lex (exception
header / frame / caused-by / ellipsis) whose element output conforms to the
grammar in ``chime.issues.grammar``.

Element values and each trace's ``raw_text`` are taken from the original
source lines, never from cleaned ones, so every value remains a substring of
the text it was parsed from.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from chime.issues.model import (
    CLASS_ELEM,
    EXCEPTION_MESSAGE,
    EXCEPTION_TYPE,
    FILE_ELEM,
    LINE_ELEM,
    METHOD_ELEM,
    NO_FRAME,
    IssueRecord,
    RawIssue,
    StackTrace,
    TraceElement,
)

# --------------------------------------------------------------------------
# Line cleaning

_TIMESTAMP_PREFIX = re.compile(
    r"^\s*[\[(]?\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d{1,9})?"
    r"(?:Z|[+-]\d{2}:?\d{2})?[\])]?:?\s*"
)
_TIME_PREFIX = re.compile(r"^\s*\d{2}:\d{2}:\d{2}(?:[.,]\d{1,9})?\s+")
_EPOCH_PREFIX = re.compile(r"^\s*[\[(]?\d{10,13}[\])]?:?\s+")
_HEX_TOKEN = re.compile(r"\b0[xX][0-9a-fA-F]+\b")

# Thread-dump noise dropped wholesale. None of these shapes can also be an
# exception header or a frame line.
_BANNER_PATTERNS = (
    re.compile(r"^\s*Full thread dump\b"),
    re.compile(r'^\s*"[^"]*".*\b(?:prio=\d+|tid=|nid=)'),
    re.compile(r"^\s*java\.lang\.Thread\.State:"),
    re.compile(r"^\s*-\s+(?:locked|waiting on|waiting to lock|parking to wait for)\b"),
    re.compile(r"^\s*Locked ownable synchronizers:"),
    re.compile(r"^\s*JNI global refs:"),
)


def _clean_line(line: str) -> str | None:
    """Strip auxiliary noise from one line; None means the line is dropped."""
    cleaned = _TIMESTAMP_PREFIX.sub("", line, count=1)
    cleaned = _TIME_PREFIX.sub("", cleaned, count=1)
    cleaned = _EPOCH_PREFIX.sub("", cleaned, count=1)
    cleaned = _HEX_TOKEN.sub("", cleaned)
    for pattern in _BANNER_PATTERNS:
        if pattern.match(cleaned):
            return None
    return cleaned


def strip_auxiliary(lines: list[str]) -> list[str]:
    """Remove timestamps, 0x memory addresses, and thread-dump banner lines.

    Frame lines and exception headers are never dropped; at most their
    auxiliary prefixes and tokens are removed.
    """
    return [c for c in (_clean_line(line) for line in lines) if c is not None]


# --------------------------------------------------------------------------
# Code-block separation


def _split_body(body: str) -> tuple[list[str], list[str], list[str]]:
    """Split text into (prose_fragments, code_blocks, warnings).

    Fragments are the contiguous prose runs between fenced blocks, so any
    stack trace found inside one is a substring of the original text.
    """
    fragments: list[list[str]] = [[]]
    blocks: list[str] = []
    warnings: list[str] = []
    block_lines: list[str] | None = None
    for line in body.split("\n"):
        if line.lstrip().startswith("```"):
            if block_lines is None:
                block_lines = []
            else:
                blocks.append("\n".join(block_lines))
                block_lines = None
                # No new fragment after back-to-back fences, else re-rendered
                # bodies would grow a separator line per preprocess pass.
                if fragments[-1]:
                    fragments.append([])
            continue
        if block_lines is not None:
            block_lines.append(line)
        else:
            fragments[-1].append(line)
    if block_lines is not None:
        blocks.append("\n".join(block_lines))
        warnings.append("unterminated code fence treated as a code block")
    if len(fragments) > 1 and fragments[-1] == []:
        fragments.pop()
    return ["\n".join(f) for f in fragments], blocks, warnings


def separate_code_blocks(
    body: str, warnings: list[str] | None = None
) -> tuple[str, list[str]]:
    """Extract fenced code blocks verbatim; return (prose, blocks).

    An unterminated fence turns the trailing region into one code block and
    appends a warning when a collector list is given.
    """
    fragments, blocks, block_warnings = _split_body(body)
    if warnings is not None:
        warnings.extend(block_warnings)
    return "\n".join(fragments), blocks


# --------------------------------------------------------------------------
# Trace lexing

_FRAME = re.compile(
    r"^\s*at\s+"
    r"(?:[A-Za-z_$][\w.$]*/)?"  # module or classloader prefix, stripped
    r"(?P<cls>[A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*)"
    r"\.(?P<method><init>|<clinit>|[A-Za-z_$][\w$]*)"
    r"\((?P<loc>[^()]*)\)"
)
_LOC_FILE_LINE = re.compile(r"^(?P<file>[\w$. \-]+\.[A-Za-z]\w*):(?P<line>\d+)$")
_FILE_ONLY = re.compile(r"^[\w$. \-]+\.[A-Za-z]\w*$")
_QUALIFIED_TYPE = re.compile(r"^\s*(?P<type>(?:[A-Za-z_$][\w$]*\.)+[A-Z][\w$]*)(?::.*)?$")
_TYPE_SUFFIXES = ("Exception", "Error", "Throwable")
_THREAD_PREFIX = re.compile(r'^\s*Exception in thread "[^"]*"\s+')
_CAUSED = re.compile(r"^\s*Caused by:\s*")
_SUPPRESSED = re.compile(r"^\s*Suppressed:\s*")
_ELLIPSIS = re.compile(r"^\s*\.\.\.\s*\d+\s*(?:more|common frames omitted)\b")

# A trace region tolerates this many consecutive unrecognized non-blank
# interior lines before it is considered ended.
_MAX_INTERIOR_SKIP = 2

_START_KINDS = ("header", "frame", "caused")
_TRACE_KINDS = ("header", "frame", "caused", "suppressed", "ellipsis")


def _parse_header(text: str, source: str, relaxed: bool) -> tuple[str, str | None] | None:
    """Recognize `Qualified.Type[: message]`; values come from the source line."""
    match = _QUALIFIED_TYPE.match(text)
    if not match:
        return None
    type_name = match.group("type")
    last_segment = type_name.rsplit(".", 1)[-1]
    if not relaxed and not last_segment.endswith(_TYPE_SUFFIXES):
        return None
    pos = source.find(type_name)
    if pos < 0:
        return None
    after = source[pos + len(type_name):]
    message = None
    if after.startswith(":"):
        message = after[1:].strip() or None
    return type_name, message


def _parse_frame(match: re.Match, source: str) -> dict | None:
    cls = match.group("cls")
    method = match.group("method")
    loc = match.group("loc").strip()
    file_name: str | None = None
    line_no: str | None = None
    loc_match = _LOC_FILE_LINE.match(loc)
    if loc_match:
        file_name = loc_match.group("file")
        line_no = loc_match.group("line")
    elif _FILE_ONLY.match(loc):
        file_name = loc
    for value in (cls, method, file_name, line_no):
        if value is not None and value not in source:
            return None
    return {"cls": cls, "method": method, "file": file_name, "line": line_no}


def _classify(source: str) -> tuple[str, object]:
    cleaned = _clean_line(source)
    if cleaned is None:
        return "aux", None
    if not cleaned.strip():
        return "blank", None
    if _ELLIPSIS.match(cleaned):
        return "ellipsis", None
    caused = _CAUSED.match(cleaned)
    if caused:
        return "caused", _parse_header(cleaned[caused.end():], source, relaxed=True)
    suppressed = _SUPPRESSED.match(cleaned)
    if suppressed:
        return "suppressed", _parse_header(cleaned[suppressed.end():], source, relaxed=True)
    frame_match = _FRAME.match(cleaned)
    if frame_match:
        frame = _parse_frame(frame_match, source)
        if frame is not None:
            return "frame", frame
    thread = _THREAD_PREFIX.match(cleaned)
    if thread:
        header = _parse_header(cleaned[thread.end():], source, relaxed=True)
        if header is not None:
            return "header", header
    header = _parse_header(cleaned, source, relaxed=False)
    if header is not None:
        return "header", header
    return "other", None


def _emit_header(elements: list[TraceElement], header: tuple[str, str | None], depth: int) -> None:
    type_name, message = header
    elements.append(TraceElement(EXCEPTION_TYPE, type_name, NO_FRAME, depth))
    if message:
        elements.append(TraceElement(EXCEPTION_MESSAGE, message, NO_FRAME, depth))


def _emit_frame(elements: list[TraceElement], frame: dict, depth: int, index: int) -> None:
    elements.append(TraceElement(CLASS_ELEM, frame["cls"], index, depth))
    elements.append(TraceElement(METHOD_ELEM, frame["method"], index, depth))
    if frame["file"] is not None:
        elements.append(TraceElement(FILE_ELEM, frame["file"], index, depth))
    if frame["line"] is not None:
        elements.append(TraceElement(LINE_ELEM, frame["line"], index, depth))


@dataclass
class TraceScan:
    """All traces found in one text plus the unrecognized-interior-line tally."""

    traces: list[StackTrace]
    skipped_lines: int


def scan_traces(text: str) -> TraceScan:
    source_lines = text.split("\n")
    classified = [_classify(line) for line in source_lines]
    traces: list[StackTrace] = []
    total_skipped = 0
    i = 0
    n = len(source_lines)
    while i < n:
        kind, payload = classified[i]
        starts = kind == "header" or kind == "frame" or (kind == "caused" and payload)
        if not starts:
            i += 1
            continue
        start = i
        end = i
        depth = 0
        frame_index = 0
        elements: list[TraceElement] = []
        skipped_in_region = 0
        pending: list[str] = []
        j = i
        while j < n:
            k, p = classified[j]
            if k == "header" and j > start:
                break  # a fresh header opens a new trace
            if k in _TRACE_KINDS:
                skipped_in_region += sum(1 for x in pending if x == "other")
                pending = []
                if k in ("caused", "suppressed"):
                    if j > start:
                        depth += 1
                    if p:
                        _emit_header(elements, p, depth)
                elif k == "header":
                    _emit_header(elements, p, depth)
                elif k == "frame":
                    _emit_frame(elements, p, depth, frame_index)
                    frame_index += 1
                end = j
                j += 1
                continue
            if k in ("other", "aux") and len(pending) < _MAX_INTERIOR_SKIP:
                pending.append(k)
                j += 1
                continue
            break
        if elements:
            raw_text = "\n".join(source_lines[start:end + 1])
            traces.append(StackTrace(tuple(elements), raw_text))
            total_skipped += skipped_in_region
            i = end + 1
        else:
            i = start + 1
    return TraceScan(traces, total_skipped)


def parse_stack_trace(text: str) -> StackTrace | None:
    """Parse the first stack trace in the text, or None when there is none."""
    scan = scan_traces(text)
    return scan.traces[0] if scan.traces else None


def parse_stack_traces(text: str) -> list[StackTrace]:
    return scan_traces(text).traces


# --------------------------------------------------------------------------
# Whole-issue preprocessing


def preprocess(raw: RawIssue) -> IssueRecord:
    """Produce the structured record for one raw issue.

    Trace order is canonical: traces from body prose, then from each comment's
    prose in comment order, then from every code block (body blocks first,
    then comment blocks). Code blocks that parse as traces stay listed as
    code blocks too.
    """
    warnings: list[str] = []
    body_fragments, body_blocks, fence_warnings = _split_body(raw.body)
    warnings.extend(fence_warnings)
    prose_text = "\n".join(body_fragments)

    comments_prose: list[str] = []
    comment_fragment_lists: list[list[str]] = []
    comment_blocks: list[str] = []
    for comment in raw.comments:
        fragments, blocks, fence_warnings = _split_body(comment)
        warnings.extend(fence_warnings)
        comments_prose.append("\n".join(fragments))
        comment_fragment_lists.append(fragments)
        comment_blocks.extend(blocks)

    traces: list[StackTrace] = []
    skipped = 0

    def absorb(text: str) -> None:
        nonlocal skipped
        scan = scan_traces(text)
        traces.extend(scan.traces)
        skipped += scan.skipped_lines

    for fragment in body_fragments:
        absorb(fragment)
    for fragments in comment_fragment_lists:
        for fragment in fragments:
            absorb(fragment)
    all_blocks = body_blocks + comment_blocks
    for block in all_blocks:
        absorb(block)

    return IssueRecord(
        repo=raw.repo,
        number=raw.number,
        title=raw.title,
        labels=tuple(raw.labels),
        assignees=tuple(raw.assignees),
        state=raw.state,
        created_at=raw.created_at,
        updated_at=raw.updated_at,
        prose_text=prose_text,
        comments_prose=tuple(comments_prose),
        code_blocks=tuple(all_blocks),
        stack_traces=tuple(traces),
        skipped_lines=skipped,
        warnings=tuple(warnings),
    )


def record_to_raw(record: IssueRecord) -> RawIssue:
    """Render a record back to raw-issue form; preprocessing the result
    yields a record equal to the input."""
    body = record.prose_text
    for block in record.code_blocks:
        body += "\n```\n" + block + "\n```"
    return RawIssue(
        repo=record.repo,
        number=record.number,
        title=record.title,
        body=body,
        labels=tuple(record.labels),
        assignees=tuple(record.assignees),
        state=record.state,
        created_at=record.created_at,
        updated_at=record.updated_at,
        comments=tuple(record.comments_prose),
    )
