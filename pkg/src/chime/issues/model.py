"""Domain model for issue reports and parsed stack traces."""

from __future__ import annotations

from dataclasses import dataclass, field

from chime.errors import InvalidInputError

# Element kinds a stack-trace parse may emit. ExceptionType/ExceptionMessage
# describe an exception group; the other four are per-frame code details.
EXCEPTION_TYPE = "ExceptionType"
EXCEPTION_MESSAGE = "ExceptionMessage"
CLASS_ELEM = "ClassElem"
METHOD_ELEM = "MethodElem"
FILE_ELEM = "FileElem"
LINE_ELEM = "LineElem"

ELEMENT_KINDS = (
    EXCEPTION_TYPE,
    EXCEPTION_MESSAGE,
    CLASS_ELEM,
    METHOD_ELEM,
    FILE_ELEM,
    LINE_ELEM,
)

# frame_index for elements that do not belong to a code frame.
NO_FRAME = -1


def _normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


@dataclass(frozen=True)
class TraceElement:
    """One parsed element.

    ``frame_index`` groups the four code-detail kinds of a single frame and
    is ``NO_FRAME`` for exception elements. ``chain_depth`` is 0 for the
    outermost exception segment and grows by one per "Caused by" segment.
    """

    kind: str
    value: str
    frame_index: int = NO_FRAME
    chain_depth: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ELEMENT_KINDS:
            raise InvalidInputError(f"unknown trace element kind: {self.kind!r}")
        if self.kind == LINE_ELEM and not self.value.isdigit():
            raise InvalidInputError(f"LineElem value must be a decimal integer: {self.value!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "frame_index": self.frame_index,
            "chain_depth": self.chain_depth,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceElement":
        return cls(data["kind"], data["value"], data["frame_index"], data["chain_depth"])


@dataclass(frozen=True)
class StackTrace:
    elements: tuple[TraceElement, ...]
    raw_text: str

    def __post_init__(self) -> None:
        if not self.elements:
            raise InvalidInputError("a StackTrace must contain at least one element")

    def exception_types(self) -> list[str]:
        return [e.value for e in self.elements if e.kind == EXCEPTION_TYPE]

    def exception_headers(self) -> list[str]:
        """Render `Type: message` lines, one per exception group."""
        headers: list[str] = []
        pending_type: str | None = None
        for element in self.elements:
            if element.kind == EXCEPTION_TYPE:
                if pending_type is not None:
                    headers.append(pending_type)
                pending_type = element.value
            elif element.kind == EXCEPTION_MESSAGE and pending_type is not None:
                headers.append(f"{pending_type}: {element.value}")
                pending_type = None
        if pending_type is not None:
            headers.append(pending_type)
        return headers

    def values_of(self, kind: str) -> list[str]:
        return [e.value for e in self.elements if e.kind == kind]

    def to_dict(self) -> dict:
        return {
            "elements": [e.to_dict() for e in self.elements],
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StackTrace":
        return cls(
            tuple(TraceElement.from_dict(e) for e in data["elements"]),
            data["raw_text"],
        )


@dataclass(frozen=True)
class RawIssue:
    """Unprocessed issue report, a documented subset of the GitHub REST shape.

    Line endings in body and comments are normalized to "\\n" on construction
    so downstream substring invariants hold against the stored text.
    """

    repo: str
    number: int
    title: str
    body: str
    labels: tuple[str, ...] = ()
    assignees: tuple[str, ...] = ()
    state: str = "open"
    created_at: str = ""
    updated_at: str = ""
    comments: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.number <= 0:
            raise InvalidInputError("issue number must be positive")
        if self.state not in ("open", "closed"):
            raise InvalidInputError(f"issue state must be open or closed: {self.state!r}")
        object.__setattr__(self, "body", _normalize_newlines(self.body))
        object.__setattr__(
            self, "comments", tuple(_normalize_newlines(c) for c in self.comments)
        )

    @property
    def key(self) -> tuple[str, int]:
        return (self.repo, self.number)

    def to_dict(self) -> dict:
        return {
            "repo": self.repo,
            "number": self.number,
            "title": self.title,
            "body": self.body,
            "labels": list(self.labels),
            "assignees": list(self.assignees),
            "state": self.state,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "comments": list(self.comments),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RawIssue":
        try:
            return cls(
                repo=data["repo"],
                number=int(data["number"]),
                title=data.get("title", ""),
                body=data.get("body") or "",
                labels=tuple(data.get("labels", ())),
                assignees=tuple(data.get("assignees", ())),
                state=data.get("state", "open"),
                created_at=data.get("created_at", ""),
                updated_at=data.get("updated_at", ""),
                comments=tuple(data.get("comments", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed raw issue: {exc}") from exc


@dataclass(frozen=True)
class IssueRecord:
    """Preprocessed issue: prose with code blocks removed, verbatim code
    blocks, and every stack trace recovered from prose or blocks."""

    repo: str
    number: int
    title: str
    labels: tuple[str, ...]
    assignees: tuple[str, ...]
    state: str
    created_at: str
    updated_at: str
    prose_text: str
    comments_prose: tuple[str, ...]
    code_blocks: tuple[str, ...]
    stack_traces: tuple[StackTrace, ...]
    skipped_lines: int = 0
    # Diagnostics only: excluded from equality so a record re-derived from
    # its own rendered form compares equal even when a degenerate-input
    # warning (e.g. unterminated fence) no longer applies.
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.repo, self.number)

    def exception_types(self) -> list[str]:
        seen: list[str] = []
        for trace in self.stack_traces:
            for value in trace.exception_types():
                if value not in seen:
                    seen.append(value)
        return seen

    def to_dict(self) -> dict:
        return {
            "repo": self.repo,
            "number": self.number,
            "title": self.title,
            "labels": list(self.labels),
            "assignees": list(self.assignees),
            "state": self.state,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "prose_text": self.prose_text,
            "comments_prose": list(self.comments_prose),
            "code_blocks": list(self.code_blocks),
            "stack_traces": [t.to_dict() for t in self.stack_traces],
            "skipped_lines": self.skipped_lines,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IssueRecord":
        return cls(
            repo=data["repo"],
            number=int(data["number"]),
            title=data["title"],
            labels=tuple(data["labels"]),
            assignees=tuple(data["assignees"]),
            state=data["state"],
            created_at=data["created_at"],
            updated_at=data["updated_at"],
            prose_text=data["prose_text"],
            comments_prose=tuple(data["comments_prose"]),
            code_blocks=tuple(data["code_blocks"]),
            stack_traces=tuple(StackTrace.from_dict(t) for t in data["stack_traces"]),
            skipped_lines=int(data.get("skipped_lines", 0)),
            warnings=tuple(data.get("warnings", ())),
        )
