from chime.issues.model import IssueRecord, RawIssue, StackTrace, TraceElement
from chime.issues.preprocess import (
    parse_stack_trace,
    parse_stack_traces,
    preprocess,
    separate_code_blocks,
    strip_auxiliary,
)

__all__ = [
    "IssueRecord",
    "RawIssue",
    "StackTrace",
    "TraceElement",
    "parse_stack_trace",
    "parse_stack_traces",
    "preprocess",
    "separate_code_blocks",
    "strip_auxiliary",
]
