"""Grammar over stack-trace element sequences, with a derivation checker.

The trace parser lexes issue text into element kinds; this module holds the
context-free grammar those kind sequences must satisfy and an Earley
recognizer that decides derivability for any CFG. The recognizer is used by
property tests to confirm every parse the preprocessor emits is grammatical.
"""

from __future__ import annotations

from chime.issues.model import (
    CLASS_ELEM,
    EXCEPTION_MESSAGE,
    EXCEPTION_TYPE,
    FILE_ELEM,
    LINE_ELEM,
    METHOD_ELEM,
)

# Productions: head -> list of alternative bodies. Symbols that do not
# appear as a head are terminals.
Productions = dict[str, list[tuple[str, ...]]]

STACK_TRACE_GRAMMAR: Productions = {
    "Root": [("StackTraceElems",)],
    "StackTraceElems": [
        ("StackTraceElem", "StackTraceElems"),
        ("StackTraceElem",),
    ],
    "StackTraceElem": [("ExceptionElems",), ("CodeDetails",)],
    "ExceptionElems": [
        ("ExceptionElem", "ExceptionElems"),
        ("ExceptionElem",),
    ],
    "ExceptionElem": [(EXCEPTION_TYPE,), (EXCEPTION_MESSAGE,)],
    "CodeDetails": [(CLASS_ELEM,), (METHOD_ELEM,), (FILE_ELEM,), (LINE_ELEM,)],
}

START_SYMBOL = "Root"


class _Item:
    __slots__ = ("head", "body", "dot", "origin")

    def __init__(self, head: str, body: tuple[str, ...], dot: int, origin: int):
        self.head = head
        self.body = body
        self.dot = dot
        self.origin = origin

    def next_symbol(self) -> str | None:
        return self.body[self.dot] if self.dot < len(self.body) else None

    def advanced(self) -> "_Item":
        return _Item(self.head, self.body, self.dot + 1, self.origin)

    def key(self) -> tuple:
        return (self.head, self.body, self.dot, self.origin)


def derivable(
    tokens: list[str],
    grammar: Productions = STACK_TRACE_GRAMMAR,
    start: str = START_SYMBOL,
) -> bool:
    """Earley recognition: can ``start`` derive the token sequence?

    Empty sequences are rejected unless the grammar derives epsilon, which
    the stack-trace grammar does not.
    """
    n = len(tokens)
    chart: list[dict[tuple, _Item]] = [{} for _ in range(n + 1)]

    def add(index: int, item: _Item) -> None:
        key = item.key()
        if key not in chart[index]:
            chart[index][key] = item

    for body in grammar.get(start, ()):
        add(0, _Item(start, body, 0, 0))

    for i in range(n + 1):
        # Queue-style scan: completion/prediction may extend chart[i].
        queue = list(chart[i].values())
        seen = set(chart[i])
        while queue:
            item = queue.pop(0)
            symbol = item.next_symbol()
            if symbol is None:
                # Complete: advance every item waiting on this head.
                for waiting in list(chart[item.origin].values()):
                    if waiting.next_symbol() == item.head:
                        advanced = waiting.advanced()
                        if advanced.key() not in chart[i]:
                            add(i, advanced)
                            queue.append(advanced)
                            seen.add(advanced.key())
            elif symbol in grammar:
                # Predict.
                for body in grammar[symbol]:
                    predicted = _Item(symbol, body, 0, i)
                    if predicted.key() not in seen:
                        add(i, predicted)
                        queue.append(predicted)
                        seen.add(predicted.key())
            else:
                # Scan a terminal.
                if i < n and tokens[i] == symbol:
                    add(i + 1, item.advanced())

    return any(
        item.head == start and item.next_symbol() is None and item.origin == 0
        for item in chart[n].values()
    )
