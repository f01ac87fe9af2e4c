"""Queryable issue store: persistence, structured filters, NL query planning.

Records live in an embedded SQLite file (or in memory) with side tables for
labels, assignees, and parsed trace elements so structured filters run as
SQL. Per-record embeddings of title+prose are kept in memory and recomputed
from stored records on open, so every index is derivable from records alone.
"""

from __future__ import annotations

import json
import re
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable, Iterable

from chime.assets import asset_id, load_asset
from chime.errors import InvalidInputError, InvalidQueryError, PlanningError, StoreError
from chime.issues.model import CLASS_ELEM, EXCEPTION_TYPE, FILE_ELEM, IssueRecord
from chime.llm import ChatBackend, ChatRequest, EmbeddingProvider, EmbeddingVector

# Filterable fields and the operators each accepts.
_MEMBER_FIELDS = {
    "label": "record_labels",
    "assignee": "record_assignees",
}
_ELEMENT_FIELDS = {
    "exception_type": EXCEPTION_TYPE,
    "file": FILE_ELEM,
    "class": CLASS_ELEM,
}
_SCALAR_FIELDS = ("repo", "number", "state")
_DATE_FIELDS = ("created_at", "updated_at")
_DATE_OPS = ("before", "after", "older_than_days", "within_days")

FILTER_FIELDS = _SCALAR_FIELDS + _DATE_FIELDS + tuple(_MEMBER_FIELDS) + tuple(_ELEMENT_FIELDS)

PROJECTION_FIELDS = (
    "repo",
    "number",
    "title",
    "labels",
    "assignees",
    "state",
    "created_at",
    "updated_at",
    "prose_text",
    "exception_types",
)

PLAN_PROMPT_ASSET = "plan_query_v1.txt"
PLAN_RETRY_ASSET = "plan_retry_v1.txt"


def normalize_timestamp(value: str) -> str:
    """Canonical UTC form so timestamp comparisons are lexicographic.

    Unparseable values pass through unchanged and compare as plain strings.
    """
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        return value
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Filter:
    """One conjunction term: field, operator, comparison value."""

    field: str
    op: str
    value: object

    def __post_init__(self):
        if self.field not in FILTER_FIELDS:
            raise InvalidQueryError(f"unknown filter field: {self.field!r}")
        if self.field in _DATE_FIELDS:
            if self.op not in _DATE_OPS:
                raise InvalidQueryError(
                    f"field {self.field!r} supports {_DATE_OPS}, got {self.op!r}"
                )
            if self.op in ("older_than_days", "within_days"):
                try:
                    object.__setattr__(self, "value", float(self.value))
                except (TypeError, ValueError):
                    raise InvalidQueryError(f"day count must be numeric: {self.value!r}")
        else:
            if self.op != "eq":
                raise InvalidQueryError(
                    f"field {self.field!r} supports only 'eq', got {self.op!r}"
                )
            if self.field == "number":
                try:
                    object.__setattr__(self, "value", int(self.value))
                except (TypeError, ValueError):
                    raise InvalidQueryError(f"issue number must be an integer: {self.value!r}")


@dataclass(frozen=True)
class StructuredQuery:
    filters: tuple[Filter, ...]
    projection: tuple[str, ...] = ()
    limit: int | None = None
    select_all: bool = False

    def __post_init__(self):
        if not self.filters and not self.select_all:
            raise InvalidQueryError("query needs at least one filter or select_all")
        if self.limit is not None and self.limit < 1:
            raise InvalidQueryError("limit must be positive")
        for name in self.projection:
            if name not in PROJECTION_FIELDS:
                raise InvalidQueryError(f"unknown projection field: {name!r}")


def project_record(record: IssueRecord, fields: Iterable[str]) -> dict:
    out: dict = {}
    for name in fields:
        if name == "labels":
            out[name] = list(record.labels)
        elif name == "assignees":
            out[name] = list(record.assignees)
        elif name == "exception_types":
            out[name] = record.exception_types()
        else:
            out[name] = getattr(record, name)
    return out


class StoredCorpus:
    """Issue records with structured filtering and an embedding index.

    Writes are serialized; each insert commits the record row and every
    index row in one transaction.
    """

    def __init__(
        self,
        path: str = ":memory:",
        embedder: EmbeddingProvider | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._lock = threading.RLock()
        self._embedder = embedder
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._embeddings: dict[tuple[str, int], EmbeddingVector] = {}
        self._create_tables()
        self._reindex_embeddings()

    @property
    def embedder(self) -> EmbeddingProvider | None:
        return self._embedder

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def _create_tables(self) -> None:
        with self._lock, self._conn:
            self._conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS records (
                    repo TEXT NOT NULL,
                    number INTEGER NOT NULL,
                    state TEXT,
                    created_at TEXT,
                    updated_at TEXT,
                    data TEXT NOT NULL,
                    PRIMARY KEY (repo, number)
                );
                CREATE TABLE IF NOT EXISTS record_labels (
                    repo TEXT, number INTEGER, value TEXT
                );
                CREATE TABLE IF NOT EXISTS record_assignees (
                    repo TEXT, number INTEGER, value TEXT
                );
                CREATE TABLE IF NOT EXISTS trace_elements (
                    repo TEXT, number INTEGER, kind TEXT, value TEXT
                );
                CREATE INDEX IF NOT EXISTS idx_labels ON record_labels (value);
                CREATE INDEX IF NOT EXISTS idx_assignees ON record_assignees (value);
                CREATE INDEX IF NOT EXISTS idx_elements ON trace_elements (kind, value);
                """
            )

    # -- write path --------------------------------------------------------

    def insert(self, record: IssueRecord) -> None:
        embedding = self._compute_embedding(record)
        try:
            with self._lock, self._conn:
                key = (record.repo, record.number)
                self._delete_rows(key)
                self._conn.execute(
                    "INSERT INTO records (repo, number, state, created_at, updated_at, data)"
                    " VALUES (?, ?, ?, ?, ?, ?)",
                    (
                        record.repo,
                        record.number,
                        record.state,
                        normalize_timestamp(record.created_at),
                        normalize_timestamp(record.updated_at),
                        json.dumps(record.to_dict(), sort_keys=True),
                    ),
                )
                self._insert_index_rows(record)
                if embedding is not None:
                    self._embeddings[key] = embedding
                else:
                    self._embeddings.pop(key, None)
        except sqlite3.Error as exc:
            raise StoreError(f"insert failed for {record.key}: {exc}") from exc

    def _delete_rows(self, key: tuple[str, int]) -> None:
        for table in ("records", "record_labels", "record_assignees", "trace_elements"):
            self._conn.execute(
                f"DELETE FROM {table} WHERE repo = ? AND number = ?", key
            )

    def _insert_index_rows(self, record: IssueRecord) -> None:
        for label in record.labels:
            self._conn.execute(
                "INSERT INTO record_labels VALUES (?, ?, ?)",
                (record.repo, record.number, label),
            )
        for assignee in record.assignees:
            self._conn.execute(
                "INSERT INTO record_assignees VALUES (?, ?, ?)",
                (record.repo, record.number, assignee),
            )
        for trace in record.stack_traces:
            for element in trace.elements:
                self._conn.execute(
                    "INSERT INTO trace_elements VALUES (?, ?, ?, ?)",
                    (record.repo, record.number, element.kind, element.value),
                )

    def _compute_embedding(self, record: IssueRecord) -> EmbeddingVector | None:
        if self._embedder is None:
            return None
        text = (record.title + "\n" + record.prose_text).strip()
        if not text:
            return None
        try:
            return self._embedder.embed(text)
        except InvalidInputError:
            return None

    def _reindex_embeddings(self) -> None:
        self._embeddings.clear()
        if self._embedder is None:
            return
        for record in self.all_records():
            embedding = self._compute_embedding(record)
            if embedding is not None:
                self._embeddings[record.key] = embedding

    def rebuild_indices(self) -> None:
        """Re-derive every index from the stored records alone."""
        records = self.all_records()
        try:
            with self._lock, self._conn:
                for table in ("record_labels", "record_assignees", "trace_elements"):
                    self._conn.execute(f"DELETE FROM {table}")
                for record in records:
                    self._insert_index_rows(record)
        except sqlite3.Error as exc:
            raise StoreError(f"index rebuild failed: {exc}") from exc
        self._reindex_embeddings()

    # -- read path ---------------------------------------------------------

    def get(self, repo: str, number: int) -> IssueRecord | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT data FROM records WHERE repo = ? AND number = ?",
                (repo, number),
            ).fetchone()
        return IssueRecord.from_dict(json.loads(row[0])) if row else None

    def count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM records").fetchone()[0]

    def keys(self) -> list[tuple[str, int]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT repo, number FROM records ORDER BY repo, number"
            ).fetchall()
        return [(r, n) for r, n in rows]

    def all_records(self) -> list[IssueRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT data FROM records ORDER BY repo, number"
            ).fetchall()
        return [IssueRecord.from_dict(json.loads(row[0])) for row in rows]

    def embedding(self, key: tuple[str, int]) -> EmbeddingVector | None:
        return self._embeddings.get(key)

    def execute(self, query: StructuredQuery) -> list[IssueRecord]:
        clauses: list[str] = []
        params: list = []
        for f in query.filters:
            clause, clause_params = self._compile_filter(f)
            clauses.append(clause)
            params.extend(clause_params)
        sql = "SELECT data FROM records"
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        sql += " ORDER BY repo, number"
        if query.limit is not None:
            sql += " LIMIT ?"
            params.append(query.limit)
        try:
            with self._lock:
                rows = self._conn.execute(sql, params).fetchall()
        except sqlite3.Error as exc:
            raise StoreError(f"query failed: {exc}") from exc
        return [IssueRecord.from_dict(json.loads(row[0])) for row in rows]

    def execute_projected(self, query: StructuredQuery) -> list[dict]:
        records = self.execute(query)
        fields = query.projection or PROJECTION_FIELDS
        return [project_record(record, fields) for record in records]

    def _compile_filter(self, f: Filter) -> tuple[str, list]:
        if f.field in _SCALAR_FIELDS:
            return f"records.{f.field} = ?", [f.value]
        if f.field in _MEMBER_FIELDS:
            table = _MEMBER_FIELDS[f.field]
            return (
                f"EXISTS (SELECT 1 FROM {table} t WHERE t.repo = records.repo"
                " AND t.number = records.number AND t.value = ?)",
                [f.value],
            )
        if f.field in _ELEMENT_FIELDS:
            kind = _ELEMENT_FIELDS[f.field]
            return (
                "EXISTS (SELECT 1 FROM trace_elements t WHERE t.repo = records.repo"
                " AND t.number = records.number AND t.kind = ? AND t.value = ?)",
                [kind, f.value],
            )
        if f.field in _DATE_FIELDS:
            column = f"records.{f.field}"
            if f.op == "before":
                return f"{column} < ?", [normalize_timestamp(str(f.value))]
            if f.op == "after":
                return f"{column} > ?", [normalize_timestamp(str(f.value))]
            cutoff = self._clock().astimezone(timezone.utc) - timedelta(days=float(f.value))
            cutoff_text = cutoff.strftime("%Y-%m-%dT%H:%M:%SZ")
            if f.op == "older_than_days":
                return f"{column} < ?", [cutoff_text]
            return f"{column} >= ?", [cutoff_text]
        raise InvalidQueryError(f"unknown filter field: {f.field!r}")

    # -- import/export -----------------------------------------------------

    def export_jsonl(self, path: str) -> int:
        records = self.all_records()
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        return len(records)

    def import_jsonl(self, path: str) -> int:
        count = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                self.insert(IssueRecord.from_dict(json.loads(line)))
                count += 1
        return count


# -- natural-language query planning ---------------------------------------

_FENCE = re.compile(r"^```[a-zA-Z]*\n|\n?```$")


def _strip_fences(text: str) -> str:
    return _FENCE.sub("", text.strip()).strip()


def build_plan_request(question: str) -> ChatRequest:
    return ChatRequest.build(system=load_asset(PLAN_PROMPT_ASSET), user=question)


def build_plan_retry_request(question: str, bad_reply: str, error: str) -> ChatRequest:
    retry_user = load_asset(PLAN_RETRY_ASSET).format(
        question=question, reply=bad_reply, error=error
    )
    return ChatRequest.build(system=load_asset(PLAN_PROMPT_ASSET), user=retry_user)


def _parse_plan_reply(reply: str) -> StructuredQuery:
    data = json.loads(_strip_fences(reply))
    if not isinstance(data, dict):
        raise InvalidQueryError("plan reply must be a JSON object")
    raw_filters = data.get("filters", [])
    if not isinstance(raw_filters, list):
        raise InvalidQueryError("'filters' must be a list")
    filters = tuple(
        Filter(field=f.get("field"), op=f.get("op", "eq"), value=f.get("value"))
        for f in raw_filters
    )
    projection = tuple(data.get("projection", ()))
    limit = data.get("limit")
    if limit is not None:
        limit = int(limit)
    return StructuredQuery(
        filters=filters,
        projection=projection,
        limit=limit,
        select_all=bool(data.get("select_all", False)),
    )


def plan_query(question: str, llm: ChatBackend) -> StructuredQuery:
    """Translate a natural-language question into a StructuredQuery.

    The backend is asked for a strict JSON predicate object; one retry with
    an error-explaining prompt is attempted before giving up.
    """
    if not question.strip():
        raise InvalidQueryError("question must be non-empty")
    reply = llm.complete(build_plan_request(question))
    try:
        return _parse_plan_reply(reply)
    except (json.JSONDecodeError, InvalidQueryError, TypeError, ValueError) as first_error:
        retry_reply = llm.complete(
            build_plan_retry_request(question, reply, str(first_error))
        )
        try:
            return _parse_plan_reply(retry_reply)
        except (json.JSONDecodeError, InvalidQueryError, TypeError, ValueError) as exc:
            raise PlanningError(
                f"query planning failed after retry: {exc}"
            ) from exc


PLAN_TEMPLATE_ID = asset_id(PLAN_PROMPT_ASSET)
