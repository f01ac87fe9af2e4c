"""Issue ingestion: GitHub-style REST fetching with caching, and local
JSON/JSON-lines loading.

All HTTP goes through an injectable `http_get` callable so tests replay
recorded fixtures; the default uses `requests`. Fetched issues are cached
to `cache/<owner>/<name>/<number>.json` keyed by `updated_at`, which makes
re-ingest against an unchanged upstream byte-identical and cheap.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from chime.errors import (
    AuthError,
    IngestError,
    InvalidInputError,
    RateLimitExhaustedError,
    RepoNotFoundError,
)
from chime.issues import RawIssue

API_ROOT = "https://api.github.com"
_MAX_RATE_WAITS = 2

HttpGet = Callable[[str, dict], tuple[int, dict, str]]


@dataclass(frozen=True)
class IngestSpec:
    """What to fetch: exactly one of explicit numbers, an updated-since
    window, or the open issues."""

    repo: str
    numbers: tuple[int, ...] = ()
    since: str | None = None
    open_only: bool = False
    token: str | None = None
    page_size: int = 100

    def __post_init__(self):
        if self.repo.count("/") != 1 or not all(self.repo.split("/")):
            raise InvalidInputError(f"repo must be owner/name: {self.repo!r}")
        if not 1 <= self.page_size <= 100:
            raise InvalidInputError(f"page size must be in [1, 100]: {self.page_size}")
        modes = sum((bool(self.numbers), self.since is not None, self.open_only))
        if modes > 1:
            raise InvalidInputError("choose one selection: numbers, since window, or open-only")
        if modes == 0:
            object.__setattr__(self, "open_only", True)


def _default_http_get(url: str, headers: dict) -> tuple[int, dict, str]:
    import requests

    response = requests.get(url, headers=headers, timeout=30)
    return response.status_code, dict(response.headers), response.text


def _issue_to_raw(repo: str, issue: dict, comments: list[str]) -> RawIssue:
    labels = tuple(
        label["name"] if isinstance(label, dict) else str(label)
        for label in issue.get("labels", [])
    )
    assignees = [person["login"] for person in issue.get("assignees", []) or []]
    if not assignees and issue.get("assignee"):
        assignees = [issue["assignee"]["login"]]
    return RawIssue(
        repo=repo,
        number=int(issue["number"]),
        title=issue.get("title") or "",
        body=issue.get("body") or "",
        labels=labels,
        assignees=tuple(assignees),
        state=issue.get("state", "open"),
        created_at=issue.get("created_at", ""),
        updated_at=issue.get("updated_at", ""),
        comments=tuple(comments),
    )


class GitHubClient:
    """Minimal issues/comments client with rate-limit wait-and-retry and an
    on-disk cache."""

    def __init__(
        self,
        http_get: HttpGet | None = None,
        cache_dir: str | Path | None = None,
        sleep: Callable[[float], None] = time.sleep,
        now: Callable[[], float] = time.time,
        api_root: str = API_ROOT,
    ):
        self._http_get = http_get or _default_http_get
        self._cache_dir = Path(cache_dir) if cache_dir else None
        self._sleep = sleep
        self._now = now
        self._api_root = api_root.rstrip("/")

    def _get_json(self, path: str, token: str | None):
        headers = {"Accept": "application/vnd.github+json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = f"{self._api_root}{path}"
        waits = 0
        while True:
            status, resp_headers, body = self._http_get(url, headers)
            if status == 200:
                try:
                    return json.loads(body)
                except json.JSONDecodeError as exc:
                    raise IngestError(f"invalid JSON from {url}: {exc}") from exc
            if status == 403 and resp_headers.get("X-RateLimit-Remaining") == "0":
                if waits >= _MAX_RATE_WAITS:
                    raise RateLimitExhaustedError(f"rate limit still exhausted after retries: {url}")
                reset = float(resp_headers.get("X-RateLimit-Reset", self._now() + 60))
                self._sleep(max(0.0, reset - self._now()) + 1.0)
                waits += 1
                continue
            if status in (401, 403):
                raise AuthError(f"authentication failed ({status}): {url}")
            if status == 404:
                raise RepoNotFoundError(f"not found: {url}")
            raise IngestError(f"unexpected status {status} from {url}")

    def _paged(self, path: str, token: str | None, page_size: int) -> list[dict]:
        items: list[dict] = []
        page = 1
        while True:
            sep = "&" if "?" in path else "?"
            batch = self._get_json(f"{path}{sep}per_page={page_size}&page={page}", token)
            items.extend(batch)
            if len(batch) < page_size:
                return items
            page += 1

    def _cache_path(self, repo: str, number: int) -> Path | None:
        if self._cache_dir is None:
            return None
        owner, name = repo.split("/")
        return self._cache_dir / owner / name / f"{number}.json"

    def _cached(self, repo: str, number: int, updated_at: str) -> RawIssue | None:
        path = self._cache_path(repo, number)
        if path is None or not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            return None
        if data.get("updated_at") != updated_at:
            return None
        data = {key: value for key, value in data.items() if key in RawIssue.__dataclass_fields__}
        for field_name in ("labels", "assignees", "comments"):
            data[field_name] = tuple(data.get(field_name, ()))
        return RawIssue(**data)

    def _store_cache(self, raw: RawIssue) -> None:
        path = self._cache_path(raw.repo, raw.number)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(raw.to_dict(), sort_keys=True, ensure_ascii=False, indent=1),
            encoding="utf-8",
        )

    def _comments(self, repo: str, number: int, count: int, spec: IngestSpec) -> list[str]:
        if count <= 0:
            return []
        fetched = self._paged(
            f"/repos/{repo}/issues/{number}/comments", spec.token, spec.page_size
        )
        return [comment.get("body") or "" for comment in fetched]

    def _build(self, spec: IngestSpec, issue: dict) -> RawIssue:
        number = int(issue["number"])
        cached = self._cached(spec.repo, number, issue.get("updated_at", ""))
        if cached is not None:
            return cached
        comments = self._comments(spec.repo, number, issue.get("comments", 0), spec)
        raw = _issue_to_raw(spec.repo, issue, comments)
        self._store_cache(raw)
        return raw

    def fetch(self, spec: IngestSpec) -> list[RawIssue]:
        if spec.numbers:
            issues = [
                self._get_json(f"/repos/{spec.repo}/issues/{number}", spec.token)
                for number in spec.numbers
            ]
        else:
            path = f"/repos/{spec.repo}/issues?state=" + ("open" if spec.open_only else "all")
            if spec.since:
                path += f"&since={spec.since}"
            issues = self._paged(path, spec.token, spec.page_size)
        # The issues endpoint also returns pull requests; this pipeline
        # studies issue reports only.
        issues = [issue for issue in issues if "pull_request" not in issue]
        return [self._build(spec, issue) for issue in issues]


def fetch(spec: IngestSpec, client: GitHubClient | None = None) -> list[RawIssue]:
    return (client or GitHubClient()).fetch(spec)


def _raw_from_record(data: dict) -> RawIssue:
    if not isinstance(data, dict):
        raise InvalidInputError(f"record must be an object, got {type(data).__name__}")
    for required in ("repo", "number", "title"):
        if required not in data:
            raise InvalidInputError(f"record missing field {required!r}")
    comments = []
    for comment in data.get("comments", ()):
        comments.append(comment.get("body") or "" if isinstance(comment, dict) else str(comment))
    return RawIssue(
        repo=data["repo"],
        number=int(data["number"]),
        title=data["title"],
        body=data.get("body") or "",
        labels=tuple(str(label) for label in data.get("labels", ())),
        assignees=tuple(str(person) for person in data.get("assignees", ())),
        state=data.get("state", "open"),
        created_at=data.get("created_at", ""),
        updated_at=data.get("updated_at", ""),
        comments=tuple(comments),
    )


def load_local(path: str | Path) -> tuple[list[RawIssue], list[str]]:
    """Parse a JSON array or JSON-lines file of issue records.

    Malformed records are reported with their line (or array index) and the
    rest of the batch still loads.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    records: list[RawIssue] = []
    errors: list[str] = []

    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON array: {exc}") from exc
        for index, item in enumerate(items, 1):
            try:
                records.append(_raw_from_record(item))
            except (InvalidInputError, ValueError, TypeError) as exc:
                errors.append(f"{path}[{index}]: {exc}")
        return records, errors

    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(_raw_from_record(json.loads(line)))
        except (json.JSONDecodeError, InvalidInputError, ValueError, TypeError) as exc:
            errors.append(f"{path}:{line_no}: {exc}")
    return records, errors
