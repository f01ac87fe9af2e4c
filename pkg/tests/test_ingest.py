import json

import pytest

from chime.errors import (
    AuthError,
    IngestError,
    InvalidInputError,
    RateLimitExhaustedError,
    RepoNotFoundError,
)
from chime.ingest import GitHubClient, IngestSpec, load_local

import replay


# --------------------------------------------------------------------------
# spec validation


def test_spec_requires_owner_slash_name():
    with pytest.raises(InvalidInputError):
        IngestSpec(repo="elasticsearch")
    with pytest.raises(InvalidInputError):
        IngestSpec(repo="a/b/c")


def test_spec_defaults_to_open_only():
    assert IngestSpec(repo="elastic/elasticsearch").open_only is True


def test_spec_rejects_multiple_selection_modes():
    with pytest.raises(InvalidInputError):
        IngestSpec(repo="a/b", numbers=(1,), since="2016-01-01T00:00:00Z")
    with pytest.raises(InvalidInputError):
        IngestSpec(repo="a/b", numbers=(1,), open_only=True)


def test_spec_page_size_bounds():
    with pytest.raises(InvalidInputError):
        IngestSpec(repo="a/b", page_size=0)
    with pytest.raises(InvalidInputError):
        IngestSpec(repo="a/b", page_size=101)


# --------------------------------------------------------------------------
# fake GitHub API


def issue_payload(number, *, updated="2016-06-01T00:00:00Z", comments=0, **extra):
    body = {
        "number": number,
        "title": f"issue {number}",
        "body": f"body {number}",
        "labels": [{"name": "bug"}],
        "assignees": [{"login": "jdoe"}],
        "state": "open",
        "created_at": "2016-05-01T00:00:00Z",
        "updated_at": updated,
        "comments": comments,
    }
    body.update(extra)
    return body


class FakeApi:
    """URL-keyed responses; each value is a (status, headers, json_body) list
    consumed in order, with the last entry repeating."""

    def __init__(self, routes):
        self.routes = dict(routes)
        self.calls = []

    def __call__(self, url, headers):
        self.calls.append((url, headers))
        key = url.replace("https://api.github.com", "")
        if key not in self.routes:
            return 404, {}, json.dumps({"message": "Not Found"})
        entries = self.routes[key]
        entry = entries.pop(0) if len(entries) > 1 else entries[0]
        status, resp_headers, body = entry
        return status, resp_headers, json.dumps(body)


def ok(body):
    return [(200, {}, body)]


def test_fetch_explicit_numbers():
    api = FakeApi(
        {
            "/repos/a/b/issues/1": ok(issue_payload(1)),
            "/repos/a/b/issues/2": ok(issue_payload(2)),
        }
    )
    raws = GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(1, 2)))
    assert [r.number for r in raws] == [1, 2]
    assert raws[0].labels == ("bug",)
    assert raws[0].assignees == ("jdoe",)


def test_fetch_open_issues_paginates():
    page1 = [issue_payload(i) for i in range(1, 3)]
    page2 = [issue_payload(3)]
    api = FakeApi(
        {
            "/repos/a/b/issues?state=open&per_page=2&page=1": ok(page1),
            "/repos/a/b/issues?state=open&per_page=2&page=2": ok(page2),
        }
    )
    raws = GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", page_size=2))
    assert [r.number for r in raws] == [1, 2, 3]
    assert len(api.calls) == 2


def test_fetch_since_window_uses_state_all():
    api = FakeApi(
        {
            "/repos/a/b/issues?state=all&since=2016-01-01T00:00:00Z&per_page=100&page=1": ok(
                [issue_payload(9)]
            )
        }
    )
    raws = GitHubClient(http_get=api).fetch(
        IngestSpec(repo="a/b", since="2016-01-01T00:00:00Z")
    )
    assert [r.number for r in raws] == [9]


def test_fetch_filters_pull_requests():
    listing = [issue_payload(1), issue_payload(2, pull_request={"url": "x"})]
    api = FakeApi({"/repos/a/b/issues?state=open&per_page=100&page=1": ok(listing)})
    raws = GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b"))
    assert [r.number for r in raws] == [1]


def test_fetch_collects_comments():
    api = FakeApi(
        {
            "/repos/a/b/issues/5": ok(issue_payload(5, comments=2)),
            "/repos/a/b/issues/5/comments?per_page=100&page=1": ok(
                [{"body": "first"}, {"body": "second"}]
            ),
        }
    )
    raws = GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(5,)))
    assert raws[0].comments == ("first", "second")


def test_fetch_sends_token_header():
    api = FakeApi({"/repos/a/b/issues/1": ok(issue_payload(1))})
    GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(1,), token="t0k"))
    assert api.calls[0][1]["Authorization"] == "Bearer t0k"


# --------------------------------------------------------------------------
# error mapping


def test_fetch_auth_error():
    api = FakeApi({"/repos/a/b/issues/1": [(401, {}, {"message": "bad"})]})
    with pytest.raises(AuthError):
        GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(1,)))


def test_fetch_not_found():
    api = FakeApi({})
    with pytest.raises(RepoNotFoundError):
        GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(1,)))


def test_fetch_unexpected_status():
    api = FakeApi({"/repos/a/b/issues/1": [(500, {}, {"message": "boom"})]})
    with pytest.raises(IngestError):
        GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(1,)))


def test_rate_limit_waits_until_reset_then_retries():
    limited = (403, {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "1000"}, {"message": "limit"})
    api = FakeApi({"/repos/a/b/issues/1": [limited, (200, {}, issue_payload(1))]})
    sleeps = []
    client = GitHubClient(http_get=api, sleep=sleeps.append, now=lambda: 940.0)
    raws = client.fetch(IngestSpec(repo="a/b", numbers=(1,)))
    assert [r.number for r in raws] == [1]
    assert sleeps == [61.0]


def test_rate_limit_exhausted_after_two_waits():
    limited = (403, {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "1000"}, {"message": "limit"})
    api = FakeApi({"/repos/a/b/issues/1": [limited, limited, limited]})
    sleeps = []
    client = GitHubClient(http_get=api, sleep=sleeps.append, now=lambda: 990.0)
    with pytest.raises(RateLimitExhaustedError):
        client.fetch(IngestSpec(repo="a/b", numbers=(1,)))
    assert len(sleeps) == 2


def test_plain_403_is_auth_error():
    api = FakeApi({"/repos/a/b/issues/1": [(403, {}, {"message": "forbidden"})]})
    with pytest.raises(AuthError):
        GitHubClient(http_get=api).fetch(IngestSpec(repo="a/b", numbers=(1,)))


# --------------------------------------------------------------------------
# cache behavior


def test_cache_hit_skips_comment_fetch(tmp_path):
    routes = {
        "/repos/a/b/issues/5": ok(issue_payload(5, comments=1)),
        "/repos/a/b/issues/5/comments?per_page=100&page=1": ok([{"body": "hi"}]),
    }
    api = FakeApi(routes)
    client = GitHubClient(http_get=api, cache_dir=tmp_path)
    first = client.fetch(IngestSpec(repo="a/b", numbers=(5,)))
    calls_after_first = len(api.calls)
    cache_file = tmp_path / "a" / "b" / "5.json"
    assert cache_file.exists()
    snapshot = cache_file.read_bytes()

    second = client.fetch(IngestSpec(repo="a/b", numbers=(5,)))
    assert second == first
    # one extra call for the issue itself, none for comments
    assert len(api.calls) == calls_after_first + 1
    assert cache_file.read_bytes() == snapshot


def test_cache_invalidated_by_updated_at(tmp_path):
    api = FakeApi(
        {
            "/repos/a/b/issues/5": [
                (200, {}, issue_payload(5, comments=1)),
                (200, {}, issue_payload(5, comments=1, updated="2016-07-01T00:00:00Z", title="changed")),
            ],
            "/repos/a/b/issues/5/comments?per_page=100&page=1": ok([{"body": "hi"}]),
        }
    )
    client = GitHubClient(http_get=api, cache_dir=tmp_path)
    first = client.fetch(IngestSpec(repo="a/b", numbers=(5,)))[0]
    second = client.fetch(IngestSpec(repo="a/b", numbers=(5,)))[0]
    assert first.title == "issue 5"
    assert second.title == "changed"


# --------------------------------------------------------------------------
# local loading


def test_load_local_jsonl_fixture():
    records, errors = load_local(replay.ISSUES_FIXTURE)
    assert errors == []
    assert [r.number for r in records] == [18102, 18669, 18151, 19001, 20155]
    assert all(r.repo == "elastic/elasticsearch" for r in records)


def test_load_local_json_array(tmp_path):
    path = tmp_path / "issues.json"
    path.write_text(
        json.dumps(
            [
                {"repo": "a/b", "number": 1, "title": "one"},
                {"repo": "a/b", "number": 2, "title": "two", "comments": [{"body": "c"}, "plain"]},
            ]
        )
    )
    records, errors = load_local(path)
    assert errors == []
    assert [r.number for r in records] == [1, 2]
    assert records[1].comments == ("c", "plain")


def test_load_local_reports_bad_records_and_continues(tmp_path):
    path = tmp_path / "issues.jsonl"
    path.write_text(
        '{"repo": "a/b", "number": 1, "title": "ok"}\n'
        "not json\n"
        '{"repo": "a/b", "title": "missing number"}\n'
        '{"repo": "a/b", "number": 4, "title": "also ok"}\n'
    )
    records, errors = load_local(path)
    assert [r.number for r in records] == [1, 4]
    assert len(errors) == 2
    assert ":2:" in errors[0]
    assert ":3:" in errors[1]


def test_load_local_array_index_errors(tmp_path):
    path = tmp_path / "issues.json"
    path.write_text(json.dumps([{"repo": "a/b", "number": 1, "title": "ok"}, {"nope": 1}]))
    records, errors = load_local(path)
    assert len(records) == 1
    assert "[2]" in errors[0]


def test_load_local_rejects_broken_array(tmp_path):
    path = tmp_path / "issues.json"
    path.write_text("[{\"repo\": ")
    with pytest.raises(InvalidInputError):
        load_local(path)
