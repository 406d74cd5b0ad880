"""GitHub issue loading with a local JSONL cache.

Issues can come from a local cache file (one raw record per line) or
from the GitHub REST API; remote fetches write the cache so subsequent
runs are offline-reproducible. Each cache line holds the full issue
payload plus its fetched comments:

    {"issue": {...api payload...}, "comments": [{...}, ...]}
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import FetchError, ParseError

logger = logging.getLogger(__name__)

GITHUB_TOKEN_ENV = "ONTOFORGE_GITHUB_TOKEN"

DOCUMENT_SOURCES = ("github_issue", "pubmed", "docs", "other")


@dataclass(frozen=True)
class Document:
    """One unstructured knowledge item for the document collection."""

    doc_id: str
    source: str
    title: str
    body: str
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.source not in DOCUMENT_SOURCES:
            raise ValueError(f"unknown document source {self.source!r}")
        if not self.body:
            raise ValueError(f"document {self.doc_id!r} has an empty body")


def serialize_document(doc: Document) -> str:
    """Text form used for embedding a document."""
    return f"{doc.title}. {doc.body}" if doc.title else doc.body


@dataclass(frozen=True)
class GithubSource:
    """Remote issue-tracker descriptor: ``owner/name`` plus API base."""

    repo: str
    api_base: str = "https://api.github.com"


def _record_to_document(record: dict) -> Document:
    issue = record.get("issue")
    if not isinstance(issue, dict) or "number" not in issue:
        raise ParseError(f"cache record is not an issue payload: {record!r:.120}")
    parts = []
    body = issue.get("body") or ""
    if body.strip():
        parts.append(body.strip())
    for comment in record.get("comments", []):
        text = (comment.get("body") or "").strip()
        if text:
            parts.append(text)
    return Document(
        doc_id=str(issue["number"]),
        source="github_issue",
        title=issue.get("title") or "",
        body="\n\n".join(parts) or "(no text)",
        raw=record,
    )


def read_issue_cache(path) -> list[Document]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed cache line: {exc}", line_no) from exc
            docs.append(_record_to_document(record))
    return docs


def write_issue_cache(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


class _RequestsSession:
    def __init__(self):
        import requests

        self._session = requests.Session()

    def get(self, url, headers=None, params=None):
        return self._session.get(url, headers=headers, params=params, timeout=60)


def _get_with_retry(session, url, headers, params=None, attempts=5, sleep=time.sleep):
    """GET with sleep-and-retry on rate-limit responses."""
    last_status = None
    for attempt in range(attempts):
        resp = session.get(url, headers=headers, params=params)
        status = resp.status_code
        if status == 200:
            return resp
        last_status = status
        if status in (403, 429):
            retry_after = resp.headers.get("Retry-After")
            delay = float(retry_after) if retry_after else 2.0**attempt
            logger.warning("rate limited on %s; sleeping %.1fs", url, delay)
            sleep(delay)
            continue
        raise FetchError(f"GET {url} failed with status {status}", status=status)
    raise FetchError(f"GET {url} rate-limited after {attempts} attempts", status=last_status)


def fetch_github_issues(
    source: GithubSource,
    session=None,
    token: str | None = None,
    max_concurrency: int = 4,
    sleep=time.sleep,
) -> list[dict]:
    """Fetch all issues (with comments) for a repository."""
    session = session or _RequestsSession()
    token = token or os.environ.get(GITHUB_TOKEN_ENV)
    headers = {"Accept": "application/vnd.github+json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"

    issues: list[dict] = []
    page = 1
    while True:
        url = f"{source.api_base}/repos/{source.repo}/issues"
        resp = _get_with_retry(
            session,
            url,
            headers,
            params={"state": "all", "per_page": 100, "page": page},
            sleep=sleep,
        )
        batch = resp.json()
        if not isinstance(batch, list):
            raise ParseError(f"unexpected issues payload: {batch!r:.120}")
        if not batch:
            break
        issues.extend(batch)
        if len(batch) < 100:
            break
        page += 1

    def fetch_comments(issue: dict) -> dict:
        comments = []
        if issue.get("comments") and issue.get("comments_url"):
            resp = _get_with_retry(session, issue["comments_url"], headers, sleep=sleep)
            comments = resp.json()
            if not isinstance(comments, list):
                raise ParseError(f"unexpected comments payload: {comments!r:.120}")
        return {"issue": issue, "comments": comments}

    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        records = list(pool.map(fetch_comments, issues))
    records.sort(key=lambda r: r["issue"]["number"])
    return records


def load_github_issues(
    source,
    cache_path=None,
    session=None,
    token: str | None = None,
    max_concurrency: int = 4,
    sleep=time.sleep,
) -> list[Document]:
    """Load issues from a cache file or from the remote tracker.

    With a :class:`GithubSource`, fetches remotely, writes
    ``cache_path`` (required), and re-reads the cache so a later
    offline run yields the identical document list.
    """
    if isinstance(source, GithubSource):
        if cache_path is None:
            raise ValueError("remote issue loading requires a cache_path")
        records = fetch_github_issues(
            source,
            session=session,
            token=token,
            max_concurrency=max_concurrency,
            sleep=sleep,
        )
        write_issue_cache(records, cache_path)
        return read_issue_cache(cache_path)
    return read_issue_cache(source)
