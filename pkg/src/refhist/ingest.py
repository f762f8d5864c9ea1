"""Reading revisioned-article corpora.

Two input formats are supported: MediaWiki ``pages-meta-history`` XML exports
and a flat JSON-Lines fixture format (one revision object per line).  Both
yield ``(article_id, [RevisionRecord, ...])`` groups with revisions sorted by
timestamp, redirect pages removed and editors classified against a bot list.
"""

from __future__ import annotations

import enum
import hashlib
import io
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence
from xml.parsers import expat

from .errors import DumpParseError, InvalidContributorError, JsonlParseError, RefhistError

log = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
_REDIRECT_RE = re.compile(r"\s*#redirect", re.IGNORECASE)


class EditorKind(str, enum.Enum):
    REGISTERED = "registered"
    BOT = "bot"
    NONREGISTERED = "nonregistered"


@dataclass(frozen=True)
class EditorIdentity:
    kind: EditorKind
    user_id: int | None = None
    user_name: str | None = None
    ip: str | None = None

    @property
    def key(self) -> str:
        """Stable editor key: account name, or the IP for anonymous sessions."""
        if self.kind is EditorKind.NONREGISTERED:
            return self.ip or ""
        return self.user_name or ""


@dataclass(frozen=True)
class RevisionRecord:
    article_id: int
    article_title: str
    revision_id: int
    timestamp: datetime
    editor: EditorIdentity
    wikitext: str


@dataclass(frozen=True)
class BotList:
    names: frozenset = frozenset()

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and name.casefold() in self.names

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "BotList":
        return cls(frozenset(n.strip().casefold() for n in names if n.strip()))


@dataclass
class IngestStats:
    """Warning counters collected while reading a corpus."""

    skipped_revisions: int = 0
    resorted_articles: int = 0
    redirects: int = 0
    other_namespaces: int = 0
    reverted_dropped: int = 0
    reasons: Counter = field(default_factory=Counter)

    def skip(self, reason: str) -> None:
        self.skipped_revisions += 1
        self.reasons[reason] += 1


def parse_timestamp(value: str) -> datetime:
    return datetime.strptime(value.strip(), TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)


def format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def load_botlist(paths: Sequence[str | Path]) -> BotList:
    names: set[str] = set()
    for path in paths:
        try:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.split("#", 1)[0].strip()
                    if line:
                        names.add(line.casefold())
        except OSError as exc:
            raise OSError(f"cannot read bot list {path}: {exc.strerror or exc}") from exc
    return BotList(frozenset(names))


def classify_editor(
    username: str | None = None,
    ip: str | None = None,
    botlist: BotList | None = None,
    user_id: int | None = None,
) -> EditorIdentity:
    username = username.strip() if username else None
    ip = ip.strip() if ip else None
    if bool(username) == bool(ip):
        raise InvalidContributorError(
            "contributor must carry exactly one of username/ip "
            f"(got username={username!r}, ip={ip!r})"
        )
    if ip:
        return EditorIdentity(EditorKind.NONREGISTERED, ip=ip)
    if botlist is not None and username in botlist:
        return EditorIdentity(EditorKind.BOT, user_id=user_id, user_name=username)
    return EditorIdentity(EditorKind.REGISTERED, user_id=user_id, user_name=username)


def is_redirect(wikitext: str) -> bool:
    return bool(_REDIRECT_RE.match(wikitext))


def _finish_article(
    revisions: list[RevisionRecord],
    stats: IngestStats,
    skip_reverted: bool,
) -> list[RevisionRecord] | None:
    if not revisions:
        return None
    order = sorted(revisions, key=lambda r: (r.timestamp, r.revision_id))
    if order != revisions:
        stats.resorted_articles += 1
        log.warning("article %s: revisions out of order, re-sorted", revisions[0].article_id)
    if is_redirect(order[-1].wikitext):
        stats.redirects += 1
        return None
    if skip_reverted:
        order = drop_identity_reverts(order, stats)
    return order


def drop_identity_reverts(
    revisions: Sequence[RevisionRecord], stats: IngestStats | None = None
) -> list[RevisionRecord]:
    """Drop revisions whose text hash equals one seen two or more revisions earlier."""
    seen_at: dict[bytes, int] = {}
    kept = []
    for i, rev in enumerate(revisions):
        digest = hashlib.sha1(rev.wikitext.encode("utf-8")).digest()
        first = seen_at.get(digest)
        if first is not None and i - first >= 2:
            if stats is not None:
                stats.reverted_dropped += 1
            continue
        seen_at.setdefault(digest, i)
        kept.append(rev)
    return kept


class _DumpHandler:
    """expat callbacks collecting one page at a time."""

    def __init__(self, botlist, stats, skip_reverted):
        self.botlist = botlist
        self.stats = stats
        self.skip_reverted = skip_reverted
        self.stack: list[str] = []
        self.buf: list[str] | None = None
        self.page: dict | None = None
        self.rev: dict | None = None
        self.done: list[tuple[int, list[RevisionRecord]]] = []

    def start(self, name, attrs):
        parent = self.stack[-1] if self.stack else None
        self.stack.append(name)
        if name == "page":
            self.page = {"revisions": []}
        elif name == "revision" and self.page is not None:
            self.rev = {}
        elif name == "contributor" and self.rev is not None:
            self.rev["contributor"] = {}
        elif self.page is not None and (
            (parent == "page" and name in ("id", "title", "ns"))
            or (parent == "revision" and name in ("id", "timestamp", "text"))
            or (parent == "contributor" and name in ("username", "id", "ip"))
        ):
            self.buf = []

    def data(self, text):
        if self.buf is not None:
            self.buf.append(text)

    def end(self, name):
        self.stack.pop()
        parent = self.stack[-1] if self.stack else None
        value = "".join(self.buf) if self.buf is not None else None
        self.buf = None
        if value is not None:
            if parent == "page":
                self.page[name] = value
            elif parent == "revision" and self.rev is not None:
                self.rev[name] = value
            elif parent == "contributor" and self.rev is not None:
                self.rev["contributor"][name] = value
        elif name == "revision" and self.rev is not None:
            self.page["revisions"].append(self.rev)
            self.rev = None
        elif name == "page" and self.page is not None:
            self._emit(self.page)
            self.page = None

    def _emit(self, page):
        if page.get("ns", "0").strip() != "0":
            self.stats.other_namespaces += 1
            return
        article_id = int(page["id"])
        title = page.get("title", "")
        records = []
        for raw in page["revisions"]:
            if "timestamp" not in raw:
                self.stats.skip("missing timestamp")
                continue
            contrib = raw.get("contributor") or {}
            try:
                uid = contrib.get("id")
                editor = classify_editor(
                    contrib.get("username"),
                    contrib.get("ip"),
                    self.botlist,
                    int(uid) if uid and uid.strip().isdigit() else None,
                )
                records.append(
                    RevisionRecord(
                        article_id=article_id,
                        article_title=title,
                        revision_id=int(raw["id"]),
                        timestamp=parse_timestamp(raw["timestamp"]),
                        editor=editor,
                        wikitext=raw.get("text", ""),
                    )
                )
            except (InvalidContributorError, ValueError, KeyError) as exc:
                self.stats.skip("bad contributor" if isinstance(exc, InvalidContributorError) else "bad field")
                log.warning("page %s: skipping revision %s: %s", article_id, raw.get("id"), exc)
        group = _finish_article(records, self.stats, self.skip_reverted)
        if group is not None:
            self.done.append((article_id, group))


def parse_dump(
    stream: IO[bytes],
    botlist: BotList | None = None,
    stats: IngestStats | None = None,
    skip_reverted: bool = False,
    chunk_size: int = 1 << 20,
) -> Iterator[tuple[int, list[RevisionRecord]]]:
    """Stream ``(article_id, revisions)`` groups out of a MediaWiki XML export."""
    stats = stats if stats is not None else IngestStats()
    handler = _DumpHandler(botlist, stats, skip_reverted)
    parser = expat.ParserCreate()
    parser.buffer_text = True
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.data
    while True:
        chunk = stream.read(chunk_size)
        try:
            parser.Parse(chunk, not chunk)
        except expat.ExpatError as exc:
            raise DumpParseError(
                f"malformed XML at byte {parser.ErrorByteIndex}: {expat.ErrorString(exc.code)}",
                offset=parser.ErrorByteIndex,
            ) from None
        yield from handler.done
        handler.done.clear()
        if not chunk:
            break


def _record_from_json(obj: dict, botlist: BotList | None) -> RevisionRecord:
    editor = obj["editor"]
    return RevisionRecord(
        article_id=int(obj["article_id"]),
        article_title=str(obj.get("title", "")),
        revision_id=int(obj["revision_id"]),
        timestamp=parse_timestamp(obj["timestamp"]),
        editor=classify_editor(editor.get("name"), editor.get("ip"), botlist),
        wikitext=str(obj.get("text", "")),
    )


def parse_jsonl(
    stream: IO[bytes] | IO[str],
    botlist: BotList | None = None,
    stats: IngestStats | None = None,
    skip_reverted: bool = False,
) -> Iterator[tuple[int, list[RevisionRecord]]]:
    """Read the JSONL fixture format; same downstream semantics as :func:`parse_dump`.

    Lines starting with ``#`` (output headers) and blank lines are ignored.
    Articles are emitted in order of first appearance.
    """
    stats = stats if stats is not None else IngestStats()
    groups: dict[int, list[RevisionRecord]] = {}
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rec = _record_from_json(json.loads(stripped), botlist)
        except (ValueError, KeyError, TypeError, AttributeError, RefhistError) as exc:
            raise JsonlParseError(f"line {lineno}: invalid revision record: {exc}", line=lineno) from None
        groups.setdefault(rec.article_id, []).append(rec)
    for article_id, revisions in groups.items():
        group = _finish_article(revisions, stats, skip_reverted)
        if group is not None:
            yield article_id, group


def record_to_json(rec: RevisionRecord) -> dict:
    if rec.editor.kind is EditorKind.NONREGISTERED:
        editor = {"ip": rec.editor.ip}
    else:
        editor = {"name": rec.editor.user_name}
    return {
        "article_id": rec.article_id,
        "title": rec.article_title,
        "revision_id": rec.revision_id,
        "timestamp": format_timestamp(rec.timestamp),
        "editor": editor,
        "text": rec.wikitext,
    }


def export_jsonl(articles: Iterable[tuple[int, Sequence[RevisionRecord]]], out: IO[str]) -> None:
    for _, revisions in articles:
        for rec in revisions:
            out.write(json.dumps(record_to_json(rec), ensure_ascii=False))
            out.write("\n")


def export_jsonl_string(articles: Iterable[tuple[int, Sequence[RevisionRecord]]]) -> str:
    buf = io.StringIO()
    export_jsonl(articles, buf)
    return buf.getvalue()


def read_corpus(
    path: str | Path,
    fmt: str,
    botlist: BotList | None = None,
    stats: IngestStats | None = None,
    skip_reverted: bool = False,
) -> Iterator[tuple[int, list[RevisionRecord]]]:
    """Open ``path`` and dispatch to the parser for ``fmt`` ("xml" or "jsonl")."""
    if fmt not in ("xml", "jsonl"):
        raise ValueError(f"unknown input format {fmt!r}")
    with open(path, "rb") as fh:
        if fmt == "xml":
            yield from parse_dump(fh, botlist, stats, skip_reverted)
        else:
            yield from parse_jsonl(fh, botlist, stats, skip_reverted)
