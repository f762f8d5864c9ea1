"""Per-article processing: attribution, extraction and chaining in one pass."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .history import HistoryBuilder, MatcherConfig, RefHistory, RevisionRefs
from .ingest import RevisionRecord
from .provenance import Attributor, TokenView
from .refs import extract_refs


@dataclass
class ArticleResult:
    article_id: int
    title: str
    revisions: list[RevisionRefs]
    histories: list[RefHistory]
    views: list[TokenView] | None = None
    assignment: dict[tuple[int, int], int] | None = None


def process_article(
    article_id: int,
    revisions: Sequence[RevisionRecord],
    cfg: MatcherConfig | None = None,
    keep_views: bool = False,
    stats: dict | None = None,
    track: bool = False,
) -> ArticleResult:
    att = Attributor()
    title = revisions[0].article_title if revisions else ""
    builder = HistoryBuilder(article_id, cfg, title, track)
    refs_per_rev = []
    views = [] if keep_views else None
    for rev in revisions:
        view = att.feed(rev.revision_id, rev.wikitext)
        occs = tuple(extract_refs(rev, view, stats))
        rr = RevisionRefs(rev.revision_id, rev.editor, rev.timestamp, occs)
        builder.feed(rr)
        refs_per_rev.append(rr)
        if views is not None:
            views.append(view)
    return ArticleResult(article_id, title, refs_per_rev, builder.finish(), views, builder.assignment)
