"""Inline citation extraction from attributed revisions."""

from __future__ import annotations

import bisect
import logging
import re
import struct
from dataclasses import dataclass
from functools import lru_cache
from datetime import datetime
from typing import Sequence

from .ingest import EditorIdentity, RevisionRecord
from .provenance import TokenView

log = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Opening tag that is not self-closing; the closing tag search is separate.
_OPEN_RE = re.compile(r"<ref\b([^>]*?)(/?)\s*>", re.IGNORECASE)
_CLOSE_RE = re.compile(r"</ref\s*>", re.IGNORECASE)


def hash_ref(token_ids: Sequence[int]) -> int:
    """FNV-1a (64 bit) over each ID serialised as 8 little-endian bytes."""
    if not token_ids:
        raise ValueError("hash_ref needs a non-empty token ID sequence")
    return _fnv1a(tuple(token_ids))


@lru_cache(maxsize=1 << 16)
def _fnv1a(token_ids: tuple[int, ...]) -> int:
    h = FNV_OFFSET
    for byte in struct.pack(f"<{len(token_ids)}Q", *token_ids):
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class RefOccurrence:
    t: tuple[int, ...]
    h: int
    e: EditorIdentity
    z: datetime
    raw_span: tuple[int, int]
    revision_id: int = 0
    index: int = 0
    text: str = ""


def find_ref_spans(wikitext: str, stats: dict | None = None) -> list[tuple[int, int]]:
    """Character ranges of the inner content of paired ``<ref>`` tags.

    Void tags are skipped, an unclosed tag is abandoned (counted under
    ``stats["unclosed"]``) and nested tags are not recognised: content runs to
    the first closing tag.
    """
    spans = []
    pos = 0
    n = len(wikitext)
    while pos < n:
        m = _OPEN_RE.search(wikitext, pos)
        if m is None:
            break
        if m.group(2):
            pos = m.end()
            continue
        close = _CLOSE_RE.search(wikitext, m.end())
        if close is None:
            if stats is not None:
                stats["unclosed"] = stats.get("unclosed", 0) + 1
            log.debug("unclosed <ref> at %d abandoned", m.start())
            pos = m.end()
            continue
        spans.append((m.end(), close.start()))
        pos = close.end()
    return spans


def extract_refs(
    revision: RevisionRecord, view: TokenView, stats: dict | None = None
) -> list[RefOccurrence]:
    if view.revision_id != revision.revision_id:
        raise ValueError("token view does not belong to this revision")
    text = revision.wikitext
    out = []
    for start, end in find_ref_spans(text, stats):
        lo = bisect.bisect_left(view.starts, start)
        hi = bisect.bisect_right(view.ends, end, lo=lo)
        t = view.tokens[lo:hi]
        if not t:
            continue
        out.append(
            RefOccurrence(
                t=t,
                h=hash_ref(t),
                e=revision.editor,
                z=revision.timestamp,
                raw_span=(start, end),
                revision_id=revision.revision_id,
                index=len(out),
                text=text[start:end],
            )
        )
    return out
