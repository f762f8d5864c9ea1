"""Document identifiers in reference histories.

Identifiers (DOI, ISBN, PMID, PMCID, ISSN, arXiv) are pulled from the raw
wikitext of every reference version.  A history is DID-born when its creation
already carries one, DID-lagged when one shows up later (before the cutoff),
and has no DID otherwise.

The module also provides the identifier-only chaining baseline, in which two
reference occurrences are the same reference exactly when they share an
identifier, and the time series built on top of both.
"""

from __future__ import annotations

import bisect
import csv
import enum
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Sequence

from .history import ActionKind, RefHistory, RefSnapshot, RevisionRefs
from .refs import RefOccurrence

log = logging.getLogger(__name__)


class DidKind(str, enum.Enum):
    DOI = "doi"
    ISBN = "isbn"
    PMID = "pmid"
    PMCID = "pmcid"
    ISSN = "issn"
    ARXIV = "arxiv"


Did = tuple  # (DidKind, str)


@dataclass(frozen=True)
class DidAnnotation:
    kind: DidKind
    value: str
    snapshot_index: int


class LifecycleClass(str, enum.Enum):
    DBORN = "dborn"
    DLAG = "dlag"
    NODID = "nodid"


@dataclass(frozen=True)
class DidLifecycle:
    cls: LifecycleClass
    lag_days: int | None = None
    annotations: tuple[DidAnnotation, ...] = ()

    @property
    def is_did_r(self) -> bool:
        return self.cls is not LifecycleClass.NODID


_DOI_RE = re.compile(r"10\.\d{4,9}/[^\s|}<\"']+")
_ISBN_RE = re.compile(
    r"\bisbn(?:[- ]?1[03])?\s*[:=]?\s*(97[89](?:[ -]?\d){10}|\d(?:[ -]?\d){8}[ -]?[\dXx])(?![\dXx])",
    re.IGNORECASE,
)
_PMID_RE = re.compile(r"\bpmid\b\s*[:=]?\s*(\d+)", re.IGNORECASE)
_PMC_RE = re.compile(r"\bpmc(?:id)?\b\s*[:=]?\s*(?:pmc)?(\d+)|\bpmc(\d+)", re.IGNORECASE)
_ISSN_RE = re.compile(r"\bissn\b\s*[:=]?\s*(\d{4})[ -]?(\d{3}[\dXx])\b", re.IGNORECASE)
_ARXIV_RE = re.compile(
    r"\barxiv\b\s*[:=]?\s*(?:(\d{4}\.\d{4,5})(?:v\d+)?|([a-z][a-z\-]*(?:\.[a-z]{2})?/\d{7})(?:v\d+)?)",
    re.IGNORECASE,
)
_TRAILING = ".,;:"


def _clean_doi(raw: str) -> str:
    doi = raw.lower()
    while doi:
        last = doi[-1]
        if last in _TRAILING:
            doi = doi[:-1]
        elif last == ")" and doi.count("(") < doi.count(")"):
            doi = doi[:-1]
        elif last == "]" and doi.count("[") < doi.count("]"):
            doi = doi[:-1]
        else:
            break
    return doi


def isbn_checksum_ok(digits: str) -> bool:
    if len(digits) == 10:
        total = sum((10 - i) * (10 if c in "Xx" else int(c)) for i, c in enumerate(digits))
        return total % 11 == 0
    if len(digits) == 13 and digits.isdigit():
        total = sum(int(c) * (1 if i % 2 == 0 else 3) for i, c in enumerate(digits))
        return total % 10 == 0
    return False


def issn_checksum_ok(value: str) -> bool:
    digits = value.replace("-", "")
    total = sum((8 - i) * int(c) for i, c in enumerate(digits[:7]))
    check = (11 - total % 11) % 11
    return digits[7] == ("X" if check == 10 else str(check))


def extract_dids(raw_ref_text: str) -> list[Did]:
    """Distinct ``(kind, value)`` identifier pairs of one reference, in document order."""
    found: list[tuple[int, DidKind, str]] = []
    for m in _DOI_RE.finditer(raw_ref_text):
        doi = _clean_doi(m.group(0))
        if "/" in doi and not doi.endswith("/"):
            found.append((m.start(), DidKind.DOI, doi))
    for m in _ISBN_RE.finditer(raw_ref_text):
        value = re.sub(r"[ -]", "", m.group(1)).upper()
        if not isbn_checksum_ok(value):
            log.warning("ISBN checksum mismatch: %s", value)
        found.append((m.start(1), DidKind.ISBN, value))
    for m in _PMID_RE.finditer(raw_ref_text):
        found.append((m.start(1), DidKind.PMID, m.group(1)))
    for m in _PMC_RE.finditer(raw_ref_text):
        group = 1 if m.group(1) is not None else 2
        found.append((m.start(group), DidKind.PMCID, m.group(group)))
    for m in _ISSN_RE.finditer(raw_ref_text):
        value = f"{m.group(1)}-{m.group(2).upper()}"
        if not issn_checksum_ok(value):
            log.warning("ISSN checksum mismatch: %s", value)
        found.append((m.start(1), DidKind.ISSN, value))
    for m in _ARXIV_RE.finditer(raw_ref_text):
        group = 1 if m.group(1) is not None else 2
        found.append((m.start(group), DidKind.ARXIV, m.group(group)))
    found.sort(key=lambda x: x[0])
    out: list[Did] = []
    seen = set()
    for _, kind, value in found:
        if (kind, value) not in seen:
            seen.add((kind, value))
            out.append((kind, value))
    return out


_RENDER_CUE = {
    DidKind.DOI: "doi:",
    DidKind.ISBN: "isbn",
    DidKind.PMID: "pmid",
    DidKind.PMCID: "pmc",
    DidKind.ISSN: "issn",
    DidKind.ARXIV: "arxiv:",
}


def render_dids(dids: Iterable[Did]) -> str:
    """Canonical wikitext-like rendering, re-extractable by :func:`extract_dids`."""
    return " | ".join(f"{_RENDER_CUE[k]} {v}" for k, v in dids)


# -- lifecycle ---------------------------------------------------------------

def _visible(history: RefHistory, cutoff: datetime | None) -> list[tuple[int, RefSnapshot]]:
    return [
        (i, s) for i, s in enumerate(history.snapshots)
        if cutoff is None or s.z <= cutoff
    ]


def annotate_history(
    history: RefHistory, texts: Sequence[str] | None = None, cutoff: datetime | None = None
) -> list[DidAnnotation]:
    """Every identifier seen in the history, tagged with its first snapshot index."""
    first: dict[Did, int] = {}
    for i, s in _visible(history, cutoff):
        if s.a is ActionKind.DELETION:
            continue
        text = texts[i] if texts is not None else s.text
        for did in extract_dids(text):
            first.setdefault(did, i)
    return [DidAnnotation(k, v, i) for (k, v), i in first.items()]


def classify_lifecycle(
    history: RefHistory, texts: Sequence[str] | None = None, cutoff: datetime | None = None
) -> DidLifecycle | None:
    """Lifecycle class as of ``cutoff``; ``None`` if the history did not exist yet."""
    if not history.snapshots or (cutoff is not None and history.snapshots[0].z > cutoff):
        return None
    ann = annotate_history(history, texts, cutoff)
    if not ann:
        return DidLifecycle(LifecycleClass.NODID)
    first = min(a.snapshot_index for a in ann)
    if first == 0:
        return DidLifecycle(LifecycleClass.DBORN, None, tuple(ann))
    delta = history.snapshots[first].z - history.snapshots[0].z
    return DidLifecycle(LifecycleClass.DLAG, int(delta.total_seconds() // 86400), tuple(ann))


def first_did_time(history: RefHistory, lifecycle: DidLifecycle) -> datetime | None:
    if not lifecycle.annotations:
        return None
    return history.snapshots[min(a.snapshot_index for a in lifecycle.annotations)].z


# -- identifier-only chaining ------------------------------------------------

class _DidChain:
    __slots__ = ("order", "snapshots", "current", "dids")

    def __init__(self, order: int):
        self.order = order
        self.snapshots: list[RefSnapshot] = []
        self.current: RefOccurrence | None = None
        self.dids: frozenset = frozenset()


def did_only_histories(article_id: int, revisions: Iterable[RevisionRefs], title: str = "") -> list[RefHistory]:
    """Chain occurrences that share at least one identifier; DID-less occurrences are ignored.

    An alive chain prefers an occurrence with its own hash, then the earliest
    in document order; chains are served alive first, then by position.
    """
    chains: list[_DidChain] = []
    for rev in revisions:
        occs = [(o, frozenset(extract_dids(o.text))) for o in rev.occurrences]
        occs = [(o, d) for o, d in occs if d]
        by_did: dict[Did, list[int]] = defaultdict(list)
        for i, (_, dids) in enumerate(occs):
            for d in dids:
                by_did[d].append(i)
        edges = []
        for c in chains:
            alive = c.current is not None
            rank = c.current.index if alive else c.order
            for i in sorted({i for d in c.dids for i in by_did.get(d, ())}):
                o = occs[i][0]
                same = 0 if alive and o.h == c.current.h else 1
                edges.append(((0 if alive else 1, rank, same, o.index), c, i))
        edges.sort(key=lambda e: e[0])
        taken = [False] * len(occs)
        linked: set[int] = set()
        for key, c, i in edges:
            if taken[i] or c.order in linked:
                continue
            taken[i] = True
            linked.add(c.order)
            o, dids = occs[i]
            if c.current is None:
                action = ActionKind.REINSERTION
            elif o.h != c.current.h:
                action = ActionKind.MODIFICATION
            else:
                action = None
            if action is not None:
                c.snapshots.append(RefSnapshot(action, o.t, rev.revision_id, o.h, rev.editor, rev.timestamp, o.text))
            c.current = o
            c.dids = dids
        for c in chains:
            if c.current is not None and c.order not in linked:
                c.snapshots.append(RefSnapshot(ActionKind.DELETION, (), rev.revision_id, c.current.h, rev.editor, rev.timestamp))
                c.current = None
        for i, (o, dids) in enumerate(occs):
            if not taken[i]:
                c = _DidChain(len(chains))
                c.snapshots.append(RefSnapshot(ActionKind.CREATION, o.t, rev.revision_id, o.h, rev.editor, rev.timestamp, o.text))
                c.current = o
                c.dids = dids
                chains.append(c)
    return [RefHistory(article_id, c.snapshots, c.order, title) for c in chains]


def revisions_from_histories(histories: Sequence[RefHistory]) -> list[RevisionRefs]:
    """Rebuild per-revision reference states of one article from its histories.

    Only revisions where some history records an action are produced; between
    them every reference keeps its content.  Occurrence ``index`` is the
    history's position, which stands in for document order.
    """
    events: dict[int, tuple[datetime, object]] = {}
    per_rev: dict[int, dict[int, RefSnapshot]] = defaultdict(dict)
    for hi, h in enumerate(histories):
        for s in h.snapshots:
            events.setdefault(s.r, (s.z, s.e))
            per_rev[s.r][hi] = s
    state: dict[int, RefSnapshot] = {}
    out = []
    for r in sorted(events, key=lambda r: (events[r][0], r)):
        for hi, s in per_rev[r].items():
            if s.a is ActionKind.DELETION:
                state.pop(hi, None)
            else:
                state[hi] = s
        z, e = events[r]
        occs = tuple(
            RefOccurrence(t=s.t, h=s.h, e=e, z=z, raw_span=(0, 0), revision_id=r, index=hi, text=s.text)
            for hi, s in sorted(state.items())
        )
        out.append(RevisionRefs(r, e, z, occs))
    return out


def map_did_only_to_full(
    did_histories: Sequence[RefHistory], full_histories: Sequence[RefHistory]
) -> list[int | None]:
    """For each identifier-only history, the full history holding its first occurrence."""
    marks = []
    for h in full_histories:
        marks.append([((s.z, s.r), None if s.a is ActionKind.DELETION else s.h) for s in h.snapshots])
    out = []
    for dh in did_histories:
        first = dh.snapshots[0]
        at = (first.z, first.r)
        match = None
        for hi, seq in enumerate(marks):
            state = None
            for when, h in seq:
                if when > at:
                    break
                state = h
            if state == first.h:
                match = hi
                break
        out.append(match)
    return out


# -- time series ---------------------------------------------------------------

def period_key(z: datetime, granularity: str) -> str:
    if granularity == "month":
        return f"{z.year:04d}-{z.month:02d}"
    if granularity == "year":
        return f"{z.year:04d}"
    raise ValueError(f"granularity must be 'month' or 'year', got {granularity!r}")


def period_range(start: datetime, end: datetime, granularity: str) -> list[str]:
    keys = []
    y, m = start.year, start.month
    while (y, m) <= (end.year, end.month):
        key = f"{y:04d}-{m:02d}" if granularity == "month" else f"{y:04d}"
        if not keys or keys[-1] != key:
            keys.append(key)
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return keys


def period_end(key: str) -> datetime:
    """First instant after the period ``key``."""
    if len(key) == 4:
        return datetime(int(key) + 1, 1, 1, tzinfo=timezone.utc)
    y, m = int(key[:4]), int(key[5:7])
    return datetime(y + (m == 12), 1 if m == 12 else m + 1, 1, tzinfo=timezone.utc)


def did_additions(histories: Sequence[RefHistory], granularity: str = "month", cutoff: datetime | None = None) -> Counter:
    """Modifications that turn an identifier-less reference into one with an identifier."""
    counts: Counter = Counter()
    for h in histories:
        prev_has = None
        for s in h.snapshots:
            if cutoff is not None and s.z > cutoff:
                break
            if s.a is ActionKind.DELETION:
                continue
            has = bool(extract_dids(s.text))
            if s.a is ActionKind.MODIFICATION and prev_has is False and has:
                counts[period_key(s.z, granularity)] += 1
            prev_has = has
    return counts


def lag_histogram(
    histories: Sequence[RefHistory], lifecycles: Sequence[DidLifecycle | None]
) -> dict[int, Counter]:
    """Creation year -> Counter of lag days, over DID-lagged histories."""
    out: dict[int, Counter] = defaultdict(Counter)
    for h, lc in zip(histories, lifecycles):
        if lc is not None and lc.cls is LifecycleClass.DLAG:
            out[h.created.year][lc.lag_days] += 1
    return dict(out)


def did_r_share(
    full: Sequence[RefHistory],
    lifecycles: Sequence[DidLifecycle | None],
    did_only_starts: Sequence[tuple[datetime, int | None]],
    instants: Sequence[datetime],
) -> list[tuple[datetime, float, float]]:
    """``(instant, full %, identifier-only %)`` of DID-Rs among references created before each instant.

    ``did_only_starts`` holds, per identifier-only history, its creation time
    and the full history it maps to.  Both shares use the full method's count
    of references created before the instant as denominator.
    """
    created = sorted(h.created for h in full)
    did_r_created = sorted(h.created for h, lc in zip(full, lifecycles) if lc is not None and lc.is_did_r)
    first_seen: dict[int, datetime] = {}
    for z, hi in did_only_starts:
        if hi is None:
            continue
        if hi not in first_seen or z < first_seen[hi]:
            first_seen[hi] = z
    did_only_sorted = sorted(first_seen.values())
    out = []
    for tau in instants:
        n = bisect.bisect_right(created, tau)
        if n == 0:
            out.append((tau, 0.0, 0.0))
            continue
        a = bisect.bisect_right(did_r_created, tau)
        b = bisect.bisect_right(did_only_sorted, tau)
        out.append((tau, 100.0 * a / n, 100.0 * b / n))
    return out


def remaining_omitted(
    histories: Sequence[RefHistory],
    lifecycles: Sequence[DidLifecycle | None],
    months: Sequence[str],
) -> list[tuple[str, int, int, float]]:
    """Per month: DID-lagged references alive during the month still lacking an identifier at its end.

    Returns ``(month, still_missing, dlag_existing, percent)``.
    """
    items = []
    for h, lc in zip(histories, lifecycles):
        if lc is not None and lc.cls is LifecycleClass.DLAG:
            items.append((h.created, first_did_time(h, lc)))
    out = []
    for key in months:
        end = period_end(key)
        existing = [(c, f) for c, f in items if c < end]
        missing = sum(1 for _, f in existing if f >= end)
        pct = 100.0 * missing / len(existing) if existing else 0.0
        out.append((key, missing, len(existing), pct))
    return out


def export_did_csv(
    article_id: int,
    histories: Sequence[RefHistory],
    lifecycles: Sequence[DidLifecycle | None],
    out: IO[str],
    header: bool = True,
) -> None:
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(["article_id", "history_id", "kind", "value", "first_snapshot", "lifecycle", "lag_days"])
    for h, lc in zip(histories, lifecycles):
        if lc is None:
            continue
        lag = "" if lc.lag_days is None else lc.lag_days
        if not lc.annotations:
            writer.writerow([article_id, h.history_id, "", "", "", lc.cls.value, lag])
        for a in lc.annotations:
            writer.writerow([article_id, h.history_id, a.kind.value, a.value, a.snapshot_index, lc.cls.value, lag])
