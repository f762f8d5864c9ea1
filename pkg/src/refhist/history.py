"""Chaining reference occurrences into per-reference edit histories.

Revisions are processed in order.  At every transition ``R_j -> R_j+1`` each
history that is alive in ``R_j`` or waiting after a deletion is resolved
against the occurrences of ``R_j+1``:

A. an occurrence with the history's current hash continues it silently;
B. an occurrence with any hash the history already carried is a modification
   (alive) or a hash-identical reinsertion (deleted);
C. otherwise occurrences whose hash was never seen before ``R_j+1`` are
   candidates.  A candidate links when its token-ID Jaccard similarity with
   the history's last tokens exceeds the threshold, or, failing that, when it
   contains every one of those tokens (subset rule).  Conflicts are settled
   greedily along a strict total order of links (see :func:`link_key`);
D. an alive history left without a link records a deletion;
E. occurrences nobody claimed start new histories.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Sequence

from .errors import JsonlParseError
from .ingest import EditorIdentity, EditorKind, format_timestamp, parse_timestamp
from .refs import RefOccurrence


class ActionKind(str, enum.Enum):
    CREATION = "creation"
    MODIFICATION = "modification"
    DELETION = "deletion"
    REINSERTION = "reinsertion"
    UNKNOWN = "unknown"


ACTIONS = (
    ActionKind.CREATION,
    ActionKind.MODIFICATION,
    ActionKind.DELETION,
    ActionKind.REINSERTION,
)


@dataclass(frozen=True)
class RefSnapshot:
    a: ActionKind
    t: tuple[int, ...]
    r: int
    h: int
    e: EditorIdentity
    z: datetime
    text: str = ""


@dataclass
class RefHistory:
    article_id: int
    snapshots: list[RefSnapshot] = field(default_factory=list)
    history_id: int = 0
    title: str = ""

    @property
    def actions(self) -> list[ActionKind]:
        return [s.a for s in self.snapshots]

    @property
    def created(self) -> datetime:
        return self.snapshots[0].z


@dataclass(frozen=True)
class MatcherConfig:
    jaccard_threshold: float = 0.2
    subset_rule_enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.jaccard_threshold <= 1.0:
            raise ValueError("jaccard_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class RevisionRefs:
    """The references found in one revision, in document order."""

    revision_id: int
    editor: EditorIdentity
    timestamp: datetime
    occurrences: tuple[RefOccurrence, ...] = ()


def jaccard(x, y) -> float:
    x = x if isinstance(x, (set, frozenset)) else set(x)
    y = y if isinstance(y, (set, frozenset)) else set(y)
    if not x and not y:
        return 0.0
    inter = len(x & y)
    return inter / (len(x) + len(y) - inter)


def link_score(old_tokens: Sequence[int], cand_tokens: Sequence[int], cfg: MatcherConfig):
    """``(phase, similarity)`` of a candidate link, or ``None`` when it is not allowed.

    Phase 0 is a Jaccard link above the threshold, phase 1 a subset-rule link.
    """
    old, new = set(old_tokens), set(cand_tokens)
    j = jaccard(old, new)
    if j > cfg.jaccard_threshold:
        return 0, j
    if cfg.subset_rule_enabled and old and old <= new:
        return 1, j
    return None


def link_key(phase: int, sim: float, seeker_kind: int, seeker_rank: int, cand: RefOccurrence) -> tuple:
    """Total order on candidate links; smaller is preferred.

    Jaccard links before subset links, then higher similarity, alive histories
    before deleted ones, then the candidate with the oldest content (smallest
    minimum token ID), earliest document position, and finally seeker rank.
    """
    return (phase, -sim, seeker_kind, min(cand.t), cand.index, seeker_rank)


class _Chain:
    __slots__ = ("order", "snapshots", "current", "last_tokens", "hashes")

    def __init__(self, order: int):
        self.order = order
        self.snapshots: list[RefSnapshot] = []
        self.current: RefOccurrence | None = None
        self.last_tokens: tuple[int, ...] = ()
        self.hashes: set[int] = set()

    def take(self, action: ActionKind, occ: RefOccurrence, rev: RevisionRefs) -> None:
        self.snapshots.append(RefSnapshot(action, occ.t, rev.revision_id, occ.h, rev.editor, rev.timestamp, occ.text))
        self.current = occ
        self.last_tokens = occ.t
        self.hashes.add(occ.h)

    def rank(self) -> int:
        return self.current.index if self.current is not None else self.order


class HistoryBuilder:
    """Streaming form of :func:`build_histories`; feed revisions in order."""

    def __init__(self, article_id: int, cfg: MatcherConfig | None = None, title: str = "", track: bool = False):
        self.article_id = article_id
        # (revision_id, occurrence index) -> history position, when tracking.
        self.assignment: dict[tuple[int, int], int] | None = {} if track else None
        self.title = title
        self.cfg = cfg or MatcherConfig()
        self.chains: list[_Chain] = []
        self.seen: set[int] = set()
        self.owners: dict[int, list[_Chain]] = {}

    def feed(self, rev: RevisionRefs) -> None:
        occs = rev.occurrences
        taken = [False] * len(occs)
        by_hash: dict[int, list[int]] = {}
        for i, o in enumerate(occs):
            by_hash.setdefault(o.h, []).append(i)
        alive = [c for c in self.chains if c.current is not None]
        waiting = [c for c in self.chains if c.current is None]
        alive.sort(key=lambda c: c.current.index)
        resolved: set[int] = set()

        # A: unchanged references.
        for c in alive:
            for i in by_hash.get(c.current.h, ()):
                if not taken[i]:
                    taken[i] = True
                    c.current = occs[i]
                    resolved.add(c.order)
                    break

        # B: a hash this history already carried reappears.
        edges = []
        for i, o in enumerate(occs):
            if taken[i]:
                continue
            for c in self.owners.get(o.h, ()):
                if c.order not in resolved:
                    kind = 0 if c.current is not None else 1
                    edges.append(((kind, c.rank(), o.index), c, i))
        edges.sort(key=lambda e: e[0])
        for key, c, i in edges:
            if taken[i] or c.order in resolved:
                continue
            taken[i] = True
            resolved.add(c.order)
            action = ActionKind.MODIFICATION if key[0] == 0 else ActionKind.REINSERTION
            self._take(c, action, occs[i], rev)

        # C: candidates are references whose hash is new in this revision.
        cands = [i for i, o in enumerate(occs) if not taken[i] and o.h not in self.seen]
        seekers = [c for c in alive + waiting if c.order not in resolved]
        if cands and seekers:
            edges = []
            for c in seekers:
                kind = 0 if c.current is not None else 1
                rank = c.rank()
                for i in cands:
                    score = link_score(c.last_tokens, occs[i].t, self.cfg)
                    if score is not None:
                        edges.append((link_key(score[0], score[1], kind, rank, occs[i]), c, i))
            edges.sort(key=lambda e: e[0])
            for key, c, i in edges:
                if taken[i] or c.order in resolved:
                    continue
                taken[i] = True
                resolved.add(c.order)
                action = ActionKind.MODIFICATION if key[2] == 0 else ActionKind.REINSERTION
                self._take(c, action, occs[i], rev)

        # D: alive references that found no successor were deleted here.
        for c in alive:
            if c.order not in resolved:
                c.snapshots.append(
                    RefSnapshot(ActionKind.DELETION, (), rev.revision_id, c.current.h, rev.editor, rev.timestamp)
                )
                c.current = None

        # E: everything else is new.
        for i, o in enumerate(occs):
            if not taken[i]:
                c = _Chain(len(self.chains))
                self.chains.append(c)
                self._take(c, ActionKind.CREATION, o, rev)

        if self.assignment is not None:
            for c in self.chains:
                if c.current is not None:
                    self.assignment[(rev.revision_id, c.current.index)] = c.order
        self.seen.update(by_hash)

    def _take(self, c: _Chain, action: ActionKind, occ: RefOccurrence, rev: RevisionRefs) -> None:
        if occ.h not in c.hashes:
            self.owners.setdefault(occ.h, []).append(c)
        c.take(action, occ, rev)

    def finish(self) -> list[RefHistory]:
        return [
            RefHistory(self.article_id, list(c.snapshots), history_id=c.order, title=self.title)
            for c in self.chains
        ]


def build_histories(
    article_id: int,
    revisions: Iterable[RevisionRefs],
    cfg: MatcherConfig | None = None,
    title: str = "",
) -> list[RefHistory]:
    builder = HistoryBuilder(article_id, cfg, title)
    for rev in revisions:
        builder.feed(rev)
    return builder.finish()


# -- serialisation -----------------------------------------------------------

def editor_to_json(e: EditorIdentity) -> dict:
    if e.kind is EditorKind.NONREGISTERED:
        return {"ip": e.ip, "kind": e.kind.value}
    out = {"name": e.user_name, "kind": e.kind.value}
    if e.user_id is not None:
        out["id"] = e.user_id
    return out


def editor_from_json(obj: dict) -> EditorIdentity:
    kind = EditorKind(obj.get("kind") or ("nonregistered" if "ip" in obj else "registered"))
    if kind is EditorKind.NONREGISTERED:
        return EditorIdentity(kind, ip=obj["ip"])
    return EditorIdentity(kind, user_id=obj.get("id"), user_name=obj["name"])


def history_to_json(h: RefHistory, with_tokens: bool = False) -> dict:
    snaps = []
    for s in h.snapshots:
        item = {
            "action": s.a.value,
            "revision": s.r,
            "hash": f"{s.h:016x}",
            "editor": editor_to_json(s.e),
            "timestamp": format_timestamp(s.z),
            "n_tokens": len(s.t),
            "text": s.text,
        }
        if with_tokens:
            item["tokens"] = list(s.t)
        snaps.append(item)
    return {"article_id": h.article_id, "title": h.title, "history_id": h.history_id, "snapshots": snaps}


def history_from_json(obj: dict) -> RefHistory:
    snaps = []
    for s in obj["snapshots"]:
        snaps.append(
            RefSnapshot(
                a=ActionKind(s["action"]),
                t=tuple(s.get("tokens", ())),
                r=int(s["revision"]),
                h=int(s["hash"], 16),
                e=editor_from_json(s["editor"]),
                z=parse_timestamp(s["timestamp"]),
                text=s.get("text", ""),
            )
        )
    return RefHistory(int(obj["article_id"]), snaps, int(obj.get("history_id", 0)), obj.get("title", ""))


def dumps_history(h: RefHistory, with_tokens: bool = False) -> str:
    return json.dumps(history_to_json(h, with_tokens), ensure_ascii=False)


def read_histories(lines: Iterable[str]) -> dict[int, list[RefHistory]]:
    """Histories grouped by article in file order; ``#`` lines are skipped."""
    out: dict[int, list[RefHistory]] = {}
    for n, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            h = history_from_json(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise JsonlParseError(f"history line {n}: {exc}", n) from None
        out.setdefault(h.article_id, []).append(h)
    return out
