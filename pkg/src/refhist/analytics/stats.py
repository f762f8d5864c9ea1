"""Descriptive statistics over reference histories."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

from ..dids import DidLifecycle, period_key
from ..history import ACTIONS, ActionKind, RefHistory


@dataclass
class ActionTimeline:
    periods: list[str]
    counts: dict[ActionKind, list[int]]
    proportions: dict[ActionKind, list[float]]


def action_timeline(
    histories: Sequence[RefHistory],
    period: str = "year",
    select: Sequence[bool] | None = None,
    cutoff: datetime | None = None,
) -> ActionTimeline:
    """Per-period action counts; each action's proportions sum to 1 over periods.

    ``select`` restricts the tally to a subset of histories (e.g. DID-Rs).
    """
    tally: dict[ActionKind, Counter] = {a: Counter() for a in ACTIONS}
    for i, h in enumerate(histories):
        if select is not None and not select[i]:
            continue
        for s in h.snapshots:
            if cutoff is not None and s.z > cutoff:
                break
            tally[s.a][period_key(s.z, period)] += 1
    periods = sorted(set().union(*tally.values()))
    counts = {a: [tally[a][p] for p in periods] for a in ACTIONS}
    proportions = {}
    for a in ACTIONS:
        total = sum(counts[a])
        proportions[a] = [c / total if total else 0.0 for c in counts[a]]
    return ActionTimeline(periods, counts, proportions)


def is_deleted(history: RefHistory, cutoff: datetime | None = None) -> bool:
    """Last action up to the cutoff is a deletion."""
    last = None
    for s in history.snapshots:
        if cutoff is not None and s.z > cutoff:
            break
        last = s.a
    return last is ActionKind.DELETION


def deletion_survival(
    histories: Sequence[RefHistory],
    instants: Sequence[datetime],
    did_r: Sequence[bool] | None = None,
    cutoff: datetime | None = None,
) -> list[tuple[datetime, float, float]]:
    """``(instant, all, DID-R)`` fractions of histories created before the instant that end deleted."""
    if any(a > b for a, b in zip(instants, instants[1:])):
        raise ValueError("instants must be sorted")
    deleted = [is_deleted(h, cutoff) for h in histories]
    flags = did_r if did_r is not None else [False] * len(histories)
    out = []
    for tau in instants:
        n_all = d_all = n_did = d_did = 0
        for h, dead, dr in zip(histories, deleted, flags):
            if h.created >= tau:
                continue
            n_all += 1
            d_all += dead
            if dr:
                n_did += 1
                d_did += dead
        out.append((tau, d_all / n_all if n_all else 0.0, d_did / n_did if n_did else 0.0))
    return out


@dataclass(frozen=True)
class ArticleSummary:
    article_id: int
    n_refs: int
    n_did_r: int

    @property
    def category(self) -> str:
        if self.n_refs == 0:
            return "no_refs"
        if self.n_did_r == 0:
            return "no_did_r"
        if self.n_did_r * 2 > self.n_refs:
            return "majority_did_r"
        return "some_did_r"


def article_summaries(
    by_article: dict[int, tuple[Sequence[RefHistory], Sequence[DidLifecycle | None]]],
    cutoff: datetime | None = None,
) -> list[ArticleSummary]:
    """Live references and live DID-Rs per article at the cutoff."""
    out = []
    for aid in sorted(by_article):
        hists, lcs = by_article[aid]
        n = d = 0
        for h, lc in zip(hists, lcs):
            if lc is None or is_deleted(h, cutoff):
                continue
            n += 1
            d += lc.is_did_r
        out.append(ArticleSummary(aid, n, d))
    return out


def category_counts(summaries: Sequence[ArticleSummary]) -> Counter:
    return Counter(s.category for s in summaries)


def count_distribution(values: Sequence[int]) -> list[tuple[int, int]]:
    """``(value, number of articles)`` pairs, ascending, zeros dropped."""
    c = Counter(v for v in values if v > 0)
    return sorted(c.items())


def did_kind_counts(lifecycles: Sequence[DidLifecycle | None]) -> Counter:
    c: Counter = Counter()
    for lc in lifecycles:
        if lc is None:
            continue
        for a in lc.annotations:
            c[a.kind.value] += 1
    return c
