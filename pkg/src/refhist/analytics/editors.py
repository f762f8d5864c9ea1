"""Per-editor action profiles and ranking comparison."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from ..history import ACTIONS, ActionKind, RefHistory
from ..ingest import EditorKind

RANK_LIMIT = 10_000


@dataclass(frozen=True)
class EditorProfile:
    key: str
    kind: EditorKind
    counts: tuple[int, int, int, int]
    articles_touched: int

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def features(self) -> tuple[float, float, float, float]:
        total = self.total
        return tuple(c / total for c in self.counts)

    def count(self, action: ActionKind) -> int:
        return self.counts[ACTIONS.index(action)]


def build_profiles(histories: Iterable[RefHistory]) -> list[EditorProfile]:
    """One profile per editor key, sorted by key."""
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0, 0])
    kinds: dict[str, EditorKind] = {}
    articles: dict[str, set] = defaultdict(set)
    slot = {a: i for i, a in enumerate(ACTIONS)}
    for h in histories:
        for s in h.snapshots:
            if s.a not in slot:
                continue
            key = s.e.key
            counts[key][slot[s.a]] += 1
            kinds.setdefault(key, s.e.kind)
            articles[key].add(h.article_id)
    return [
        EditorProfile(k, kinds[k], tuple(counts[k]), len(articles[k]))
        for k in sorted(counts)
    ]


def feature_matrix(profiles: Sequence[EditorProfile]) -> np.ndarray:
    return np.array([p.features for p in profiles], dtype=float).reshape(len(profiles), 4)


def ecdf(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Support points and ECDF heights; F(x) = heights[i] for xs[i] <= x < xs[i+1]."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return v, v
    xs, idx = np.unique(v, return_index=True)
    ends = np.append(idx[1:], v.size)
    return xs, ends / v.size


def ecdf_at(xs: np.ndarray, heights: np.ndarray, x: float) -> float:
    i = np.searchsorted(xs, x, side="right")
    return 0.0 if i == 0 else float(heights[i - 1])


def profile_ecdf(
    profiles: Sequence[EditorProfile],
    kinds: Iterable[EditorKind] | None = None,
    action: ActionKind | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """ECDF of per-editor action counts (total, or one action) for the chosen editor kinds."""
    wanted = set(kinds) if kinds is not None else None
    vals = [
        p.total if action is None else p.count(action)
        for p in profiles
        if wanted is None or p.kind in wanted
    ]
    return ecdf(vals)


def kind_totals(profiles: Sequence[EditorProfile]) -> dict[EditorKind, dict[str, int]]:
    """Action counts per editor kind plus ``editors`` and ``actions`` totals."""
    out: dict[EditorKind, dict[str, int]] = {}
    for p in profiles:
        row = out.setdefault(p.kind, {a.value: 0 for a in ACTIONS} | {"editors": 0, "actions": 0})
        for a, c in zip(ACTIONS, p.counts):
            row[a.value] += c
        row["editors"] += 1
        row["actions"] += p.total
    return out


def kind_shares(profiles: Sequence[EditorProfile]) -> dict[EditorKind, dict[str, float]]:
    """Percentage of each action within every editor kind."""
    out = {}
    for kind, row in kind_totals(profiles).items():
        total = row["actions"]
        out[kind] = {a.value: 100.0 * row[a.value] / total if total else 0.0 for a in ACTIONS}
    return out


def rank_editors(
    profiles: Sequence[EditorProfile],
    action: ActionKind | None = None,
    kinds: Iterable[EditorKind] = (EditorKind.REGISTERED,),
    limit: int = RANK_LIMIT,
) -> list[tuple[int, str, int]]:
    """``(rank, editor, score)`` by descending count, ties by key; zero scores omitted."""
    wanted = set(kinds)
    scored = [
        (p.total if action is None else p.count(action), p.key)
        for p in profiles
        if p.kind in wanted
    ]
    scored = [s for s in scored if s[0] > 0]
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [(i + 1, key, score) for i, (score, key) in enumerate(scored[:limit])]


def write_ranking(ranking: Sequence[tuple[int, str, int]], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rank", "editor", "score"])
    w.writerows(ranking)


def read_ranking(lines: Iterable[str], limit: int = RANK_LIMIT) -> list[str]:
    """Editor names from a ranking file: CSV with an ``editor`` column, or one name per line."""
    rows = [ln.rstrip("\n") for ln in lines if ln.strip() and not ln.startswith("#")]
    if rows and rows[0].split(",")[:3] == ["rank", "editor", "score"]:
        names = [r["editor"] for r in csv.DictReader(rows)]
    else:
        names = [r.strip() for r in rows]
    seen, out = set(), []
    for n in names:
        if n not in seen:
            seen.add(n)
            out.append(n)
    return out[:limit]


def rbo(s: Sequence, t: Sequence, p: float) -> float:
    """Extrapolated rank-biased overlap evaluated to depth min(|s|, |t|)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    if not s or not t:
        raise ValueError("rankings must be non-empty")
    if len(set(s)) != len(s) or len(set(t)) != len(t):
        raise ValueError("rankings must not contain duplicates")
    depth = min(len(s), len(t))
    seen_s, seen_t = set(), set()
    overlap = 0
    total = 0.0
    weight = 1.0
    agreement = 0.0
    for d in range(1, depth + 1):
        x, y = s[d - 1], t[d - 1]
        if x == y:
            overlap += 1
        else:
            overlap += (x in seen_t) + (y in seen_s)
        seen_s.add(x)
        seen_t.add(y)
        agreement = overlap / d
        total += weight * agreement
        weight *= p
    return (1 - p) * total + weight * agreement


def topk_jaccard(s: Sequence, t: Sequence, k: int) -> float:
    if k <= 0:
        raise ValueError("k must be positive")
    if k > min(len(s), len(t)):
        raise ValueError("k exceeds ranking length")
    a, b = set(s[:k]), set(t[:k])
    return len(a & b) / len(a | b)
