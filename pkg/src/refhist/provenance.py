"""Token provenance: stable per-article token IDs across revisions.

Every token ever inserted into an article receives an integer ID at its first
insertion.  Between consecutive revisions tokens are matched hierarchically:

1. paragraphs (blank-line separated) by exact content, first against the
   previous revision, then against every paragraph version seen before;
2. sentences inside still-unmatched paragraphs, same two-step lookup;
3. longest common subsequences over token surfaces of the remaining
   unmatched sentences: leftover sentences are first paired (old with new,
   largest LCS first) and aligned pairwise, then one LCS runs over the
   tokens that are still unmatched on both sides;
4. runs of at least ``MIN_REINSERT_RUN`` still-unmatched tokens that repeat
   a stretch of some earlier sentence verbatim take back that stretch's IDs,
   provided none of them is present in the previous revision and a token
   next to the run already carries an ID that once stood next to the
   stretch.

Matched tokens keep their IDs, a verbatim reappearance of deleted content
reclaims the old IDs, and everything left over is assigned fresh IDs.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Iterable, Iterator, Sequence

TOKEN_RE = re.compile(r"[^\W_]+|\S")
PARAGRAPH_SEP_RE = re.compile(r"\n[ \t\r\f\v]*\n\s*")
SENTENCE_END = frozenset({".", "!", "?"})
# Shorter runs would hand deleted IDs to stock phrases and punctuation.
MIN_REINSERT_RUN = 4


def tokenize(wikitext: str) -> list[str]:
    """Lower-cased alphanumeric runs and single punctuation/symbol characters."""
    return [m.group().lower() for m in TOKEN_RE.finditer(wikitext)]


@lru_cache(maxsize=65536)
def _tokenize_spans(text: str) -> tuple[tuple[str, ...], tuple[int, ...], tuple[int, ...]]:
    surfaces, starts, ends = [], [], []
    for m in TOKEN_RE.finditer(text):
        surfaces.append(m.group().lower())
        starts.append(m.start())
        ends.append(m.end())
    return tuple(surfaces), tuple(starts), tuple(ends)


def split_paragraphs(wikitext: str) -> list[tuple[int, str]]:
    """``(offset, text)`` pairs for the non-blank paragraphs of ``wikitext``."""
    out = []
    pos = 0
    for m in PARAGRAPH_SEP_RE.finditer(wikitext):
        if m.start() > pos:
            out.append((pos, wikitext[pos:m.start()]))
        pos = m.end()
    if pos < len(wikitext):
        out.append((pos, wikitext[pos:]))
    return out


def split_sentences(surfaces: Sequence[str]) -> list[tuple[int, int]]:
    """Half-open index ranges of sentences; a sentence ends after ``.``, ``!`` or ``?``."""
    out = []
    start = 0
    for i, s in enumerate(surfaces):
        if s in SENTENCE_END:
            out.append((start, i + 1))
            start = i + 1
    if start < len(surfaces):
        out.append((start, len(surfaces)))
    return out


def lcs_pairs(a: Sequence, b: Sequence) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)`` of a longest common subsequence of ``a`` and ``b``.

    Ties are resolved by matching as late as possible, so a duplicated item
    inserted before an existing one is reported as the insertion.  Uses the
    bit-parallel row recurrence with one Python integer per row of ``a``.
    """
    n, m = len(a), len(b)
    hi_a, hi_b = n, m
    tail = []
    while hi_a > 0 and hi_b > 0 and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
        tail.append((hi_a, hi_b))
    tail.reverse()
    lo = 0
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    head = [(i, i) for i in range(lo)]
    middle = []
    if lo < hi_a and lo < hi_b:
        middle = [(i + lo, j + lo) for i, j in _lcs_core(a[lo:hi_a], b[lo:hi_b])]
    return head + middle + tail


def _lcs_core(a: Sequence, b: Sequence) -> list[tuple[int, int]]:
    m = len(b)
    full = (1 << m) - 1
    masks: dict = {}
    for j, item in enumerate(b):
        masks[item] = masks.get(item, 0) | (1 << j)
    # rows[i]: zero bits of the low j bits count LCS(a[:i], b[:j]).
    rows = [full]
    v = full
    for item in a:
        u = v & masks.get(item, 0)
        v = ((v + u) | (v - u)) & full
        rows.append(v)

    def length(i: int, j: int) -> int:
        if j == 0:
            return 0
        low = rows[i] & ((1 << j) - 1)
        return j - low.bit_count()

    pairs = []
    i, j = len(a), m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif length(i - 1, j) >= length(i, j - 1):
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


@dataclass(frozen=True)
class Token:
    token_id: int
    surface: str
    origin_revision: int


@dataclass(frozen=True)
class TokenView:
    """Token IDs of one revision in reading order, with character spans."""

    revision_id: int
    tokens: tuple[int, ...]
    starts: tuple[int, ...] = field(default=(), repr=False, compare=False)
    ends: tuple[int, ...] = field(default=(), repr=False, compare=False)


@dataclass
class _Paragraph:
    key: tuple[str, ...]
    ids: tuple[int, ...]


class TokenTable:
    """All tokens ever inserted into one article, indexed by ID (IDs start at 1)."""

    def __init__(self):
        self._surface: list[str] = [""]
        self._origin: list[int] = [0]

    def new(self, surface: str, revision_id: int) -> int:
        self._surface.append(surface)
        self._origin.append(revision_id)
        return len(self._surface) - 1

    def __len__(self) -> int:
        return len(self._surface) - 1

    def __getitem__(self, token_id: int) -> Token:
        if token_id < 1 or token_id >= len(self._surface):
            raise KeyError(token_id)
        return Token(token_id, self._surface[token_id], self._origin[token_id])

    def surface(self, token_id: int) -> str:
        return self._surface[token_id]

    def __iter__(self) -> Iterator[Token]:
        for i in range(1, len(self._surface)):
            yield Token(i, self._surface[i], self._origin[i])


class Attributor:
    """Incremental token-ID assignment for the revisions of a single article."""

    def __init__(self):
        self.table = TokenTable()
        self._prev: list[_Paragraph] = []
        self._para_pool: dict[tuple[str, ...], list[tuple[int, ...]]] = {}
        self._sent_pool: dict[tuple[str, ...], list[tuple[int, ...]]] = {}
        # K-gram of surfaces -> (sentence surfaces, sentence ids, offset) for every remembered sentence.
        self._adjacent: set[tuple[int, int]] = set()
        self._grams: dict[tuple[str, ...], list[tuple[tuple[str, ...], tuple[int, ...], int]]] = {}

    def feed(self, revision_id: int, wikitext: str) -> TokenView:
        paras = []
        for offset, text in split_paragraphs(wikitext):
            surfaces, starts, ends = _tokenize_spans(text)
            if surfaces:
                paras.append((surfaces, offset, starts, ends))

        used: set[int] = set()
        assigned: list[tuple[int, ...] | None] = [None] * len(paras)
        prev = self._prev
        prev_done = [False] * len(prev)

        by_key: dict[tuple[str, ...], list[int]] = {}
        for pi, p in enumerate(prev):
            by_key.setdefault(p.key, []).append(pi)
        for ci, (key, *_rest) in enumerate(paras):
            queue = by_key.get(key)
            if queue:
                pi = queue.pop(0)
                prev_done[pi] = True
                assigned[ci] = prev[pi].ids
                used.update(prev[pi].ids)
        for ci, (key, *_rest) in enumerate(paras):
            if assigned[ci] is None:
                ids = self._reclaim(self._para_pool.get(key), used)
                if ids is not None:
                    assigned[ci] = ids

        # Paragraphs reclaimed from the pool were remembered when first formed.
        open_cur = [ci for ci in range(len(paras)) if assigned[ci] is None]
        if open_cur:
            self._match_sentences(paras, assigned, open_cur, [p for pi, p in enumerate(prev) if not prev_done[pi]], used, revision_id)

        ids_all: list[int] = []
        starts_all: list[int] = []
        ends_all: list[int] = []
        new_prev = []
        for (key, offset, starts, ends), ids in zip(paras, assigned):
            ids_all.extend(ids)
            starts_all.extend(s + offset for s in starts)
            ends_all.extend(e + offset for e in ends)
            new_prev.append(_Paragraph(key, ids))
        for ci in open_cur:
            ids = assigned[ci]
            self._adjacent.update(zip(ids, ids[1:]))
            self._remember(self._para_pool, paras[ci][0], ids)
        self._prev = new_prev
        return TokenView(revision_id, tuple(ids_all), tuple(starts_all), tuple(ends_all))

    @staticmethod
    def _reclaim(candidates, used: set[int]):
        if not candidates:
            return None
        for ids in reversed(candidates):
            if used.isdisjoint(ids):
                used.update(ids)
                return ids
        return None

    @staticmethod
    def _remember(pool, key, ids) -> None:
        versions = pool.setdefault(key, [])
        if ids not in versions:
            versions.append(ids)

    def _match_sentences(self, paras, assigned, open_cur, open_prev, used, revision_id):
        # Sentences of the previous revision's unmatched paragraphs.
        prev_sents = []
        sent_para = []
        for po, p in enumerate(open_prev):
            for a, b in split_sentences(p.key):
                prev_sents.append((p.key[a:b], p.ids[a:b]))
                sent_para.append(po)
        prev_by_key: dict[tuple[str, ...], list[int]] = {}
        for si, (key, _) in enumerate(prev_sents):
            prev_by_key.setdefault(key, []).append(si)
        prev_taken = [False] * len(prev_sents)

        # Current sentences: (paragraph index, start, end, ids or None)
        cur_sents = []
        for ci in open_cur:
            key = paras[ci][0]
            for a, b in split_sentences(key):
                cur_sents.append([ci, a, b, None])

        for cs in cur_sents:
            key = paras[cs[0]][0][cs[1]:cs[2]]
            for si in prev_by_key.get(key, ()):
                ids = prev_sents[si][1]
                if not prev_taken[si] and used.isdisjoint(ids):
                    prev_taken[si] = True
                    used.update(ids)
                    cs[3] = ids
                    break
        for cs in cur_sents:
            if cs[3] is None:
                key = paras[cs[0]][0][cs[1]:cs[2]]
                cs[3] = self._reclaim(self._sent_pool.get(key), used)

        # Token level: pair leftover sentences by LCS length, align each pair,
        # then one global LCS over whatever both sides still have unmatched.
        old_sents = []
        for si, (key, ids) in enumerate(prev_sents):
            if not prev_taken[si]:
                toks = [(s, t) for s, t in zip(key, ids) if t not in used]
                if toks:
                    old_sents.append((sent_para[si], toks))
        new_sents = [k for k, cs in enumerate(cur_sents) if cs[3] is None]
        fills: dict[tuple[int, int], int] = {}
        if old_sents and new_sents:
            self._align_tokens(paras, cur_sents, old_sents, new_sents, fills, used)
        if new_sents and self._grams:
            alive = {t for p in self._prev for t in p.ids}
            for k in new_sents:
                ci, a, b, _ = cur_sents[k]
                self._reclaim_runs(k, cur_sents, paras[ci][0][a:b], fills, used, alive)
        for k, cs in enumerate(cur_sents):
            if cs[3] is None:
                key = paras[cs[0]][0]
                ids = []
                for off, pos in enumerate(range(cs[1], cs[2])):
                    t = fills.get((k, off))
                    if t is None:
                        t = self.table.new(key[pos], revision_id)
                    ids.append(t)
                cs[3] = tuple(ids)

        per_para: dict[int, list[int]] = {}
        for ci, a, b, ids in cur_sents:
            per_para.setdefault(ci, []).extend(ids)
            key = paras[ci][0][a:b]
            if ids not in self._sent_pool.get(key, ()):
                self._index_grams(key, ids)
            self._remember(self._sent_pool, key, ids)
        for ci in open_cur:
            assigned[ci] = tuple(per_para.get(ci, ()))

    def _index_grams(self, surfaces: tuple[str, ...], ids: tuple[int, ...]) -> None:
        k = MIN_REINSERT_RUN
        for i in range(len(surfaces) - k + 1):
            self._grams.setdefault(surfaces[i:i + k], []).append((surfaces, ids, i))

    def _reclaim_runs(self, k: int, cur_sents, surfaces: tuple[str, ...], fills, used: set[int], alive: set[int]) -> None:
        """Give anchored verbatim repeats of deleted text back their IDs, longest match first."""

        def id_at(j: int) -> int | None:
            if 0 <= j < n:
                return fills.get((k, j))
            kk = k - 1 if j < 0 else k + 1
            if not 0 <= kk < len(cur_sents) or cur_sents[kk][0] != cur_sents[k][0]:
                return None
            ids = cur_sents[kk][3]
            if ids is not None:
                return ids[-1] if j < 0 else ids[0]
            return fills.get((kk, cur_sents[kk][2] - cur_sents[kk][1] - 1 if j < 0 else 0))

        n = len(surfaces)
        i = 0
        while i <= n - MIN_REINSERT_RUN:
            best_len, best = 0, None
            left = id_at(i - 1)
            for surf, ids, p in reversed(self._grams.get(surfaces[i:i + MIN_REINSERT_RUN], ())):
                length = 0
                while (
                    i + length < n and p + length < len(surf)
                    and (k, i + length) not in fills
                    and surfaces[i + length] == surf[p + length]
                    and ids[p + length] not in used and ids[p + length] not in alive
                ):
                    length += 1
                if length <= best_len or length < MIN_REINSERT_RUN:
                    continue
                right = id_at(i + length)
                if (left, ids[p]) in self._adjacent or (ids[p + length - 1], right) in self._adjacent:
                    best_len, best = length, ids[p:p + length]
            if best is not None and len(set(best)) == best_len:
                for off, t in enumerate(best):
                    fills[(k, i + off)] = t
                used.update(best)
                i += best_len
            else:
                i += 1

    @staticmethod
    def _align_tokens(paras, cur_sents, old_sents, new_sents, fills, used):
        # old_sents: (old paragraph, [(surface, id), ...]); new_sents: indices into cur_sents.
        new_surf = {k: paras[cur_sents[k][0]][0][cur_sents[k][1]:cur_sents[k][2]] for k in new_sents}

        old_paras: dict[int, list[int]] = {}
        for oi, (po, _) in enumerate(old_sents):
            old_paras.setdefault(po, []).append(oi)
        new_paras: dict[int, list[int]] = {}
        for k in new_sents:
            new_paras.setdefault(cur_sents[k][0], []).append(k)

        # Pair edited paragraphs with their most similar predecessor.
        edges = []
        for po, ois in old_paras.items():
            old_seq = [s for oi in ois for s, _ in old_sents[oi][1]]
            vocab = set(old_seq)
            for ci, ks in new_paras.items():
                new_seq = [s for k in ks for s in new_surf[k]]
                if vocab.isdisjoint(new_seq):
                    continue
                n = len(lcs_pairs(old_seq, new_seq))
                if n:
                    edges.append((-n, po, ci))
        edges.sort()
        paired_old, paired_new = set(), set()
        for _, po, ci in edges:
            if po in paired_old or ci in paired_new:
                continue
            paired_old.add(po)
            paired_new.add(ci)
            Attributor._align_group(old_sents, old_paras[po], new_paras[ci], new_surf, fills, used)

        # Paragraphs without a predecessor may draw on any leftover old tokens.
        rest_new = [k for ci, ks in new_paras.items() if ci not in paired_new for k in ks]
        if rest_new:
            Attributor._align_group(old_sents, range(len(old_sents)), rest_new, new_surf, fills, used)

    @staticmethod
    def _align_group(old_sents, ois, ks, new_surf, fills, used):
        old = {oi: [tok for tok in old_sents[oi][1] if tok[1] not in used] for oi in ois}
        old = {oi: toks for oi, toks in old.items() if toks}
        if not old:
            return
        edges = []
        for oi, toks in old.items():
            vocab = {s for s, _ in toks}
            surf = [s for s, _ in toks]
            for k in ks:
                if vocab.isdisjoint(new_surf[k]):
                    continue
                pairs = lcs_pairs(surf, new_surf[k])
                if pairs:
                    edges.append((-len(pairs), oi, k, pairs))
        edges.sort(key=lambda e: e[:3])
        old_done, new_done = set(), set()
        for _, oi, k, pairs in edges:
            if oi in old_done or k in new_done:
                continue
            old_done.add(oi)
            new_done.add(k)
            for i, j in pairs:
                t = old[oi][i][1]
                fills[(k, j)] = t
                used.add(t)
        old_rest = [tok for oi in old for tok in old[oi] if tok[1] not in used]
        new_rest = [(k, j) for k in ks for j in range(len(new_surf[k])) if (k, j) not in fills]
        if old_rest and new_rest:
            for i, j in lcs_pairs([s for s, _ in old_rest], [new_surf[k][jj] for k, jj in new_rest]):
                fills[new_rest[j]] = old_rest[i][1]
                used.add(old_rest[i][1])


def iter_attribution(revisions: Iterable) -> Iterator[tuple[object, TokenView, Attributor]]:
    """Yield ``(revision, view, attributor)`` while attributing revisions in order."""
    att = Attributor()
    for rev in revisions:
        yield rev, att.feed(rev.revision_id, rev.wikitext), att


def attribute_article(revisions: Sequence) -> tuple[TokenTable, list[TokenView]]:
    att = Attributor()
    views = [att.feed(rev.revision_id, rev.wikitext) for rev in revisions]
    return att.table, views


def export_token_table(article_id: int, table: TokenTable, out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["article_id", "token_id", "surface", "origin_revision"])
    for tok in table:
        writer.writerow([article_id, tok.token_id, tok.surface, tok.origin_revision])
