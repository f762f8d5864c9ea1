"""Independent brute-force implementations used as test oracles.

Nothing here imports the code under test beyond plain data types.
"""

from __future__ import annotations

import itertools
import random
from datetime import datetime, timedelta, timezone

from refhist.history import ActionKind, RevisionRefs
from refhist.ingest import EditorIdentity, EditorKind
from refhist.refs import RefOccurrence


def lcs_length(a, b) -> int:
    """Textbook O(nm) dynamic programme."""
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def fnv_of_ids(ids) -> int:
    return fnv1a64(b"".join(int(i).to_bytes(8, "little") for i in ids))


def count_ref_pairs(text: str) -> int:
    """Count ``<ref ...>...</ref>`` pairs with a character walk (no regular expressions)."""
    low = text.lower()
    n, pos = 0, 0
    while True:
        i = low.find("<ref", pos)
        if i < 0:
            return n
        after = low[i + 4:i + 5]
        if after not in (">", "/", " ", "\t", "\n"):
            pos = i + 4
            continue
        gt = low.find(">", i)
        if gt < 0:
            return n
        if low[i:gt].rstrip().endswith("/"):
            pos = gt + 1
            continue
        j = low.find("</ref", gt)
        while j >= 0:
            k = j + 5
            while k < len(low) and low[k] in " \t\n":
                k += 1
            if k < len(low) and low[k] == ">":
                break
            j = low.find("</ref", j + 5)
        if j < 0:
            pos = gt + 1
            continue
        n += 1
        pos = k + 1


# -- chaining ------------------------------------------------------------------

_PAD = (9,)


def _jac(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def exhaustive_histories(revisions, threshold: float = 0.2, subset_rule: bool = True):
    """Histories as lists of ``(action, revision, hash)`` from exhaustive matching.

    For each transition every injective assignment of existing histories to
    occurrences is enumerated; each allowed pair carries a priority key and the
    assignment whose ascending key vector is lexicographically smallest wins
    (missing edges compare as +infinity, so more links win on equal prefixes).
    """
    chains = []  # dicts: order, snaps, cur, last, hashes
    seen: set = set()
    for rev in revisions:
        occs = rev.occurrences
        options = []  # per occurrence: list of (key, chain idx, action)
        for o in occs:
            opts = []
            for ci, c in enumerate(chains):
                alive = c["cur"] is not None
                rank = c["cur"].index if alive else c["order"]
                kind = 0 if alive else 1
                if alive and o.h == c["cur"].h:
                    opts.append(((0, rank, o.index), ci, None))
                elif o.h in c["hashes"]:
                    act = ActionKind.MODIFICATION if alive else ActionKind.REINSERTION
                    opts.append(((1, kind, rank, o.index), ci, act))
                elif o.h not in seen:
                    j = _jac(c["last"], o.t)
                    act = ActionKind.MODIFICATION if alive else ActionKind.REINSERTION
                    if j > threshold:
                        opts.append(((2, 0, -j, kind, min(o.t), o.index, rank), ci, act))
                    elif subset_rule and c["last"] and set(c["last"]) <= set(o.t):
                        opts.append(((2, 1, -j, kind, min(o.t), o.index, rank), ci, act))
            options.append(opts)

        best = None
        best_vec = None

        def walk(i, used, chosen):
            nonlocal best, best_vec
            if i == len(occs):
                vec = sorted(k for k, _, _ in chosen.values())
                vec = tuple(vec) + (_PAD,) * (len(occs) - len(vec))
                if best_vec is None or vec < best_vec:
                    best_vec, best = vec, dict(chosen)
                return
            walk(i + 1, used, chosen)
            for key, ci, act in options[i]:
                if ci in used:
                    continue
                chosen[i] = (key, ci, act)
                used.add(ci)
                walk(i + 1, used, chosen)
                used.discard(ci)
                del chosen[i]

        walk(0, set(), {})
        linked = set()
        for i, (key, ci, act) in best.items():
            c = chains[ci]
            o = occs[i]
            linked.add(ci)
            if act is not None:
                c["snaps"].append((act, rev.revision_id, o.h))
                c["last"] = o.t
                c["hashes"].add(o.h)
            c["cur"] = o
        for ci, c in enumerate(chains):
            if c["cur"] is not None and ci not in linked:
                c["snaps"].append((ActionKind.DELETION, rev.revision_id, c["cur"].h))
                c["cur"] = None
        for i, o in enumerate(occs):
            if i not in best:
                chains.append({
                    "order": len(chains),
                    "snaps": [(ActionKind.CREATION, rev.revision_id, o.h)],
                    "cur": o,
                    "last": o.t,
                    "hashes": {o.h},
                })
        seen.update(o.h for o in occs)
    return [c["snaps"] for c in chains]


def random_ref_article(rng: random.Random, max_revisions: int = 4, max_refs: int = 5, hasher=fnv_of_ids):
    """Token-ID level revision sequence with planted edits.

    Edits include unchanged refs, token insertions/removals, deletions,
    verbatim and edited reinsertions, duplicates and refs mixing tokens of two
    others (conflicting candidates).
    """
    editor = EditorIdentity(EditorKind.REGISTERED, user_name="E")
    next_id = [1]

    def fresh(n):
        out = tuple(range(next_id[0], next_id[0] + n))
        next_id[0] += n
        return out

    live = [fresh(rng.randint(1, 6)) for _ in range(rng.randint(0, max_refs))]
    deleted = []
    revs = []
    z0 = datetime(2010, 1, 1, tzinfo=timezone.utc)
    n_revs = rng.randint(1, max_revisions)
    for r in range(n_revs):
        if r > 0:
            nxt = []
            for t in live:
                u = rng.random()
                if u < 0.4:
                    nxt.append(t)
                elif u < 0.65:
                    toks = list(t)
                    if len(toks) > 1 and rng.random() < 0.5:
                        del toks[rng.randrange(len(toks))]
                    if rng.random() < 0.7 or not toks:
                        toks.insert(rng.randint(0, len(toks)), fresh(1)[0])
                    if rng.random() < 0.2:
                        toks = list(fresh(rng.randint(1, 4))) + toks[: max(1, len(toks) // 3)]
                    nxt.append(tuple(toks))
                else:
                    deleted.append(t)
            if deleted and rng.random() < 0.5:
                t = rng.choice(deleted)
                if rng.random() < 0.4:
                    t = t + fresh(1)
                nxt.append(t)
            if nxt and rng.random() < 0.15:
                nxt.append(rng.choice(nxt))
            if len(nxt) >= 2 and rng.random() < 0.2:
                a, b = rng.sample(nxt, 2)
                nxt.append(tuple(a[: max(1, len(a) // 2)]) + tuple(b[len(b) // 2:]))
            if rng.random() < 0.4:
                nxt.append(fresh(rng.randint(1, 6)))
            if rng.random() < 0.3:
                rng.shuffle(nxt)
            live = nxt[:max_refs]
        occs = tuple(
            RefOccurrence(t=t, h=hasher(t), e=editor, z=z0 + timedelta(days=r), raw_span=(0, 0),
                          revision_id=100 + r, index=i)
            for i, t in enumerate(live)
        )
        revs.append(RevisionRefs(100 + r, editor, z0 + timedelta(days=r), occs))
    return revs


# -- clustering, ROC, timelines ------------------------------------------------------

def best_partition_1d(points, k):
    """Exact k-means optimum by enumerating every labelling."""
    best = None
    for labels in itertools.product(range(k), repeat=len(points)):
        if len(set(labels)) != k:
            continue
        cost = 0.0
        cents = []
        for c in range(k):
            members = [p for p, l in zip(points, labels) if l == c]
            m = sum(members) / len(members)
            cents.append(m)
            cost += sum((p - m) ** 2 for p in members)
        if best is None or cost < best[0] - 1e-12:
            best = (cost, sorted(cents))
    return best


def auc_by_pairs(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties count half)."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def silhouette_naive(points, labels):
    n = len(points)

    def d(i, j):
        return sum((a - b) ** 2 for a, b in zip(points[i], points[j])) ** 0.5

    out = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(d(i, j) for j in own) / len(own)
        b = min(
            sum(d(i, j) for j in range(n) if labels[j] == c) / sum(1 for j in range(n) if labels[j] == c)
            for c in set(labels) if c != labels[i]
        )
        out.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return out


def recount_actions_by_year(histories):
    out = {}
    for h in histories:
        for s in h.snapshots:
            key = (f"{s.z.year:04d}", s.a)
            out[key] = out.get(key, 0) + 1
    return out
