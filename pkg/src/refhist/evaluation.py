"""Evaluation of reference matching against labelled pairs.

Labelled pairs are read from CSV, scored (Jaccard over token IDs, or a
bag-of-words cosine baseline), and compared with their gold labels over a
threshold grid.  Candidate pairs for labelling come from a stratified walk
over the revision history; the same walk with unbounded strata estimates the
population distribution of similarities, which is used to reweight metrics
computed on the stratified sample.
"""

from __future__ import annotations

import csv
import enum
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Callable, Iterable, Sequence

import numpy as np

from .errors import RefhistError
from .history import ActionKind, RevisionRefs, jaccard
from .provenance import tokenize
from .refs import RefOccurrence

N_STRATA = 8
AGREEMENT_LIMIT = 0.7
GOLD_COLUMNS = ["article_id", "rev_a", "rev_b", "text_a", "text_b", "label", "confidence"]


class Label(str, enum.Enum):
    EQUIVALENT = "Equivalent"
    DISTINCT = "Distinct"
    UNCLEAR = "Unclear"


@dataclass(frozen=True)
class GoldPair:
    article_id: int
    rev_a: int
    rev_b: int
    text_a: str
    text_b: str
    label: Label
    confidence: float
    tokens_a: tuple[int, ...] = ()
    tokens_b: tuple[int, ...] = ()

    @property
    def usable(self) -> bool:
        return self.label is not Label.UNCLEAR and self.confidence >= AGREEMENT_LIMIT

    @property
    def positive(self) -> bool:
        return self.label is Label.EQUIVALENT


def _ids(field_value: str | None) -> tuple[int, ...]:
    if not field_value:
        return ()
    return tuple(int(x) for x in field_value.split())


def read_gold(stream: IO[str]) -> list[GoldPair]:
    """Load a gold CSV; optional ``tokens_a``/``tokens_b`` columns hold space-separated IDs."""
    reader = csv.DictReader(line for line in stream if not line.startswith("#"))
    missing = [c for c in GOLD_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise RefhistError(f"gold file lacks columns: {', '.join(missing)}")
    out = []
    for n, row in enumerate(reader, start=2):
        try:
            label = Label(row["label"])
        except ValueError:
            raise RefhistError(f"gold row {n}: invalid label {row['label']!r}") from None
        try:
            conf = float(row["confidence"])
            pair = GoldPair(
                int(row["article_id"]), int(row["rev_a"]), int(row["rev_b"]),
                row["text_a"], row["text_b"], label, conf,
                _ids(row.get("tokens_a")), _ids(row.get("tokens_b")),
            )
        except (TypeError, ValueError) as exc:
            raise RefhistError(f"gold row {n}: {exc}") from None
        if not 0.0 <= conf <= 1.0:
            raise RefhistError(f"gold row {n}: confidence {conf} outside [0, 1]")
        out.append(pair)
    return out


def write_gold(pairs: Iterable[GoldPair], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(GOLD_COLUMNS + ["tokens_a", "tokens_b"])
    for p in pairs:
        w.writerow([
            p.article_id, p.rev_a, p.rev_b, p.text_a, p.text_b, p.label.value, f"{p.confidence:g}",
            " ".join(map(str, p.tokens_a)), " ".join(map(str, p.tokens_b)),
        ])


# -- scores -------------------------------------------------------------------

def cosine_baseline(text_a: str, text_b: str) -> float:
    """Cosine of term-frequency vectors over surface tokens."""
    a, b = Counter(tokenize(text_a)), Counter(tokenize(text_b))
    if not a or not b:
        return 0.0
    dot = sum(c * b[t] for t, c in a.items())
    return dot / math.sqrt(sum(c * c for c in a.values()) * sum(c * c for c in b.values()))


def jaccard_score(pair: GoldPair) -> float:
    return jaccard(pair.tokens_a, pair.tokens_b)


def subset_override(pair: GoldPair) -> bool:
    """The matcher's subset rule: every token of the earlier reference survives in the later one."""
    a = set(pair.tokens_a)
    return bool(a) and a <= set(pair.tokens_b)


def stratum_of(score: float, n_strata: int = N_STRATA) -> int:
    return min(int(math.floor(score * n_strata)), n_strata - 1)


# -- metrics ------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    accuracy: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float | None = None
    zero_support: bool = False

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int, threshold: float | None = None) -> "MetricsReport":
        zero = tp + fp == 0
        p = 1.0 if zero else tp / (tp + fp)
        r = tp / (tp + fn) if tp + fn else 0.0
        n = tp + fp + tn + fn
        acc = (tp + tn) / n if n else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, acc, f1, tp, fp, tn, fn, threshold, zero)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def confusion(predicted: Sequence[bool], actual: Sequence[bool]) -> tuple[int, int, int, int]:
    tp = fp = tn = fn = 0
    for p, a in zip(predicted, actual):
        if p and a:
            tp += 1
        elif p:
            fp += 1
        elif a:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def threshold_sweep(
    scores: Sequence[float],
    labels: Sequence[bool],
    thresholds: Sequence[float],
    override: Sequence[bool] | None = None,
) -> list[MetricsReport]:
    """Metrics when predicting Equivalent iff score > threshold (or the override holds)."""
    if not scores:
        raise RefhistError("no labelled pairs to evaluate")
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    out = []
    for thr in thresholds:
        pred = [s > thr for s in scores]
        if override is not None:
            pred = [p or o for p, o in zip(pred, override)]
        out.append(MetricsReport.from_counts(*confusion(pred, labels), threshold=float(thr)))
    return out


def balanced_threshold(reports: Sequence[MetricsReport]) -> float:
    """Threshold minimising |FP - FN|; ties resolve to the median of the minimisers."""
    if not reports:
        raise ValueError("empty sweep")
    best = min(abs(r.fp - r.fn) for r in reports)
    ties = sorted(r.threshold for r in reports if abs(r.fp - r.fn) == best)
    return ties[(len(ties) - 1) // 2]


def parse_thresholds(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        if step <= 0:
            raise ValueError("threshold step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 10) for i in range(n + 1)]
    return [float(x) for x in spec.split(",") if x.strip()]


@dataclass(frozen=True)
class RocCurve:
    points: list[tuple[float, float]]
    thresholds: list[float]
    auc: float


def roc_curve(scores: Sequence[float], labels: Sequence[bool]) -> RocCurve:
    """ROC over all distinct score thresholds (positive iff score >= threshold)."""
    pos = sum(1 for y in labels if y)
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise RefhistError("ROC needs both positive and negative labels")
    order = sorted(zip(scores, labels), key=lambda x: -x[0])
    points = [(0.0, 0.0)]
    thresholds = [math.inf]
    tp = fp = 0
    i = 0
    while i < len(order):
        thr = order[i][0]
        while i < len(order) and order[i][0] == thr:
            if order[i][1]:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / neg, tp / pos))
        thresholds.append(thr)
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2
    return RocCurve(points, thresholds, auc)


# -- resampled metrics --------------------------------------------------------

@dataclass(frozen=True)
class ResampledMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    stderr: dict[str, float]
    draws: int


def resampled_micro_metrics(
    strata: Sequence[int],
    labels: Sequence[bool],
    predictions: Sequence[bool],
    weights: Sequence[float],
    seed: int = 0,
    draws: int = 1000,
) -> ResampledMetrics:
    """Bootstrap micro metrics with pair probabilities proportional to ``weights[s] / n_s``.

    ``stderr`` is the standard deviation of each metric across draws.
    """
    if draws < 1:
        raise ValueError("draws must be positive")
    strata = np.asarray(strata, dtype=int)
    y = np.asarray(labels, dtype=bool)
    p = np.asarray(predictions, dtype=bool)
    w = np.asarray(weights, dtype=float)
    if strata.size == 0:
        raise RefhistError("no labelled pairs to resample")
    n_s = np.bincount(strata, minlength=len(w))
    empty = [int(s) for s in np.flatnonzero((w > 0) & (n_s[: len(w)] == 0))]
    if empty:
        raise RefhistError(f"strata with weight but no labelled pairs: {empty}")
    prob = w[strata] / n_s[strata]
    prob = prob / prob.sum()
    n = strata.size
    tp_flags = (p & y).astype(float)
    fp_flags = (p & ~y).astype(float)
    fn_flags = (~p & y).astype(float)
    tn_flags = (~p & ~y).astype(float)
    results = np.empty((draws, 4))
    children = np.random.SeedSequence(seed).spawn(draws)
    for d, child in enumerate(children):
        idx = np.random.default_rng(child).choice(n, size=n, p=prob)
        tp, fp, fn, tn = tp_flags[idx].sum(), fp_flags[idx].sum(), fn_flags[idx].sum(), tn_flags[idx].sum()
        m = MetricsReport.from_counts(int(tp), int(fp), int(tn), int(fn))
        results[d] = (m.precision, m.recall, m.f1, m.accuracy)
    mean = results.mean(0)
    sd = results.std(0, ddof=1) if draws > 1 else np.zeros(4)
    names = ("precision", "recall", "f1", "accuracy")
    return ResampledMetrics(*map(float, mean), dict(zip(names, map(float, sd))), draws)


# -- stratified sampling ------------------------------------------------------

@dataclass(frozen=True)
class SampledPair:
    article_id: int
    rev_a: int
    rev_b: int
    index_a: int
    index_b: int
    text_a: str
    text_b: str
    tokens_a: tuple[int, ...]
    tokens_b: tuple[int, ...]
    similarity: float
    stratum: int


@dataclass
class SampleResult:
    pairs: list[SampledPair]
    fill: list[int]
    complete: bool
    attempts: int
    target: int | None = None
    notes: list[str] = field(default_factory=list)


def _jaccard_occ(a: RefOccurrence, b: RefOccurrence) -> float:
    return jaccard(a.t, b.t)


def stratified_sample(
    corpus: Sequence[tuple[int, Sequence[RevisionRefs]]],
    n_buckets: int = N_STRATA,
    bucket_size: int | None = 125,
    seed: int = 0,
    max_attempts: int = 200_000,
    max_pairs: int = 100_000,
    similarity: Callable[[RefOccurrence, RefOccurrence], float] = _jaccard_occ,
) -> SampleResult:
    """Stratified random walk for candidate reference pairs.

    Each attempt picks an article, a revision and a reference ``f`` in it,
    then walks forward to the first later revision holding candidates (refs
    whose hash does not occur in the starting revision).  Every candidate
    is bucketed by its similarity with ``f`` while its bucket has room.
    ``bucket_size=None`` makes buckets unbounded; the walk then stops at
    ``max_pairs``.
    """
    rng = random.Random(seed)
    usable = [(aid, revs) for aid, revs in corpus if any(r.occurrences for r in revs)]
    buckets: list[list[SampledPair]] = [[] for _ in range(n_buckets)]
    seen: set[tuple] = set()
    total = 0

    def done() -> bool:
        if bucket_size is None:
            return total >= max_pairs
        return all(len(b) >= bucket_size for b in buckets)

    attempts = 0
    while usable and not done() and attempts < max_attempts:
        attempts += 1
        aid, revs = usable[rng.randrange(len(usable))]
        with_refs = [j for j, r in enumerate(revs) if r.occurrences]
        j = with_refs[rng.randrange(len(with_refs))]
        start = revs[j]
        f = start.occurrences[rng.randrange(len(start.occurrences))]
        known = {o.h for o in start.occurrences}
        for s in range(j + 1, len(revs)):
            cands = [c for c in revs[s].occurrences if c.h not in known]
            if not cands:
                continue
            for c in cands:
                key = (aid, start.revision_id, f.index, revs[s].revision_id, c.index)
                if key in seen:
                    continue
                sim = similarity(f, c)
                b = stratum_of(sim, n_buckets)
                if bucket_size is not None and len(buckets[b]) >= bucket_size:
                    continue
                seen.add(key)
                buckets[b].append(SampledPair(
                    aid, start.revision_id, revs[s].revision_id, f.index, c.index,
                    f.text, c.text, f.t, c.t, sim, b,
                ))
                total += 1
                if bucket_size is None and total >= max_pairs:
                    break
            break
    pairs = [p for b in buckets for p in b]
    fill = [len(b) for b in buckets]
    complete = done()
    result = SampleResult(pairs, fill, complete, attempts, None if bucket_size is None else bucket_size)
    if not complete:
        result.notes.append(f"stopped after {attempts} attempts with bucket fill {fill}")
    return result


def stratum_weights(sample: SampleResult) -> list[float]:
    """Population share of each stratum estimated from an unbounded walk."""
    total = sum(sample.fill)
    if total == 0:
        return [0.0] * len(sample.fill)
    return [c / total for c in sample.fill]


def resolve_tokens(pairs: Sequence[GoldPair], histories: dict) -> tuple[list[GoldPair], int]:
    """Fill missing token IDs from histories exported with tokens.

    A side is resolved from the history state in force at its revision whose
    text equals the pair's text.  Returns the updated pairs and the number of
    sides left unresolved.
    """
    def lookup(aid: int, rev: int, text: str) -> tuple[int, ...]:
        for h in histories.get(aid, ()):
            state = None
            for s in h.snapshots:
                if s.r > rev:
                    break
                state = s
            if state is not None and state.a is not ActionKind.DELETION and state.text == text and state.t:
                return state.t
        return ()

    out, missing = [], 0
    for p in pairs:
        ta = p.tokens_a or lookup(p.article_id, p.rev_a, p.text_a)
        tb = p.tokens_b or lookup(p.article_id, p.rev_b, p.text_b)
        missing += (not ta) + (not tb)
        out.append(replace(p, tokens_a=ta, tokens_b=tb))
    return out, missing
