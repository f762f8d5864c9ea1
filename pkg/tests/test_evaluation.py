import io
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import auc_by_pairs, random_ref_article
from refhist.errors import RefhistError
from refhist.evaluation import (
    GoldPair,
    Label,
    MetricsReport,
    balanced_threshold,
    confusion,
    cosine_baseline,
    jaccard_score,
    parse_thresholds,
    read_gold,
    resampled_micro_metrics,
    resolve_tokens,
    roc_curve,
    stratified_sample,
    stratum_of,
    stratum_weights,
    subset_override,
    threshold_sweep,
    write_gold,
)
from refhist.history import jaccard

HEAD = "article_id,rev_a,rev_b,text_a,text_b,label,confidence\n"


def test_read_gold_filters_unusable_pairs():
    text = HEAD + (
        "1,10,11,a b,a b c,Equivalent,1\n"
        "1,10,12,a,z,Distinct,0.69\n"
        "1,10,13,a,z,Unclear,1\n"
    )
    pairs = read_gold(io.StringIO(text))
    assert [p.usable for p in pairs] == [True, False, False]
    assert pairs[0].positive and pairs[0].tokens_a == ()


@pytest.mark.parametrize("body, msg", [
    ("1,1,2,a,b,Same,1\n", "invalid label"),
    ("1,1,2,a,b,Distinct,2\n", "outside"),
    ("x,1,2,a,b,Distinct,1\n", "row 2"),
])
def test_read_gold_rejects_bad_rows(body, msg):
    with pytest.raises(RefhistError, match=msg):
        read_gold(io.StringIO(HEAD + body))


def test_read_gold_requires_columns():
    with pytest.raises(RefhistError, match="lacks columns"):
        read_gold(io.StringIO("article_id,label\n1,Distinct\n"))


def test_gold_round_trip_with_tokens():
    pairs = [GoldPair(1, 2, 3, "x, y", 'q "z"', Label.DISTINCT, 0.8, (1, 2), (3,))]
    buf = io.StringIO()
    write_gold(pairs, buf)
    assert read_gold(io.StringIO(buf.getvalue())) == pairs


def test_scores():
    p = GoldPair(1, 1, 2, "", "", Label.EQUIVALENT, 1, (1, 2, 3), (1, 2, 3, 4))
    assert jaccard_score(p) == 0.75 and subset_override(p)
    assert cosine_baseline("a a b", "a b") == pytest.approx(3 / math.sqrt(5 * 2))
    assert cosine_baseline("", "a") == 0.0


def test_metrics_report():
    m = MetricsReport.from_counts(0, 0, 5, 3)
    assert m.zero_support and m.precision == 1.0 and m.recall == 0.0 and m.f1 == 0.0
    m = MetricsReport.from_counts(6, 2, 10, 2)
    assert m.precision == 0.75 and m.recall == 0.75 and m.f1 == pytest.approx(0.75) and m.accuracy == 0.8
    assert confusion([True, True, False, False], [True, False, True, False]) == (1, 1, 1, 1)


def test_threshold_sweep_and_balanced_threshold():
    scores = [0.1, 0.3, 0.5, 0.7, 0.9]
    labels = [False, False, True, True, True]
    sweep = threshold_sweep(scores, labels, [0.0, 0.2, 0.4, 0.6, 0.8])
    assert [(r.fp, r.fn) for r in sweep] == [(2, 0), (1, 0), (0, 0), (0, 1), (0, 2)]
    assert balanced_threshold(sweep) == 0.4
    ties = [MetricsReport.from_counts(1, 1, 1, 1, t) for t in (0.1, 0.2, 0.3, 0.4)]
    assert balanced_threshold(ties) == 0.2
    with_override = threshold_sweep(scores, labels, [0.8], [False, False, True, True, False])
    assert with_override[0].tp == 3
    with pytest.raises(RefhistError):
        threshold_sweep([], [], [0.1])


def test_parse_thresholds():
    assert parse_thresholds("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_thresholds("0.1, 0.2") == [0.1, 0.2]
    assert len(parse_thresholds("0:1:0.05")) == 21
    with pytest.raises(ValueError):
        parse_thresholds("0:1:0")


def test_roc_requires_both_classes():
    with pytest.raises(RefhistError):
        roc_curve([0.1, 0.2], [True, True])


scored = st.lists(st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.8, 1.0]), st.booleans()), min_size=2, max_size=30)


@given(scored)
def test_roc_auc_matches_pair_enumeration_and_is_monotone(items):
    scores = [s for s, _ in items]
    labels = [y for _, y in items]
    if all(labels) or not any(labels):
        return
    roc = roc_curve(scores, labels)
    assert roc.auc == pytest.approx(auc_by_pairs(scores, labels))
    fprs = [x for x, _ in roc.points]
    tprs = [y for _, y in roc.points]
    assert all(a <= b for a, b in zip(fprs, fprs[1:])) and all(a <= b for a, b in zip(tprs, tprs[1:]))
    assert all(a > b for a, b in zip(roc.thresholds, roc.thresholds[1:]))
    assert roc.points[-1] == (1.0, 1.0)


def test_stratum_boundaries():
    assert [stratum_of(x) for x in (0.0, 0.124, 0.125, 0.5, 0.99, 1.0)] == [0, 0, 1, 4, 7, 7]


def test_resampled_degenerate_cases():
    strata = [7] * 10 + [0] * 10
    labels = [True] * 10 + [False] * 10
    out = resampled_micro_metrics(strata, labels, labels, [0] * 7 + [1], seed=1, draws=200)
    assert out.f1 == 1.0 and out.stderr["f1"] == 0.0
    pred = [True] * 8 + [False] * 2 + [False] * 9 + [True]
    plain = MetricsReport.from_counts(*confusion(pred, labels))
    w = [0.5] + [0.0] * 6 + [0.5]
    out = resampled_micro_metrics(strata, labels, pred, w, seed=2, draws=2000)
    assert abs(out.f1 - plain.f1) < 3 * out.stderr["f1"] + 1e-3
    again = resampled_micro_metrics(strata, labels, pred, w, seed=2, draws=2000)
    assert again == out


def test_resampled_rejects_uncovered_stratum():
    with pytest.raises(RefhistError, match=r"\[3\]"):
        resampled_micro_metrics([0, 1], [True, False], [True, False], [0.5, 0.25, 0, 0.25])


def _corpus(n=60, seed=0):
    return [(i, random_ref_article(random.Random(seed * 1000 + i), max_revisions=8, max_refs=6)) for i in range(n)]


def test_stratified_sample_respects_strata_and_seed():
    corpus = _corpus()
    a = stratified_sample(corpus, bucket_size=3, seed=4, max_attempts=20000)
    b = stratified_sample(corpus, bucket_size=3, seed=4, max_attempts=20000)
    c = stratified_sample(corpus, bucket_size=3, seed=5, max_attempts=20000)
    assert a.pairs == b.pairs and a.pairs != c.pairs
    assert all(n <= 3 for n in a.fill)
    for p in a.pairs:
        assert p.stratum == stratum_of(jaccard(p.tokens_a, p.tokens_b)) and p.similarity == jaccard(p.tokens_a, p.tokens_b)
    assert len({(p.article_id, p.rev_a, p.index_a, p.rev_b, p.index_b) for p in a.pairs}) == len(a.pairs)


def test_unbounded_walk_stops_at_max_pairs():
    res = stratified_sample(_corpus(), bucket_size=None, seed=1, max_pairs=50)
    assert sum(res.fill) == 50 and res.complete
    w = stratum_weights(res)
    assert sum(w) == pytest.approx(1.0)


def test_incomplete_walk_is_reported():
    res = stratified_sample(_corpus(5), bucket_size=1000, seed=1, max_attempts=50)
    assert not res.complete and res.notes and res.attempts == 50


def test_resolve_tokens_from_histories():
    from refhist.history import RefHistory, RefSnapshot, ActionKind
    from conftest import editor, T0
    h = RefHistory(1, [
        RefSnapshot(ActionKind.CREATION, (1, 2), 10, 5, editor(), T0, "a b"),
        RefSnapshot(ActionKind.MODIFICATION, (1, 2, 3), 12, 6, editor(), T0, "a b c"),
    ])
    pairs = [GoldPair(1, 11, 12, "a b", "a b c", Label.EQUIVALENT, 1.0), GoldPair(1, 9, 12, "a b", "zz", Label.DISTINCT, 1)]
    out, missing = resolve_tokens(pairs, {1: [h]})
    assert out[0].tokens_a == (1, 2) and out[0].tokens_b == (1, 2, 3)
    assert missing == 2
