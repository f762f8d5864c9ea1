import io
import random
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import silhouette_samples

from conftest import editor
from oracles import best_partition_1d, random_ref_article, recount_actions_by_year, silhouette_naive
from refhist.analytics import clustering, editors, stats
from refhist.dids import classify_lifecycle
from refhist.history import ACTIONS, ActionKind, RefHistory, RefSnapshot, build_histories
from refhist.ingest import EditorKind

C, M, D, R = ActionKind.CREATION, ActionKind.MODIFICATION, ActionKind.DELETION, ActionKind.REINSERTION
UTC = timezone.utc


def _h(steps, aid=1, hid=0):
    base = datetime(2006, 1, 1, tzinfo=UTC)
    snaps = [
        RefSnapshot(a, (i + 1,), 10 + i, i, e, base + timedelta(days=d), text)
        for i, (a, d, e, text) in enumerate(steps)
    ]
    return RefHistory(aid, snaps, hid)


ALICE, BOB, BOT, ANON = editor("Alice"), editor("Bob"), editor("CiteBot", EditorKind.BOT), editor(
    "192.0.2.1", EditorKind.NONREGISTERED)


# -- stats ---------------------------------------------------------------------

def test_action_timeline_matches_recount():
    rng = random.Random(3)
    hs = []
    for seed in range(40):
        for h in build_histories(seed, random_ref_article(random.Random(seed), max_revisions=6)):
            shift = timedelta(days=rng.randint(0, 2000))
            h.snapshots = [RefSnapshot(s.a, s.t, s.r, s.h, s.e, s.z + shift, s.text) for s in h.snapshots]
            hs.append(h)
    tl = stats.action_timeline(hs, "year")
    expected = recount_actions_by_year(hs)
    for i, p in enumerate(tl.periods):
        for a in ACTIONS:
            assert tl.counts[a][i] == expected.get((p, a), 0)
    for a in ACTIONS:
        if sum(tl.counts[a]):
            assert sum(tl.proportions[a]) == pytest.approx(1.0)


def test_deletion_survival_and_summaries():
    h1 = _h([(C, 0, ALICE, "doi:10.1000/a")])
    h2 = _h([(C, 0, ALICE, "x"), (D, 100, BOB, "")])
    h3 = _h([(C, 400, ALICE, "y")])
    lcs = [classify_lifecycle(h) for h in (h1, h2, h3)]
    did_r = [lc.is_did_r for lc in lcs]
    t = [datetime(2006, 6, 1, tzinfo=UTC), datetime(2008, 1, 1, tzinfo=UTC)]
    assert stats.deletion_survival([h1, h2, h3], t, did_r) == [(t[0], 0.5, 0.0), (t[1], 1 / 3, 0.0)]
    sums = stats.article_summaries({1: ([h1, h2, h3], lcs), 2: ([], []), 3: ([h2], [lcs[1]])})
    assert [(s.n_refs, s.n_did_r, s.category) for s in sums] == [
        (2, 1, "some_did_r"), (0, 0, "no_refs"), (0, 0, "no_refs")]
    assert stats.count_distribution([0, 2, 2, 5]) == [(2, 2), (5, 1)]
    assert stats.did_kind_counts(lcs) == {"doi": 1}


# -- editors -------------------------------------------------------------------

def test_profiles_features_and_kinds():
    hs = [
        _h([(C, 0, ALICE, ""), (M, 1, BOB, ""), (D, 2, ANON, ""), (R, 3, ALICE, "")], aid=1),
        _h([(C, 0, BOT, ""), (M, 2, BOT, ""), (M, 3, ALICE, "")], aid=2),
    ]
    profiles = editors.build_profiles(hs)
    by = {p.key: p for p in profiles}
    assert [p.key for p in profiles] == sorted(by)
    assert by["Alice"].counts == (1, 1, 0, 1) and by["Alice"].articles_touched == 2
    assert by["CiteBot"].kind is EditorKind.BOT
    for p in profiles:
        assert sum(p.features) == pytest.approx(1.0) and min(p.features) >= 0
    totals = editors.kind_totals(profiles)
    assert totals[EditorKind.REGISTERED]["actions"] == 4 and totals[EditorKind.REGISTERED]["editors"] == 2
    shares = editors.kind_shares(profiles)
    assert sum(shares[EditorKind.BOT].values()) == pytest.approx(100.0)
    ranking = editors.rank_editors(profiles)
    assert ranking == [(1, "Alice", 3), (2, "Bob", 1)]
    assert editors.rank_editors(profiles, M, kinds=(EditorKind.REGISTERED, EditorKind.BOT)) == [
        (1, "Alice", 1), (2, "Bob", 1), (3, "CiteBot", 1)]


def test_ranking_io(tmp_path):
    buf = io.StringIO()
    editors.write_ranking([(1, "a", 5), (2, "b", 3)], buf)
    assert editors.read_ranking(io.StringIO("# h\n" + buf.getvalue())) == ["a", "b"]
    assert editors.read_ranking(["x\n", "y\n", "x\n"]) == ["x", "y"]


def test_ecdf_reaches_one_at_max():
    xs, fs = editors.ecdf([3, 1, 1, 2])
    assert xs.tolist() == [1, 2, 3] and fs.tolist() == [0.5, 0.75, 1.0]
    assert editors.ecdf_at(xs, fs, 0.5) == 0.0 and editors.ecdf_at(xs, fs, 3) == 1.0
    assert editors.ecdf_at(xs, fs, 2.5) == 0.75


@given(st.lists(st.integers(0, 50), min_size=1, max_size=40))
def test_ecdf_monotone_in_unit_interval(values):
    xs, fs = editors.ecdf(values)
    assert np.all(np.diff(fs) > 0) and fs[-1] == 1.0 and fs[0] > 0
    assert np.all(np.diff(xs) > 0)


def test_rbo_examples():
    assert editors.rbo(["a", "b"], ["b", "a"], 0.9) == pytest.approx(0.9, abs=1e-12)
    assert editors.rbo(list("abcde"), list("abcde"), 0.9) == pytest.approx(1.0)
    assert editors.rbo(list("abc"), list("xyz"), 0.9) == 0.0
    assert editors.topk_jaccard(["a", "b"], ["a", "c"], 2) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        editors.topk_jaccard(["a"], ["a"], 0)
    with pytest.raises(ValueError):
        editors.rbo(["a"], ["a"], 1.0)


perm = st.lists(st.sampled_from("abcdefghij"), min_size=1, max_size=10, unique=True)


@given(perm, perm, st.floats(0.05, 0.95))
def test_rbo_symmetric_and_bounded(s, t, p):
    v = editors.rbo(s, t, p)
    assert v == pytest.approx(editors.rbo(t, s, p))
    assert -1e-12 <= v <= 1 + 1e-12


# -- clustering ----------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_kmeans_recovers_exact_optimum(seed):
    pts = [0.0, 1.0, 10.0, 11.0]
    m = clustering.kmeans(np.array(pts)[:, None], 2, seed=seed)
    assert sorted(m.centroids[:, 0].tolist()) == [0.5, 10.5]
    cost, cents = best_partition_1d(pts, 2)
    assert sorted(m.centroids[:, 0].tolist()) == cents and m.inertia == pytest.approx(cost)


def test_kmeans_validates_k():
    with pytest.raises(ValueError):
        clustering.kmeans([[0.0]], 2)
    with pytest.raises(ValueError):
        clustering.kmeans([[0.0]], 0)


def test_silhouette_two_pair_fixture():
    x = np.array([[0.0], [0.1], [10.0], [10.1]])
    s, mean = clustering.silhouette(x, [0, 0, 1, 1])
    assert s[0] == pytest.approx(0.990, abs=1e-3)
    assert s[0] == pytest.approx((10.05 - 0.1) / 10.05, abs=1e-12)


def test_silhouette_edge_cases():
    s, _ = clustering.silhouette([[0.0], [1.0], [2.0]], [0, 0, 1])
    assert s[2] == 0.0
    s, _ = clustering.silhouette([[0.0], [1.0], [2.0]], [1, 0, 0])
    assert s[1] == 0.0
    s, _ = clustering.silhouette([[0.0], [1.0], [3.0]], [1, 0, 0])
    assert s[1] < 0
    with pytest.raises(ValueError):
        clustering.silhouette([[0.0], [1.0]], [0, 0])


@given(st.integers(0, 10**6), st.integers(2, 5))
def test_silhouette_matches_sklearn_and_naive(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.random((30, 4))
    x /= x.sum(1, keepdims=True)
    labels = rng.integers(0, k, 30)
    if len(set(labels.tolist())) < 2:
        return
    s, mean = clustering.silhouette(x, labels, chunk=7)
    np.testing.assert_allclose(s, silhouette_samples(x, labels), atol=1e-9)
    np.testing.assert_allclose(s[:5], silhouette_naive(x.tolist(), labels.tolist())[:5], atol=1e-9)
    assert -1 <= s.min() and s.max() <= 1


@given(st.integers(0, 10**6))
def test_kmeans_invariants(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((40, 4))
    m = clustering.kmeans(x, 4, seed=seed)
    d = ((x[:, None, :] - m.centroids[None]) ** 2).sum(2)
    assert np.array_equal(m.labels, d.argmin(1))
    assert all(b <= a + 1e-9 for a, b in zip(m.inertia_trace, m.inertia_trace[1:]))
    again = clustering.kmeans(x, 4, seed=seed)
    assert np.array_equal(again.labels, m.labels)


@given(st.integers(0, 10**6))
def test_clustree_in_prop_sums_to_one(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((25, 3))
    models = [clustering.kmeans(x, k, seed=seed) for k in (1, 2, 3, 4)]
    edges, nodes = clustering.clustree(models)
    incoming = {}
    for e in edges:
        incoming[(e.k_to, e.cluster_to)] = incoming.get((e.k_to, e.cluster_to), 0) + e.in_prop
    for key, total in incoming.items():
        assert total == pytest.approx(1.0)
    assert set(incoming) == {k for k in nodes if k[0] > 1}


def test_clustree_identity_edges_for_stable_partition():
    lab = np.array([0, 0, 1, 1])
    a = clustering.ClusterModel(2, np.zeros((2, 1)), lab, 0.0, 0, 1)
    b = clustering.ClusterModel(3, np.zeros((3, 1)), lab, 0.0, 0, 1)
    edges, nodes = clustering.clustree([a, b])
    assert [(e.cluster_from, e.cluster_to, e.count, e.in_prop) for e in edges] == [(0, 0, 2, 1.0), (1, 1, 2, 1.0)]
    assert "k2c0" in clustering.clustree_dot(edges, nodes)
    assert '"in_prop": 1.0' in clustering.clustree_json(edges, nodes)
