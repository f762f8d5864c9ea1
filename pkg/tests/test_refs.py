import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import revisions
from oracles import count_ref_pairs, fnv1a64, fnv_of_ids
from refhist.provenance import Attributor
from refhist.refs import extract_refs, find_ref_spans, hash_ref


def test_hash_of_single_id_matches_reference_fnv():
    assert hash_ref([1]) == fnv1a64(bytes([1, 0, 0, 0, 0, 0, 0, 0]))


def test_hash_is_order_sensitive():
    assert hash_ref([1, 2]) != hash_ref([2, 1])


def test_empty_hash_is_rejected():
    with pytest.raises(ValueError):
        hash_ref([])


@given(st.lists(st.integers(min_value=1, max_value=2**63), min_size=1, max_size=20))
def test_hash_matches_oracle(ids):
    assert hash_ref(ids) == fnv_of_ids(ids)


def test_no_collisions_on_small_sequences():
    seqs = [s for n in range(1, 5) for s in itertools.product(range(1, 8), repeat=n)]
    assert len({hash_ref(s) for s in seqs}) == len(seqs)


def test_spans_skip_void_tags_and_attributes():
    text = 'A<ref name="x">Alpha</ref> b<ref name=x /> c<REF group=n>Beta</REF >'
    spans = find_ref_spans(text)
    assert [text[s:e] for s, e in spans] == ["Alpha", "Beta"]


def test_unclosed_tag_is_counted_and_abandoned():
    stats = {}
    assert find_ref_spans("x <ref>never closed", stats) == []
    assert stats["unclosed"] == 1


def test_two_paired_and_one_void_ref():
    text = "P.<ref>Alpha (2000).</ref> Q.<ref name=a/> R.<ref name=a>Beta (2001).</ref>"
    (rev,) = revisions([text])
    view = Attributor().feed(rev.revision_id, text)
    occs = extract_refs(rev, view)
    assert [o.index for o in occs] == [0, 1]
    assert [o.text for o in occs] == ["Alpha (2000).", "Beta (2001)."]
    assert all(o.h == hash_ref(o.t) for o in occs)
    assert occs[0].e == rev.editor and occs[0].z == rev.timestamp


def test_extract_refs_rejects_foreign_view():
    r1, r2 = revisions(["<ref>a</ref>", "<ref>b</ref>"])
    view = Attributor().feed(r1.revision_id, r1.wikitext)
    with pytest.raises(ValueError):
        extract_refs(r2, view)


pieces = st.sampled_from([
    "<ref>", "</ref>", "<ref name=a>", "<ref name=b />", "<ref/>", "</ref >", "<REF>", "</REF>",
    "text", " ", ".", "<references/>", "<refx>", "\n\n",
])


@given(st.lists(pieces, max_size=30).map("".join))
def test_occurrence_count_matches_independent_scanner(text):
    assert len(find_ref_spans(text)) == count_ref_pairs(text)
