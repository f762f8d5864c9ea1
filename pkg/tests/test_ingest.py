import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from refhist.errors import DumpParseError, InvalidContributorError, JsonlParseError
from refhist.ingest import (
    BotList,
    EditorKind,
    IngestStats,
    classify_editor,
    export_jsonl_string,
    load_botlist,
    parse_dump,
    parse_jsonl,
    parse_timestamp,
    read_corpus,
)

DUMP = """<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">
  <siteinfo><sitename>Test</sitename></siteinfo>
  <page>
    <title>Alpha</title><ns>0</ns><id>10</id>
    <revision>
      <id>102</id><timestamp>2011-02-01T00:00:00Z</timestamp>
      <contributor><ip>198.51.100.4</ip></contributor>
      <text xml:space="preserve">Second &lt;ref&gt;A&lt;/ref&gt;</text>
    </revision>
    <revision>
      <id>101</id><timestamp>2011-01-01T00:00:00Z</timestamp>
      <contributor><username>CiteBot</username><id>7</id></contributor>
      <text xml:space="preserve">First</text>
    </revision>
  </page>
  <page>
    <title>Talk:Alpha</title><ns>1</ns><id>11</id>
    <revision><id>103</id><timestamp>2011-01-01T00:00:00Z</timestamp>
      <contributor><username>Someone</username></contributor><text>x</text></revision>
  </page>
  <page>
    <title>Beta</title><ns>0</ns><id>12</id>
    <revision><id>104</id><timestamp>2011-01-01T00:00:00Z</timestamp>
      <contributor><username>Someone</username></contributor><text>#REDIRECT [[Alpha]]</text></revision>
  </page>
  <page>
    <title>Gamma</title><ns>0</ns><id>13</id>
    <revision><id>105</id><timestamp>2011-01-01T00:00:00Z</timestamp>
      <contributor><username>Someone</username></contributor><text>Gamma text</text></revision>
    <revision><id>106</id><timestamp>2011-01-02T00:00:00Z</timestamp>
      <contributor></contributor><text>orphan</text></revision>
  </page>
</mediawiki>
"""


def _line(rid, ts, editor, text="x", aid=1):
    return json.dumps({"article_id": aid, "title": "A", "revision_id": rid, "timestamp": ts,
                       "editor": editor, "text": text})


def test_parse_dump_sorts_filters_and_classifies():
    stats = IngestStats()
    bots = BotList.from_names(["citebot"])
    groups = list(parse_dump(io.BytesIO(DUMP.encode()), bots, stats))
    assert [aid for aid, _ in groups] == [10, 13]
    alpha = groups[0][1]
    assert [r.revision_id for r in alpha] == [101, 102]
    assert alpha[0].editor.kind is EditorKind.BOT and alpha[0].editor.user_id == 7
    assert alpha[1].editor.kind is EditorKind.NONREGISTERED
    assert alpha[1].wikitext == "Second <ref>A</ref>"
    assert stats.resorted_articles == 1
    assert stats.other_namespaces == 1
    assert stats.redirects == 1
    assert stats.skipped_revisions == 1 and stats.reasons["bad contributor"] == 1
    assert [r.revision_id for r in groups[1][1]] == [105]


def test_parse_dump_reports_offset_of_malformed_xml():
    with pytest.raises(DumpParseError) as err:
        list(parse_dump(io.BytesIO(b"<mediawiki><page><title>x</page></mediawiki>")))
    assert err.value.offset > 0


def test_parse_jsonl_groups_and_sorts():
    lines = [
        "# header line",
        _line(2, "2012-01-02T00:00:00Z", {"name": "B"}),
        "",
        _line(1, "2012-01-01T00:00:00Z", {"ip": "203.0.113.9"}),
        _line(5, "2012-01-01T00:00:00Z", {"name": "C"}, aid=2),
    ]
    groups = list(parse_jsonl(io.StringIO("\n".join(lines))))
    assert [(aid, [r.revision_id for r in revs]) for aid, revs in groups] == [(1, [1, 2]), (2, [5])]
    assert groups[0][1][0].editor.kind is EditorKind.NONREGISTERED


def test_parse_jsonl_names_the_bad_line():
    text = _line(1, "2012-01-01T00:00:00Z", {"name": "B"}) + "\n{not json}\n"
    with pytest.raises(JsonlParseError) as err:
        list(parse_jsonl(io.StringIO(text)))
    assert err.value.line == 2


def test_parse_jsonl_rejects_contributor_with_name_and_ip():
    text = _line(1, "2012-01-01T00:00:00Z", {"name": "B", "ip": "1.2.3.4"})
    with pytest.raises(JsonlParseError):
        list(parse_jsonl(io.StringIO(text)))


def test_jsonl_round_trip(fixtures_dir):
    path = fixtures_dir / "reinsert.jsonl"
    groups = list(read_corpus(path, "jsonl"))
    text = export_jsonl_string(groups)
    again = list(parse_jsonl(io.StringIO(text)))
    assert again == groups
    assert export_jsonl_string(again) == text


def test_botlist_union_is_casefolded(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("Alpha\nBOT1\n# comment\n")
    b.write_text("bot1\nGamma\n")
    bots = load_botlist([a, b])
    assert len(bots) == 3
    assert "ALPHA" in bots and "bot1" in bots and "gamma" in bots
    assert len(load_botlist([])) == 0


def test_botlist_missing_file_names_path(tmp_path):
    with pytest.raises(OSError, match="nope.txt"):
        load_botlist([tmp_path / "nope.txt"])


def test_skip_reverted_drops_identity_reverts():
    lines = [
        _line(1, "2012-01-01T00:00:00Z", {"name": "A"}, "good"),
        _line(2, "2012-01-02T00:00:00Z", {"name": "V"}, "vandal"),
        _line(3, "2012-01-03T00:00:00Z", {"name": "A"}, "good"),
    ]
    stats = IngestStats()
    (_, revs), = parse_jsonl(io.StringIO("\n".join(lines)), skip_reverted=True, stats=stats)
    assert [r.revision_id for r in revs] == [1, 2]
    assert stats.reverted_dropped == 1


names = st.one_of(st.none(), st.text(min_size=0, max_size=8))


@given(names, names, st.sets(st.sampled_from(["a", "B", "bot", "x"])))
def test_classify_editor_partitions_contributors(username, ip, botnames):
    bots = BotList.from_names(botnames)
    has_name = bool(username and username.strip())
    has_ip = bool(ip and ip.strip())
    if has_name == has_ip:
        with pytest.raises(InvalidContributorError):
            classify_editor(username, ip, bots)
        return
    e = classify_editor(username, ip, bots)
    if has_ip:
        assert e.kind is EditorKind.NONREGISTERED
    elif username.strip().casefold() in {b.casefold() for b in botnames}:
        assert e.kind is EditorKind.BOT
    else:
        assert e.kind is EditorKind.REGISTERED


@given(st.lists(st.datetimes(min_value=parse_timestamp("2001-01-01T00:00:00Z").replace(tzinfo=None),
                             max_value=parse_timestamp("2030-01-01T00:00:00Z").replace(tzinfo=None)),
                min_size=1, max_size=8))
def test_ingested_timestamps_are_non_decreasing(stamps):
    lines = [_line(i + 1, t.strftime("%Y-%m-%dT%H:%M:%SZ"), {"name": "A"}) for i, t in enumerate(stamps)]
    (_, revs), = parse_jsonl(io.StringIO("\n".join(lines)))
    assert all(a.timestamp <= b.timestamp for a, b in zip(revs, revs[1:]))
