import random
from datetime import datetime, timezone

import httpx
import pytest

from feedutil import atom_entry, atom_feed
from litsieve.arxiv import (ArxivClient, PaperRecord, build_query, dedup, parse_atom_feed,
                            split_identifier)
from litsieve.cache import StageCache
from litsieve.errors import FeedMalformed, FetchFailed
from litsieve.transport import RequestCounter, Throttle, make_client


def test_build_query():
    assert build_query("semantic similarity", 20).endswith(
        "/api/query?search_query=all:%22semantic+similarity%22&start=0&max_results=20")
    assert build_query("cosine", 1).endswith("max_results=1")
    assert "%22C%2B%2B+parsing%22" in build_query("C++ parsing", 20)


def test_build_query_preconditions():
    with pytest.raises(ValueError):
        build_query("  ", 5)
    with pytest.raises(ValueError):
        build_query("x", 0)


@pytest.mark.parametrize("raw, expected", [
    ("http://arxiv.org/abs/2401.01234v3", ("2401.01234", 3)),
    ("http://arxiv.org/abs/2401.01234", ("2401.01234", 1)),
    ("http://arxiv.org/abs/hep-th/9901001v2", ("hep-th/9901001", 2)),
    ("http://arxiv.org/abs/math.GT/0309136v1", ("math.GT/0309136", 1)),
    ("2312.12345v12", ("2312.12345", 12)),
])
def test_split_identifier(raw, expected):
    assert split_identifier(raw) == expected


def test_parse_two_entries():
    xml = atom_feed([
        atom_entry("2401.01234", "Deep Widgets", "Line one\n   line two.", version=3,
                   authors=("Jane Doe", "John Smith")),
        atom_entry("hep-th/9901001", "Old  Strings", "Strings.", published="1999-01-04T00:00:00Z",
                   category="hep-th"),
    ])
    a, b = parse_atom_feed(xml, keyword="kw")
    assert (a.arxiv_id, a.version, a.title) == ("2401.01234", 3, "Deep Widgets")
    assert a.abstract == "Line one line two."
    assert a.authors == ["Jane Doe", "John Smith"]
    assert a.published == datetime(2024, 1, 5, 18, tzinfo=timezone.utc)
    assert a.pdf_url == "http://arxiv.org/pdf/2401.01234v3"
    assert a.source_keywords == {"kw"} and a.primary_category == "cs.IR"
    assert (b.arxiv_id, b.title, b.primary_category) == ("hep-th/9901001", "Old Strings", "hep-th")
    assert a.has_valid_id and b.has_valid_id


def test_parse_missing_pdf_and_title():
    xml = atom_feed([atom_entry("2401.00001", "T", "A", pdf=False),
                     atom_entry("2401.00002", "", "A")])
    recs = parse_atom_feed(xml)
    assert len(recs) == 1 and recs[0].pdf_url == ""


def test_truncated_xml():
    xml = atom_feed([atom_entry("2401.00001", "T", "A")])
    with pytest.raises(FeedMalformed):
        parse_atom_feed(xml[: len(xml) // 2])


def test_empty_feed():
    assert parse_atom_feed(atom_feed([])) == []


def _rec(ident, version=1, kw="A", title=None):
    return PaperRecord(ident, version, title or f"title {ident}", "abs", ["X Y"],
                       None, "", {kw})


class TestDedup:
    def test_version_merge(self):
        out = dedup([_rec("2401.01234", 1, "A"), _rec("2401.01234", 2, "B")])
        assert len(out) == 1
        assert out[0].version == 2 and out[0].source_keywords == {"A", "B"}

    def test_lower_version_later_keeps_higher(self):
        out = dedup([_rec("2401.01234", 3, "A"), _rec("2401.01234", 1, "B")])
        assert out[0].version == 3 and out[0].source_keywords == {"A", "B"}

    def test_empty(self):
        assert dedup([]) == []

    def test_same_title_distinct_ids(self):
        out = dedup([_rec("2401.00001", title="Same"), _rec("2401.00002", title="Same")])
        assert len(out) == 2

    def test_title_fallback(self):
        out = dedup([_rec("bogus", title="A  Title", kw="A"), _rec("bogus2", title="a title", kw="B")])
        assert len(out) == 1 and out[0].source_keywords == {"A", "B"}

    def test_order_of_first_occurrence(self):
        out = dedup([_rec("2401.00003"), _rec("2401.00001"), _rec("2401.00003", 2)])
        assert [r.arxiv_id for r in out] == ["2401.00003", "2401.00001"]

    def test_does_not_mutate_input(self):
        recs = [_rec("2401.00001", kw="A"), _rec("2401.00001", kw="B")]
        dedup(recs)
        assert recs[0].source_keywords == {"A"}

    def test_randomized_idempotent_and_bruteforce(self):
        rng = random.Random(1)
        for _ in range(200):
            recs = [_rec(f"2401.{rng.randint(0, 15):05d}", rng.randint(1, 4), rng.choice("ABCD"))
                    for _ in range(rng.randint(0, 30))]
            once = dedup(recs)
            assert dedup(once) == once
            assert len(once) <= len(recs)
            groups = {}
            for r in recs:
                groups.setdefault(r.arxiv_id, []).append(r)
            assert {r.arxiv_id for r in once} == set(groups)
            for r in once:
                assert r.version == max(g.version for g in groups[r.arxiv_id])
                assert r.source_keywords == set().union(*(g.source_keywords for g in groups[r.arxiv_id]))


def test_record_json_roundtrip():
    rec = parse_atom_feed(atom_feed([atom_entry("2401.01234", "T", "A")]), "kw")[0]
    assert PaperRecord.from_json(rec.to_json()) == rec


def test_record_invariants():
    with pytest.raises(ValueError):
        PaperRecord("2401.00001", 0, "T", "", [], None, "")
    with pytest.raises(ValueError):
        PaperRecord("2401.00001", 1, "  ", "", [], None, "")


class TestClient:
    def _client(self, handler, tmp_path, delay_ms=0):
        counter = RequestCounter()
        sleeps = []
        http = make_client(httpx.MockTransport(handler), counter)
        throttle = Throttle(delay_ms, sleep=sleeps.append)
        return ArxivClient(http, StageCache(tmp_path), throttle, sleep=sleeps.append), counter, sleeps

    def test_fetch_caps_and_caches(self, tmp_path):
        feed = atom_feed([atom_entry(f"2401.0000{i}", f"T{i}", "A") for i in range(5)])
        client, counter, _ = self._client(lambda r: httpx.Response(200, content=feed), tmp_path)
        assert len(client.search("kw", 3)) == 3
        client.search("kw", 3)
        assert counter.count == 1

    def test_rate_limit_spacing(self, tmp_path):
        feed = atom_feed([])
        client, counter, sleeps = self._client(lambda r: httpx.Response(200, content=feed),
                                               tmp_path, delay_ms=3000)
        client.fetch_all(["a", "b", "c"], 5)
        assert counter.count == 3
        assert len(sleeps) == 2 and all(0 < s <= 3.0 for s in sleeps)

    def test_retry_on_5xx(self, tmp_path):
        feed = atom_feed([atom_entry("2401.00001", "T", "A")])
        responses = iter([httpx.Response(503), httpx.Response(500), httpx.Response(200, content=feed)])
        client, counter, sleeps = self._client(lambda r: next(responses), tmp_path)
        assert len(client.search("kw", 5)) == 1
        assert counter.count == 3 and sleeps == [1.0, 2.0]

    def test_gives_up(self, tmp_path):
        client, counter, _ = self._client(lambda r: httpx.Response(502), tmp_path)
        with pytest.raises(FetchFailed):
            client.search("kw", 5)
        assert counter.count == 4

    def test_client_error_not_retried(self, tmp_path):
        client, counter, _ = self._client(lambda r: httpx.Response(400), tmp_path)
        with pytest.raises(FetchFailed):
            client.search("kw", 5)
        assert counter.count == 1
