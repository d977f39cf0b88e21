import random
import re
import string
from datetime import datetime, timezone

import pytest

from litsieve.analysis import CitationIntent, ContributionType, parse_summary
from litsieve.arxiv import PaperRecord
from litsieve.bibtex import make_bibliography, make_bibtex, render_bibliography, unescape
from litsieve.errors import DuplicateKey, EmptyCorpus
from litsieve.llm import FixtureLlmClient
from litsieve.review import find_citations, strip_unknown, synthesize_review
from test_analysis import LISTING


def rec(ident="2401.01234", authors=("Jane Doe", "John Smith"), title="Deep Widgets for X",
        year=2024, category=""):
    pub = datetime(year, 3, 1, tzinfo=timezone.utc) if year else None
    return PaperRecord(ident, 1, title, "abs", list(authors), pub, "", set(), category)


def read_bib(text):
    """Minimal reader for the brace-delimited @type{key, field = {value}, ...} subset."""
    entries = []
    i = 0
    while True:
        m = re.compile(r"@(\w+)\{([^,\s]+),").search(text, i)
        if not m:
            return entries
        etype, key, i = m.group(1), m.group(2), m.end()
        fields = {}
        while True:
            fm = re.compile(r"\s*(\w+)\s*=\s*\{").match(text, i)
            if not fm:
                break
            j, depth = fm.end(), 1
            while depth:
                c = text[j]
                if c == "\\":
                    j += 2
                    continue
                depth += {"{": 1, "}": -1}.get(c, 0)
                j += 1
            raw = text[fm.end():j - 1]
            fields[fm.group(1)] = raw if fm.group(1) in ("url", "eprint") else unescape(raw)
            i = j
            i = text.index(",", i) + 1 if text[i:].lstrip().startswith(",") else i
        assert text[i:].lstrip().startswith("}")
        i = text.index("}", i) + 1
        entries.append((etype, key, fields))


class TestKeys:
    def test_example(self):
        e = make_bibtex(rec())
        assert e.key == "doe2024deep"
        assert e.fields["author"] == "Jane Doe and John Smith"
        assert e.entry_type == "misc"
        assert (e.fields["eprint"], e.fields["archivePrefix"]) == ("2401.01234", "arXiv")

    def test_no_authors(self):
        assert make_bibtex(rec(authors=())).key == "arxiv240101234"

    def test_collision_suffix(self):
        keys = [e.key for e in make_bibliography([rec("2401.00001"), rec("2401.00002"),
                                                  rec("2401.00003")])]
        assert keys == ["doe2024deep", "doe2024deepa", "doe2024deepb"]

    def test_missing_year(self):
        e = make_bibtex(rec(year=None))
        assert e.key == "doe0000deep" and e.fields["year"] == "0000" and e.year_missing

    def test_unicode_and_punctuation(self):
        e = make_bibtex(rec(authors=("José Müller-Lüdenscheidt",), title="“Quoted”: a title"))
        assert e.key == "mullerludenscheidt2024quoted"
        assert re.fullmatch(r"[a-z0-9]+", e.key)

    def test_escaping(self):
        e = make_bibtex(rec(title="50% of R&D costs_{x} #1 $5 ~ ^ \\"))
        assert unescape(e.fields["title"]) == "50% of R&D costs_{x} #1 $5 ~ ^ \\"
        assert "\\%" in e.fields["title"] and "\\&" in e.fields["title"]

    def test_deterministic(self):
        assert make_bibtex(rec()) == make_bibtex(rec())


class TestRender:
    def test_one(self):
        assert render_bibliography([make_bibtex(rec())]).startswith("@misc{doe2024deep,")

    def test_empty(self):
        assert render_bibliography([]) == ""

    def test_duplicate(self):
        e = make_bibtex(rec())
        with pytest.raises(DuplicateKey):
            render_bibliography([e, e])

    def test_field_order_and_sorting(self):
        entries = make_bibliography([rec("2401.00002", authors=("Zed Z",)),
                                     rec("2401.00001", category="cs.CL")])
        text = render_bibliography(entries)
        parsed = read_bib(text)
        assert [k for _, k, _ in parsed] == sorted(e.key for e in entries)
        fields = dict((k, f) for _, k, f in parsed)
        assert list(fields["doe2024deep"]) == ["title", "author", "year", "eprint",
                                               "archivePrefix", "primaryClass", "url"]

    def test_roundtrip_random(self):
        rng = random.Random(4)
        alphabet = string.ascii_letters + " &%$#_{}~^\\é"
        for _ in range(50):
            records = [rec(f"2401.{i:05d}",
                           authors=["".join(rng.choices(string.ascii_letters, k=5)) + " "
                                    + "".join(rng.choices(alphabet, k=6)) for _ in range(rng.randint(0, 3))],
                           title="".join(rng.choices(alphabet, k=20)) + " x",
                           year=rng.choice([None, 1999, 2024]))
                       for i in range(rng.randint(1, 8))]
            entries = make_bibliography(records)
            parsed = read_bib(render_bibliography(entries))
            want = sorted((e.entry_type, e.key, {k: (v if k in ("url", "eprint") else unescape(v))
                                                 for k, v in e.fields.items()}) for e in entries)
            assert sorted(parsed, key=lambda t: t[1]) == sorted(want, key=lambda t: t[1])


class TestReview:
    def _inputs(self):
        records = [rec("2401.00001"), rec("2401.00002", authors=("Ann Lee",), title="Graphs")]
        bib = dict(zip([r.arxiv_id for r in records], make_bibliography(records)))
        s = parse_summary(LISTING)
        summaries = {r.arxiv_id: s for r in records}
        intents = {"2401.00001": CitationIntent.Background, "2401.00002": CitationIntent.Extension}
        contribs = {"2401.00001": ContributionType.Framework, "2401.00002": ContributionType.Dataset}
        return summaries, intents, contribs, bib

    def test_valid_citation(self):
        llm = FixtureLlmClient({"review": "Widgets matter [@doe2024deep]."})
        doc = synthesize_review(*self._inputs(), llm, model_id="m")
        assert doc.cited_keys == {"doe2024deep"} and doc.warnings == []
        prompt = llm.requests[0].prompt
        for piece in ("[@doe2024deep]", "[@lee2024graphs]", "Background", "Extension",
                      "Framework", "Dataset", "problem_statement", "conclusion_recommendations"):
            assert piece in prompt

    def test_unknown_key_stripped_after_repair(self):
        llm = FixtureLlmClient({"review": "A [@ghost2020]. B [@doe2024deep; @ghost2020]."})
        doc = synthesize_review(*self._inputs(), llm, model_id="m")
        assert len(llm.requests) == 2
        assert doc.cited_keys == {"doe2024deep"}
        assert "ghost2020" not in doc.body and doc.warnings
        assert doc.body == "A. B [@doe2024deep]."

    def test_repair_fixes(self):
        llm = FixtureLlmClient({"review": ["X [@ghost2020].", "X [@lee2024graphs]."]})
        doc = synthesize_review(*self._inputs(), llm, model_id="m")
        assert doc.cited_keys == {"lee2024graphs"} and not doc.warnings

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            synthesize_review({}, {}, {}, {}, FixtureLlmClient({}), model_id="m")

    def test_find_citations(self):
        assert find_citations("a [@x1] b [see @y2, p. 3; @z3]. [not a cite]") == ["x1", "y2", "z3"]

    def test_strip_unknown(self):
        assert strip_unknown("a [@x; @y] b [@y]", {"x"}) == "a [@x] b"
