"""BibTeX entries for arXiv preprints."""

from __future__ import annotations

import re
import string
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable

from .arxiv import PaperRecord
from .errors import DuplicateKey

FIELD_ORDER = ("title", "author", "year", "eprint", "archivePrefix", "primaryClass", "url")

_SPECIAL = {
    "\\": r"\textbackslash{}", "{": r"\{", "}": r"\}", "&": r"\&", "%": r"\%",
    "$": r"\$", "#": r"\#", "_": r"\_", "~": r"\textasciitilde{}", "^": r"\textasciicircum{}",
}
_UNESCAPE = {v: k for k, v in _SPECIAL.items()}
_VERBATIM_FIELDS = {"url", "eprint"}


@dataclass
class BibEntry:
    key: str
    fields: dict[str, str]
    entry_type: str = "misc"
    year_missing: bool = field(default=False, compare=False)


def escape(value: str) -> str:
    return "".join(_SPECIAL.get(c, c) for c in value)


def unescape(value: str) -> str:
    pattern = "|".join(re.escape(k) for k in sorted(_UNESCAPE, key=len, reverse=True))
    return re.sub(pattern, lambda m: _UNESCAPE[m.group(0)], value)


def _ascii_alnum(s: str) -> str:
    s = unicodedata.normalize("NFKD", s)
    return "".join(c for c in s.casefold() if c in string.ascii_lowercase or c in string.digits)


def base_key(record: PaperRecord) -> str:
    """lastname + year + first title word, lower-case ASCII letters/digits only."""
    last = ""
    if record.authors:
        tokens = record.authors[0].split()
        last = _ascii_alnum(tokens[-1]) if tokens else ""
    if not last:
        return "arxiv" + re.sub(r"\D", "", record.arxiv_id)
    year = f"{record.published.year:04d}" if record.published else "0000"
    first_word = ""
    for tok in record.title.split():
        first_word = _ascii_alnum(tok)
        if first_word:
            break
    return f"{last}{year}{first_word}"


def _suffixes():
    for letter in string.ascii_lowercase:
        yield letter
    n = 2
    while True:
        for letter in string.ascii_lowercase:
            yield letter * n
        n += 1


def make_bibtex(record: PaperRecord, taken: set[str] | None = None) -> BibEntry:
    """Build a ``@misc`` entry. Keys already in ``taken`` get an a, b, ...
    suffix; the chosen key is added to ``taken``."""
    key = base_key(record)
    if taken is not None:
        if key in taken:
            key = next(key + s for s in _suffixes() if key + s not in taken)
        taken.add(key)
    fields = {
        "title": escape(record.title),
        "author": escape(" and ".join(record.authors)),
        "year": f"{record.published.year:04d}" if record.published else "0000",
        "eprint": record.arxiv_id,
        "archivePrefix": "arXiv",
    }
    if record.primary_category:
        fields["primaryClass"] = escape(record.primary_category)
    fields["url"] = f"https://arxiv.org/abs/{record.arxiv_id}"
    if not record.authors:
        del fields["author"]
    return BibEntry(key, fields, year_missing=record.published is None)


def make_bibliography(records: Iterable[PaperRecord]) -> list[BibEntry]:
    taken: set[str] = set()
    return [make_bibtex(r, taken) for r in records]


def render_bibliography(entries: Iterable[BibEntry]) -> str:
    entries = list(entries)
    seen: set[str] = set()
    for e in entries:
        if e.key in seen:
            raise DuplicateKey(e.key)
        seen.add(e.key)
    blocks = []
    for e in sorted(entries, key=lambda e: e.key):
        lines = [f"@{e.entry_type}{{{e.key},"]
        ordered = [f for f in FIELD_ORDER if f in e.fields] + \
                  [f for f in e.fields if f not in FIELD_ORDER]
        body = [f"  {name} = {{{e.fields[name]}}}" for name in ordered]
        lines.append(",\n".join(body))
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
