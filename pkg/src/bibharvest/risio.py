"""RIS parsing, canonical serialization, and the deduplicated corpus model.

The canonical on-disk form is deliberately narrow: only the fields the
harvesting pipeline consumes (type, title, abstract, keywords, year) are
kept, every tag line is ``XX  - value``, records end with ``ER  - `` and
the whole file is LF-separated ASCII.  Canonical output is a fixpoint:
parsing it and writing it again reproduces the same bytes.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, NewType

from .textnorm import collapse_ws, fold_to_ascii, normalize_key_text

logger = logging.getLogger(__name__)

DedupKey = NewType("DedupKey", str)


class MalformedRecord(Exception):
    """Structural RIS error; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Reference:
    """One bibliographic record.

    Text fields are normalized at construction: ASCII-folded, internal
    whitespace collapsed.  A reference must keep a non-empty title or a
    non-empty abstract after normalization; keywords are deduplicated and
    empties dropped.  ``raw_id`` is backend-assigned metadata and does not
    take part in equality.
    """

    title: str
    abstract: str = ""
    keywords: tuple[str, ...] = ()
    year: int | None = None
    ref_type: str = ""
    raw_id: str | None = field(default=None, compare=False)

    def __post_init__(self):
        title = collapse_ws(fold_to_ascii(self.title))
        abstract = collapse_ws(fold_to_ascii(self.abstract))
        if not title and not abstract:
            raise ValueError("reference requires a non-empty title or abstract")
        cleaned: list[str] = []
        for kw in self.keywords:
            kw = collapse_ws(fold_to_ascii(kw))
            if kw and kw not in cleaned:
                cleaned.append(kw)
        object.__setattr__(self, "title", title)
        object.__setattr__(self, "abstract", abstract)
        object.__setattr__(self, "keywords", tuple(cleaned))
        object.__setattr__(self, "ref_type", collapse_ws(fold_to_ascii(self.ref_type)))


@dataclass(frozen=True)
class Corpus:
    """Deduplicated reference collection with per-key provenance.

    ``provenance[key]`` is the iteration index (>= 1) at which the
    reference first entered the corpus.
    """

    entries: dict[DedupKey, Reference]
    provenance: dict[DedupKey, int]

    def __post_init__(self):
        if self.entries.keys() != self.provenance.keys():
            raise ValueError("corpus entries and provenance keys differ")
        if any(it < 1 for it in self.provenance.values()):
            raise ValueError("provenance iterations must be >= 1")

    @staticmethod
    def empty() -> "Corpus":
        return Corpus({}, {})

    def __len__(self) -> int:
        return len(self.entries)

    def references(self) -> list[Reference]:
        return list(self.entries.values())

    def validate_keys(self) -> None:
        """Check every stored key is recomputable from its reference."""
        for key, ref in self.entries.items():
            if dedup_key(ref) != key:
                raise ValueError(f"stored key {key!r} does not match its reference")


def dedup_key(ref: Reference) -> DedupKey:
    """Stable identity of a reference: normalized title, or a hash of the abstract.

    The normalized title is lowercase, diacritic-folded, punctuation-free and
    single-spaced.  When that is empty the key falls back to ``ab:`` plus the
    first 16 hex digits of a SHA-256 of the normalized abstract.
    """
    key = normalize_key_text(ref.title)
    if key:
        return DedupKey(key)
    digest = hashlib.sha256(normalize_key_text(ref.abstract).encode("utf-8")).hexdigest()
    return DedupKey("ab:" + digest[:16])


def merge(corpus: Corpus, refs: Iterable[Reference], iteration: int) -> tuple[Corpus, int]:
    """Union *refs* into *corpus*; first writer wins on key collisions.

    Returns the new corpus and the number of keys actually added.  Existing
    entries keep their original fields and provenance.
    """
    if iteration < 1:
        raise ValueError("iteration must be >= 1")
    entries = dict(corpus.entries)
    provenance = dict(corpus.provenance)
    added = 0
    for ref in refs:
        key = dedup_key(ref)
        if key not in entries:
            entries[key] = ref
            provenance[key] = iteration
            added += 1
    return Corpus(entries, provenance), added


_TAG_VALUE = re.compile(r"^([A-Z][A-Z0-9])  - (.*)$")
_TAG_EMPTY = re.compile(r"^([A-Z][A-Z0-9])  -\s*$")
_TAG_LIKE = re.compile(r"^[A-Z][A-Z0-9]\s*-")

_YEAR = re.compile(r"\d{4}")


def _parse_year(value: str) -> int | None:
    m = _YEAR.search(value)
    if m:
        return int(m.group())
    try:
        return int(value.strip())
    except ValueError:
        return None


def _finalize(tags: dict[str, list[str]]) -> Reference | None:
    title = tags.get("TI", [""])[0]
    abstract = tags.get("AB", [""])[0]
    year = _parse_year(tags["PY"][0]) if "PY" in tags else None
    try:
        return Reference(
            title=title,
            abstract=abstract,
            keywords=tuple(tags.get("KW", [])),
            year=year,
            ref_type=tags.get("TY", [""])[0],
        )
    except ValueError:
        return None


def parse_ris(text: str) -> list[Reference]:
    """Parse RIS-formatted *text* into references, in file order.

    Unknown tags are ignored.  Lines that do not start a tag are folded into
    the previous tag's value with a single space.  Records whose title and
    abstract are both empty are skipped with a warning, not a hard error; a
    record missing its ``ER  - `` terminator or a near-miss tag line raises
    :class:`MalformedRecord` with the line number.
    """
    refs: list[Reference] = []
    tags: dict[str, list[str]] | None = None
    last_tag: str | None = None
    last_content_line = 0
    skipped = 0

    for lineno, raw in enumerate(text.lstrip("﻿").split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        m = _TAG_VALUE.match(line) or _TAG_EMPTY.match(line)
        if m:
            tag = m.group(1)
            value = m.group(2) if m.lastindex and m.lastindex >= 2 else ""
            last_content_line = lineno
            if tag == "ER":
                if tags is not None:
                    ref = _finalize(tags)
                    if ref is None:
                        skipped += 1
                    else:
                        refs.append(ref)
                tags = None
                last_tag = None
                continue
            if tags is None:
                tags = {}
            if tag == "KW":
                tags.setdefault("KW", []).append(value)
            else:
                # first occurrence wins for single-valued tags
                tags.setdefault(tag, [value])
            last_tag = tag
        elif _TAG_LIKE.match(line):
            raise MalformedRecord(f"tag line does not match 'XX  - value': {line!r}", lineno)
        elif tags is not None and last_tag is not None:
            # continuation of the previous tag value
            last_content_line = lineno
            values = tags[last_tag]
            values[-1] = values[-1] + " " + line.strip()
        # non-tag lines outside any record are preamble junk; ignore

    if tags is not None:
        raise MalformedRecord("record not terminated by 'ER  - '", last_content_line)
    if skipped:
        logger.warning("parse_ris: skipped %d records with empty title and abstract", skipped)
    return refs


def write_ris(corpus: Corpus) -> str:
    """Canonical RIS serialization: records sorted by dedup key, fixed tag order."""
    parts: list[str] = []
    for key in sorted(corpus.entries):
        ref = corpus.entries[key]
        lines: list[str] = []
        if ref.ref_type:
            lines.append(f"TY  - {ref.ref_type}")
        if ref.title:
            lines.append(f"TI  - {ref.title}")
        if ref.abstract:
            lines.append(f"AB  - {ref.abstract}")
        for kw in ref.keywords:
            lines.append(f"KW  - {kw}")
        if ref.year is not None:
            lines.append(f"PY  - {ref.year}")
        lines.append("ER  - ")
        parts.append("\n".join(lines) + "\n")
    return "".join(parts)
