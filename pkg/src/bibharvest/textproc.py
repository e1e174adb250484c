"""Keyword extraction and co-occurrence counting over a reference corpus.

The pipeline is: tokenize every reference (title + abstract + author
keywords, each author keyword as its own sentence), enumerate 1- to 3-gram
candidates that do not cross sentence boundaries and do not start or end
with a stopword, score them with a C-value style termhood measure, and keep
the top ``n_k``.  All operations are pure functions of their inputs; the
stopword list is a versioned package asset (``stopwords.txt``) and part of
the determinism contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .risio import Corpus, Reference
from .textnorm import normalize_text, tokenize_sentences

__all__ = [
    "STOPWORDS",
    "TermCandidate",
    "KeywordSet",
    "CooccurrenceMatrix",
    "EmptyCorpus",
    "normalize_text",
    "extract_candidates",
    "score_terms",
    "select_keywords",
    "cooccurrences",
    "reference_sentences",
    "contains_phrase",
    "reference_contains",
    "keywords_to_kw",
    "keywords_from_kw",
]

Phrase = tuple[str, ...]

MAX_NGRAM = 3
# candidates seen in fewer references than this are noise once the corpus
# has at least MIN_CORPUS_FOR_FLOOR entries
DOC_FREQ_FLOOR = 2
MIN_CORPUS_FOR_FLOOR = 10


def _load_stopwords() -> frozenset[str]:
    text = resources.files(__package__).joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = _load_stopwords()


class EmptyCorpus(Exception):
    """Keyword extraction needs at least one reference."""


@dataclass(frozen=True)
class TermCandidate:
    phrase: Phrase
    freq: int
    doc_freq: int
    score: float = 0.0


@dataclass(frozen=True)
class KeywordSet:
    """Ordered top-``n_k`` terms, ranked by score descending then phrase ascending."""

    terms: tuple[tuple[Phrase, float], ...]
    n_k: int

    def __post_init__(self):
        if self.n_k < 1:
            raise ValueError("n_k must be >= 1")
        if len(self.terms) > self.n_k:
            raise ValueError("keyword set larger than its configured n_k")
        for (p1, s1), (p2, s2) in zip(self.terms, self.terms[1:]):
            if (-s1, p1) >= (-s2, p2):
                raise ValueError("keyword set not strictly ordered")

    @property
    def phrases(self) -> tuple[Phrase, ...]:
        return tuple(p for p, _ in self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    @staticmethod
    def from_phrases(phrases: Iterable[str], n_k: int | None = None) -> "KeywordSet":
        """Build a score-0 keyword set from raw phrase strings (seed queries)."""
        unique: list[Phrase] = []
        for phrase in phrases:
            tokens = tuple(phrase.lower().split())
            if tokens and tokens not in unique:
                unique.append(tokens)
        if not unique:
            raise ValueError("no non-empty phrases given")
        unique.sort()
        size = n_k if n_k is not None else len(unique)
        return KeywordSet(tuple((p, 0.0) for p in unique), size)


@dataclass(frozen=True)
class CooccurrenceMatrix:
    """Symmetric reference-level co-occurrence counts; diagonal is doc_freq."""

    terms: tuple[Phrase, ...]
    counts: np.ndarray

    def sum_offdiagonal(self) -> int:
        return int(self.counts.sum() - np.trace(self.counts))


@lru_cache(maxsize=None)
def reference_sentences(ref: Reference) -> tuple[Phrase, ...]:
    """Tokenized sentences of a reference's combined text.

    Title and abstract are sentence-split normally; each author keyword
    phrase forms its own sentence.
    """
    sentences = [tuple(s) for s in tokenize_sentences(ref.title)]
    sentences += [tuple(s) for s in tokenize_sentences(ref.abstract)]
    for kw in ref.keywords:
        tokens = tuple(normalize_text(kw))
        if tokens:
            sentences.append(tokens)
    return tuple(sentences)


@lru_cache(maxsize=None)
def _reference_ngram_counts(ref: Reference) -> dict[Phrase, int]:
    counts: dict[Phrase, int] = {}
    for sent in reference_sentences(ref):
        length = len(sent)
        for n in range(1, MAX_NGRAM + 1):
            for i in range(length - n + 1):
                gram = sent[i : i + n]
                if gram[0] in STOPWORDS or gram[-1] in STOPWORDS:
                    continue
                counts[gram] = counts.get(gram, 0) + 1
    return counts


@lru_cache(maxsize=None)
def _reference_token_set(ref: Reference) -> frozenset[str]:
    return frozenset(tok for sent in reference_sentences(ref) for tok in sent)


def extract_candidates(corpus: Corpus) -> list[TermCandidate]:
    """All 1..3-gram candidates of the corpus with corpus-wide tallies.

    N-grams never cross sentence boundaries and never start or end with a
    stopword (interior stopwords are allowed).  For corpora of at least
    10 references, candidates appearing in a single reference are dropped.
    """
    if not corpus.entries:
        raise EmptyCorpus("cannot extract keywords from an empty corpus")
    freq: dict[Phrase, int] = {}
    doc_freq: dict[Phrase, int] = {}
    for ref in corpus.entries.values():
        for gram, count in _reference_ngram_counts(ref).items():
            freq[gram] = freq.get(gram, 0) + count
            doc_freq[gram] = doc_freq.get(gram, 0) + 1
    floor = DOC_FREQ_FLOOR if len(corpus) >= MIN_CORPUS_FOR_FLOOR else 1
    return [
        TermCandidate(gram, freq[gram], doc_freq[gram])
        for gram in sorted(freq)
        if doc_freq[gram] >= floor
    ]


def _strict_subphrases(phrase: Phrase) -> set[Phrase]:
    subs: set[Phrase] = set()
    for n in range(1, len(phrase)):
        for i in range(len(phrase) - n + 1):
            subs.add(phrase[i : i + n])
    return subs


def score_terms(candidates: Sequence[TermCandidate]) -> list[TermCandidate]:
    """C-value termhood scores.

    ``score(t) = log2(|t|+1) * freq(t)`` when no candidate strictly contains
    t as a contiguous sub-phrase; otherwise the frequency is discounted by
    the mean frequency of those containing candidates.  Negative raw scores
    clamp to 0.
    """
    super_count: dict[Phrase, int] = {}
    super_freq: dict[Phrase, int] = {}
    for cand in candidates:
        for sub in _strict_subphrases(cand.phrase):
            super_count[sub] = super_count.get(sub, 0) + 1
            super_freq[sub] = super_freq.get(sub, 0) + cand.freq

    scored: list[TermCandidate] = []
    for cand in candidates:
        weight = math.log2(len(cand.phrase) + 1)
        n_super = super_count.get(cand.phrase, 0)
        if n_super == 0:
            raw = weight * cand.freq
        else:
            raw = weight * (cand.freq - super_freq[cand.phrase] / n_super)
        scored.append(
            TermCandidate(cand.phrase, cand.freq, cand.doc_freq, max(raw, 0.0))
        )
    return scored


def select_keywords(scored: Sequence[TermCandidate], n_k: int) -> KeywordSet:
    """Top ``n_k`` terms by (score desc, phrase asc); fewer if fewer exist.

    Scores are rounded to 6 decimal places before ranking so that the
    serialized ``.kw`` form is lossless.
    """
    if n_k < 1:
        raise ValueError("n_k must be >= 1")
    best: dict[Phrase, float] = {}
    for cand in scored:
        score = round(cand.score, 6)
        if cand.phrase not in best or score > best[cand.phrase]:
            best[cand.phrase] = score
    ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))
    return KeywordSet(tuple(ranked[:n_k]), n_k)


def contains_phrase(sentences: Sequence[Phrase], phrase: Phrase) -> bool:
    """True if *phrase* occurs as a contiguous token run inside one sentence."""
    n = len(phrase)
    if n == 0:
        return False
    first = phrase[0]
    for sent in sentences:
        if n == 1:
            if first in sent:
                return True
            continue
        for i in range(len(sent) - n + 1):
            if sent[i] == first and sent[i : i + n] == phrase:
                return True
    return False


def reference_contains(ref: Reference, phrase: Phrase) -> bool:
    """True if the reference's combined text contains *phrase* (within a sentence)."""
    tokens = _reference_token_set(ref)
    if any(tok not in tokens for tok in phrase):
        return False
    return contains_phrase(reference_sentences(ref), phrase)


def cooccurrences(corpus: Corpus, terms: Sequence[Phrase]) -> CooccurrenceMatrix:
    """Reference-level co-occurrence counts for *terms*.

    ``counts[i][j]`` (i != j) is the number of references whose text contains
    both phrases as contiguous token runs; the diagonal is each term's
    document frequency.
    """
    if not terms:
        raise ValueError("terms must be non-empty")
    if len(set(terms)) != len(terms):
        raise ValueError("terms must be duplicate-free")
    k = len(terms)
    counts = np.zeros((k, k), dtype=np.int64)
    for ref in corpus.entries.values():
        present = [i for i, t in enumerate(terms) if reference_contains(ref, t)]
        for i in present:
            counts[i, i] += 1
        for i, j in combinations(present, 2):
            counts[i, j] += 1
            counts[j, i] += 1
    return CooccurrenceMatrix(tuple(terms), counts)


def keywords_to_kw(keywords: KeywordSet) -> str:
    """Serialize one term per line: ``score<TAB>token token token``."""
    return "".join(f"{score:.6f}\t{' '.join(phrase)}\n" for phrase, score in keywords.terms)


def keywords_from_kw(text: str, n_k: int | None = None) -> KeywordSet:
    """Parse the ``.kw`` format back into a KeywordSet."""
    terms: list[tuple[Phrase, float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            score_part, phrase_part = line.split("\t", 1)
            score = float(score_part)
            phrase = tuple(phrase_part.split())
        except ValueError as exc:
            raise ValueError(f"bad .kw line {lineno}: {line!r}") from exc
        if not phrase:
            raise ValueError(f"bad .kw line {lineno}: empty phrase")
        terms.append((phrase, score))
    size = n_k if n_k is not None else max(len(terms), 1)
    return KeywordSet(tuple(terms), size)
