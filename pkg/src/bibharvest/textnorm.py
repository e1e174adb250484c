"""Low-level text normalization shared by the RIS layer and the n-gram pipeline."""

from __future__ import annotations

import re
import unicodedata

_SENTENCE_SPLIT = re.compile(r"[.!?;]")
_NON_ALNUM = re.compile(r"[^a-z0-9]+")
_WS = re.compile(r"\s+")


def fold_to_ascii(text: str) -> str:
    """Strip diacritics; characters without an ASCII decomposition are dropped."""
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def _split_tokens(fragment: str) -> list[str]:
    # single-character and pure-digit tokens carry no term signal
    return [t for t in _NON_ALNUM.split(fragment) if len(t) >= 2 and not t.isdigit()]


def tokenize_sentences(text: str) -> list[list[str]]:
    """Tokenize *text* into sentences of normalized tokens.

    Lowercases, folds diacritics to ASCII, marks sentence boundaries at
    ``. ! ? ;`` and splits tokens on any non-alphanumeric run.  Empty
    sentences are omitted.
    """
    folded = fold_to_ascii(text).lower()
    sentences = []
    for fragment in _SENTENCE_SPLIT.split(folded):
        tokens = _split_tokens(fragment)
        if tokens:
            sentences.append(tokens)
    return sentences


def normalize_text(text: str) -> list[str]:
    """Flat normalized token stream of *text* (sentence structure dropped)."""
    return [tok for sent in tokenize_sentences(text) for tok in sent]


def normalize_key_text(text: str) -> str:
    """Lowercased, ASCII-folded, punctuation-free, single-spaced form of *text*."""
    folded = fold_to_ascii(text).lower()
    return collapse_ws(_NON_ALNUM.sub(" ", folded))
