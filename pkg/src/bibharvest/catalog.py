"""Catalog backends answering keyword queries with bibliographic references.

Two backends share the same ``search(QuerySpec)`` surface: a seeded
synthetic catalog with latent topic structure (tests, convergence studies,
offline work) and a generic JSON-over-HTTP catalog with pagination, retry
and rate limiting.  ``fetch_for_keywords`` runs one search per keyword and
returns the deduplicated union.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Protocol

import requests

from .risio import Reference, dedup_key
from .textnorm import normalize_text
from .textproc import STOPWORDS, KeywordSet, contains_phrase, reference_sentences

logger = logging.getLogger(__name__)

_CONSONANTS = "bcdfglmnprstvz"
_VOWELS = "aeiou"


class BackendUnavailable(Exception):
    """A catalog request could not be served, retries included."""


class AuthMissing(Exception):
    """A bearer token environment variable is configured but unset."""


@dataclass(frozen=True)
class QuerySpec:
    keyword: str
    limit: int

    def __post_init__(self):
        if self.limit < 1:
            raise ValueError("limit must be >= 1")
        if not normalize_text(self.keyword):
            raise ValueError(f"keyword is empty after normalization: {self.keyword!r}")


class Backend(Protocol):
    def search(self, q: QuerySpec) -> list[Reference]: ...


@dataclass(frozen=True)
class SyntheticCatalogSpec:
    seed: int
    n_topics: int
    vocab_per_topic: int
    n_docs: int
    words_per_doc: int
    cross_topic_leak: float

    def __post_init__(self):
        for name in ("n_topics", "vocab_per_topic", "n_docs", "words_per_doc"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.cross_topic_leak <= 1.0:
            raise ValueError("cross_topic_leak must be in [0, 1]")


def _make_words(rng: random.Random, count: int) -> list[str]:
    """Distinct pronounceable 3-syllable words; stopwords are skipped."""
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3))
        if word in seen or word in STOPWORDS:
            continue
        seen.add(word)
        words.append(word)
    return words


def _unrank_triple(j: int, v: int) -> tuple[int, int, int]:
    """j-th ordered triple of distinct indices below v (wraps past v(v-1)(v-2))."""
    if v < 3:
        return j % v, (j + 1) % v, (j + 2) % v
    m = j % (v * (v - 1) * (v - 2))
    a = m % v
    m //= v
    b = m % (v - 1)
    m //= v - 1
    c = m % (v - 2)
    if b >= a:
        b += 1
    lo, hi = sorted((a, b))
    if c >= lo:
        c += 1
    if c >= hi:
        c += 1
    return a, b, c


class SyntheticCatalog:
    """Deterministic in-memory catalog generated from a SyntheticCatalogSpec.

    Documents are assigned a topic round-robin.  Each topic owns a disjoint
    vocabulary and a list of two-word phrases; a document's title is three
    distinct topic phrases (unique per document by construction), its
    abstract draws ``words_per_doc`` tokens from the topic vocabulary, and
    with probability ``cross_topic_leak`` one phrase of the next topic is
    appended as an extra sentence.  Search returns exactly the documents
    whose text contains the query phrase, in generation order.
    """

    def __init__(self, spec: SyntheticCatalogSpec):
        self.spec = spec
        rng = random.Random(spec.seed)
        pool = _make_words(rng, spec.n_topics * spec.vocab_per_topic)
        v = spec.vocab_per_topic
        self.topic_vocab = [pool[t * v : (t + 1) * v] for t in range(spec.n_topics)]
        if v > 1:
            self.topic_phrases = [
                [(vocab[i], vocab[(i + 1) % v]) for i in range(v)] for vocab in self.topic_vocab
            ]
        else:
            self.topic_phrases = [[(vocab[0],)] for vocab in self.topic_vocab]

        refs: list[Reference] = []
        for i in range(spec.n_docs):
            topic = i % spec.n_topics
            doc_rng = random.Random(f"{spec.seed}/{i}")
            phrases = self.topic_phrases[topic]
            a, b, c = _unrank_triple(i // spec.n_topics, len(phrases))
            title_phrases = [phrases[a], phrases[b], phrases[c]]
            title = " ".join(w for p in title_phrases for w in p)
            body = doc_rng.choices(self.topic_vocab[topic], k=spec.words_per_doc)
            abstract = " ".join(body)
            if doc_rng.random() < spec.cross_topic_leak:
                leak = doc_rng.choice(self.topic_phrases[(topic + 1) % spec.n_topics])
                abstract = abstract + ". " + " ".join(leak)
            keywords = [" ".join(p) for p in title_phrases]
            refs.append(
                Reference(
                    title=title,
                    abstract=abstract,
                    keywords=tuple(dict.fromkeys(keywords)),
                    year=2000 + i % 25,
                    ref_type="JOUR",
                )
            )
        self.references: tuple[Reference, ...] = tuple(refs)

        self._token_index: dict[str, list[int]] = {}
        for i, ref in enumerate(self.references):
            for tok in {t for sent in reference_sentences(ref) for t in sent}:
                self._token_index.setdefault(tok, []).append(i)

    def search(self, q: QuerySpec) -> list[Reference]:
        phrase = tuple(normalize_text(q.keyword))
        postings = [self._token_index.get(tok) for tok in set(phrase)]
        if any(p is None for p in postings):
            return []
        candidates = set(postings[0])
        for p in postings[1:]:
            candidates &= set(p)
        out: list[Reference] = []
        for i in sorted(candidates):
            ref = self.references[i]
            if len(phrase) == 1 or contains_phrase(reference_sentences(ref), phrase):
                out.append(ref)
                if len(out) >= q.limit:
                    break
        return out

    def phrase_strings(self) -> list[str]:
        return [" ".join(p) for phrases in self.topic_phrases for p in phrases]


def generate_synthetic(spec: SyntheticCatalogSpec) -> SyntheticCatalog:
    return SyntheticCatalog(spec)


@dataclass(frozen=True)
class HttpCatalogConfig:
    base_url: str
    page_size: int = 50
    max_retries: int = 3
    min_request_interval_ms: int = 0
    auth_token_env: str | None = None

    def __post_init__(self):
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.min_request_interval_ms < 0:
            raise ValueError("min_request_interval_ms must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _item_to_reference(item: Mapping) -> Reference | None:
    keywords = item.get("keywords") or []
    if not isinstance(keywords, list):
        keywords = []
    raw_id = item.get("id")
    try:
        return Reference(
            title=str(item.get("title") or ""),
            abstract=str(item.get("abstract") or ""),
            keywords=tuple(str(k) for k in keywords),
            year=item.get("year") if isinstance(item.get("year"), int) else None,
            ref_type=str(item.get("type") or ""),
            raw_id=str(raw_id) if raw_id is not None else None,
        )
    except ValueError:
        return None


class HttpCatalog:
    """Generic JSON search endpoint client.

    Pages through ``GET {base_url}/search?query=...&limit=...&offset=...``
    until the requested number of items or an empty page.  Transient
    failures (HTTP 429/5xx, timeouts, connection errors) are retried up to
    ``max_retries`` times with exponential backoff starting at the minimum
    request interval; all requests, concurrent ones included, are spaced at
    least ``min_request_interval_ms`` apart.
    """

    def __init__(self, config: HttpCatalogConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def _headers(self) -> dict[str, str]:
        env = self.config.auth_token_env
        if not env:
            return {}
        token = os.environ.get(env)
        if not token:
            raise AuthMissing(f"environment variable {env} is not set")
        return {"Authorization": f"Bearer {token}"}

    def _wait_turn(self) -> None:
        interval = self.config.min_request_interval_ms / 1000.0
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_allowed)
            self._next_allowed = start + interval
        if start > now:
            time.sleep(start - now)

    def _get_page(self, keyword: str, limit: int, offset: int, headers) -> list:
        url = self.config.base_url.rstrip("/") + "/search"
        params = {"query": keyword, "limit": limit, "offset": offset}
        backoff = self.config.min_request_interval_ms / 1000.0
        attempts = 0
        while True:
            self._wait_turn()
            error: str
            try:
                resp = self._session.get(url, params=params, headers=headers, timeout=30)
            except requests.RequestException as exc:
                error = f"request failed: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        payload = resp.json()
                    except ValueError as exc:
                        raise BackendUnavailable(f"invalid JSON from {url}: {exc}") from exc
                    if not isinstance(payload, list):
                        raise BackendUnavailable(f"expected a JSON array from {url}")
                    return payload
                if resp.status_code != 429 and not 500 <= resp.status_code < 600:
                    raise BackendUnavailable(f"HTTP {resp.status_code} from {url}")
                error = f"HTTP {resp.status_code}"
            attempts += 1
            if attempts > self.config.max_retries:
                raise BackendUnavailable(f"{error} after {self.config.max_retries} retries")
            logger.warning("retrying %s (%s), attempt %d", url, error, attempts)
            if backoff > 0:
                time.sleep(backoff)
                backoff *= 2

    def search(self, q: QuerySpec) -> list[Reference]:
        headers = self._headers()
        items: list = []
        page = self.config.page_size
        k = 0
        while len(items) < q.limit:
            want = min(page, q.limit - len(items))
            batch = self._get_page(q.keyword, want, k * page, headers)
            if not batch:
                break
            items.extend(batch)
            k += 1
        refs = []
        skipped = 0
        for item in items[: q.limit]:
            ref = _item_to_reference(item)
            if ref is None:
                skipped += 1
            else:
                refs.append(ref)
        if skipped:
            logger.warning("search %r: skipped %d unusable items", q.keyword, skipped)
        return refs


def http_search(config: HttpCatalogConfig, q: QuerySpec) -> list[Reference]:
    """One-shot search against an HTTP catalog (no shared rate-limit state)."""
    return HttpCatalog(config).search(q)


def search(backend: Backend, q: QuerySpec) -> list[Reference]:
    return backend.search(q)


def fetch_for_keywords(
    backend: Backend,
    keywords: KeywordSet,
    per_kw_limit: int,
    parallelism: int = 1,
) -> tuple[list[Reference], list[str]]:
    """Search every keyword and return the deduplicated union with warnings.

    Results keep keyword-rank order, then backend order, so concurrent and
    serial execution agree.  A keyword whose search fails is recorded as a
    warning; only when every keyword fails is BackendUnavailable raised.
    """
    if len(keywords) == 0:
        raise ValueError("keywords must be non-empty")
    warnings: list[str] = []
    queries: list[tuple[str, QuerySpec]] = []
    for phrase in keywords.phrases:
        text = " ".join(phrase)
        try:
            queries.append((text, QuerySpec(text, per_kw_limit)))
        except ValueError as exc:
            warnings.append(f"keyword {text!r} skipped: {exc}")
    if not queries:
        raise ValueError("no usable keywords to query")

    def one(query: QuerySpec) -> list[Reference] | Exception:
        try:
            return backend.search(query)
        except (BackendUnavailable, AuthMissing) as exc:
            return exc

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(one, (q for _, q in queries)))
    else:
        outcomes = [one(q) for _, q in queries]

    refs: list[Reference] = []
    seen: set[str] = set()
    any_success = False
    last_error: Exception | None = None
    for (text, _), outcome in zip(queries, outcomes):
        if isinstance(outcome, Exception):
            warnings.append(f"keyword {text!r} failed: {outcome}")
            last_error = outcome
            continue
        any_success = True
        for ref in outcome:
            key = dedup_key(ref)
            if key not in seen:
                seen.add(key)
                refs.append(ref)
    if not any_success and last_error is not None:
        raise BackendUnavailable("all keyword searches failed") from last_error
    return refs, warnings


def make_backend(config: Mapping) -> Backend:
    """Build a backend from a run-config mapping (``backend`` key selects the kind)."""
    kind = config.get("backend")
    if kind == "synthetic":
        spec = SyntheticCatalogSpec(
            seed=config["seed"],
            n_topics=config["n_topics"],
            vocab_per_topic=config["vocab_per_topic"],
            n_docs=config["n_docs"],
            words_per_doc=config["words_per_doc"],
            cross_topic_leak=config["cross_topic_leak"],
        )
        return generate_synthetic(spec)
    if kind == "http":
        http_config = HttpCatalogConfig(
            base_url=config["base_url"],
            page_size=config.get("page_size", 50),
            max_retries=config.get("max_retries", 3),
            min_request_interval_ms=config.get("min_request_interval_ms", 0),
            auth_token_env=config.get("auth_token_env"),
        )
        return HttpCatalog(http_config)
    raise ValueError(f"unknown backend kind: {kind!r}")
