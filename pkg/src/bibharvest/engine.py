"""The corpus-expansion loop: fetch, union, re-extract, repeat until stable.

Each iteration queries the backend with the current keywords, unions the
results into the corpus, and recomputes keywords from the full accumulated
corpus.  The run converges when the corpus size is identical over the last
``stability_window`` iterations, and otherwise stops at ``max_iterations``.
State persists to a directory (``corpus.ris``, ``keywords.kw``,
``trace.csv``, ``config.json``, ``provenance.csv``, ``status``) and loads
back losslessly, so interrupted runs resume exactly where they stopped.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .catalog import Backend, BackendUnavailable, fetch_for_keywords
from .risio import Corpus, dedup_key, merge, parse_ris, write_ris, MalformedRecord
from .textproc import (
    KeywordSet,
    extract_candidates,
    keywords_from_kw,
    keywords_to_kw,
    score_terms,
    select_keywords,
)

logger = logging.getLogger(__name__)

RUNNING = "running"
CONVERGED = "converged"
MAX_ITER_REACHED = "max_iter_reached"
_STATUSES = frozenset({RUNNING, CONVERGED, MAX_ITER_REACHED})

STATE_FILES = ("config.json", "corpus.ris", "keywords.kw", "provenance.csv", "status", "trace.csv")
TRACE_COLUMNS = ("n", "r_size", "added", "c_size", "n_keywords", "warnings")


class CorruptState(Exception):
    """A persisted state directory is missing files or violates invariants."""


class RunInterrupted(Exception):
    """Backend failure mid-run; carries the last good state for resumption."""

    def __init__(self, message: str, state: "RunState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class RunConfig:
    initial_keywords: tuple[str, ...]
    n_k: int
    max_iterations: int
    stability_window: int = 2
    per_kw_limit: int = 50
    backend: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "initial_keywords", tuple(self.initial_keywords))
        object.__setattr__(self, "backend", dict(self.backend))
        if not self.initial_keywords:
            raise ValueError("initial_keywords must be non-empty")
        if self.n_k < 1:
            raise ValueError("n_k must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")
        if self.per_kw_limit < 1:
            raise ValueError("per_kw_limit must be >= 1")

    def to_dict(self) -> dict:
        return {
            "initial_keywords": list(self.initial_keywords),
            "n_k": self.n_k,
            "max_iterations": self.max_iterations,
            "stability_window": self.stability_window,
            "per_kw_limit": self.per_kw_limit,
            "backend": dict(self.backend),
        }

    @staticmethod
    def from_dict(data: Mapping) -> "RunConfig":
        known = {
            "initial_keywords",
            "n_k",
            "max_iterations",
            "stability_window",
            "per_kw_limit",
            "backend",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for required in ("initial_keywords", "n_k", "max_iterations"):
            if required not in data:
                raise ValueError(f"missing config key: {required}")
        return RunConfig(
            initial_keywords=tuple(data["initial_keywords"]),
            n_k=data["n_k"],
            max_iterations=data["max_iterations"],
            stability_window=data.get("stability_window", 2),
            per_kw_limit=data.get("per_kw_limit", 50),
            backend=data.get("backend", {}),
        )


@dataclass(frozen=True)
class IterationRecord:
    n: int
    r_size: int
    added: int
    c_size: int
    n_keywords: int
    warnings: tuple[str, ...] = ()
    # full keyword set kept in memory only; trace.csv persists the count
    keywords: KeywordSet | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RunState:
    config: RunConfig
    corpus: Corpus
    keywords: KeywordSet
    trace: tuple[IterationRecord, ...]
    status: str


def new_state(config: RunConfig) -> RunState:
    """Fresh state: empty corpus, seed phrases as the current keywords."""
    seeds = KeywordSet.from_phrases(config.initial_keywords)
    return RunState(config, Corpus.empty(), seeds, (), RUNNING)


def step(state: RunState, backend: Backend) -> RunState:
    """One iteration: fetch for current keywords, merge, re-extract keywords.

    Raises BackendUnavailable with the input state untouched, so a failed
    step is safely retryable.
    """
    if state.status != RUNNING:
        raise ValueError(f"cannot step a {state.status} run")
    config = state.config
    n = len(state.trace) + 1
    if len(state.keywords) == 0:
        refs, warnings = [], ["no keywords to query"]
    else:
        refs, warnings = fetch_for_keywords(
            backend,
            state.keywords,
            config.per_kw_limit,
            parallelism=config.backend.get("parallelism", 1),
        )
    corpus, added = merge(state.corpus, refs, n)
    if len(corpus) > 0:
        keywords = select_keywords(score_terms(extract_candidates(corpus)), config.n_k)
    else:
        keywords = state.keywords
        warnings = warnings + ["corpus still empty; keywords unchanged"]
    record = IterationRecord(
        n=n,
        r_size=len(refs),
        added=added,
        c_size=len(corpus),
        n_keywords=len(keywords),
        warnings=tuple(warnings),
        keywords=keywords,
    )
    trace = state.trace + (record,)
    status = RUNNING
    w = config.stability_window
    if len(trace) >= w and len({rec.c_size for rec in trace[-w:]}) == 1:
        status = CONVERGED
    elif len(trace) >= config.max_iterations:
        status = MAX_ITER_REACHED
    return RunState(config, corpus, keywords, trace, status)


def resume(
    state: RunState,
    backend: Backend,
    on_iteration: Callable[[IterationRecord], None] | None = None,
) -> RunState:
    """Drive a state to completion; finished states are returned unchanged."""
    while state.status == RUNNING:
        try:
            state = step(state, backend)
        except BackendUnavailable as exc:
            raise RunInterrupted(f"run interrupted at iteration {len(state.trace) + 1}: {exc}", state) from exc
        if on_iteration is not None:
            on_iteration(state.trace[-1])
    return state


def run(
    config: RunConfig,
    backend: Backend,
    on_iteration: Callable[[IterationRecord], None] | None = None,
) -> RunState:
    return resume(new_state(config), backend, on_iteration)


def trace_to_csv(trace: tuple[IterationRecord, ...]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        writer.writerow(
            [rec.n, rec.r_size, rec.added, rec.c_size, rec.n_keywords, json.dumps(list(rec.warnings))]
        )
    return buf.getvalue()


def _trace_from_csv(text: str) -> tuple[IterationRecord, ...]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise CorruptState("trace.csv has a bad header")
    records = []
    for row in rows[1:]:
        if len(row) != len(TRACE_COLUMNS):
            raise CorruptState(f"trace.csv row has {len(row)} columns")
        try:
            n, r_size, added, c_size, n_keywords = (int(x) for x in row[:5])
            warnings = json.loads(row[5])
        except (ValueError, json.JSONDecodeError) as exc:
            raise CorruptState(f"trace.csv row unparsable: {row!r}") from exc
        records.append(
            IterationRecord(n, r_size, added, c_size, n_keywords, tuple(warnings))
        )
    return tuple(records)


def persist(state: RunState, directory: str | Path) -> None:
    """Write the canonical state files; an existing state dir is overwritten."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "corpus.ris").write_text(write_ris(state.corpus), encoding="utf-8")
    (directory / "keywords.kw").write_text(keywords_to_kw(state.keywords), encoding="utf-8")
    (directory / "trace.csv").write_text(trace_to_csv(state.trace), encoding="utf-8")
    (directory / "config.json").write_text(
        json.dumps(state.config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    prov_lines = ["key,iteration"]
    prov_lines += [f"{key},{state.corpus.provenance[key]}" for key in sorted(state.corpus.provenance)]
    (directory / "provenance.csv").write_text("\n".join(prov_lines) + "\n", encoding="utf-8")
    (directory / "status").write_text(state.status + "\n", encoding="utf-8")


def load(directory: str | Path) -> RunState:
    """Reconstruct a RunState from a state directory, checking all invariants."""
    directory = Path(directory)
    texts: dict[str, str] = {}
    for name in STATE_FILES:
        path = directory / name
        if not path.is_file():
            raise CorruptState(f"missing state file: {path}")
        texts[name] = path.read_text(encoding="utf-8")

    try:
        config = RunConfig.from_dict(json.loads(texts["config.json"]))
    except (ValueError, json.JSONDecodeError) as exc:
        raise CorruptState(f"bad config.json: {exc}") from exc

    try:
        refs = parse_ris(texts["corpus.ris"])
    except MalformedRecord as exc:
        raise CorruptState(f"bad corpus.ris: {exc}") from exc

    provenance: dict = {}
    prov_lines = texts["provenance.csv"].splitlines()
    if not prov_lines or prov_lines[0] != "key,iteration":
        raise CorruptState("provenance.csv has a bad header")
    for line in prov_lines[1:]:
        key, sep, value = line.rpartition(",")
        if not sep or not key:
            raise CorruptState(f"bad provenance line: {line!r}")
        try:
            provenance[key] = int(value)
        except ValueError as exc:
            raise CorruptState(f"bad provenance iteration: {line!r}") from exc

    entries = {dedup_key(r): r for r in refs}
    if len(entries) != len(refs):
        raise CorruptState("corpus.ris contains duplicate dedup keys")
    try:
        corpus = Corpus(entries, provenance)
    except ValueError as exc:
        raise CorruptState(str(exc)) from exc

    trace = _trace_from_csv(texts["trace.csv"])
    status = texts["status"].strip()
    if status not in _STATUSES:
        raise CorruptState(f"unknown status: {status!r}")

    try:
        n_k = config.n_k if trace else None
        keywords = keywords_from_kw(texts["keywords.kw"], n_k=n_k)
    except ValueError as exc:
        raise CorruptState(f"bad keywords.kw: {exc}") from exc

    if len(trace) > config.max_iterations:
        raise CorruptState("trace longer than max_iterations")
    prev = 0
    for i, rec in enumerate(trace, start=1):
        if rec.n != i:
            raise CorruptState("trace iteration indices are not 1..n")
        if rec.c_size < prev:
            raise CorruptState("corpus size decreases along the trace")
        if rec.added != rec.c_size - prev:
            raise CorruptState("trace 'added' column inconsistent with sizes")
        prev = rec.c_size
    if trace and trace[-1].c_size != len(corpus):
        raise CorruptState("corpus size does not match the last trace entry")
    w = config.stability_window
    if status == CONVERGED:
        if len(trace) < w or len({rec.c_size for rec in trace[-w:]}) != 1:
            raise CorruptState("status is converged but the trace window is not stable")

    return RunState(config, corpus, keywords, trace, status)


def config_from_json(path: str | Path) -> RunConfig:
    """Read a RunConfig from a JSON file (CLI helper)."""
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))
