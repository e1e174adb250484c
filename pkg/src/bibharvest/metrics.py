"""Lexical consistency, cross-run proximity, and the keyword-count sweep.

Consistency measures how thematically tight one corpus is: one minus the
mean pairwise dissimilarity of its keywords, where dissimilarity of a pair
is its co-occurrence count normalized by the smaller of the two document
frequencies.  Proximity measures how close two finished runs are: the
fraction of cross-run keyword pairs that co-occur in at least one reference
of the union corpus.  Both live in [0, 1].
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .catalog import Backend
from .engine import IterationRecord, RunConfig, RunInterrupted, RunState, run
from .risio import Corpus, merge
from .textproc import CooccurrenceMatrix, Phrase, cooccurrences, reference_contains

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12


class TooFewKeywords(Exception):
    """Consistency needs at least two keywords."""


class EmptyKeywords(Exception):
    """Proximity needs a non-empty keyword set on both sides."""


@dataclass(frozen=True)
class ProximityMatrix:
    """Symmetric pairwise proximities with unit diagonal.

    ``totals[i]`` is the sum of the off-diagonal entries of run i's own
    keyword co-occurrence matrix, reported alongside the proximities.
    """

    labels: tuple[str, ...]
    values: np.ndarray
    totals: tuple[int, ...]

    def validate(self) -> None:
        n = len(self.labels)
        if self.values.shape != (n, n) or len(self.totals) != n:
            raise ValueError("matrix shape does not match its labels")
        if not np.all(np.abs(self.values - self.values.T) <= SYMMETRY_TOL):
            raise ValueError("proximity matrix is not symmetric")
        if not np.all(np.diag(self.values) == 1.0):
            raise ValueError("proximity matrix diagonal must be exactly 1")
        off = self.values[~np.eye(n, dtype=bool)]
        if off.size and (off.min() < 0.0 or off.max() > 1.0):
            raise ValueError("off-diagonal proximities must lie in [0, 1]")


@dataclass(frozen=True)
class SensitivityResult:
    n_k_values: tuple[int, ...]
    traces: dict[int, tuple[IterationRecord, ...]]
    summary: dict[int, int]
    states: dict[int, RunState]


def consistency_from_matrix(matrix: CooccurrenceMatrix) -> float:
    """1 minus the mean min-normalized pairwise dissimilarity of the matrix."""
    counts = matrix.counts
    k = counts.shape[0]
    if k < 2:
        raise TooFewKeywords("need at least 2 keywords")
    total = 0.0
    pairs = 0
    for i in range(k):
        for j in range(i + 1, k):
            floor = min(counts[i, i], counts[j, j])
            d = 1.0 if floor == 0 else 1.0 - counts[i, j] / floor
            total += d
            pairs += 1
    return float(1.0 - total / pairs)


def consistency(corpus: Corpus, keywords) -> float:
    """Internal lexical consistency of *corpus* under *keywords*, in [0, 1]."""
    phrases = list(keywords.phrases)
    if len(phrases) < 2:
        raise TooFewKeywords("need at least 2 keywords")
    return consistency_from_matrix(cooccurrences(corpus, phrases))


def _union_corpus(run_a: RunState, run_b: RunState) -> Corpus:
    union, _ = merge(Corpus.empty(), run_a.corpus.entries.values(), 1)
    union, _ = merge(union, run_b.corpus.entries.values(), 1)
    return union


def proximity(run_a: RunState, run_b: RunState, use_counts: bool = False) -> float:
    """Cross-run keyword proximity over the union corpus.

    Counts ordered pairs (a, b) with a from run A's keywords, b from run B's,
    a != b, that co-occur in at least one reference, normalized by
    ``|K_A| * |K_B|``.  With ``use_counts=True`` each pair contributes its
    number of co-occurring references instead of 0/1 (comparison variant,
    not bounded by 1).  Proximity of a run with itself is 1 by convention.
    """
    ka = run_a.keywords.phrases
    kb = run_b.keywords.phrases
    if not ka or not kb:
        raise EmptyKeywords("both runs must have keywords")
    if run_a is run_b:
        return 1.0
    union = _union_corpus(run_a, run_b)
    all_phrases = list(dict.fromkeys(ka + kb))
    ka_set, kb_set = set(ka), set(kb)
    pair_hits: Counter[tuple[Phrase, Phrase]] = Counter()
    for ref in union.entries.values():
        present = [p for p in all_phrases if reference_contains(ref, p)]
        in_a = [p for p in present if p in ka_set]
        in_b = [p for p in present if p in kb_set]
        for a in in_a:
            for b in in_b:
                if a != b:
                    pair_hits[(a, b)] += 1
    score = sum(pair_hits.values()) if use_counts else len(pair_hits)
    return score / (len(ka) * len(kb))


def proximity_matrix(runs: list[RunState], labels: list[str] | None = None) -> ProximityMatrix:
    """Pairwise proximities of >= 2 finished runs, mirrored across the diagonal."""
    if len(runs) < 2:
        raise ValueError("need at least 2 runs")
    if labels is None:
        labels = [f"run{i + 1}" for i in range(len(runs))]
    if len(labels) != len(runs):
        raise ValueError("one label per run required")
    n = len(runs)
    values = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = proximity(runs[i], runs[j])
    totals = []
    for state in runs:
        phrases = list(state.keywords.phrases)
        if not phrases:
            raise EmptyKeywords("every run must have keywords")
        totals.append(cooccurrences(state.corpus, phrases).sum_offdiagonal())
    matrix = ProximityMatrix(tuple(labels), values, tuple(totals))
    matrix.validate()
    return matrix


def proximity_csv(matrix: ProximityMatrix) -> str:
    """CSV form: labeled header row/column, 4-decimal values, totals row."""
    lines = ["label," + ",".join(matrix.labels)]
    for i, label in enumerate(matrix.labels):
        row = ",".join(f"{matrix.values[i, j]:.4f}" for j in range(len(matrix.labels)))
        lines.append(f"{label},{row}")
    lines.append("totals," + ",".join(str(t) for t in matrix.totals))
    return "\n".join(lines) + "\n"


def sensitivity_sweep(
    base: RunConfig, n_k_values: list[int], backend: Backend
) -> SensitivityResult:
    """Run the engine once per keyword-count value and collect the traces.

    A value whose run is interrupted by backend failure keeps its partial
    trace; the other values still complete.
    """
    if not n_k_values:
        raise ValueError("n_k_values must be non-empty")
    traces: dict[int, tuple[IterationRecord, ...]] = {}
    summary: dict[int, int] = {}
    states: dict[int, RunState] = {}
    for n_k in n_k_values:
        config = replace(base, n_k=n_k)
        try:
            state = run(config, backend)
        except RunInterrupted as exc:
            logger.warning("sweep value n_k=%d interrupted: %s", n_k, exc)
            state = exc.state
        states[n_k] = state
        traces[n_k] = state.trace
        summary[n_k] = len(state.corpus)
    return SensitivityResult(tuple(n_k_values), traces, summary, states)


def sweep_csv(result: SensitivityResult) -> str:
    """Long-format CSV ``n_k,n,c_size`` suitable for plotting growth curves."""
    lines = ["n_k,n,c_size"]
    for n_k in result.n_k_values:
        for rec in result.traces[n_k]:
            lines.append(f"{n_k},{rec.n},{rec.c_size}")
    return "\n".join(lines) + "\n"
