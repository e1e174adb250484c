"""bibharvest: iterative bibliographic corpus harvesting.

Grow a reference corpus from seed keyword queries by crawling a catalog,
re-extracting keywords from the accumulated corpus, and repeating until the
corpus size stabilizes; then measure how consistent each corpus is and how
close different corpuses are to each other.
"""

from .catalog import (
    AuthMissing,
    BackendUnavailable,
    HttpCatalog,
    HttpCatalogConfig,
    QuerySpec,
    SyntheticCatalog,
    SyntheticCatalogSpec,
    fetch_for_keywords,
    generate_synthetic,
    http_search,
    make_backend,
    search,
)
from .engine import (
    CorruptState,
    IterationRecord,
    RunConfig,
    RunInterrupted,
    RunState,
    load,
    new_state,
    persist,
    resume,
    run,
    step,
)
from .metrics import (
    EmptyKeywords,
    ProximityMatrix,
    SensitivityResult,
    TooFewKeywords,
    consistency,
    proximity,
    proximity_csv,
    proximity_matrix,
    sensitivity_sweep,
    sweep_csv,
)
from .risio import (
    Corpus,
    DedupKey,
    MalformedRecord,
    Reference,
    dedup_key,
    merge,
    parse_ris,
    write_ris,
)
from .textproc import (
    CooccurrenceMatrix,
    EmptyCorpus,
    KeywordSet,
    TermCandidate,
    cooccurrences,
    extract_candidates,
    keywords_from_kw,
    keywords_to_kw,
    normalize_text,
    score_terms,
    select_keywords,
)

__version__ = "0.1.0"
