import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bibharvest.catalog import SyntheticCatalogSpec, generate_synthetic
from bibharvest.engine import RunConfig

# the reference synthetic catalog used by the convergence and acceptance tests
REFERENCE_SPEC = SyntheticCatalogSpec(
    seed=42,
    n_topics=5,
    vocab_per_topic=40,
    n_docs=500,
    words_per_doc=120,
    cross_topic_leak=0.1,
)
REFERENCE_BACKEND = {
    "backend": "synthetic",
    "seed": 42,
    "n_topics": 5,
    "vocab_per_topic": 40,
    "n_docs": 500,
    "words_per_doc": 120,
    "cross_topic_leak": 0.1,
}


@pytest.fixture(scope="session")
def reference_catalog():
    return generate_synthetic(REFERENCE_SPEC)


@pytest.fixture(scope="session")
def reference_seed_query(reference_catalog):
    # a phrase from the first topic; the crawl starts there and spreads
    return " ".join(reference_catalog.topic_phrases[0][0])


def make_reference_config(seed_query: str, n_k: int, stability_window: int = 2) -> RunConfig:
    return RunConfig(
        initial_keywords=(seed_query,),
        n_k=n_k,
        max_iterations=30,
        stability_window=stability_window,
        per_kw_limit=50,
        backend=dict(REFERENCE_BACKEND),
    )


@pytest.fixture(autouse=True)
def _no_proxies(monkeypatch):
    # stub-server tests talk to 127.0.0.1 directly
    for var in ("http_proxy", "https_proxy", "HTTP_PROXY", "HTTPS_PROXY", "all_proxy", "ALL_PROXY"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("NO_PROXY", "*")
    monkeypatch.setenv("no_proxy", "*")
