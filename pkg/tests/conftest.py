from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from logsynth.corpus import parse_corpus

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "corpus"


def fixture_paths() -> list[Path]:
    return sorted(FIXTURE_DIR.glob("*.jsub"))


@pytest.fixture(scope="session")
def corpus_files() -> list[Path]:
    return fixture_paths()


@pytest.fixture(scope="session")
def corpus(corpus_files):
    return parse_corpus(corpus_files, FIXTURE_DIR / "corpus.meta.json")


@pytest.fixture(scope="session")
def merged(corpus):
    """Full in-memory pipeline over the fixture corpus: graph, subgraphs,
    enhanced store, and optimized merged sequences."""
    from logsynth.callgraph import build_call_graph, prune, tag_log_methods
    from logsynth.lcfg import extract_subgraphs
    from logsynth.merge import merge_bottom_up, optimize_sequences
    from logsynth.pipeline import enhance_corpus
    from logsynth.reasoner import Reasoner

    graph = tag_log_methods(build_call_graph(corpus), corpus)
    pruned = prune(graph)
    subgraphs = extract_subgraphs(pruned, 2, 3)
    reasoner = Reasoner()
    store = enhance_corpus(corpus, graph, subgraphs, reasoner)
    sequences = []
    stats_all = []
    for subgraph in subgraphs:
        seqs, stats = merge_bottom_up(subgraph, graph, store.per_method,
                                      corpus, reasoner)
        sequences.extend(seqs)
        stats_all.append(stats)
    optimized = optimize_sequences(sequences, store.per_method)
    return {
        "graph": graph,
        "pruned": pruned,
        "subgraphs": subgraphs,
        "store": store,
        "reasoner": reasoner,
        "raw_sequences": sequences,
        "sequences": optimized,
        "stats": stats_all,
    }
