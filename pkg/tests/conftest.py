import numpy as np
import pytest

from textforage.corpus import Corpus, DocumentSpec, EncodedDocument, Vocabulary
from textforage import lda


def build_corpus(doc_tokens, terms, dates=None):
    """Assemble an encoded corpus directly from token-id lists."""
    counts = np.zeros(len(terms), dtype=np.int64)
    for doc in doc_tokens:
        for t in doc:
            counts[t] += 1
    vocab = Vocabulary(terms, counts)
    docs = []
    for i, ids in enumerate(doc_tokens):
        read, pub = (dates[i] if dates else (None, None))
        docs.append(
            EncodedDocument(
                spec=DocumentSpec(
                    id=f"doc{i}", read_date=read, pub_date=pub, order_index=i
                ),
                token_ids=np.asarray(ids, dtype=np.int32),
                dropped=0,
            )
        )
    return Corpus(vocabulary=vocab, documents=tuple(docs))


@pytest.fixture
def tiny_corpus():
    """Two 3-token documents over a 3-term vocabulary."""
    return build_corpus([[0, 0, 1], [2, 2, 1]], ["a", "b", "c"])


@pytest.fixture
def small_model():
    """A deterministic trained model over a 6-doc synthetic corpus."""
    rng = np.random.default_rng(42)
    doc_tokens = [rng.integers(0, 12, size=30).tolist() for _ in range(6)]
    corpus = build_corpus(doc_tokens, [f"w{i}" for i in range(12)])
    config = lda.TrainingConfig(k=3, seed=5, alpha=0.2, beta=0.1, iterations=40)
    return lda.train(corpus, config)


def random_distributions(rng, n, k, concentration=0.5):
    return rng.dirichlet(np.full(k, concentration), size=n)
