"""LDA topic models trained with a collapsed Gibbs sampler.

The sampler integrates out the document-topic and word-topic
distributions and draws only the per-token topic assignments z.  Each
update removes a token's assignment from the count matrices and samples
a replacement with probability proportional to

    (N_wt + beta) / (N_t + V*beta) * (N_td + alpha)

where the counts exclude the token being updated.  The Dirichlet priors
enter as smoothing factors; the factor depending only on the document
is constant across topics and drops out of the normalization.

Training is single-threaded and bit-reproducible from (corpus, config).
An optional hogwild mode shards documents and sweeps the shards against
a stale shared snapshot of the word-topic counts; it is faster on large
corpora but excluded from the reproducibility guarantee.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .corpus import Corpus, Vocabulary
from .errors import NumericalDegeneracyError
from .seeds import derive_seed, rng_from

__all__ = [
    "TrainingConfig",
    "TopicModel",
    "train",
    "gibbs_sweep",
    "estimate_distributions",
    "perplexity",
    "perplexity_from_distributions",
    "TopicSummary",
    "topic_summary",
    "corpus_mass_order",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainingConfig:
    """Sampler hyperparameters; symmetric Dirichlet priors throughout."""

    k: int
    seed: int
    alpha: float = 0.1
    beta: float = 0.01
    iterations: int = 500

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")

    def to_payload(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# Sweep kernel (numba-accelerated when available)


def _sweep_kernel(tokens, docs, z, n_wt, n_td, n_t, alpha, beta, uniforms, probs):
    v = n_wt.shape[0]
    k = n_wt.shape[1]
    v_beta = v * beta
    for i in range(tokens.shape[0]):
        w = tokens[i]
        d = docs[i]
        t_old = z[i]
        n_wt[w, t_old] -= 1
        n_t[t_old] -= 1
        n_td[t_old, d] -= 1
        total = 0.0
        for t in range(k):
            p = (n_wt[w, t] + beta) / (n_t[t] + v_beta) * (n_td[t, d] + alpha)
            probs[t] = p
            total += p
        r = uniforms[i] * total
        acc = 0.0
        t_new = k - 1
        for t in range(k):
            acc += probs[t]
            if r < acc:
                t_new = t
                break
        z[i] = t_new
        n_wt[w, t_new] += 1
        n_t[t_new] += 1
        n_td[t_new, d] += 1


def _sweep_kernel_locked(tokens, z, base_wt, base_t, td_col, alpha, beta, uniforms, probs):
    # word-topic counts stay frozen at the trained snapshot; only the
    # query document's own topic counts evolve
    v = base_wt.shape[0]
    k = base_wt.shape[1]
    v_beta = v * beta
    for i in range(tokens.shape[0]):
        w = tokens[i]
        t_old = z[i]
        td_col[t_old] -= 1
        total = 0.0
        for t in range(k):
            p = (base_wt[w, t] + beta) / (base_t[t] + v_beta) * (td_col[t] + alpha)
            probs[t] = p
            total += p
        r = uniforms[i] * total
        acc = 0.0
        t_new = k - 1
        for t in range(k):
            acc += probs[t]
            if r < acc:
                t_new = t
                break
        z[i] = t_new
        td_col[t_new] += 1


try:  # pragma: no cover - exercised implicitly wherever numba is present
    from numba import njit

    _sweep_kernel = njit(cache=True, nogil=True)(_sweep_kernel)
    _sweep_kernel_locked = njit(cache=True, nogil=True)(_sweep_kernel_locked)
except ImportError:  # pragma: no cover
    pass


# ---------------------------------------------------------------------------
# Model


class TopicModel:
    """Topic assignments and count matrices for a trained corpus.

    Count matrices: n_wt (V, k) word-topic, n_td (k, D) topic-document,
    n_t (k,) per-topic totals, n_d (D,) document lengths.  The three sum
    identities (rows of n_td vs n_d, columns of n_wt vs n_t, rows of
    n_td vs n_t) hold after every sweep; `check_invariants` asserts
    them.
    """

    def __init__(
        self,
        config: TrainingConfig,
        vocabulary: Vocabulary,
        doc_ids: Sequence[str],
        tokens: np.ndarray,
        doc_index: np.ndarray,
        z: np.ndarray,
        rng: np.random.Generator,
    ):
        self.config = config
        self.vocabulary = vocabulary
        self.doc_ids = tuple(doc_ids)
        self.tokens = tokens
        self.doc_index = doc_index
        self.z = z
        self._rng = rng
        self.n_docs = len(self.doc_ids)
        self.n_terms = len(vocabulary)
        self.sweeps_done = 0
        self.log_likelihood_trace: list[float] = []
        self._rebuild_counts()

    # -- construction helpers

    @classmethod
    def initialize(cls, corpus: Corpus, config: TrainingConfig) -> "TopicModel":
        if corpus.n_documents == 0:
            raise ValueError("empty corpus")
        docs = corpus.in_reading_order()
        lengths = [d.token_ids.size for d in docs]
        if min(lengths) == 0:
            raise ValueError("corpus contains an empty document")
        tokens = np.concatenate([d.token_ids for d in docs]).astype(np.int32)
        doc_index = np.repeat(
            np.arange(len(docs), dtype=np.int32), lengths
        )
        rng = rng_from(config.seed)
        z = rng.integers(0, config.k, tokens.size, dtype=np.int32)
        return cls(
            config=config,
            vocabulary=corpus.vocabulary,
            doc_ids=[d.spec.id for d in docs],
            tokens=tokens,
            doc_index=doc_index,
            z=z,
            rng=rng,
        )

    def _rebuild_counts(self) -> None:
        k = self.config.k
        self.n_wt = np.zeros((self.n_terms, k), dtype=np.int64)
        self.n_td = np.zeros((k, self.n_docs), dtype=np.int64)
        np.add.at(self.n_wt, (self.tokens, self.z), 1)
        np.add.at(self.n_td, (self.z, self.doc_index), 1)
        self.n_t = self.n_wt.sum(axis=0)
        self.n_d = self.n_td.sum(axis=0)

    def check_invariants(self) -> None:
        if not np.array_equal(self.n_td.sum(axis=0), self.n_d):
            raise AssertionError("n_td columns do not sum to document lengths")
        if not np.array_equal(self.n_wt.sum(axis=0), self.n_t):
            raise AssertionError("n_wt columns do not sum to topic totals")
        if not np.array_equal(self.n_td.sum(axis=1), self.n_t):
            raise AssertionError("n_td rows do not sum to topic totals")
        if self.z.size and not (0 <= self.z.min() and self.z.max() < self.config.k):
            raise AssertionError("topic assignment out of range")

    # -- likelihood

    def log_joint(self) -> float:
        """Collapsed log p(w, z) in nats, used for the likelihood trace."""
        k, a, b = self.config.k, self.config.alpha, self.config.beta
        v = self.n_terms
        ll = self.n_docs * (math.lgamma(k * a) - k * math.lgamma(a))
        ll += float(gammaln(self.n_td + a).sum() - gammaln(self.n_d + k * a).sum())
        ll += k * (math.lgamma(v * b) - v * math.lgamma(b))
        ll += float(gammaln(self.n_wt + b).sum() - gammaln(self.n_t + v * b).sum())
        return ll

    # -- persistence

    def save(self, path: str | Path, metadata: dict | None = None) -> None:
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "topic_model",
            "metadata": metadata or {},
            "config": self.config.to_payload(),
            "vocabulary_sha256": self.vocabulary.sha256(),
            "doc_ids": list(self.doc_ids),
            "tokens": [int(t) for t in self.tokens],
            "doc_index": [int(d) for d in self.doc_index],
            "z": [int(t) for t in self.z],
            "n_wt": [[int(c) for c in row] for row in self.n_wt],
            "n_td": [[int(c) for c in row] for row in self.n_td],
            "sweeps_done": self.sweeps_done,
            "log_likelihood_trace": [float(x) for x in self.log_likelihood_trace],
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, vocabulary: Vocabulary) -> "TopicModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("kind") != "topic_model":
            raise ValueError(f"{path} is not a topic model file")
        if payload.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(
                f"unsupported model format_version {payload.get('format_version')!r}"
            )
        if payload["vocabulary_sha256"] != vocabulary.sha256():
            raise ValueError("vocabulary hash mismatch: wrong vocabulary for model")
        config = TrainingConfig(**payload["config"])
        model = cls(
            config=config,
            vocabulary=vocabulary,
            doc_ids=payload["doc_ids"],
            tokens=np.asarray(payload["tokens"], dtype=np.int32),
            doc_index=np.asarray(payload["doc_index"], dtype=np.int32),
            z=np.asarray(payload["z"], dtype=np.int32),
            rng=rng_from(derive_seed(config.seed, payload["sweeps_done"], "resume")),
        )
        model.sweeps_done = payload["sweeps_done"]
        model.log_likelihood_trace = list(payload.get("log_likelihood_trace", ()))
        # the stored count matrices must agree with the stored
        # assignments; a mismatch means a corrupt or tampered file
        stored_wt = np.asarray(payload["n_wt"], dtype=np.int64)
        stored_td = np.asarray(payload["n_td"], dtype=np.int64)
        if not (np.array_equal(stored_wt, model.n_wt)
                and np.array_equal(stored_td, model.n_td)):
            raise ValueError(f"{path}: count matrices inconsistent with assignments")
        model.check_invariants()
        return model


# ---------------------------------------------------------------------------
# Operations


def gibbs_sweep(model: TopicModel) -> TopicModel:
    """Run one full sweep over every token position, in document order.

    Mutates the model in place (and returns it); count invariants are
    preserved exactly.  The sweep consumes one block of the model's
    random stream, so a fixed stream gives a reproducible sweep.
    """
    uniforms = model._rng.random(model.tokens.size)
    probs = np.empty(model.config.k, dtype=np.float64)
    _sweep_kernel(
        model.tokens,
        model.doc_index,
        model.z,
        model.n_wt,
        model.n_td,
        model.n_t,
        model.config.alpha,
        model.config.beta,
        uniforms,
        probs,
    )
    model.sweeps_done += 1
    model.log_likelihood_trace.append(model.log_joint())
    return model


def train(
    corpus: Corpus,
    config: TrainingConfig,
    hogwild_shards: int | None = None,
    threads: int | None = None,
) -> TopicModel:
    """Train a topic model on `corpus`.

    Assignments are initialized uniformly at random from the seed and
    `config.iterations` full sweeps are applied.  Identical (corpus,
    config) produce bit-identical models.  With `hogwild_shards` > 1
    the documents are partitioned and swept against a stale word-topic
    snapshot per sweep; that mode trades reproducibility for speed.
    """
    model = TopicModel.initialize(corpus, config)
    if hogwild_shards is not None and hogwild_shards > 1:
        _train_hogwild(model, hogwild_shards, threads)
    else:
        for _ in range(config.iterations):
            gibbs_sweep(model)
    return model


def _train_hogwild(model: TopicModel, shards: int, threads: int | None) -> None:
    config = model.config
    shard_of_doc = np.arange(model.n_docs) % shards
    shard_masks = [shard_of_doc[model.doc_index] == s for s in range(shards)]
    shard_tokens = [model.tokens[m] for m in shard_masks]
    shard_docs = [model.doc_index[m].astype(np.int32) for m in shard_masks]
    rngs = [rng_from(derive_seed(config.seed, s, "hogwild")) for s in range(shards)]

    def sweep_shard(s, wt_snapshot, t_snapshot, z_shard):
        wt = wt_snapshot.copy()
        t = t_snapshot.copy()
        uniforms = rngs[s].random(shard_tokens[s].size)
        probs = np.empty(config.k, dtype=np.float64)
        _sweep_kernel(
            shard_tokens[s], shard_docs[s], z_shard, wt, model.n_td, t,
            config.alpha, config.beta, uniforms, probs,
        )
        return wt - wt_snapshot, z_shard

    for _ in range(config.iterations):
        wt_snapshot = model.n_wt.copy()
        t_snapshot = model.n_t.copy()
        z_shards = [model.z[m].copy() for m in shard_masks]
        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(
                    pool.map(
                        sweep_shard,
                        range(shards),
                        [wt_snapshot] * shards,
                        [t_snapshot] * shards,
                        z_shards,
                    )
                )
        else:
            results = [
                sweep_shard(s, wt_snapshot, t_snapshot, z_shards[s])
                for s in range(shards)
            ]
        for (delta, z_shard), mask in zip(results, shard_masks):
            model.n_wt += delta
            model.z[mask] = z_shard
        model.n_t = model.n_wt.sum(axis=0)
        model.sweeps_done += 1
        model.log_likelihood_trace.append(model.log_joint())


def estimate_distributions(
    model: TopicModel, smoothing: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Point estimates (theta, phi) from the count matrices.

    theta is (D, k): row d is document d's topic distribution.  phi is
    (V, k): column t is topic t's word distribution.  With smoothing
    (the default) the Dirichlet priors are folded in and every
    distribution is strictly positive; without it the raw count ratios
    are returned and an empty topic is an error.
    """
    a, b, k = model.config.alpha, model.config.beta, model.config.k
    v = model.n_terms
    if smoothing:
        theta = (model.n_td.T + a) / (model.n_d[:, None] + k * a)
        phi = (model.n_wt + b) / (model.n_t[None, :] + v * b)
    else:
        if np.any(model.n_t == 0):
            empty = int(np.flatnonzero(model.n_t == 0)[0])
            raise NumericalDegeneracyError(
                f"degenerate topic: topic {empty} has no assignments"
            )
        theta = model.n_td.T / model.n_d[:, None]
        phi = model.n_wt / model.n_t[None, :].astype(np.float64)
    return theta, phi


def perplexity_from_distributions(
    theta_rows: np.ndarray, phi: np.ndarray, docs: Sequence[np.ndarray]
) -> float:
    """Perplexity of token sequences under explicit (theta, phi).

    2 ** (-mean per-token log2 p(w|d)) with p(w|d) = sum_t theta_dt
    phi_wt; `theta_rows` must align with `docs`.
    """
    theta_rows = np.atleast_2d(theta_rows)
    if len(docs) != theta_rows.shape[0]:
        raise ValueError("theta_rows and docs are not aligned")
    total = 0.0
    count = 0
    for row, tokens in zip(theta_rows, docs):
        if len(tokens) == 0:
            continue
        p = phi[np.asarray(tokens, dtype=np.intp)] @ row
        if np.any(p <= 0):
            raise NumericalDegeneracyError(
                "zero-probability token; use smoothed estimates"
            )
        total += float(np.log2(p).sum())
        count += len(tokens)
    if count == 0:
        raise ValueError("no tokens to evaluate")
    return float(2.0 ** (-total / count))


def perplexity(
    model: TopicModel,
    doc_indices: Sequence[int] | None = None,
    smoothing: bool = True,
) -> float:
    """Perplexity of (a slice of) the training corpus under the model."""
    theta, phi = estimate_distributions(model, smoothing=smoothing)
    if doc_indices is None:
        doc_indices = range(model.n_docs)
    docs = [model.tokens[model.doc_index == d] for d in doc_indices]
    return perplexity_from_distributions(theta[list(doc_indices)], phi, docs)


@dataclass(frozen=True)
class TopicSummary:
    """Report-time view of one topic."""

    topic: int
    top_terms: tuple[tuple[str, float], ...]
    mass_coverage: int
    cross_document_entropy: float
    mean_probability: float


def topic_summary(
    model: TopicModel,
    topic: int,
    top_n: int = 10,
    mass: float = 0.5,
    smoothing: bool = True,
) -> TopicSummary:
    """Top terms, mass coverage, and document spread of one topic.

    `mass_coverage` is the minimal number of highest-probability terms
    whose phi sums to at least `mass`.  `cross_document_entropy` is the
    entropy (bits) of the topic's theta column renormalized across
    documents: high entropy means the topic appears evenly across the
    corpus.  Term ties are broken by ascending term id.
    """
    if not 0 <= topic < model.config.k:
        raise ValueError(f"topic {topic} out of range [0, {model.config.k})")
    theta, phi = estimate_distributions(model, smoothing=smoothing)
    column = phi[:, topic]
    order = np.lexsort((np.arange(column.size), -column))
    top = tuple(
        (model.vocabulary.id_to_term[i], float(column[i])) for i in order[:top_n]
    )
    cumulative = np.cumsum(column[order])
    coverage = int(np.searchsorted(cumulative, mass) + 1)
    coverage = min(coverage, column.size)

    col_theta = theta[:, topic]
    weights = col_theta / col_theta.sum()
    nz = weights[weights > 0]
    cross_entropy = float(-(nz * np.log2(nz)).sum())
    return TopicSummary(
        topic=topic,
        top_terms=top,
        mass_coverage=coverage,
        cross_document_entropy=max(cross_entropy, 0.0),
        mean_probability=float(col_theta.mean()),
    )


def corpus_mass_order(model: TopicModel) -> np.ndarray:
    """Topics ordered by total corpus mass, heaviest first.

    A report-time relabelling ("topic 1 = most represented"); stored
    models always keep positional labels.  Ties break by ascending id.
    """
    return np.lexsort((np.arange(model.config.k), -model.n_t))
