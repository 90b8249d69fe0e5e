"""Desk-scale uncollapsed LDA Gibbs sampling over the draw kernels.

One iteration redraws every word's topic with a selected kernel, then
resamples theta rows and phi columns from Dirichlet posteriors over the
assignment counts (the standard uncollapsed update; the draw phase is the
part under study, the update rule is ours).  Synthetic corpora with
planted topics stand in for real text.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rng as _rng
from .kernels import InjectedStops, SeededStops, WarpConfig, draw_z
from .sampling import AllZeroError
from .warp import Trace


class CorpusParseError(ValueError):
    """Corpus file was malformed; message carries the line number."""


class WordIdOutOfRangeError(ValueError):
    """A word id is not below the declared vocabulary size."""


@dataclass
class Corpus:
    """Bag-of-words documents as integer word ids.

    padding counts trailing empty documents appended so the document
    count divides the warp lane count; they carry no words and their draws
    are discarded.
    """

    vocab_size: int
    lengths: np.ndarray
    words: list
    padding: int = 0

    @property
    def n_docs(self) -> int:
        return len(self.lengths)

    @property
    def n_real_docs(self) -> int:
        return self.n_docs - self.padding

    @property
    def n_words(self) -> int:
        return int(np.sum(self.lengths))

    def padded(self, lanes: int) -> "Corpus":
        """Append empty documents until the document count divides lanes."""
        extra = (-self.n_docs) % lanes
        if extra == 0:
            return self
        lengths = np.concatenate([self.lengths, np.zeros(extra, dtype=np.int64)])
        words = list(self.words) + [np.zeros(0, dtype=np.int64) for _ in range(extra)]
        return replace(self, lengths=lengths, words=words, padding=self.padding + extra)


def load_corpus(path, vocab_size: int | None = None) -> Corpus:
    """One document per line of whitespace-separated word ids.

    An optional first line "#M V" declares the document count and
    vocabulary size; otherwise the vocabulary is vocab_size or the largest
    id plus one.
    """
    declared_m = None
    declared_v = None
    docs: list[np.ndarray] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\n")
            if lineno == 1 and text.startswith("#"):
                fields = text[1:].split()
                if len(fields) != 2:
                    raise CorpusParseError(f"{path}:{lineno}: header must be '#M V'")
                try:
                    declared_m, declared_v = int(fields[0]), int(fields[1])
                except ValueError as exc:
                    raise CorpusParseError(f"{path}:{lineno}: bad header {text!r}") from exc
                continue
            ids = []
            for token in text.split():
                try:
                    word = int(token)
                except ValueError as exc:
                    raise CorpusParseError(f"{path}:{lineno}: bad token {token!r}") from exc
                if word < 0:
                    raise CorpusParseError(f"{path}:{lineno}: negative word id {word}")
                ids.append(word)
            docs.append(np.asarray(ids, dtype=np.int64))
    if declared_m is not None and len(docs) != declared_m:
        raise CorpusParseError(f"{path}: header declares {declared_m} documents, found {len(docs)}")
    if declared_v is not None:
        vocab_size = declared_v
    if vocab_size is None:
        vocab_size = 1 + max((int(d.max()) for d in docs if d.size), default=-1)
    for m, doc in enumerate(docs):
        if doc.size and int(doc.max()) >= vocab_size:
            raise WordIdOutOfRangeError(
                f"{path}: document {m} holds word id {int(doc.max())} >= V={vocab_size}"
            )
    lengths = np.asarray([len(d) for d in docs], dtype=np.int64)
    return Corpus(vocab_size=vocab_size, lengths=lengths, words=docs)


def save_corpus(corpus: Corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#{corpus.n_real_docs} {corpus.vocab_size}\n")
        for m in range(corpus.n_real_docs):
            fh.write(" ".join(str(int(x)) for x in corpus.words[m]) + "\n")


@dataclass
class ModelParams:
    """theta: docs x topics weights; phi: vocab x topics weights."""

    theta: np.ndarray
    phi: np.ndarray

    def validate(self):
        if np.any(self.theta < 0) or np.any(self.phi < 0):
            raise ValueError("parameters must be non-negative")
        if np.any(self.theta.sum(axis=1) <= 0):
            raise AllZeroError("a theta row sums to zero")
        if np.any(self.phi.sum(axis=0) <= 0):
            raise AllZeroError("a phi column sums to zero")


def generate_planted_corpus(
    n_topics: int,
    vocab_size: int,
    n_docs: int,
    doc_len: int,
    seed: int,
    noise: float = 0.05,
):
    """Synthetic corpus with one planted topic per document.

    Topics own disjoint vocabulary slices of size V // K; each token comes
    from the document's slice except for a small uniform-noise fraction.
    Returns (corpus, planted topic labels).
    """
    if vocab_size < n_topics:
        raise ValueError("need at least one vocabulary word per topic")
    slice_size = vocab_size // n_topics
    gen = np.random.default_rng(_rng.derive_seed(seed, 3))
    labels = np.arange(n_docs) % n_topics
    docs = []
    for m in range(n_docs):
        lo = int(labels[m]) * slice_size
        in_slice = lo + gen.integers(0, slice_size, size=doc_len)
        anywhere = gen.integers(0, vocab_size, size=doc_len)
        noisy = gen.random(doc_len) < noise
        docs.append(np.where(noisy, anywhere, in_slice).astype(np.int64))
    lengths = np.full(n_docs, doc_len, dtype=np.int64)
    return Corpus(vocab_size=vocab_size, lengths=lengths, words=docs), labels


def init_assignments(corpus: Corpus, n_topics: int, seed: int) -> list:
    """Uniform random topics for every word."""
    gen = np.random.default_rng(_rng.derive_seed(seed, 0))
    return [
        gen.integers(0, n_topics, size=int(n)).astype(np.int64) for n in corpus.lengths
    ]


def topic_counts(corpus: Corpus, z: list, n_topics: int):
    doc_topic = np.zeros((corpus.n_docs, n_topics), dtype=np.int64)
    word_topic = np.zeros((corpus.vocab_size, n_topics), dtype=np.int64)
    for m in range(corpus.n_docs):
        if corpus.lengths[m] == 0:
            continue
        np.add.at(doc_topic[m], z[m], 1)
        np.add.at(word_topic, (corpus.words[m], z[m]), 1)
    return doc_topic, word_topic


def resample_params(
    corpus: Corpus,
    z: list,
    n_topics: int,
    alpha: float,
    beta: float,
    seed: int,
    iteration: int,
    dtype=np.float64,
) -> ModelParams:
    """theta[m] ~ Dir(alpha + doc counts); phi[:,k] ~ Dir(beta + word counts).

    Dirichlet draws are independent Gammas normalized; the generator is
    derived from (seed, iteration) so runs reproduce exactly.
    """
    doc_topic, word_topic = topic_counts(corpus, z, n_topics)
    gen = np.random.default_rng(_rng.derive_seed(seed, 2, iteration))
    theta = gen.gamma(alpha + doc_topic)
    theta = theta / theta.sum(axis=1, keepdims=True)
    phi = gen.gamma(beta + word_topic)
    phi = phi / phi.sum(axis=0, keepdims=True)
    params = ModelParams(theta=theta.astype(dtype), phi=phi.astype(dtype))
    params.validate()
    return params


def gibbs_iterate(
    corpus: Corpus,
    params: ModelParams,
    z: list,
    kernel: str,
    config: WarpConfig,
    seed: int,
    iteration: int,
    stops=None,
    alpha: float = 0.1,
    beta: float = 0.01,
    trace: Trace | None = None,
    threads: int = 1,
    dtype=np.float64,
):
    """One sweep: redraw z with the chosen kernel, then resample parameters."""
    if stops is None:
        stops = SeededStops(_rng.derive_seed(seed, 1, iteration))
    new_z = draw_z(
        kernel,
        corpus.lengths,
        params.theta,
        params.phi,
        corpus.words,
        config,
        stops,
        **({} if kernel == "basic" else {"trace": trace, "threads": threads}),
    )
    new_params = resample_params(
        corpus, new_z, params.theta.shape[1], alpha, beta, seed, iteration, dtype=dtype
    )
    return new_params, new_z


def run_gibbs(
    corpus: Corpus,
    n_topics: int,
    iterations: int,
    kernel: str,
    config: WarpConfig,
    seed: int,
    alpha: float = 0.1,
    beta: float = 0.01,
    injected_units=None,
    threads: int = 1,
    dtype=np.float64,
):
    """Full sampling run; returns (params, z, per-iteration log-likelihoods).

    injected_units, when given, is one InjectedStops-compatible ragged
    array per iteration (shared across kernels for differential runs).
    """
    padded = corpus.padded(config.lanes) if kernel != "basic" else corpus
    z = init_assignments(padded, n_topics, seed)
    params = resample_params(padded, z, n_topics, alpha, beta, seed, -1, dtype=dtype)
    trajectory = []
    for t in range(iterations):
        stops = None
        if injected_units is not None:
            stops = InjectedStops(injected_units[t])
        params, z = gibbs_iterate(
            padded,
            params,
            z,
            kernel,
            config,
            seed,
            t,
            stops=stops,
            alpha=alpha,
            beta=beta,
            threads=threads,
            dtype=dtype,
        )
        trajectory.append(log_likelihood(padded, params))
    return params, z, np.asarray(trajectory)


def log_likelihood(corpus: Corpus, params: ModelParams) -> float:
    """Sum over words of log(theta_hat[m] . phi_hat[w]) under normalized params."""
    theta_sums = params.theta.sum(axis=1, keepdims=True)
    phi_sums = params.phi.sum(axis=0, keepdims=True)
    if np.any(theta_sums <= 0) or np.any(phi_sums <= 0):
        raise AllZeroError("parameters do not normalize")
    theta_hat = params.theta / theta_sums
    phi_hat = params.phi / phi_sums
    total = 0.0
    for m in range(corpus.n_docs):
        if corpus.lengths[m] == 0:
            continue
        word_probs = phi_hat[corpus.words[m]] @ theta_hat[m]
        if np.any(word_probs <= 0):
            raise AllZeroError(f"document {m}: a word has zero probability")
        total += float(np.sum(np.log(word_probs)))
    return total


def modal_topics(z: list, n_topics: int, n_docs: int | None = None) -> np.ndarray:
    """Per-document most frequent topic (empty documents get topic 0)."""
    n_docs = len(z) if n_docs is None else n_docs
    out = np.zeros(n_docs, dtype=np.int64)
    for m in range(n_docs):
        if len(z[m]):
            out[m] = np.bincount(z[m], minlength=n_topics).argmax()
    return out


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-adjusted agreement between two partitions of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    _, a_idx = np.unique(a, return_inverse=True)
    _, b_idx = np.unique(b, return_inverse=True)
    table = np.zeros((a_idx.max() + 1, b_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (a_idx, b_idx), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(a.size)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))
