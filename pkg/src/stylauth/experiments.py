"""The four studies: feature ablation, disputed-text verification,
authorship attribution, and most-similar-text ranking.

Greedy iterative ablation evaluates the current feature-block pool, then
every pool missing one block; the best removal survives whenever its
score does not fall below the current pool's score, and the loop repeats
until any removal would hurt. The exact mode scores pools by full
leave-one-out F1. The hardest-10 mode first runs one full-pool LOO, keeps
the ten texts with the lowest confidence in their true class, and scores
candidate pools by LOO restricted to those ten texts (vanilla accuracy,
ties broken by mean confidence in the true class), which trades
exhaustiveness for tractable runtimes on large corpora.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, Document
from .errors import ExperimentError
from .evaluation import LooReport, loo_run
from .features import (
    FeatureBlock,
    Instance,
    SparseVector,
    cosine_similarity,
    fit_feature_space_from_counts,
)
from .learner import predict_proba
from .metrics import macro_f1, per_class_tables
from .pipeline import (
    CountsCache,
    PipelineConfig,
    document_instances,
    fit_attributor,
    fit_verifier,
    predict_document,
    training_documents,
)
from .rng import stable_seed

log = logging.getLogger(__name__)

ABLATION_EXACT = "exact"
ABLATION_HARDEST10 = "hardest10"

HARDEST_POOL_SIZE = 10


# ---------------------------------------------------------------------------
# Ablation
# ---------------------------------------------------------------------------


@dataclass
class AblationIteration:
    pool: tuple[FeatureBlock, ...]
    pool_score: tuple[float, ...]
    candidate_scores: dict[FeatureBlock, tuple[float, ...]]
    removed: FeatureBlock
    removed_score: tuple[float, ...]


@dataclass
class AblationReport:
    mode: str
    seed: int
    initial_pool: tuple[FeatureBlock, ...]
    final_pool: tuple[FeatureBlock, ...]
    final_score: tuple[float, ...]
    iterations: tuple[AblationIteration, ...]
    stop_candidate_scores: dict[FeatureBlock, tuple[float, ...]] | None
    hardest_text_ids: tuple[str, ...] | None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "initial_pool": [b.value for b in self.initial_pool],
            "final_pool": [b.value for b in self.final_pool],
            "final_score": list(self.final_score),
            "iterations": [
                {
                    "pool": [b.value for b in it.pool],
                    "pool_score": list(it.pool_score),
                    "candidate_scores": {
                        b.value: list(s) for b, s in it.candidate_scores.items()
                    },
                    "removed": it.removed.value,
                    "removed_score": list(it.removed_score),
                }
                for it in self.iterations
            ],
            "stop_candidate_scores": None
            if self.stop_candidate_scores is None
            else {b.value: list(s) for b, s in self.stop_candidate_scores.items()},
            "hardest_text_ids": None
            if self.hardest_text_ids is None
            else list(self.hardest_text_ids),
        }


def _exact_score(report: LooReport) -> tuple[float, ...]:
    return (report.f1,)


def _restricted_score(report: LooReport) -> tuple[float, ...]:
    confidences = [
        r.confidence_in_true_class(report.target_author) for r in report.records
    ]
    return (report.vanilla_accuracy, float(np.mean(confidences)))


def ablate(
    corpus: Corpus,
    initial_pool: Sequence[FeatureBlock],
    config: PipelineConfig,
    mode: str = ABLATION_EXACT,
    seed: int = 0,
    threads: int = 1,
) -> AblationReport:
    """Greedily drop feature blocks while the score does not decrease."""
    if mode not in (ABLATION_EXACT, ABLATION_HARDEST10):
        raise ExperimentError(f"unknown ablation mode {mode!r}")
    pool = tuple(b for b in FeatureBlock if b in set(initial_pool))
    if not pool:
        raise ExperimentError("initial pool is empty")

    hardest_ids: tuple[str, ...] | None = None
    if mode == ABLATION_HARDEST10:
        full_report = loo_run(corpus, config.with_blocks(pool), seed, threads=threads)
        hardest_ids = tuple(
            row[0] for row in full_report.hardest_texts(HARDEST_POOL_SIZE)
        )
        log.info("hardest texts for ablation: %s", ", ".join(hardest_ids))

    def score_pool(blocks: tuple[FeatureBlock, ...]) -> tuple[float, ...]:
        blocked = config.with_blocks(blocks)
        if mode == ABLATION_EXACT:
            return _exact_score(loo_run(corpus, blocked, seed, threads=threads))
        report = loo_run(corpus, blocked, seed, threads=threads, text_ids=hardest_ids)
        return _restricted_score(report)

    iterations: list[AblationIteration] = []
    current_score = score_pool(pool)
    stop_scores: dict[FeatureBlock, tuple[float, ...]] | None = None
    while len(pool) > 1:
        candidate_scores: dict[FeatureBlock, tuple[float, ...]] = {}
        for block in pool:
            candidate = tuple(b for b in pool if b is not block)
            candidate_scores[block] = score_pool(candidate)
        best_block = max(pool, key=lambda b: candidate_scores[b])
        # max() keeps the earliest maximal block, making ties deterministic
        best_score = candidate_scores[best_block]
        if best_score >= current_score:
            iterations.append(
                AblationIteration(
                    pool=pool,
                    pool_score=current_score,
                    candidate_scores=candidate_scores,
                    removed=best_block,
                    removed_score=best_score,
                )
            )
            pool = tuple(b for b in pool if b is not best_block)
            current_score = best_score
            log.info("ablation removed %s (score %s)", best_block.value, best_score)
        else:
            stop_scores = candidate_scores
            break

    return AblationReport(
        mode=mode,
        seed=seed,
        initial_pool=tuple(b for b in FeatureBlock if b in set(initial_pool)),
        final_pool=pool,
        final_score=current_score,
        iterations=tuple(iterations),
        stop_candidate_scores=stop_scores,
        hardest_text_ids=hardest_ids,
    )


# ---------------------------------------------------------------------------
# Disputed-text verification
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    disputed_id: str
    target_author: str
    replica_posteriors: tuple[float, ...]
    median_posterior: float
    predicted_class: str
    seed: int
    corpus_fingerprint: str

    @property
    def n_replicas(self) -> int:
        return len(self.replica_posteriors)

    def to_dict(self) -> dict:
        return {
            "disputed_id": self.disputed_id,
            "target_author": self.target_author,
            "replica_posteriors": list(self.replica_posteriors),
            "median_posterior": self.median_posterior,
            "predicted_class": self.predicted_class,
            "seed": self.seed,
            "corpus_fingerprint": self.corpus_fingerprint,
        }


def _get_disputed(corpus: Corpus, disputed_id: str) -> Document:
    if disputed_id not in corpus:
        raise ExperimentError(
            f"no text with id {disputed_id!r} in the corpus; a disputed text must "
            "be listed in the manifest with author UNKNOWN"
        )
    doc = corpus.get(disputed_id)
    if not doc.is_disputed:
        raise ExperimentError(
            f"text {disputed_id!r} is labelled (author {doc.author!r}); refusing to "
            "treat a training text as disputed"
        )
    return doc


def verify_disputed(
    corpus: Corpus,
    disputed_id: str,
    config: PipelineConfig,
    n_replicas: int = 10,
    seed: int = 0,
    cache: CountsCache | None = None,
) -> Verdict:
    """Train on all labelled texts and classify the disputed one.

    With oversampling enabled, the disputed vector is extended
    ``n_replicas`` times with distinct derived seeds and the verdict is
    taken from the median posterior; without it the prediction is
    deterministic and a single replica is produced.
    """
    if n_replicas < 1:
        raise ExperimentError("n_replicas must be >= 1")
    disputed = _get_disputed(corpus, disputed_id)
    if cache is None:
        cache = CountsCache(config.features)
    train_docs = training_documents(corpus)
    fitted = fit_verifier(train_docs, config, cache, stable_seed(seed, "verify"))

    replicas = n_replicas if fitted.uses_dro else 1
    posteriors = []
    for i in range(replicas):
        prediction = predict_document(
            fitted, disputed, cache, config, stable_seed(seed, "verify"), replica=i
        )
        posteriors.append(prediction.positive_posterior)
    median = float(statistics.median(posteriors))
    predicted = fitted.model.classes[1] if median > 0.5 else fitted.model.classes[0]
    return Verdict(
        disputed_id=disputed_id,
        target_author=config.target_author,
        replica_posteriors=tuple(posteriors),
        median_posterior=median,
        predicted_class=predicted,
        seed=seed,
        corpus_fingerprint=corpus.fingerprint(),
    )


# ---------------------------------------------------------------------------
# Authorship attribution
# ---------------------------------------------------------------------------


@dataclass
class AttributionResult:
    disputed_id: str
    min_texts_per_author: int
    candidate_authors: tuple[str, ...]
    ranking: tuple[tuple[str, float], ...]  # (author, posterior), descending
    fitted_C: float
    seed: int
    corpus_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "disputed_id": self.disputed_id,
            "min_texts_per_author": self.min_texts_per_author,
            "candidate_authors": list(self.candidate_authors),
            "ranking": [[a, p] for a, p in self.ranking],
            "fitted_C": self.fitted_C,
            "seed": self.seed,
            "corpus_fingerprint": self.corpus_fingerprint,
        }


def candidate_authors(corpus: Corpus, min_texts_per_author: int) -> list[str]:
    counts = corpus.authors()
    return sorted(a for a, n in counts.items() if n >= min_texts_per_author)


def attribute_disputed(
    corpus: Corpus,
    disputed_id: str,
    config: PipelineConfig,
    min_texts_per_author: int = 1,
    seed: int = 0,
    cache: CountsCache | None = None,
) -> AttributionResult:
    """Rank candidate authors by posterior probability on the disputed text.

    Candidates are the authors with at least ``min_texts_per_author``
    labelled texts; the attributor trains on exactly their texts (plus
    segments) and never uses oversampling.
    """
    disputed = _get_disputed(corpus, disputed_id)
    candidates = candidate_authors(corpus, min_texts_per_author)
    if len(candidates) < 2:
        raise ExperimentError(
            f"need at least 2 candidate authors with >= {min_texts_per_author} texts, "
            f"found {len(candidates)}"
        )
    if cache is None:
        cache = CountsCache(config.features)
    docs = training_documents(corpus, authors=candidates)
    fitted = fit_attributor(docs, config, cache, stable_seed(seed, "attribute"))
    vector = cache.vectorize(Instance(doc=disputed), fitted.space)
    prediction = predict_proba(fitted.model, vector)
    order = np.argsort(-prediction.posteriors)
    ranking = tuple(
        (prediction.classes[int(i)], float(prediction.posteriors[int(i)])) for i in order
    )
    return AttributionResult(
        disputed_id=disputed_id,
        min_texts_per_author=min_texts_per_author,
        candidate_authors=tuple(fitted.candidate_authors),
        ranking=ranking,
        fitted_C=fitted.chosen_C,
        seed=seed,
        corpus_fingerprint=corpus.fingerprint(),
    )


@dataclass
class AttributionLooReport:
    authors: tuple[str, ...]
    matrix: np.ndarray  # rows = true author, columns = predicted author
    records: tuple[tuple[str, str, str, float], ...]  # (id, true, predicted, conf in true)
    macro_f1: float
    vanilla_accuracy: float
    seed: int
    corpus_fingerprint: str

    @property
    def correct_count(self) -> int:
        return int(np.trace(self.matrix))

    @property
    def total_count(self) -> int:
        return int(self.matrix.sum())

    def to_dict(self) -> dict:
        return {
            "authors": list(self.authors),
            "matrix": self.matrix.tolist(),
            "records": [list(r) for r in self.records],
            "macro_f1": self.macro_f1,
            "vanilla_accuracy": self.vanilla_accuracy,
            "correct_count": self.correct_count,
            "total_count": self.total_count,
            "seed": self.seed,
            "corpus_fingerprint": self.corpus_fingerprint,
        }


def attribution_contingency(
    corpus: Corpus,
    config: PipelineConfig,
    min_texts_per_author: int = 2,
    seed: int = 0,
    cache: CountsCache | None = None,
) -> AttributionLooReport:
    """Leave-one-out attribution over candidate authors' texts."""
    candidates = candidate_authors(corpus, min_texts_per_author)
    if len(candidates) < 2:
        raise ExperimentError(
            f"need at least 2 candidate authors with >= {min_texts_per_author} texts"
        )
    if cache is None:
        cache = CountsCache(config.features)
    docs = training_documents(corpus, authors=candidates)
    author_index = {a: i for i, a in enumerate(candidates)}
    matrix = np.zeros((len(candidates), len(candidates)), dtype=np.int64)
    records: list[tuple[str, str, str, float]] = []
    y_true: list[str] = []
    y_pred: list[str] = []
    for doc in docs:
        fold_docs = [d for d in docs if d.id != doc.id]
        fitted = fit_attributor(
            fold_docs, config, cache, stable_seed(seed, "aa-loo", doc.id)
        )
        vector = cache.vectorize(Instance(doc=doc), fitted.space)
        prediction = predict_proba(fitted.model, vector)
        predicted = prediction.predicted_class
        conf_true = (
            prediction.posterior_of(doc.author)
            if doc.author in prediction.classes
            else 0.0
        )
        matrix[author_index[doc.author], author_index[predicted]] += 1
        records.append((doc.id, doc.author, predicted, conf_true))
        y_true.append(doc.author)
        y_pred.append(predicted)

    tables = per_class_tables(y_true, y_pred, candidates)
    va = int(np.trace(matrix)) / int(matrix.sum())
    return AttributionLooReport(
        authors=tuple(candidates),
        matrix=matrix,
        records=tuple(records),
        macro_f1=macro_f1(tables),
        vanilla_accuracy=va,
        seed=seed,
        corpus_fingerprint=corpus.fingerprint(),
    )


# ---------------------------------------------------------------------------
# Similarity ranking
# ---------------------------------------------------------------------------


@dataclass
class SimilarityRanking:
    disputed_id: str
    entries: tuple[tuple[str, str, str, float], ...]  # (id, author, title, cosine)
    corpus_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "disputed_id": self.disputed_id,
            "entries": [list(e) for e in self.entries],
            "corpus_fingerprint": self.corpus_fingerprint,
        }


def rank_similar(
    corpus: Corpus,
    disputed_id: str,
    config: PipelineConfig,
    top_k: int | None = 10,
    cache: CountsCache | None = None,
) -> SimilarityRanking:
    """Rank labelled full texts by cosine similarity to the disputed text.

    Vectors are natural TFIDF representations over a space fitted on all
    labelled texts and segments; latent oversampling features are never
    involved in similarity.
    """
    disputed = _get_disputed(corpus, disputed_id)
    if cache is None:
        cache = CountsCache(config.features)
    docs = training_documents(corpus)
    instances = document_instances(docs, config.segmentation)
    counts_list = [cache.counts_for(inst) for inst in instances]
    space = fit_feature_space_from_counts(counts_list, config.features)
    disputed_vector = cache.vectorize(Instance(doc=disputed), space)
    if disputed_vector.is_zero():
        raise ExperimentError(
            f"the disputed text {disputed_id!r} has an all-zero vector in this space"
        )
    scored: list[tuple[str, str, str, float]] = []
    for doc in docs:
        vector = cache.vectorize(Instance(doc=doc), space)
        cos = cosine_similarity(disputed_vector, vector)
        scored.append((doc.id, doc.author, doc.title, cos))
    scored.sort(key=lambda row: (-row[3], row[0]))
    if top_k is not None:
        scored = scored[:top_k]
    return SimilarityRanking(
        disputed_id=disputed_id,
        entries=tuple(scored),
        corpus_fingerprint=corpus.fingerprint(),
    )
