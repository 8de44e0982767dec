"""Distributional random oversampling (DRO).

Vectors are extended with a latent block whose coordinates index training
instances. Every natural feature f carries a categorical profile pi_f
over those latent indices, proportional to f's weight in each training
instance; features unseen in training fall back to a uniform profile.
Extending a vector draws m feature occurrences from the vector's own
weight distribution, then one latent index from each drawn feature's
profile, accumulates the draws, and L2-normalizes the latent block.

Because a vector can be re-extended with fresh randomness as often as
desired, minority-class training examples can be multiplied: each
synthetic copy shares its source's natural block exactly and differs
only in the latent block. Negatives are extended exactly once, so only
the positive class grows. All randomness is derived from a master seed
plus (instance id, replica index), which makes the extended dataset
byte-identical across runs and thread schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DroError
from .features import SparseVector
from .rng import spawn_rng


@dataclass
class DroConfig:
    """Oversampling parameters.

    ``latent_dimension`` of None means one latent coordinate per training
    instance. ``samples_per_extension`` of None means each vector's own
    raw occurrence count, so longer texts get lower-variance latent
    blocks.
    """

    target_positive_ratio: float = 0.20
    latent_dimension: int | None = None
    samples_per_extension: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.target_positive_ratio < 1.0):
            raise DroError(
                f"target_positive_ratio must be in (0, 1), got {self.target_positive_ratio}"
            )
        if self.latent_dimension is not None and self.latent_dimension < 1:
            raise DroError("latent_dimension must be >= 1")
        if self.samples_per_extension is not None and self.samples_per_extension < 1:
            raise DroError("samples_per_extension must be >= 1")


@dataclass
class DistributionalProfiles:
    """Per-feature categorical distributions over latent indices."""

    latent_dim: int
    feature_dim: int
    _columns: sp.csc_matrix  # (n_train, feature_dim); column f = raw profile of f
    _column_sums: np.ndarray
    space_fingerprint: str = ""

    def profile(self, feature: int) -> tuple[np.ndarray, np.ndarray] | None:
        """(latent indices, probabilities) for one feature; None => uniform fallback."""
        if not (0 <= feature < self.feature_dim):
            raise DroError(f"feature index {feature} out of range")
        if self._column_sums[feature] <= 0:
            return None
        start, end = self._columns.indptr[feature], self._columns.indptr[feature + 1]
        idx = self._columns.indices[start:end].astype(np.int64)
        probs = self._columns.data[start:end] / self._column_sums[feature]
        return idx, probs


def fit_profiles(
    X,
    latent_dimension: int | None = None,
    space_fingerprint: str = "",
) -> DistributionalProfiles:
    """Build profiles from the natural training matrix (rows = instances).

    The latent space defaults to one dimension per training instance; a
    larger dimension leaves the extra coordinates reachable only through
    the uniform fallback. A smaller dimension cannot index the training
    instances and is rejected.
    """
    if X.shape[0] == 0:
        raise DroError("cannot fit profiles on an empty training matrix")
    n = X.shape[0]
    latent_dim = n if latent_dimension is None else int(latent_dimension)
    if latent_dim < n:
        raise DroError(
            f"latent_dimension {latent_dim} is smaller than the {n} training instances"
        )
    csc = sp.csc_matrix(X, dtype=np.float64)
    if csc.nnz and csc.data.min() < 0:
        raise DroError("profiles require nonnegative feature weights")
    sums = np.asarray(csc.sum(axis=0)).ravel()
    return DistributionalProfiles(
        latent_dim=latent_dim,
        feature_dim=X.shape[1],
        _columns=csc,
        _column_sums=sums,
        space_fingerprint=space_fingerprint,
    )


@dataclass
class ExtendedVector:
    """A natural vector plus its sampled latent block.

    The natural block is the very object that was extended, never a
    copy, so it is byte-identical by construction.
    """

    natural: SparseVector
    latent_indices: np.ndarray
    latent_values: np.ndarray
    latent_dim: int

    @property
    def instance_id(self) -> str:
        return self.natural.instance_id

    @property
    def dim(self) -> int:
        return self.natural.dim + self.latent_dim

    def combined(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices/values over the concatenated natural+latent space."""
        idx = np.concatenate([self.natural.indices, self.latent_indices + self.natural.dim])
        vals = np.concatenate([self.natural.values, self.latent_values])
        return idx, vals


def sample_latent_counts(
    vector: SparseVector,
    profiles: DistributionalProfiles,
    m_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Raw latent draw counts for one vector (before normalization)."""
    counts = np.zeros(profiles.latent_dim, dtype=np.float64)
    total = float(vector.values.sum())
    if total <= 0:
        return counts
    feature_draws = rng.multinomial(m_samples, vector.values / total)
    for pos in np.nonzero(feature_draws)[0]:
        k = int(feature_draws[pos])
        prof = profiles.profile(int(vector.indices[pos]))
        if prof is None:
            drawn = rng.multinomial(k, np.full(profiles.latent_dim, 1.0 / profiles.latent_dim))
            counts += drawn
        else:
            idx, probs = prof
            counts[idx] += rng.multinomial(k, probs)
    return counts


def extend(
    vector: SparseVector,
    profiles: DistributionalProfiles,
    m_samples: int | None,
    rng: np.random.Generator,
) -> ExtendedVector:
    """Append a sampled, L2-normalized latent block to one vector.

    A zero vector gets a zero latent block. Otherwise m_samples must be
    positive; None means the vector's own occurrence count.
    """
    if vector.dim != profiles.feature_dim:
        raise DroError(
            f"vector dim {vector.dim} does not match profile dim {profiles.feature_dim}"
        )
    if (
        profiles.space_fingerprint
        and vector.space_fingerprint
        and profiles.space_fingerprint != vector.space_fingerprint
    ):
        raise DroError("vector and profiles were built from different feature spaces")
    if vector.is_zero() or vector.values.sum() <= 0:
        return ExtendedVector(
            natural=vector,
            latent_indices=np.empty(0, dtype=np.int64),
            latent_values=np.empty(0, dtype=np.float64),
            latent_dim=profiles.latent_dim,
        )
    m = vector.occurrence_count if m_samples is None else int(m_samples)
    if m <= 0:
        raise DroError(f"m_samples must be positive for a nonzero vector, got {m}")
    counts = sample_latent_counts(vector, profiles, m, rng)
    idx = np.nonzero(counts)[0].astype(np.int64)
    vals = counts[idx]
    vals = vals / np.sqrt(np.sum(vals * vals))
    return ExtendedVector(
        natural=vector,
        latent_indices=idx,
        latent_values=vals,
        latent_dim=profiles.latent_dim,
    )


def synthetic_positive_count(n_pos: int, n_neg: int, target_ratio: float) -> int:
    """Synthetic positives needed to reach the target positive ratio.

    Resolves to the largest count that does not overshoot the target by a
    whole example: with 121 positives, 5309 negatives and a 20/80 target
    this yields 1206 synthetics (1327 positives in total).
    """
    if not (0.0 < target_ratio < 1.0):
        raise DroError(f"target ratio must be in (0, 1), got {target_ratio}")
    raw = (target_ratio * n_neg - (1.0 - target_ratio) * n_pos) / (1.0 - target_ratio)
    return max(0, math.floor(raw + 1e-9))


@dataclass
class ExtendedExample:
    vector: ExtendedVector
    label: int
    source_id: str  # original instance the example derives from
    replica: int  # 0 for originals, >= 1 for synthetic copies

    @property
    def synthetic(self) -> bool:
        return self.replica > 0

    @property
    def example_id(self) -> str:
        if self.replica == 0:
            return self.source_id
        return f"{self.source_id}#dro{self.replica}"


def oversample(
    examples: Sequence[tuple[SparseVector, int]],
    profiles: DistributionalProfiles,
    config: DroConfig,
    master_seed: int | None = None,
) -> list[ExtendedExample]:
    """Extend every example once and synthesize positives up to the target ratio.

    Labels must be binary with 1 marking the (minority) positive class.
    Synthetic positives re-extend randomly chosen original positives with
    fresh randomness; their natural blocks are shared with the source.
    """
    labels = [int(label) for _, label in examples]
    if any(label not in (0, 1) for label in labels):
        raise DroError("oversample expects binary 0/1 labels")
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0:
        raise DroError("cannot oversample: no positive examples")
    seed = config.seed if master_seed is None else master_seed

    out: list[ExtendedExample] = []
    for vector, label in examples:
        rng = spawn_rng(seed, "dro-extend", vector.instance_id, 0)
        extended = extend(vector, profiles, config.samples_per_extension, rng)
        out.append(
            ExtendedExample(vector=extended, label=label, source_id=vector.instance_id, replica=0)
        )

    n_synthetic = synthetic_positive_count(n_pos, n_neg, config.target_positive_ratio)
    if n_synthetic == 0:
        return out
    positives = [(v, label) for v, label in examples if label == 1]
    picker = spawn_rng(seed, "dro-pick")
    chosen = picker.integers(0, len(positives), size=n_synthetic)
    replica_counter: dict[str, int] = {}
    for source_pos in chosen:
        vector, _ = positives[int(source_pos)]
        replica = replica_counter.get(vector.instance_id, 0) + 1
        replica_counter[vector.instance_id] = replica
        rng = spawn_rng(seed, "dro-extend", vector.instance_id, replica)
        extended = extend(vector, profiles, config.samples_per_extension, rng)
        out.append(
            ExtendedExample(
                vector=extended, label=1, source_id=vector.instance_id, replica=replica
            )
        )
    return out


def extended_to_csr(examples: Sequence[ExtendedExample]) -> tuple[sp.csr_matrix, np.ndarray]:
    """Stack extended examples into (matrix, labels) for training."""
    if not examples:
        raise DroError("cannot build a matrix from zero examples")
    dim = examples[0].vector.dim
    indptr = np.zeros(len(examples) + 1, dtype=np.int64)
    all_idx: list[np.ndarray] = []
    all_val: list[np.ndarray] = []
    for i, ex in enumerate(examples):
        if ex.vector.dim != dim:
            raise DroError("extended examples have inconsistent dimensions")
        idx, vals = ex.vector.combined()
        all_idx.append(idx)
        all_val.append(vals)
        indptr[i + 1] = indptr[i] + idx.shape[0]
    data = np.concatenate(all_val)
    cols = np.concatenate(all_idx)
    matrix = sp.csr_matrix((data, cols, indptr), shape=(len(examples), dim))
    labels = np.asarray([ex.label for ex in examples], dtype=np.int64)
    return matrix, labels
