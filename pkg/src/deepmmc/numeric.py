"""Dense-matrix primitives shared by every other module.

All randomness in this package flows through numpy Generators created by
:func:`make_rng` (PCG64), so a single integer seed pins every stochastic
routine bit-for-bit across runs and platforms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
BINARY = "binary"

# Pre-activations are clamped to +/-PREACT_CLIP before the logistic map so
# outputs stay strictly inside (0, 1) in float64: logistic(30) sits ~9e-14
# below 1.0, still representable, while logistic(40) would round to 1.0.
PREACT_CLIP = 30.0

# Columns whose population stddev falls below this are centered only.
DEGENERATE_STD = 1e-12

# Covariance eigendecomposition is done on the D x D matrix up to this
# width; wider inputs switch to the N x N Gram matrix.
GRAM_TRICK_DIM = 2000


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator, the single RNG algorithm used package-wide."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class DataMatrix:
    """Row-major table of N instances by D features.

    labels, when present, are dense 1-based cluster ids (1..K with every id
    occurring at least once).  feature_kind "binary" marks features that are
    Bernoulli expectations in [0, 1] (exact 0/1 data included); "continuous"
    leaves values unrestricted.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    feature_kind: str = CONTINUOUS

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(
                f"values must be a non-empty 2-D matrix, got shape {np.shape(self.values)}"
            )
        object.__setattr__(self, "values", values)
        if self.feature_kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown feature_kind {self.feature_kind!r}")
        if self.feature_kind == BINARY:
            if values.min() < 0.0 or values.max() > 1.0:
                raise ValueError("binary feature_kind requires values in [0, 1]")
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (values.shape[0],):
                raise ValueError("labels must be a vector of length N")
            k = int(labels.max())
            if not np.array_equal(np.unique(labels), np.arange(1, k + 1)):
                raise ValueError("labels must be dense 1..K with every id present")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_clusters(self) -> int:
        """Number of ground-truth clusters, 0 when unlabeled."""
        return 0 if self.labels is None else int(self.labels.max())


def remap_labels(raw) -> np.ndarray:
    """Map arbitrary label values to dense 1..K by first occurrence."""
    raw = np.asarray(raw)
    if raw.ndim != 1 or raw.size == 0:
        raise ValueError("labels must be a non-empty vector")
    mapping: dict = {}
    out = np.empty(raw.size, dtype=int)
    for idx, value in enumerate(raw.tolist()):
        if value not in mapping:
            mapping[value] = len(mapping) + 1
        out[idx] = mapping[value]
    return out


def logistic_map(m) -> np.ndarray:
    """Element-wise 1 / (1 + exp(-x)), inputs clamped to +/-PREACT_CLIP.

    The clamp keeps every output strictly inside (0, 1) for arbitrarily
    large inputs; below the clamp the result is the exact logistic.
    """
    z = np.clip(np.asarray(m, dtype=float), -PREACT_CLIP, PREACT_CLIP)
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class ColumnStats:
    """Per-column centering record; reapplying it reproduces the transform."""

    mean: np.ndarray
    scale: np.ndarray  # population stddev, forced to 1.0 where degenerate
    degenerate: np.ndarray  # bool mask of near-constant columns

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != self.mean.shape[0]:
            raise ValueError(
                f"expected matrix with {self.mean.shape[0]} columns, got {np.shape(values)}"
            )
        return (values - self.mean) / self.scale


def standardize_columns(x: DataMatrix) -> tuple[DataMatrix, ColumnStats]:
    """Center each column and scale by its population stddev (divide by N).

    Population rather than sample stddev matches the unit-variance visible
    convention of the gaussian RBM layer that consumes the output.  Columns
    with stddev below DEGENERATE_STD are centered only and flagged.
    """
    if x.n < 2:
        raise ValueError("standardization needs at least 2 rows")
    mean = x.values.mean(axis=0)
    std = x.values.std(axis=0)  # ddof=0
    degenerate = std < DEGENERATE_STD
    if degenerate.any():
        logger.warning(
            "standardize_columns: %d near-constant column(s) centered only",
            int(degenerate.sum()),
        )
    scale = np.where(degenerate, 1.0, std)
    stats = ColumnStats(mean=mean, scale=scale, degenerate=degenerate)
    out = DataMatrix(stats.apply(x.values), labels=x.labels, feature_kind=CONTINUOUS)
    return out, stats


@dataclass(frozen=True)
class PcaBasis:
    """Centered orthonormal projection basis with per-direction variances."""

    mean: np.ndarray
    basis: np.ndarray  # D x target_dim, orthonormal columns
    explained_variance: np.ndarray  # non-increasing

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (values - self.mean) @ self.basis

    def reconstruct(self, projected) -> np.ndarray:
        return self.mean + np.asarray(projected, dtype=float) @ self.basis.T


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # Eigenvector signs are arbitrary; orient each column so its
    # largest-magnitude entry is positive, for run-to-run determinism.
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def pca_project(x: DataMatrix, target_dim: int) -> tuple[DataMatrix, PcaBasis]:
    """Project onto the top principal directions of the centered covariance.

    Uses the D x D covariance for D <= GRAM_TRICK_DIM and the N x N Gram
    matrix otherwise, so very wide inputs stay tractable.
    """
    n, d = x.values.shape
    if not 1 <= target_dim <= min(n, d):
        raise ValueError(
            f"target_dim must be in [1, min(N, D)] = [1, {min(n, d)}], got {target_dim}"
        )
    mean = x.values.mean(axis=0)
    centered = x.values - mean
    if d <= GRAM_TRICK_DIM:
        cov = centered.T @ centered / n
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][:target_dim]
        variance = evals[order]
        basis = evecs[:, order]
    else:
        gram = centered @ centered.T / n
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1][:target_dim]
        variance = evals[order]
        basis = centered.T @ evecs[:, order]
        norms = np.linalg.norm(basis, axis=0)
        basis = basis / np.where(norms < 1e-12, 1.0, norms)
    basis = _fix_signs(basis)
    variance = np.maximum(variance, 0.0)
    projected = centered @ basis
    out = DataMatrix(projected, labels=x.labels, feature_kind=CONTINUOUS)
    return out, PcaBasis(mean=mean, basis=basis, explained_variance=variance)
