"""Pairwise must-link / cannot-link constraints: sampling, splitting, files.

The on-disk format is one constraint per line, tab-separated 0-based
indices and a 0/1 same-cluster flag: ``i<TAB>j<TAB>{0|1}``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# Rejection-sampling attempts allowed per requested pair before giving up.
RETRY_FACTOR = 1000


class SamplingExhaustedError(RuntimeError):
    """Could not find enough distinct pairs of the requested kind."""


@dataclass(frozen=True)
class PairwiseConstraint:
    """Unordered instance pair with its same-cluster flag (stored i < j)."""

    i: int
    j: int
    same: bool

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("constraint endpoints must differ")
        if self.i < 0 or self.j < 0:
            raise ValueError("indices must be non-negative")
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)

    @property
    def key(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class ConstraintSplit:
    """Must-link set, cannot-link set, and the untouched (unlabeled) indices."""

    c_plus: tuple[PairwiseConstraint, ...]
    c_minus: tuple[PairwiseConstraint, ...]
    unlabeled: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c_plus", tuple(self.c_plus))
        object.__setattr__(self, "c_minus", tuple(self.c_minus))
        object.__setattr__(self, "unlabeled", np.asarray(self.unlabeled, dtype=int))

    @property
    def n_plus(self) -> int:
        return len(self.c_plus)

    @property
    def n_minus(self) -> int:
        return len(self.c_minus)

    @property
    def n_unlabeled(self) -> int:
        return int(self.unlabeled.size)


def sample_constraints(labels, n_pairs: int, balance: float, rng) -> list[PairwiseConstraint]:
    """Draw n_pairs distinct unordered pairs with ground-truth same flags.

    round(balance * n_pairs) of them are must-links, the remainder
    cannot-links.  Pairs are rejection-sampled uniformly; after
    RETRY_FACTOR * n_pairs failed attempts for a category the draw aborts
    with SamplingExhaustedError.
    """
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    if n < 2 or np.unique(labels).size < 2:
        raise ValueError("need at least two instances and two distinct labels")
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    if not 0 < balance < 1:
        raise ValueError("balance must be in (0, 1)")
    n_must = int(math.floor(balance * n_pairs + 0.5))
    n_cannot = n_pairs - n_must

    chosen: set[tuple[int, int]] = set()
    out: list[PairwiseConstraint] = []
    cap = RETRY_FACTOR * n_pairs
    for want_same, count in ((True, n_must), (False, n_cannot)):
        made = attempts = 0
        while made < count:
            attempts += 1
            if attempts > cap:
                kind = "must-link" if want_same else "cannot-link"
                raise SamplingExhaustedError(
                    f"gave up after {cap} attempts with {made}/{count} {kind} pairs"
                )
            i = int(rng.integers(n))
            j = int(rng.integers(n))
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key in chosen:
                continue
            if (labels[i] == labels[j]) != want_same:
                continue
            chosen.add(key)
            out.append(PairwiseConstraint(key[0], key[1], want_same))
            made += 1
    return out


def split_train_test(
    constraints, train_fraction: float, rng
) -> tuple[list[PairwiseConstraint], list[PairwiseConstraint]]:
    """Stratified random split on the same flag.

    The train side gets round(train_fraction * total) pairs, allocated to
    the two strata by largest remainder (ties favor must-links).
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    strata = (
        [c for c in constraints if c.same],
        [c for c in constraints if not c.same],
    )
    if not strata[0] or not strata[1]:
        logger.warning("split_train_test: a constraint stratum is empty")
    target = int(math.floor(train_fraction * len(list(constraints)) + 0.5))
    quotas = [train_fraction * len(s) for s in strata]
    takes = [int(math.floor(q)) for q in quotas]
    remainder = target - sum(takes)
    # ties resolved toward the earlier stratum (must-links)
    order = sorted(range(2), key=lambda s: (-(quotas[s] - takes[s]), s))
    for s in order:
        if remainder <= 0:
            break
        room = len(strata[s]) - takes[s]
        extra = min(remainder, room, 1)
        takes[s] += extra
        remainder -= extra

    train: list[PairwiseConstraint] = []
    test: list[PairwiseConstraint] = []
    for stratum, take in zip(strata, takes):
        perm = rng.permutation(len(stratum))
        train.extend(stratum[idx] for idx in perm[:take])
        test.extend(stratum[idx] for idx in perm[take:])
    return train, test


def partition(train, n_instances: int) -> ConstraintSplit:
    """Split training constraints into C+, C-, and the untouched index set U."""
    touched: set[int] = set()
    c_plus, c_minus = [], []
    for c in train:
        if not 0 <= c.i < n_instances or not 0 <= c.j < n_instances:
            raise ValueError(f"constraint ({c.i}, {c.j}) outside [0, {n_instances})")
        touched.update((c.i, c.j))
        (c_plus if c.same else c_minus).append(c)
    unlabeled = np.array(sorted(set(range(n_instances)) - touched), dtype=int)
    return ConstraintSplit(tuple(c_plus), tuple(c_minus), unlabeled)


def write_constraints(constraints, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for c in constraints:
            fh.write(f"{c.i}\t{c.j}\t{1 if c.same else 0}\n")


def read_constraints(path, n_instances: int | None = None) -> list[PairwiseConstraint]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i<TAB>j<TAB>flag'")
            try:
                i, j, flag = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer field") from exc
            if flag not in (0, 1):
                raise ValueError(f"{path}:{lineno}: flag must be 0 or 1")
            if n_instances is not None and not (0 <= i < n_instances and 0 <= j < n_instances):
                raise ValueError(f"{path}:{lineno}: index outside [0, {n_instances})")
            out.append(PairwiseConstraint(i, j, bool(flag)))
    return out
