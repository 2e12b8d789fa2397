"""Max-margin clustering over encoder codes.

Cluster k is scored by the inner product of its weight block with a code
vector.  Training alternates between projecting the data through the
encoder and taking subgradient steps on the hinge objective built from
must-link pairs, cannot-link pairs, and a transductive margin on the
unlabeled points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintSplit
from .encoder import DeepNet, apply_update, backprop, encode, from_rbm_stack, load_net, save_net
from .numeric import DataMatrix, make_rng
from .rbm import PretrainConfig, pretrain_stack

logger = logging.getLogger(__name__)

# Objective-stall window: stop when the relative change across this many
# iterations drops below the configured tolerance.
STALL_WINDOW = 5

# Iterations a cluster may go without any argmax wins before a collapse
# warning is logged.
COLLAPSE_PATIENCE = 20

KMEANS_ITERS = 25
KMEANS_RESTARTS = 3


class NonFiniteObjectiveError(RuntimeError):
    """Training objective left the finite range; carries an iteration dump."""

    def __init__(self, iteration: int, trace):
        self.iteration = iteration
        self.trace = list(trace)
        tail = ", ".join(f"{v:.6g}" for v in self.trace[-5:])
        super().__init__(
            f"objective became non-finite at iteration {iteration}; recent trace [{tail}]"
        )


@dataclass(frozen=True)
class ClusterWeights:
    """Flat weight vector of length K*d; block k (1-based) is w[(k-1)*d : k*d]."""

    w: np.ndarray
    k: int
    d: int

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if self.k < 1 or self.d < 1:
            raise ValueError("k and d must be positive")
        if w.shape != (self.k * self.d,):
            raise ValueError(f"expected weight vector of length {self.k * self.d}, got {w.shape}")
        if not np.isfinite(w).all():
            raise ValueError("cluster weights must be finite")
        object.__setattr__(self, "w", w)

    @property
    def blocks(self) -> np.ndarray:
        """K x d view, row k-1 holding cluster k's weights."""
        return self.w.reshape(self.k, self.d)

    def block(self, z: int) -> np.ndarray:
        if not 1 <= z <= self.k:
            raise ValueError(f"cluster {z} outside [1, {self.k}]")
        return self.blocks[z - 1]


@dataclass(frozen=True)
class TrainConfig:
    """Joint-training hyperparameters.

    beta = 0 disables the transductive term.  The weight learning rate
    follows lr_schedule; net_rate is the fixed encoder rate.
    """

    lam: float = 0.02
    beta: float = 1.0
    max_iters: int = 300
    net_rate: float = 0.01
    tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.net_rate <= 0:
            raise ValueError("net_rate must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class ViolatedPair:
    """A margin-violating pair and the assignments achieving both maxima."""

    i: int
    j: int
    z_same: int  # best single cluster for placing both instances
    z1_diff: int  # best ordered pair of distinct clusters
    z2_diff: int
    margin: float  # the hinge argument: required-side max minus other max


@dataclass(frozen=True)
class ActiveUnlabeled:
    """An unlabeled point whose top score beats the runner-up by under 1."""

    index: int
    best: int
    runner: int
    margin: float


@dataclass(frozen=True)
class ViolationReport:
    a_plus: tuple[ViolatedPair, ...]
    a_minus: tuple[ViolatedPair, ...]
    active_unlabeled: tuple[ActiveUnlabeled, ...]


@dataclass
class TrainReport:
    """Per-iteration trace plus the trained parameters."""

    objective_trace: np.ndarray
    n_violated_plus: np.ndarray
    n_violated_minus: np.ndarray
    n_active_unlabeled: np.ndarray
    stop_reason: str
    weights: ClusterWeights
    net: DeepNet

    @property
    def n_iters(self) -> int:
        return len(self.objective_trace)


def joint_feature(h, z: int, k: int) -> np.ndarray:
    """Feature map placing code h into block z of a K*d vector."""
    h = np.asarray(h, dtype=float).ravel()
    if not 1 <= z <= k:
        raise ValueError(f"cluster {z} outside [1, {k}]")
    d = h.size
    out = np.zeros(k * d)
    out[(z - 1) * d : z * d] = h
    return out


def pair_feature(h1, h2, z1: int, z2: int, k: int) -> np.ndarray:
    """Sum of the two individual example-cluster feature maps."""
    return joint_feature(h1, z1, k) + joint_feature(h2, z2, k)


def infer_cluster(w: ClusterWeights, h) -> tuple[int, float]:
    """Highest-scoring cluster for one code; ties go to the smallest index."""
    h = np.asarray(h, dtype=float).ravel()
    if h.size != w.d:
        raise ValueError(f"code length {h.size} != weight block length {w.d}")
    scores = w.blocks @ h
    z = int(np.argmax(scores))
    return z + 1, float(scores[z])


def assign_clusters(w: ClusterWeights, h) -> np.ndarray:
    """Batch inference: 1-based cluster labels, one per code row."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[1] != w.d:
        raise ValueError(f"expected batch x {w.d} codes, got {h.shape}")
    return np.argmax(h @ w.blocks.T, axis=1) + 1


def best_same_assignment(w: ClusterWeights, h1, h2) -> tuple[int, float]:
    """Best single cluster receiving both codes; ties to the smallest index."""
    h1 = np.asarray(h1, dtype=float).ravel()
    h2 = np.asarray(h2, dtype=float).ravel()
    if h1.size != w.d or h2.size != w.d:
        raise ValueError("code length mismatch")
    scores = w.blocks @ (h1 + h2)
    z = int(np.argmax(scores))
    return z + 1, float(scores[z])


def best_diff_assignment(w: ClusterWeights, h1, h2) -> tuple[int, int, float]:
    """Best ordered pair of distinct clusters; ties lexicographically smallest."""
    if w.k < 2:
        raise ValueError("different-cluster assignment needs K >= 2")
    h1 = np.asarray(h1, dtype=float).ravel()
    h2 = np.asarray(h2, dtype=float).ravel()
    if h1.size != w.d or h2.size != w.d:
        raise ValueError("code length mismatch")
    s1 = w.blocks @ h1
    s2 = w.blocks @ h2
    total = s1[:, None] + s2[None, :]
    np.fill_diagonal(total, -np.inf)
    flat = int(np.argmax(total))
    z1, z2 = divmod(flat, w.k)
    return z1 + 1, z2 + 1, float(total[z1, z2])


def _pair_margins(scores: np.ndarray, pairs) -> tuple[np.ndarray, ...]:
    """Vectorized per-pair maxima over diagonal and off-diagonal assignments.

    Returns (z_same, s_same, z1_diff, z2_diff, s_diff) with 0-based cluster
    indices; argmax positions inherit numpy's first-maximum tie rule, which
    is the smallest (then lexicographic) index.
    """
    k = scores.shape[1]
    idx_i = np.fromiter((c.i for c in pairs), dtype=int, count=len(pairs))
    idx_j = np.fromiter((c.j for c in pairs), dtype=int, count=len(pairs))
    si = scores[idx_i]
    sj = scores[idx_j]
    diag = si + sj
    z_same = np.argmax(diag, axis=1)
    s_same = diag[np.arange(len(pairs)), z_same]
    grid = si[:, :, None] + sj[:, None, :]
    grid[:, np.arange(k), np.arange(k)] = -np.inf
    flat = grid.reshape(len(pairs), k * k)
    best = np.argmax(flat, axis=1)
    s_diff = flat[np.arange(len(pairs)), best]
    z1_diff, z2_diff = best // k, best % k
    return z_same, s_same, z1_diff, z2_diff, s_diff


def violated_sets(w: ClusterWeights, h, split: ConstraintSplit) -> ViolationReport:
    """Constraints and unlabeled points whose required margin of 1 fails.

    Each entry records the assignments that achieved the two maxima so the
    gradient routines can reuse them without re-deriving argmaxes.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[1] != w.d:
        raise ValueError(f"expected batch x {w.d} codes, got {h.shape}")
    if w.k < 2:
        raise ValueError("margin evaluation needs K >= 2")
    scores = h @ w.blocks.T

    a_plus = []
    if split.c_plus:
        z_same, s_same, z1d, z2d, s_diff = _pair_margins(scores, split.c_plus)
        margins = s_same - s_diff
        for idx, c in enumerate(split.c_plus):
            if margins[idx] < 1.0:
                a_plus.append(
                    ViolatedPair(c.i, c.j, int(z_same[idx]) + 1, int(z1d[idx]) + 1,
                                 int(z2d[idx]) + 1, float(margins[idx]))
                )

    a_minus = []
    if split.c_minus:
        z_same, s_same, z1d, z2d, s_diff = _pair_margins(scores, split.c_minus)
        margins = s_diff - s_same
        for idx, c in enumerate(split.c_minus):
            if margins[idx] < 1.0:
                a_minus.append(
                    ViolatedPair(c.i, c.j, int(z_same[idx]) + 1, int(z1d[idx]) + 1,
                                 int(z2d[idx]) + 1, float(margins[idx]))
                )

    active = []
    if split.n_unlabeled:
        su = scores[split.unlabeled]
        best = np.argmax(su, axis=1)
        top = su[np.arange(len(su)), best]
        masked = su.copy()
        masked[np.arange(len(su)), best] = -np.inf
        runner = np.argmax(masked, axis=1)
        margins = top - masked[np.arange(len(su)), runner]
        for row, u in enumerate(split.unlabeled):
            if margins[row] < 1.0:
                active.append(
                    ActiveUnlabeled(int(u), int(best[row]) + 1, int(runner[row]) + 1,
                                    float(margins[row]))
                )

    return ViolationReport(tuple(a_plus), tuple(a_minus), tuple(active))


def objective_from_report(
    w: ClusterWeights, report: ViolationReport, split: ConstraintSplit, cfg: TrainConfig
) -> float:
    """Hinge objective value given a fresh violation report.

    Satisfied entries contribute zero, so summing 1 - margin over the
    violated sets equals the full hinge sums.  Empty constraint sets and an
    empty unlabeled set contribute nothing (their normalizers would divide
    by zero).
    """
    total = 0.5 * cfg.lam * float(w.w @ w.w)
    if split.n_plus:
        total += sum(1.0 - vp.margin for vp in report.a_plus) / split.n_plus
    if split.n_minus:
        total += sum(1.0 - vp.margin for vp in report.a_minus) / split.n_minus
    if split.n_unlabeled and cfg.beta:
        coef = cfg.beta / (split.n_unlabeled * w.k)
        total += coef * sum(1.0 - au.margin for au in report.active_unlabeled)
    return total


def objective(
    w: ClusterWeights, net: DeepNet, x, split: ConstraintSplit, cfg: TrainConfig
) -> float:
    """Full objective at (w, net): encodes x and sums the hinge terms."""
    values = x.values if isinstance(x, DataMatrix) else np.asarray(x, dtype=float)
    h = encode(net, values).h
    report = violated_sets(w, h, split)
    return objective_from_report(w, report, split, cfg)


def _verify_report(w, h, report, split):
    fresh = violated_sets(w, h, split)
    if fresh != report:
        raise ValueError("stale violation report: argmaxes no longer match (w, H)")


def grad_w(
    w: ClusterWeights,
    h,
    report: ViolationReport,
    split: ConstraintSplit,
    cfg: TrainConfig,
    check_stale: bool = False,
) -> np.ndarray:
    """Subgradient of the objective w.r.t. the flat weight vector.

    Uses the argmax assignments stored in the report; pass check_stale=True
    to recompute and verify them first (debugging aid).
    """
    h = np.asarray(h, dtype=float)
    if check_stale:
        _verify_report(w, h, report, split)
    k, d = w.k, w.d
    g = cfg.lam * w.w.copy()
    gb = g.reshape(k, d)
    if split.n_plus:
        coef = 1.0 / split.n_plus
        for vp in report.a_plus:
            h1, h2 = h[vp.i], h[vp.j]
            gb[vp.z_same - 1] -= coef * (h1 + h2)
            gb[vp.z1_diff - 1] += coef * h1
            gb[vp.z2_diff - 1] += coef * h2
    if split.n_minus:
        coef = 1.0 / split.n_minus
        for vp in report.a_minus:
            h1, h2 = h[vp.i], h[vp.j]
            gb[vp.z1_diff - 1] -= coef * h1
            gb[vp.z2_diff - 1] -= coef * h2
            gb[vp.z_same - 1] += coef * (h1 + h2)
    if split.n_unlabeled and cfg.beta:
        coef = cfg.beta / (split.n_unlabeled * k)
        for au in report.active_unlabeled:
            hu = h[au.index]
            gb[au.best - 1] -= coef * hu
            gb[au.runner - 1] += coef * hu
    return g


def grad_h(
    w: ClusterWeights,
    report: ViolationReport,
    split: ConstraintSplit,
    cfg: TrainConfig,
    n: int,
    d: int,
) -> np.ndarray:
    """Subgradient of the objective w.r.t. the code matrix, shape n x d.

    Rows accumulate across every violated constraint that touches the
    instance; rows of untouched or non-violating instances stay zero.
    """
    if d != w.d:
        raise ValueError(f"code dimension {d} != weight block length {w.d}")
    blocks = w.blocks
    out = np.zeros((n, d))
    if split.n_plus:
        coef = 1.0 / split.n_plus
        for vp in report.a_plus:
            out[vp.i] -= coef * (blocks[vp.z_same - 1] - blocks[vp.z1_diff - 1])
            out[vp.j] -= coef * (blocks[vp.z_same - 1] - blocks[vp.z2_diff - 1])
    if split.n_minus:
        coef = 1.0 / split.n_minus
        for vp in report.a_minus:
            out[vp.i] -= coef * (blocks[vp.z1_diff - 1] - blocks[vp.z_same - 1])
            out[vp.j] -= coef * (blocks[vp.z2_diff - 1] - blocks[vp.z_same - 1])
    if split.n_unlabeled and cfg.beta:
        coef = cfg.beta / (split.n_unlabeled * w.k)
        for au in report.active_unlabeled:
            out[au.index] -= coef * (blocks[au.best - 1] - blocks[au.runner - 1])
    return out


def _kmeans_pp_seed(h, k, rng):
    n = h.shape[0]
    centroids = np.empty((k, h.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = h[first]
    d2 = np.sum((h - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centroid; fall back to
            # a deterministic sweep
            centroids[c] = h[c % n]
            continue
        probs = d2 / total
        pick = int(rng.choice(n, p=probs))
        centroids[c] = h[pick]
        d2 = np.minimum(d2, np.sum((h - centroids[c]) ** 2, axis=1))
    return centroids


def _kmeans_once(h, k, rng):
    centroids = _kmeans_pp_seed(h, k, rng)
    assign = None
    for _ in range(KMEANS_ITERS):
        d2 = ((h[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = h[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its centroid
                worst = int(np.argmax(d2[np.arange(len(h)), assign]))
                centroids[c] = h[worst]
                assign[worst] = c
    d2 = ((h[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    sse = float(d2[np.arange(len(h)), np.argmin(d2, axis=1)].sum())
    return centroids, sse


def init_cluster_weights(h, k: int, rng) -> ClusterWeights:
    """Seed cluster weights from k-means centroids on the codes.

    Runs KMEANS_RESTARTS seeded k-means fits of KMEANS_ITERS iterations
    each, keeps the lowest within-cluster sum of squares, and normalizes
    each centroid to unit Euclidean norm.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] < 1:
        raise ValueError("codes must be a non-empty matrix")
    if k < 2:
        raise ValueError("need K >= 2 clusters")
    if k > h.shape[0]:
        raise ValueError(f"K = {k} exceeds the {h.shape[0]} available codes")
    best, best_sse = None, np.inf
    for _ in range(KMEANS_RESTARTS):
        centroids, sse = _kmeans_once(h, k, rng)
        if sse < best_sse:
            best, best_sse = centroids, sse
    norms = np.linalg.norm(best, axis=1, keepdims=True)
    normalized = best / np.where(norms < 1e-12, 1.0, norms)
    return ClusterWeights(normalized.ravel(), k, h.shape[1])


def lr_schedule(lam: float, iteration: int) -> float:
    """Decreasing weight learning rate 1 / (lam * (iteration + 1))."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return 1.0 / (lam * (iteration + 1))


def weight_norm_bound(split: ConstraintSplit, k: int, cfg: TrainConfig) -> float:
    """Radius of the ball that provably contains the optimal W for fixed codes.

    W = 0 scores [n+ > 0] + [n- > 0] + beta/K * [U > 0], so any optimum
    satisfies lam/2 ||W*||^2 <= that value.  Projecting iterates onto this
    ball therefore never excludes an optimum; it only tames the very large
    early steps of the 1/(lam (i+1)) schedule, whose first step would
    otherwise swamp the iterate average for hundreds of iterations.
    """
    at_zero = 0.0
    if split.n_plus:
        at_zero += 1.0
    if split.n_minus:
        at_zero += 1.0
    if split.n_unlabeled and cfg.beta:
        at_zero += cfg.beta / k
    return float(np.sqrt(2.0 * at_zero / cfg.lam))


def train(
    x: DataMatrix,
    split: ConstraintSplit,
    n_clusters: int,
    layer_sizes,
    cfg: TrainConfig,
    pre_cfg: PretrainConfig,
) -> TrainReport:
    """Pretrain the encoder, seed cluster weights, then alternate updates.

    Each iteration re-encodes the data, finds the violated sets, and takes
    one subgradient step on both the cluster weights (rate lr_schedule) and
    the encoder tables (fixed rate cfg.net_rate).  Stops early once the
    relative objective change across STALL_WINDOW iterations falls below
    cfg.tolerance.
    """
    if n_clusters < 2:
        raise ValueError("need K >= 2 clusters")
    n = x.n
    for c in list(split.c_plus) + list(split.c_minus):
        if c.j >= n:
            raise ValueError(f"constraint index {c.j} outside [0, {n})")
    if split.n_unlabeled and int(split.unlabeled.max()) >= n:
        raise ValueError("unlabeled index outside the data")

    stack = pretrain_stack(x, layer_sizes, pre_cfg, make_rng(pre_cfg.seed))
    net = from_rbm_stack(stack)
    w = init_cluster_weights(encode(net, x.values).h, n_clusters, make_rng(cfg.seed))

    obj_trace: list[float] = []
    counts_plus: list[int] = []
    counts_minus: list[int] = []
    counts_u: list[int] = []
    starved = np.zeros(n_clusters, dtype=int)
    stop_reason = "max_iters"

    for it in range(cfg.max_iters):
        trace = encode(net, x.values)
        h = trace.h
        report = violated_sets(w, h, split)
        obj = objective_from_report(w, report, split, cfg)
        if not np.isfinite(obj):
            raise NonFiniteObjectiveError(it, obj_trace)
        obj_trace.append(obj)
        counts_plus.append(len(report.a_plus))
        counts_minus.append(len(report.a_minus))
        counts_u.append(len(report.active_unlabeled))

        if it >= STALL_WINDOW:
            prev = obj_trace[it - STALL_WINDOW]
            if abs(obj - prev) <= cfg.tolerance * max(abs(prev), 1e-12):
                stop_reason = "converged"
                break

        wins = np.bincount(assign_clusters(w, h) - 1, minlength=n_clusters)
        starved = np.where(wins == 0, starved + 1, 0)
        for c in np.nonzero(starved == COLLAPSE_PATIENCE)[0]:
            logger.warning(
                "cluster %d has had no argmax wins for %d iterations",
                c + 1, COLLAPSE_PATIENCE,
            )

        gw = grad_w(w, h, report, split, cfg)
        gh = grad_h(w, report, split, cfg, n, w.d)
        theta_grads = backprop(net, trace, gh)
        w = ClusterWeights(w.w - lr_schedule(cfg.lam, it) * gw, w.k, w.d)
        net = apply_update(net, theta_grads, cfg.net_rate)

    return TrainReport(
        objective_trace=np.asarray(obj_trace),
        n_violated_plus=np.asarray(counts_plus, dtype=int),
        n_violated_minus=np.asarray(counts_minus, dtype=int),
        n_active_unlabeled=np.asarray(counts_u, dtype=int),
        stop_reason=stop_reason,
        weights=w,
        net=net,
    )


def save_model(path, w: ClusterWeights, net: DeepNet, cfg: TrainConfig) -> None:
    """Serialize the encoder plus cluster weights and the run metadata."""
    save_net(
        path,
        net,
        extra_arrays={"cluster_weights": w.w},
        metadata={"k": w.k, "d": w.d, "lam": cfg.lam, "beta": cfg.beta, "seed": cfg.seed},
    )


def load_model(path) -> tuple[ClusterWeights, DeepNet, dict]:
    net, extra, meta = load_net(path)
    w = ClusterWeights(extra["cluster_weights"], int(meta["k"]), int(meta["d"]))
    return w, net, meta
