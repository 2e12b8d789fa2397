"""Experiment orchestration: per-seed runs, sweeps, ablations, report files.

A run is fully determined by its ExperimentConfig.  Every stochastic stage
of a seed's pipeline draws from child seeds derived from that seed, so a
config (seed list included) pins metrics.csv byte-for-byte.  Wall-clock
timings are recorded in report.json only; they are environment data and
sit outside the determinism contract.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import TrainConfig, TrainReport, assign_clusters, save_model, train
from .constraints import (
    partition,
    read_constraints,
    sample_constraints,
    split_train_test,
    write_constraints,
)
from .datasets import DataFormatError, load_csv, load_idx
from .encoder import encode
from .metrics import adjusted_rand_index, clustering_accuracy, pairwise_scores, roc_auc
from .numeric import CONTINUOUS, DataMatrix, make_rng, pca_project, standardize_columns
from .rbm import PretrainConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

METRICS_COLUMNS = ("seed", "n_pairs", "beta", "accuracy", "ari", "auc", "iterations")


class ConfigError(ValueError):
    """An ExperimentConfig (or config file / flag set) is invalid."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    data_path: str = ""
    data_format: str = "csv"  # "csv" or "idx"
    labels_path: str | None = None  # idx only
    label_column: str | int | None = "last"  # csv only
    limit: int | None = None  # idx subsample size
    layer_sizes: list[int] = field(default_factory=lambda: [100])
    n_clusters: int | None = None  # default: number of ground-truth labels
    lam: float = 0.02
    beta: float = 1.0
    max_iters: int = 300
    net_rate: float = 0.01
    tolerance: float = 1e-4
    epochs: int = 50
    minibatch_size: int = 32
    pre_learning_rate: float | None = None
    momentum: float = 0.5
    weight_decay: float = 2e-4
    n_pairs: int = 200
    balance: float = 0.5
    train_fraction: float = 0.5
    pca_dim: int | None = None
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    output_dir: str = "results"
    constraints_in: str | None = None
    constraints_out: str | None = None
    save_model_path: str | None = None

    def validate(self) -> None:
        if not self.data_path:
            raise ConfigError("data_path is required")
        if not Path(self.data_path).exists():
            raise DataFormatError(f"data file not found: {self.data_path}")
        if self.data_format not in ("csv", "idx"):
            raise ConfigError(f"unknown data_format {self.data_format!r}")
        if self.data_format == "idx":
            if not self.labels_path:
                raise ConfigError("idx data needs labels_path")
            if not Path(self.labels_path).exists():
                raise DataFormatError(f"labels file not found: {self.labels_path}")
        if self.constraints_in and not Path(self.constraints_in).exists():
            raise DataFormatError(f"constraint file not found: {self.constraints_in}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.layer_sizes:
            raise ConfigError("layer_sizes must be non-empty")
        # delegate numeric validation to the dataclasses that own the fields
        TrainConfig(self.lam, self.beta, self.max_iters, self.net_rate, self.tolerance, 0)
        PretrainConfig(
            self.epochs, self.minibatch_size, self.pre_learning_rate,
            self.momentum, self.weight_decay, 0,
        )


@dataclass
class SeedResult:
    """Outcome of one seed (error set when the seed failed)."""

    seed: int
    n_pairs: int
    beta: float
    accuracy: float = float("nan")
    ari: float = float("nan")
    auc: float = float("nan")
    iterations: int = 0
    seconds: float = 0.0
    stop_reason: str = ""
    objective_trace: list[float] = field(default_factory=list)
    roc_curve: list[list[float]] = field(default_factory=list)
    error: str | None = None


@dataclass
class RunReport:
    """All per-seed results for one configuration plus aggregates."""

    config: dict
    results: list[SeedResult]

    def aggregates(self) -> dict:
        agg: dict = {"n_seeds": len(self.results), "n_failed": 0}
        ok = [r for r in self.results if r.error is None]
        agg["n_failed"] = len(self.results) - len(ok)
        for name in ("accuracy", "ari", "auc"):
            vals = np.array([getattr(r, name) for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            agg[f"mean_{name}"] = float(vals.mean()) if vals.size else float("nan")
            agg[f"std_{name}"] = float(vals.std()) if vals.size else float("nan")
        return agg


def _derive_seeds(seed: int) -> tuple[int, int, int, int]:
    # data subsample, constraint sampling, pretraining, weight init
    state = np.random.SeedSequence(seed).generate_state(4)
    return tuple(int(v) for v in state)  # type: ignore[return-value]


def load_dataset(cfg: ExperimentConfig, data_rng=None) -> DataMatrix:
    if cfg.data_format == "csv":
        return load_csv(cfg.data_path, cfg.label_column)
    return load_idx(cfg.data_path, cfg.labels_path, limit=cfg.limit, rng=data_rng)


def run_single_seed(cfg: ExperimentConfig, seed: int) -> tuple[SeedResult, TrainReport | None]:
    """One full pipeline pass for one seed.

    Load (subsampling idx data), optional PCA, standardization of
    continuous features, constraint sampling and splitting, training, and
    evaluation: accuracy/ARI over every instance and ROC AUC over the
    held-out pairs.
    """
    started = time.perf_counter()
    s_data, s_pairs, s_pre, s_train = _derive_seeds(seed)
    x = load_dataset(cfg, make_rng(s_data))
    if x.labels is None:
        raise ConfigError("experiments need ground-truth labels to sample constraints")
    if cfg.pca_dim is not None:
        x, _ = pca_project(x, cfg.pca_dim)
    if x.feature_kind == CONTINUOUS:
        x, _ = standardize_columns(x)
    k = cfg.n_clusters or x.n_clusters

    pair_rng = make_rng(s_pairs)
    if cfg.constraints_in:
        all_pairs = read_constraints(cfg.constraints_in, x.n)
    else:
        all_pairs = sample_constraints(x.labels, cfg.n_pairs, cfg.balance, pair_rng)
    train_pairs, test_pairs = split_train_test(all_pairs, cfg.train_fraction, pair_rng)
    if cfg.constraints_out:
        out = Path(cfg.constraints_out)
        write_constraints(all_pairs, out.with_name(f"{out.stem}_seed{seed}{out.suffix}"))
    split = partition(train_pairs, x.n)

    tcfg = TrainConfig(cfg.lam, cfg.beta, cfg.max_iters, cfg.net_rate, cfg.tolerance, s_train)
    pcfg = PretrainConfig(
        cfg.epochs, cfg.minibatch_size, cfg.pre_learning_rate,
        cfg.momentum, cfg.weight_decay, s_pre,
    )
    report = train(x, split, k, cfg.layer_sizes, tcfg, pcfg)

    codes = encode(report.net, x.values).h
    pred = assign_clusters(report.weights, codes)
    accuracy = clustering_accuracy(pred, x.labels)
    ari = adjusted_rand_index(pred, x.labels)

    auc, curve = float("nan"), np.empty((0, 2))
    flags = [c.same for c in test_pairs]
    if any(flags) and not all(flags):
        scores = pairwise_scores(report.weights, report.net, test_pairs, x)
        auc, curve = roc_auc(scores, flags)
    else:
        logger.warning("seed %d: test pairs lack both classes, AUC skipped", seed)

    if cfg.save_model_path:
        out = Path(cfg.save_model_path)
        save_model(out.with_name(f"{out.stem}_seed{seed}{out.suffix}"), report.weights,
                   report.net, tcfg)

    result = SeedResult(
        seed=seed,
        n_pairs=cfg.n_pairs,
        beta=cfg.beta,
        accuracy=accuracy,
        ari=ari,
        auc=auc,
        iterations=report.n_iters,
        seconds=time.perf_counter() - started,
        stop_reason=report.stop_reason,
        objective_trace=[float(v) for v in report.objective_trace],
        roc_curve=[[float(a), float(b)] for a, b in curve],
    )
    return result, report


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run every seed with per-seed isolation: one failure is recorded in
    its row and does not abort the others."""
    cfg.validate()
    results = []
    for seed in cfg.seeds:
        try:
            result, _ = run_single_seed(cfg, seed)
        except (ConfigError, DataFormatError):
            raise  # configuration problems abort the whole run
        except Exception as exc:  # noqa: BLE001 - seed isolation is the contract
            logger.exception("seed %d failed", seed)
            result = SeedResult(seed=seed, n_pairs=cfg.n_pairs, beta=cfg.beta,
                                error=f"{type(exc).__name__}: {exc}")
        results.append(result)
    return RunReport(config=dataclasses.asdict(cfg), results=results)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def write_report(reports, out_dir) -> dict[str, Path]:
    """Emit report.json, metrics.csv, roc_points.csv, objective_traces.csv.

    Accepts one RunReport or a list (sweep/ablation rows share the files).
    All files are written atomically and are deterministic functions of the
    reports; metrics.csv in particular carries no timing data.
    """
    if isinstance(reports, RunReport):
        reports = [reports]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    lines = [",".join(METRICS_COLUMNS)]
    for report in reports:
        for r in report.results:
            if r.error is not None:
                continue
            lines.append(",".join(_fmt(v) for v in (
                r.seed, r.n_pairs, r.beta, r.accuracy, r.ari, r.auc, r.iterations,
            )))
    paths["metrics"] = out / "metrics.csv"
    _atomic_write(paths["metrics"], "\n".join(lines) + "\n")

    lines = ["n_pairs,beta,seed,fpr,tpr"]
    for report in reports:
        for r in report.results:
            for fpr, tpr in r.roc_curve:
                lines.append(",".join(_fmt(v) for v in (r.n_pairs, r.beta, r.seed, fpr, tpr)))
    paths["roc"] = out / "roc_points.csv"
    _atomic_write(paths["roc"], "\n".join(lines) + "\n")

    lines = ["n_pairs,beta,seed,iteration,objective"]
    for report in reports:
        for r in report.results:
            for it, obj in enumerate(r.objective_trace):
                lines.append(",".join(_fmt(v) for v in (r.n_pairs, r.beta, r.seed, it, obj)))
    paths["traces"] = out / "objective_traces.csv"
    _atomic_write(paths["traces"], "\n".join(lines) + "\n")

    payload = [
        {
            "config": report.config,
            "aggregates": report.aggregates(),
            "results": [dataclasses.asdict(r) for r in report.results],
        }
        for report in reports
    ]
    paths["report"] = out / "report.json"
    _atomic_write(paths["report"], json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return paths
