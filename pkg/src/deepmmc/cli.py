"""Command-line experiment runner.

Subcommands: train (one configuration), sweep (vary the constraint count),
ablate (vary the transductive weight), eval (score a saved model).  Every
flag can also come from a flat ``key = value`` config file via --config;
explicit flags win over file entries.  Exit codes: 0 success, 2 bad
configuration, 3 bad or missing data.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .clustering import assign_clusters, load_model
from .datasets import DataFormatError
from .encoder import encode
from .harness import (
    ConfigError,
    ExperimentConfig,
    RunReport,
    load_dataset,
    run_experiment,
    write_report,
)
from .metrics import adjusted_rand_index, clustering_accuracy, pairwise_scores, roc_auc
from .numeric import CONTINUOUS, make_rng, pca_project, standardize_columns
from .constraints import read_constraints

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_optional_int(text):
    if text is None or str(text).lower() == "none":
        return None
    return int(text)


def _parse_optional_float(text):
    if text is None or str(text).lower() == "none":
        return None
    return float(text)


def _parse_label_column(text):
    if text is None:
        return None
    text = str(text)
    if text.lower() in ("last", "none"):
        return text.lower() if text.lower() == "last" else None
    return int(text)


# config-file/flag key -> (ExperimentConfig field, parser)
_FIELDS = {
    "data": ("data_path", str),
    "labels": ("labels_path", str),
    "format": ("data_format", str),
    "label_column": ("label_column", _parse_label_column),
    "limit": ("limit", _parse_optional_int),
    "layers": ("layer_sizes", _parse_int_list),
    "clusters": ("n_clusters", _parse_optional_int),
    "lambda": ("lam", float),
    "beta": ("beta", float),
    "iters": ("max_iters", int),
    "net_rate": ("net_rate", float),
    "tolerance": ("tolerance", float),
    "epochs": ("epochs", int),
    "minibatch": ("minibatch_size", int),
    "pre_lr": ("pre_learning_rate", _parse_optional_float),
    "momentum": ("momentum", float),
    "weight_decay": ("weight_decay", float),
    "pairs": ("n_pairs", int),
    "balance": ("balance", float),
    "train_fraction": ("train_fraction", float),
    "pca_dim": ("pca_dim", _parse_optional_int),
    "seed_list": ("seeds", _parse_int_list),
    "out": ("output_dir", str),
    "constraints_in": ("constraints_in", str),
    "constraints_out": ("constraints_out", str),
    "save_model": ("save_model_path", str),
}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; blank lines and # comments are ignored."""
    entries: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        entries[key] = value.strip()
    return entries


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--verbose", "-v", action="store_true")
    for key in _FIELDS:
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=f"opt_{key}", default=None, metavar="V")


def build_config(args, overrides=None) -> ExperimentConfig:
    """Defaults, then config-file entries, then explicit flags."""
    values: dict = {}
    if args.config:
        for key, raw in read_config_file(args.config).items():
            field, parse = _FIELDS[key]
            try:
                values[field] = parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from exc
    for key, (field, parse) in _FIELDS.items():
        raw = getattr(args, f"opt_{key}", None)
        if raw is not None:
            try:
                values[field] = parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"flag --{key.replace('_', '-')}: {exc}") from exc
    values.update(overrides or {})
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _print_summary(reports) -> None:
    if isinstance(reports, RunReport):
        reports = [reports]
    for report in reports:
        agg = report.aggregates()
        print(
            f"pairs={report.config['n_pairs']} beta={report.config['beta']}: "
            f"accuracy {agg['mean_accuracy']:.4f} +/- {agg['std_accuracy']:.4f}, "
            f"ari {agg['mean_ari']:.4f}, auc {agg['mean_auc']:.4f} "
            f"({agg['n_seeds'] - agg['n_failed']}/{agg['n_seeds']} seeds ok)"
        )
        for r in report.results:
            if r.error is not None:
                print(f"  seed {r.seed} FAILED: {r.error}")


def cmd_train(args) -> int:
    cfg = build_config(args)
    report = run_experiment(cfg)
    paths = write_report(report, cfg.output_dir)
    _print_summary(report)
    print(f"report written to {paths['report']}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    pair_counts = _parse_int_list(args.opt_pairs) if args.opt_pairs else [cfg.n_pairs]
    reports = []
    for n_pairs in pair_counts:
        sub = dataclasses.replace(cfg, n_pairs=n_pairs)
        reports.append(run_experiment(sub))
    paths = write_report(reports, cfg.output_dir)
    _print_summary(reports)
    print(f"report written to {paths['report']}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = build_config(args)
    betas = _parse_float_list(args.opt_beta) if args.opt_beta else [cfg.beta]
    reports = []
    for beta in betas:
        sub = dataclasses.replace(cfg, beta=beta)
        reports.append(run_experiment(sub))
    paths = write_report(reports, cfg.output_dir)
    _print_summary(reports)
    print(f"report written to {paths['report']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.load_model:
        raise ConfigError("eval needs --load-model")
    cfg = build_config(args)
    cfg.validate()
    weights, net, meta = load_model(args.load_model)
    x = load_dataset(cfg, make_rng(cfg.seeds[0]))
    if cfg.pca_dim is not None:
        x, _ = pca_project(x, cfg.pca_dim)
    if x.feature_kind == CONTINUOUS:
        x, _ = standardize_columns(x)
    out = {"model": str(args.load_model), "metadata": meta, "n": x.n}
    pred = assign_clusters(weights, encode(net, x.values).h)
    if x.labels is not None:
        out["accuracy"] = clustering_accuracy(pred, x.labels)
        out["ari"] = adjusted_rand_index(pred, x.labels)
    if cfg.constraints_in:
        pairs = read_constraints(cfg.constraints_in, x.n)
        flags = [c.same for c in pairs]
        if any(flags) and not all(flags):
            scores = pairwise_scores(weights, net, pairs, x)
            auc, _ = roc_auc(scores, flags)
            out["auc"] = auc
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepmmc",
        description="Deep transductive semi-supervised maximum-margin clustering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one configuration over the seed list")
    _add_common_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="repeat the run for each --pairs value")
    _add_common_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_ablate = sub.add_parser("ablate", help="repeat the run for each --beta value")
    _add_common_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_eval = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    _add_common_flags(p_eval)
    p_eval.add_argument("--load-model", help="model file written by --save-model")
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
