"""Command-line pipeline driver.

Every subcommand writes a JSON manifest next to its main output recording
the tool version, the effective configuration (with the source of each
value: flag, config file or default) and SHA-256 digests of inputs and
outputs.  Values given on the command line override ``--config`` entries,
which override built-in defaults.  A config file holds ``key = value``
lines; keys are option names with or without leading dashes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Callable

from . import __version__, anneal, dataset, evaluate, forest, ingest, spectral, synth

log = logging.getLogger("tfaml")


@dataclass(frozen=True)
class Opt:
    flag: str
    type: Callable[[str], Any]
    default: Any
    help: str
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


def _bool(text: str) -> bool:
    if str(text).lower() in ("1", "true", "yes", "on"):
        return True
    if str(text).lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


FEATURE_SETS = tuple(fs.value for fs in dataset.FeatureSet)

STFT_OPTS = [
    Opt("--window", int, 90, "STFT window length in days"),
    Opt("--hop", int, 1, "frame shift in days"),
    Opt("--fft-len", int, 128, "transform length (>= window)"),
    Opt("--window-fn", str, "rectangular", "taper", ("rectangular", "hann")),
]
HORIZON_OPTS = [
    Opt("--start", date.fromisoformat, None, "first day of the horizon (default: earliest record)"),
    Opt("--days", int, ingest.DEFAULT_HORIZON_DAYS, "horizon length in days"),
]
SPLIT_OPTS = [
    Opt("--train-fraction", float, 0.7, "stratified training share; 1 uses every row"),
    Opt("--split-seed", int, 0, "seed of the stratified split"),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "synth": (
        "generate a labelled synthetic dataset",
        [
            Opt("--n", int, 6680, "number of customers"),
            Opt("--positive-frac", float, 1945 / 6680, "share of suspicious customers"),
            Opt("--seed", int, 0, "generator seed"),
            Opt("--days", int, ingest.DEFAULT_HORIZON_DAYS, "horizon length in days"),
            Opt("--start", date.fromisoformat, synth.DEFAULT_START, "first day of the horizon"),
            Opt("--out-dir", Path, None, "output directory"),
        ],
    ),
    "featurize": (
        "build features.csv from transactions, CRM and labels",
        [
            Opt("--transactions", Path, None, "transactions.csv"),
            Opt("--crm", Path, None, "crm.csv"),
            Opt("--labels", Path, None, "labels.csv"),
            *STFT_OPTS,
            *HORIZON_OPTS,
            Opt("--channel", str, None, "only use transactions from this channel"),
            Opt("--feature-set", str, "T+TF+CRM", "feature groups", FEATURE_SETS),
            Opt("--out", Path, None, "output features.csv"),
        ],
    ),
    "train": (
        "train a random forest",
        [
            Opt("--features", Path, None, "features.csv"),
            Opt("--feature-set", str, None, "restrict to these groups", FEATURE_SETS),
            Opt("--min-leaf", int, forest.ForestParams.min_leaf, "minimum samples per leaf"),
            Opt("--min-split", int, forest.ForestParams.min_split, "minimum samples to split"),
            Opt("--max-depth", int, forest.ForestParams.max_depth, "maximum tree depth"),
            Opt("--trees", int, forest.ForestParams.n_trees, "number of trees"),
            Opt("--seed", int, forest.ForestParams.seed, "forest seed"),
            *SPLIT_OPTS,
            Opt("--model-out", Path, None, "model file"),
        ],
    ),
    "tune": (
        "simulated-annealing search for min_leaf, min_split, max_depth",
        [
            Opt("--features", Path, None, "features.csv"),
            Opt("--feature-set", str, None, "restrict to these groups", FEATURE_SETS),
            Opt("--iterations", int, 1000, "annealing iterations"),
            Opt("--t0", float, 0.05, "initial temperature (AUC units)"),
            Opt("--alpha", float, 0.995, "geometric cooling factor"),
            Opt("--seed", int, 0, "annealing seed"),
            Opt("--trees", int, 100, "trees per candidate forest"),
            Opt("--forest-seed", int, 0, "forest seed, fixed across iterations"),
            Opt("--valid-fraction", float, 0.3, "validation share inside the training split"),
            *SPLIT_OPTS,
            Opt("--trace-out", Path, None, "trace CSV"),
        ],
    ),
    "evaluate": (
        "score a feature file and report ROC/AUC and 0.5-threshold rates",
        [
            Opt("--model", Path, None, "model file"),
            Opt("--features", Path, None, "features.csv"),
            Opt("--threshold", float, 0.5, "decision threshold (score > threshold is positive)"),
            Opt("--subset", str, "holdout", "rows to score", ("holdout", "all")),
            Opt("--report-out", Path, None, "evaluation report (JSON)"),
            Opt("--roc-out", Path, None, "ROC points CSV"),
        ],
    ),
    "importance": (
        "rank features by mutual information with the label",
        [
            Opt("--features", Path, None, "features.csv"),
            Opt("--bins", int, 16, "equal-frequency bins per feature"),
            Opt("--out", Path, None, "ranking CSV"),
        ],
    ),
    "spectrogram": (
        "export one customer's spectrogram",
        [
            Opt("--transactions", Path, None, "transactions.csv"),
            Opt("--customer", str, None, "customer id"),
            Opt("--format", str, "csv", "output format", ("csv", "pgm")),
            *STFT_OPTS,
            *HORIZON_OPTS,
            Opt("--normalize", _bool, False, "scale to unit total energy first"),
            Opt("--out", Path, None, "output file"),
        ],
    ),
}

REQUIRED = {
    "synth": ("out_dir",),
    "featurize": ("transactions", "crm", "labels", "out"),
    "train": ("features", "model_out"),
    "tune": ("features", "trace_out"),
    "evaluate": ("model", "features", "report_out"),
    "importance": ("features", "out"),
    "spectrogram": ("transactions", "customer", "out"),
}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value.strip("\"'")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tfaml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tfaml {__version__}")
    parser.add_argument("--config", type=Path, help="key = value configuration file")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: cores)")
    parser.add_argument("--log-level", default="WARNING", help="logging level")
    parser.add_argument("--manifest", type=Path, help="manifest path (default: beside the output)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        for opt in opts:
            p.add_argument(
                opt.flag,
                dest=opt.dest,
                type=opt.type,
                default=None,
                choices=opt.choices,
                help=f"{opt.help} (default: {opt.default})",
            )
    return parser


def effective_config(command: str, args, file_cfg: dict[str, str]):
    """Merge flag > config file > default; returns (values, sources)."""
    values, sources = {}, {}
    for opt in COMMANDS[command][1]:
        flag_value = getattr(args, opt.dest)
        if flag_value is not None:
            values[opt.dest], sources[opt.dest] = flag_value, "flag"
        elif opt.dest in file_cfg:
            raw = file_cfg[opt.dest]
            if opt.choices and raw not in opt.choices:
                raise CliError(f"config value {opt.dest}={raw!r} not in {opt.choices}")
            values[opt.dest], sources[opt.dest] = opt.type(raw), "file"
        else:
            values[opt.dest], sources[opt.dest] = opt.default, "default"
    missing = [k for k in REQUIRED[command] if values.get(k) is None]
    if missing:
        raise CliError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return values, sources


def _jsonable(v):
    if isinstance(v, (Path, date)):
        return str(v)
    if isinstance(v, float) and v != v:
        return None
    return v


def write_manifest(path, command, values, sources, inputs, outputs, extra=None) -> None:
    doc = {
        "tool": "tfaml",
        "version": __version__,
        "command": command,
        "config": {k: _jsonable(v) for k, v in sorted(values.items())},
        "config_sources": dict(sorted(sources.items())),
        "inputs": {str(p): synth.sha256_file(p) for p in inputs},
        "outputs": {str(p): synth.sha256_file(p) for p in outputs},
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stft_cfg(v) -> spectral.StftConfig:
    return spectral.StftConfig(v["window"], v["hop"], v["fft_len"], v["window_fn"])


def _horizon(v, records) -> ingest.Horizon:
    if v["start"] is not None:
        return ingest.Horizon(v["start"], v["days"])
    return ingest.infer_horizon(records, v["days"])


def _load_features(v) -> dataset.LabeledDataset:
    data = dataset.read_features(v["features"])
    if v.get("feature_set"):
        data = data.select(v["feature_set"])
    return data


def _outer_split(data, fraction, seed):
    if fraction >= 1.0:
        return data, None
    return anneal.split(data, fraction, seed)


def cmd_synth(v, threads):
    cfg = synth.SynthConfig(
        n_customers=v["n"],
        positive_fraction=v["positive_frac"],
        horizon_days=v["days"],
        start=v["start"],
        seed=v["seed"],
    )
    paths = synth.gen_dataset(cfg, v["out_dir"])
    outputs = [paths["transactions"], paths["crm"], paths["labels"]]
    n_pos = cfg.n_positive
    print(f"wrote {cfg.n_customers} customers ({n_pos} suspicious) to {v['out_dir']}")
    return [], outputs, Path(v["out_dir"]) / "manifest.json", {}


def cmd_featurize(v, threads):
    stats = ingest.ParseStats()
    horizon = ingest.Horizon(v["start"], v["days"]) if v["start"] else None
    records = ingest.parse_transactions(v["transactions"], horizon, stats)
    horizon = horizon or _horizon(v, records)
    series = ingest.aggregate_daily(records, horizon, v["channel"])
    crm_stats = ingest.ParseStats()
    crm = ingest.parse_crm(v["crm"], crm_stats)
    labels = ingest.parse_labels(v["labels"])
    astats = dataset.AssemblyStats()
    data = dataset.assemble(
        v["feature_set"], series, crm, labels, horizon, _stft_cfg(v), stats=astats
    )
    dataset.write_features(v["out"], data)
    summary = {
        "rows": len(data),
        "columns": len(data.feature_order),
        "horizon_start": horizon.start.isoformat(),
        "dropped_out_of_horizon": stats.dropped_out_of_horizon,
        "dropped_missing_crm": astats.missing_crm,
        "dropped_crm_missing_field": crm_stats.extra["crm_missing_field"],
        "dropped_missing_label": astats.missing_label,
        "zero_activity": astats.zero_activity,
    }
    level = logging.WARNING if astats.missing_crm or astats.missing_label else logging.INFO
    log.log(
        level,
        "featurize: %d rows; dropped %d without CRM, %d without label; %d out-of-horizon records",
        len(data),
        astats.missing_crm,
        astats.missing_label,
        stats.dropped_out_of_horizon,
    )
    print(json.dumps(summary, sort_keys=True))
    return [v["transactions"], v["crm"], v["labels"]], [v["out"]], None, {"summary": summary}


def cmd_train(v, threads):
    data = _load_features(v)
    train_part, _ = _outer_split(data, v["train_fraction"], v["split_seed"])
    params = forest.ForestParams(
        n_trees=v["trees"],
        min_split=v["min_split"],
        min_leaf=v["min_leaf"],
        max_depth=v["max_depth"],
        seed=v["seed"],
    )
    model = forest.train(train_part, params, threads=threads)
    neg, pos = train_part.class_counts()
    model.meta = {
        "split": {"train_fraction": v["train_fraction"], "seed": v["split_seed"]},
        "train_rows": len(train_part),
        "train_class_counts": [neg, pos],
        "feature_set": v.get("feature_set"),
    }
    forest.save(model, v["model_out"])
    train_auc = evaluate.auc(model.score_matrix(train_part.X), train_part.y)
    summary = {
        "trees": params.n_trees,
        "train_rows": len(train_part),
        "train_auc": train_auc,
        "max_tree_depth": max(t.depth() for t in model.trees),
        "nodes": int(sum(len(t) for t in model.trees)),
    }
    print(json.dumps(summary, sort_keys=True))
    return [v["features"]], [v["model_out"]], None, {"summary": summary}


def cmd_tune(v, threads):
    data = _load_features(v)
    train_part, _ = _outer_split(data, v["train_fraction"], v["split_seed"])
    fit, valid = anneal.split(train_part, 1.0 - v["valid_fraction"], v["split_seed"])
    cfg = anneal.AnnealConfig(
        iterations=v["iterations"],
        t0=v["t0"],
        alpha=v["alpha"],
        seed=v["seed"],
        n_trees=v["trees"],
        forest_seed=v["forest_seed"],
        threads=threads,
    )
    result = anneal.tune(fit, valid, cfg)
    anneal.write_trace(v["trace_out"], result)
    print(f"best validation AUC {result.best_auc:.6f}")
    print(result.as_flags())
    extra = {"best": result.best, "best_auc": result.best_auc, "initial": result.initial}
    return [v["features"]], [v["trace_out"]], None, extra


def cmd_evaluate(v, threads):
    model = forest.load(v["model"])
    data = dataset.read_features(v["features"])
    if v["subset"] == "holdout":
        split = model.meta.get("split", {})
        fraction = split.get("train_fraction", 1.0)
        if fraction >= 1.0:
            raise CliError("model was trained on every row; use --subset all")
        _, data = anneal.split(data, fraction, split.get("seed", 0))
    cols = forest.feature_positions(model, data.feature_order)
    scores = model.score_matrix(data.X[:, cols])
    doc = evaluate.report_dict(
        scores, data.y, v["threshold"], extra={"subset": v["subset"], "model": str(v["model"])}
    )
    evaluate.write_report(v["report_out"], doc)
    outputs = [v["report_out"]]
    if v["roc_out"]:
        evaluate.write_roc_csv(v["roc_out"], evaluate.roc_auc(scores, data.y))
        outputs.append(v["roc_out"])
    r = doc["rates"]
    print(
        json.dumps(
            {"auc": doc["auc"], "fpr": r["fpr"], "fnr": r["fnr"], "acc": r["acc"], "n": doc["n"]},
            sort_keys=True,
        )
    )
    return [v["model"], v["features"]], outputs, None, {}


def cmd_importance(v, threads):
    data = dataset.read_features(v["features"])
    ranking = evaluate.rank_features(data, v["bins"])
    evaluate.write_ranking(v["out"], ranking)
    for i, (name, mi) in enumerate(ranking, 1):
        print(f"{i:3d} {name:<20s} {mi:.6f}")
    return [v["features"]], [v["out"]], None, {}


def cmd_spectrogram(v, threads):
    horizon = ingest.Horizon(v["start"], v["days"]) if v["start"] else None
    records = ingest.parse_transactions(v["transactions"], horizon)
    horizon = horizon or _horizon(v, records)
    mine = [r for r in records if r.customer_id == v["customer"]]
    if not mine:
        raise CliError(f"no transactions for customer {v['customer']!r}")
    series = ingest.aggregate_daily(mine, horizon)[v["customer"]]
    spec = spectral.stft(series, _stft_cfg(v))
    if v["normalize"]:
        spec, _ = spectral.normalize(spec)
    spectral.export_spectrogram(spec, v["out"], v["format"])
    print(f"{spec.frames} frames x {spec.bins} bins -> {v['out']}")
    return [v["transactions"]], [v["out"]], None, {}


HANDLERS = {
    "synth": cmd_synth,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
    "spectrogram": cmd_spectrogram,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    file_cfg = read_config_file(args.config) if args.config else {}
    values, sources = effective_config(args.command, args, file_cfg)
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    inputs, outputs, manifest, extra = HANDLERS[args.command](values, threads)
    if args.config:
        inputs = [args.config, *inputs]
    manifest = args.manifest or manifest or Path(str(outputs[0]) + ".manifest.json")
    write_manifest(manifest, args.command, values, sources, inputs, outputs, extra)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit:
        raise
    except Exception as exc:  # one machine-parsable line, nonzero exit
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
