"""Command-line front end: ``semihash {synth,train,encode,eval,gradcheck}``.

Every subcommand accepts ``--config FILE`` (``key = value`` lines) and a
``--<key> VALUE`` flag for each config key; flags override the file.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 failed verification check, 5 data or file-format error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import checks
from .config import RunConfig, config_fields
from .errors import ConfigError, NumericError, SemihashError
from .io import load_matrix, load_model, save_codes, save_model, write_trace
from .pipeline import evaluate, fit
from .retrieval import format_table
from .synth import write_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4
EXIT_DATA = 5


def _load_labels(path):
    Y = load_matrix(path)
    return np.rint(Y).astype(np.int8)


def cmd_synth(cfg: RunConfig):
    out = cfg.out_dir
    paths = write_dataset(cfg.synth_spec(), out, cfg.test_fraction)
    run = RunConfig.from_strings(
        {
            "train_features": ",".join(paths["train_features"]),
            "test_features": ",".join(paths["test_features"]),
            "train_labels": paths["train_labels"],
            "test_labels": paths["test_labels"],
        },
        cfg,
    )
    cfg_path = os.path.join(out, "run.cfg")
    run.save(cfg_path)
    print(f"wrote dataset to {out} (config: {cfg_path})")
    return EXIT_OK


def cmd_train(cfg: RunConfig):
    cfg.check_files("train_features", "train_labels")
    features = [load_matrix(p) for p in cfg.train_features]
    labels = _load_labels(cfg.train_labels)
    result = fit(features, labels, cfg.label_fraction, cfg.hyperparameters(), cfg.code_length)
    save_model(result.model, cfg.model)

    os.makedirs(cfg.out_dir, exist_ok=True)
    write_trace(os.path.join(cfg.out_dir, "trace_label.csv"), result.label_stage.trace)
    if result.label_estimate is not None:
        write_trace(os.path.join(cfg.out_dir, "trace_fuzzy.csv"), result.label_estimate.trace)
    write_trace(os.path.join(cfg.out_dir, "trace_code.csv"), result.code_stage.trace)
    print(
        f"trained {cfg.code_length}-bit model on {labels.shape[0]} rows "
        f"({result.split.n_labeled} labeled) -> {cfg.model}"
    )
    return EXIT_OK


def cmd_encode(cfg: RunConfig):
    cfg.check_files("model", "input")
    from .code_stage import encode_out_of_sample

    model = load_model(cfg.model)
    codes = encode_out_of_sample(load_matrix(cfg.input), cfg.modality, model)
    save_codes(cfg.output, codes)
    print(f"encoded {codes.shape[0]} rows with modality {cfg.modality} -> {cfg.output}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig):
    cfg.check_files("model", "test_features", "test_labels", "train_labels")
    model = load_model(cfg.model)
    test = [load_matrix(p) for p in cfg.test_features]
    names = cfg.modality_names if len(cfg.modality_names) == model.n_modalities else None
    reports = evaluate(
        model, test, _load_labels(cfg.test_labels), _load_labels(cfg.train_labels),
        names=names, cutoff=cfg.cutoff, threads=cfg.threads,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    method = f"semihash({cfg.label_fraction:.0%})"
    rows = {}
    for r in reports:
        safe = r.task.replace("->", "_to_").replace(os.sep, "_")
        with open(os.path.join(cfg.out_dir, f"eval_{safe}.csv"), "w") as f:
            f.write(r.to_csv())
        rows[(r.task, method)] = {r.code_length: r.map}
    table = format_table(rows)
    with open(os.path.join(cfg.out_dir, "eval_table.txt"), "w") as f:
        f.write(table + "\n")
    print(table)
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig):
    results = checks.run_all(cfg.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_CHECK
    print(f"all {len(results)} checks passed")
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic train/test dataset"),
    "train": (cmd_train, "train a model (label stage, label estimation, code stage)"),
    "encode": (cmd_encode, "encode a feature matrix with a trained model"),
    "eval": (cmd_eval, "cross-modal MAP of a trained model"),
    "gradcheck": (cmd_gradcheck, "run the numerical self-checks"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="semihash", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value config file")
        group = p.add_argument_group("config keys")
        for key, _, default in config_fields():
            shown = ",".join(map(str, default)) if isinstance(default, list) else default
            group.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", metavar="VALUE", help=f"default: {shown}")
    return parser


def resolve_config(args) -> RunConfig:
    overrides = {
        k[len("cfg_"):]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None
    }
    if args.config:
        return RunConfig.load(args.config, overrides)
    return RunConfig.from_strings(overrides)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        stage = getattr(exc, "stage", None)
        print(f"numeric error{f' in {stage}' if stage else ''}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SemihashError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
