"""Command-line front end: ``npplab gen|run|sweep|inspect``.

Experiment parameters live in a JSON config file (schema_version 1) and
can be overridden on the command line with dotted ``key=value`` pairs,
e.g. ``npp.period_T=0.2``. Exit codes: 0 success, 1 configuration error,
2 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import dataio, harness, synth
from .errors import ConfigError, NpplabError

log = logging.getLogger("npplab")


def _parse_override_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings need no quoting


def apply_overrides(config_dict, overrides):
    """Apply dotted key=value overrides to a nested config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node = config_dict
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                node[k] = {}
            node = node[k]
        node[keys[-1]] = _parse_override_value(raw)
    return config_dict


def _load_json(path, what):
    if not os.path.exists(path):
        raise ConfigError(f"{what} file not found: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{what} file {path} is not valid JSON: {err}") from err


def _resolve_threads(args):
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("NPPLAB_THREADS", "0"))
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def _load_experiment_config(args):
    d = _load_json(args.config, "config")
    d = apply_overrides(d, args.override)
    config = harness.config_from_dict(d)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, master_seed=args.seed)
    return config


def cmd_gen(args):
    d = _load_json(args.spec, "spec")
    if "synthetic" in d:
        d = d["synthetic"]
    spec = synth.SyntheticSpec(**d)
    dataset = synth.gen_synthetic(spec, seed=args.seed)
    dataio.save_dataset(dataset, args.out)
    log.info("wrote %d trials to %s", len(dataset), args.out)
    return 0


def cmd_run(args):
    config = _load_experiment_config(args)
    threads = _resolve_threads(args)
    log.info("running experiment (%d repeats, %d threads)", config.repeats, threads)
    rows, summary = harness.run_experiment(config, threads=threads)
    dataio.write_report(rows, args.out, format=args.format)
    log.info(
        "ACC %.3f +- %.3f | ASR %.3f +- %.3f | %d rows -> %s",
        summary["acc_mean"], summary["acc_std"],
        summary["asr_mean"], summary["asr_std"], summary["n_rows"], args.out,
    )
    return 0


def cmd_sweep(args):
    config = _load_experiment_config(args)
    threads = _resolve_threads(args)
    if args.axis == "period_duty":
        values = [tuple(v) for v in json.loads(args.values)]
    else:
        values = [float(v) for v in args.values.split(",")]
    records = harness.run_sweep(config, args.axis, values, threads=threads)
    with open(args.out, "w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")
    for rec in records:
        where = rec.get("value", (rec.get("train_value"), rec.get("test_value")))
        log.info("%s=%s ACC %.3f ASR %.3f", args.axis, where,
                 rec["acc_mean"], rec["asr_mean"])
    log.info("wrote %d sweep records to %s", len(records), args.out)
    return 0


def cmd_inspect(args):
    dataset = dataio.load_dataset(args.path)
    labels = dataset.labels()
    print(f"name:       {dataset.name}")
    print(f"subjects:   {len(dataset.subjects())}")
    print(f"channels:   {dataset.n_channels}")
    print(f"samples:    {dataset.n_samples}")
    print(f"fs:         {dataset.fs:g} Hz")
    print(f"classes:    {', '.join(dataset.class_names)}")
    print(f"trials:     {len(dataset)}")
    for c, name in enumerate(dataset.class_names):
        print(f"  {name}: {int((labels == c).sum())}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="npplab",
        description="Backdoor-poisoning lab for EEG BCI classifiers",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--out", required=True, help="output report path")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (0 = auto; env NPPLAB_THREADS)")
    common.add_argument("--seed", type=int, default=None,
                        help="override master_seed")
    common.add_argument("override", nargs="*", metavar="key=value",
                        help="dotted config overrides")

    p = sub.add_parser("gen", help="generate a synthetic dataset file")
    p.add_argument("--spec", required=True, help="synthetic spec JSON")
    p.add_argument("--out", required=True, help="output .eegp path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", parents=[common], help="run one experiment")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="sweep one config axis")
    p.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p.add_argument("--values", required=True,
                   help="comma-separated values, or JSON pairs for period_duty")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="print dataset header and summary")
    p.add_argument("path", help="dataset .eegp path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 0 if err.code in (0, None) else 1
    level = logging.DEBUG if args.verbose else (
        logging.ERROR if args.quiet else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        log.error("configuration error: %s", err)
        return 1
    except NpplabError as err:
        log.error("runtime error: %s", err)
        return 2
    except OSError as err:
        log.error("I/O error: %s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
