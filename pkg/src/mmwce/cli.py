"""Command-line entry point: ``mmwce {gen-data,train,estimate,sweep,bench}``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
"""
import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from .denoiser import TrainConfig, load_dataset, save_weights, train
from .errors import ConfigError, FormatError, NumericalError
from .harness import benchmark_runtimes, config_echo, generate_dataset, load_config, run_sweep, write_outputs
from .harness.bench import BENCH_COLUMNS
from .harness.config import ExperimentConfig, parse_overrides
from .harness.simulate import dictionaries, simulate_trial, trial_rng
from .harness.sweep import resolve_denoiser, run_estimators, score_trial

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

_SKIP_FLAGS = {"seed"}


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file (keys are config field names)")
    p.add_argument("--seed", type=int, help="master random seed")
    grp = p.add_argument_group("config fields (override the config file)")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in _SKIP_FLAGS:
            continue
        grp.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="VALUE")


def _config(args):
    raw = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    overrides = parse_overrides(raw)
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def cmd_gen_data(args):
    cfg = _config(args)
    rng = np.random.default_rng([cfg.seed, 1])
    inputs, _ = generate_dataset(cfg, rng, args.out, args.channels)
    print(f"wrote {len(inputs)} pairs of {inputs.shape[1]}x{inputs.shape[2]} images to {args.out}")


def cmd_train(args):
    cfg = _config(args)
    inputs, labels, _ = load_dataset(args.data)
    tcfg = TrainConfig(lr=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch_size,
                       val_fraction=cfg.val_fraction, patience=cfg.patience)
    rng = np.random.default_rng([cfg.seed, 2])
    weights = train(inputs, labels, rng, tcfg,
                    progress=lambda r: print(f"epoch {r['epoch']}: train {r['train_loss']:.6g} "
                                             f"val {r['val_loss']:.6g}", flush=True))
    save_weights(weights, args.out)
    log_path = args.log or os.path.splitext(args.out)[0] + "_log.csv"
    with open(log_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["epoch", "train_loss", "val_loss"])
        w.writeheader()
        w.writerows(weights.meta["log"])
    print(f"best validation loss {weights.meta['best_val_loss']:.6g}; weights in {args.out}")


def cmd_estimate(args):
    cfg = _config(args)
    denoiser = resolve_denoiser(cfg)
    coarse, refined = dictionaries(cfg)
    snr = cfg.snr_db[0]
    m = cfg.m_list[0]
    trial = simulate_trial(cfg, coarse, trial_rng(cfg.seed, 0, 0, args.trial), snr, m)
    results = run_estimators(cfg, trial, coarse, refined, denoiser)
    scored = score_trial(cfg, trial, results, snr)
    report = {"config_hash": cfg.hash(), "realization": trial.realization_hash(),
              "snr_db": snr, "M": m, "trial": args.trial, "estimators": {}}
    for name, res in results.items():
        entry = dict(scored[name])
        entry["support"] = [int(j) for j in res.support]
        entry["grid"] = [res.dictionary.g_r, res.dictionary.g_t]
        report["estimators"][name] = entry
    text = json.dumps(report, indent=2, default=float)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)


def cmd_sweep(args):
    cfg = _config(args)
    total = len(cfg.snr_db) * len(cfg.m_list) * cfg.trials
    count = [0]

    def progress(_task):
        count[0] += 1
        if args.verbose and count[0] % 10 == 0:
            print(f"{count[0]}/{total} trials", file=sys.stderr, flush=True)

    rows = run_sweep(cfg, progress=progress)
    paths = write_outputs(cfg, rows, args.out)
    print(f"{len(rows)} rows; outputs: {', '.join(paths.values())}")


def cmd_bench(args):
    cfg = _config(args)
    denoiser = resolve_denoiser(cfg) if cfg.weights else None
    rows, ratio = benchmark_runtimes(cfg, denoiser)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "bench.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    with open(os.path.join(args.out, "config.json"), "w") as fh:
        fh.write(config_echo(cfg))
    for r in rows:
        print(f"{r['estimator']:>12} ({r['grid']}): median {r['median_s'] * 1e3:8.2f} ms")
    print(f"refined(8N) / SW-OMP(8N) runtime ratio: {ratio:.3f}")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmwce", description="Wideband mmWave channel-estimation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate denoiser training pairs")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="dataset file to write")
    p.add_argument("--channels", type=int, help="channel realizations (pairs = channels * K_p)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the denoiser on a dataset file")
    _add_config_flags(p)
    p.add_argument("--data", required=True, help="dataset file from gen-data")
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--log", help="training-log CSV (default: next to the weights)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="run the estimators on one simulated realization")
    _add_config_flags(p)
    p.add_argument("--trial", type=int, default=0, help="trial id for the RNG stream")
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep over SNR and M")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="runtime benchmark of the estimators")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
