"""Command-line entry point: ``lfblue train | run | eval``.

Exit codes: 0 success, 1 configuration error, 2 runtime/numeric error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import codebook as cb
from .allocator import optimal_gains
from .channel import load_network, sample_fading, save_network
from .estimator import blue_variance
from .flatfile import FormatError
from .harness import (
    TRAINING,
    ConfigError,
    ExperimentConfig,
    load_config,
    sample_geometry,
    stream,
    run_experiment,
    train_codebook,
)
from .model import ChannelRealization, dbm_to_watts

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["mc_trials"] = args.trials
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if getattr(args, "format", None) is not None:
        changes["format"] = args.format
    if getattr(args, "out", None) is not None and args.command == "run":
        changes["output"] = args.out
    return config.replace(**changes) if changes else config


def cmd_run(args) -> int:
    config = _config(args)
    if not config.output:
        raise ConfigError("no output path: pass --out or set 'output' in the config")
    records = run_experiment(config)
    print(f"wrote {len(records)} records to {config.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config(args)
    k = args.K if args.K is not None else config.k_values[0]
    bits = args.L if args.L is not None else config.l_values[0]
    p_dbm = args.p_dbm if args.p_dbm is not None else config.p_total_dbm[0]
    if config.train_size < 2**bits:
        raise ConfigError(f"train_size {config.train_size} < 2**L = {2 ** bits}")
    params, distances = sample_geometry(config, k)
    params = params.with_power(dbm_to_watts(p_dbm))
    train_g = sample_fading(config.fading, distances, stream(config.master_seed, TRAINING, k, 0), size=config.train_size)
    book = train_codebook(config, params, train_g, bits, key=(k, 0))
    cb.save_codebook(book, args.out)
    network_out = args.network_out or f"{args.out}.network"
    save_network(network_out, params, distances)
    print(
        f"codebook K={k} L={bits} P_total={p_dbm:g} dBm: {book.iterations} iterations, "
        f"final distortion {book.history[-1]:.6g} -> {args.out} (network: {network_out})"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    params, distances = load_network(args.network)
    book = cb.load_codebook(args.codebook)
    if book.total_power is not None and book.total_power != params.total_power:
        params = params.with_power(book.total_power)
    if book.num_sensors != params.num_sensors:
        raise ConfigError(f"codebook has K={book.num_sensors}, network has K={params.num_sensors}")
    if args.channel:
        chan = ChannelRealization([float(x) for x in args.channel.split(",")])
    else:
        if distances is None:
            raise ConfigError("network file has no distances; pass --channel")
        config = load_config(args.config) if args.config else ExperimentConfig()
        chan = sample_fading(config.fading, distances, np.random.default_rng(args.seed))
    alloc = optimal_gains(params, chan)
    index = cb.select_index(params, book, chan)
    opt_var = blue_variance(params, alloc.gains, chan)
    q_var = blue_variance(params, book[index], chan)
    np.set_printoptions(precision=6)
    print(f"channel g          : {chan.g}")
    print(f"optimal gains      : {alloc.gains}")
    print(f"active sensors K1  : {alloc.active_count}")
    print(f"selected index     : {index} of {book.size}")
    print(f"codeword gains     : {book[index]}")
    print(f"variance (full)    : {opt_var:.9g}")
    print(f"variance (limited) : {q_var:.9g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfblue", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")

    p = sub.add_parser("run", help="run the full experiment sweep")
    common(p)
    p.add_argument("--out", help="results file")
    p.add_argument("--format", choices=("csv", "jsonl"))
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per point")
    p.add_argument("--threads", type=int, help="worker threads")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help="train and save one codebook")
    common(p)
    p.add_argument("--K", type=int, help="number of sensors")
    p.add_argument("--L", type=int, help="feedback bits")
    p.add_argument("--p-dbm", type=float, help="total power in dBm")
    p.add_argument("--out", required=True, help="codebook file")
    p.add_argument("--network-out", help="network file (default: <out>.network)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one channel realization")
    p.add_argument("--config", help="JSON config (fading model for random draws)")
    p.add_argument("--network", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for the fading draw")
    p.add_argument("--channel", help="comma-separated fading magnitudes instead of a random draw")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
