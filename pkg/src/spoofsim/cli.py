"""Command-line front end: table sweeps, latency benchmarks, GAN training.

Exit codes: 0 full success, 1 configuration errors, 2 partial cell failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attacks import train_spoofer
from .experiments import (ConfigError, benchmark_latency, parse_config,
                          run_experiment)
from .gan import save_trace_csv, save_trace_summary
from .nn import load_model, save_model


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spoofsim",
        description="Wireless spoofing experiments: train the defender's "
                    "authenticator, mount random/replay/GAN attacks, sweep "
                    "antenna grids and topologies.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a table sweep")
    run.add_argument("--table", choices=["1", "2", "3", "4", "5", "custom"])
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--seeds", help="comma-separated seed list")
    run.add_argument("--trials", type=int, help="spoofed bursts per attack evaluation")
    run.add_argument("--out", help="output directory")

    bench = sub.add_parser("bench", help="CPU inference latency of a saved model")
    bench.add_argument("--model", required=True, help="model file (binary dump)")
    bench.add_argument("--repeats", type=int, default=1000)

    tg = sub.add_parser("train-gan", help="train the adversarial generator once")
    tg.add_argument("--config", help="key=value config file")
    tg.add_argument("--out", required=True, help="output directory for models and trace")
    tg.add_argument("--seed", type=int, default=None, help="override the first config seed")
    return parser


def _cmd_run(args) -> int:
    overrides = {"table": args.table, "seeds": args.seeds, "out": args.out,
                 "trials": None if args.trials is None else str(args.trials)}
    spec = parse_config(args.config, overrides)
    result = run_experiment(spec)
    print(f"wrote {result.csv_path} ({len(result.rows)} rows) and {result.json_path}")
    if result.failures:
        for failure in result.failures:
            print(f"cell {failure['cell']} seed {failure['seed']} failed: "
                  f"{failure['error']}", file=sys.stderr)
        return 2
    return 0


def _cmd_bench(args) -> int:
    net = load_model(args.model)
    micros = benchmark_latency(net, args.repeats)
    sizes = "x".join(str(s) for s in net.layer_sizes)
    print(f"{args.model}: {micros:.1f} us per sample ({sizes}, {args.repeats} repeats)")
    return 0


def _cmd_train_gan(args) -> int:
    spec = parse_config(args.config)
    seed = args.seed if args.seed is not None else spec.seeds[0]
    scenario = replace(spec.base, seed=seed)
    rng = np.random.default_rng(seed)
    generator, discriminator, trace = train_spoofer(scenario, spec.gan, rng,
                                                    spec.gan_retries)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(generator, out / "generator.bin")
    save_model(discriminator, out / "discriminator.bin")
    save_trace_csv(trace, out / "trace.csv")
    save_trace_summary(trace, out / "summary.json")
    print(f"trained {trace.epochs_run} epochs "
          f"({'converged' if trace.converged else 'not converged'}); models in {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "bench": _cmd_bench, "train-gan": _cmd_train_gan}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
