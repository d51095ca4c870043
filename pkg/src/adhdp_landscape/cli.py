"""Command-line entry point: ``adhdp-landscape {train,analyze,plot,compare}``."""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .config import PRESET_NAMES, AnalysisConfig, load_config, load_preset
from .errors import ConfigError, NumericOverflowError, RunFormatError, ZeroVarianceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 960x720, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return w, h


def build_parser():
    p = argparse.ArgumentParser(prog="adhdp-landscape",
                                description="Train ADHDP variants on spacecraft attitude control "
                                            "and visualize their loss landscapes.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one variant and save a run directory")
    t.add_argument("--preset", choices=PRESET_NAMES, help="shipped configuration to start from")
    t.add_argument("--config", type=Path, help="config file; its keys override the preset")
    t.add_argument("--out", type=Path, required=True, help="run directory to create")
    t.add_argument("--seed", type=int, help="override the configured seed")
    t.add_argument("--quiet", action="store_true", help="suppress per-episode lines")

    a = sub.add_parser("analyze", help="compute the four visualization indices of a run")
    a.add_argument("run", type=Path)
    a.add_argument("--resolution", type=int, help="grid nodes per landscape axis")

    pl = sub.add_parser("plot", help="render SVG figures of an analyzed run")
    pl.add_argument("run", type=Path)
    pl.add_argument("--log-scale", action="store_true", help="log color scale for the critic match loss")
    pl.add_argument("--contours", type=int, default=10, help="number of iso-lines per landscape")
    pl.add_argument("--size", type=_size, default=(960, 720), help="figure size WxH in SVG units")

    c = sub.add_parser("compare", help="tabulate analyzed runs side by side")
    c.add_argument("runs", type=Path, nargs="+")
    c.add_argument("--out", type=Path, help="directory for compare.txt and compare.csv")
    return p


def _train(args):
    if args.preset is None and args.config is None:
        raise ConfigError("give --preset, --config, or both")
    cfg = load_preset(args.preset) if args.preset else None
    if args.config is not None:
        cfg = load_config(args.config, base=cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    pipeline.train_run(cfg, args.out, echo=None if args.quiet else print)
    print(f"saved run to {args.out}")


def _analyze(args):
    if args.resolution is not None:
        try:
            AnalysisConfig(resolution=args.resolution)
        except ValueError as exc:
            raise ConfigError(f"--resolution: {exc}") from None
    meta = pipeline.analyze_run(args.run, resolution=args.resolution)
    for k, v in meta.items():
        print(f"{k} = {v}")


def _plot(args):
    for path in pipeline.plot_run(args.run, args.log_scale, args.contours, args.size):
        print(path)


def _compare(args):
    text, csv = pipeline.compare_table([pipeline.summarize_run(r) for r in args.runs])
    print(text, end="")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "compare.txt").write_text(text)
        (args.out / "compare.csv").write_text(csv)


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"train": _train, "analyze": _analyze, "plot": _plot, "compare": _compare}[args.command]
    try:
        handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pipeline.PartialRun, NumericOverflowError, ZeroVarianceError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RunFormatError, OSError, ValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
