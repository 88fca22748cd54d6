"""Command line entry point: ``threeplayer <command> --config FILE --out DIR [--seed N]``."""

from __future__ import annotations

import argparse
import os
import sys

from . import games, toy
from .artifacts import FormatError, load_checkpoint, split_stores, write_raster_ppm
from .config import ConfigError, ExperimentConfig, load_config
from .runner import (RunReport, ScenarioResult, classifier_angle, comparison_table, make_world, run_comparison,
                     run_scenarios)

EXIT_OK, EXIT_FAILED, EXIT_REJECTED = 0, 1, 2

COMMANDS = {
    "train-baseline": ("baseline",),
    "train-cgan": ("cgan", "cgan-augmented"),
    "train-acgan": ("acgan",),
    "train-threeplayer": ("three-player",),
    "toy-overlap": ("frozen-classifier-game",),
}


class Rejected(Exception):
    pass


def _checkpoint_classifier(cfg: ExperimentConfig, base_dir: str, num_classes: int, dim: int) -> games.Classifier:
    if not cfg.checkpoint:
        raise Rejected("this command needs 'checkpoint = <file>' in the config")
    stores = split_stores(load_checkpoint(os.path.join(base_dir, cfg.checkpoint)))
    gc = cfg.game_config(num_classes, dim)
    if cfg.scenario == "acgan":
        spec, key, clf = gc.acgan_d_spec(), "d", lambda p: games.Classifier(spec, p, "softmax", logit_start=1)
    else:
        spec, key, clf = gc.c_spec(), "c", lambda p: games.Classifier(spec, p, cfg.classifier_loss)
    params = stores.get(key)
    if params is None:
        raise Rejected(f"checkpoint has no '{key}' arrays")
    want = {f"W{i}": (a, b) for i, (a, b) in enumerate(zip(spec.sizes[:-1], spec.sizes[1:]))}
    want.update({f"b{i}": (b,) for i, b in enumerate(spec.sizes[1:])})
    got = {k: v.shape for k, v in params.items()}
    if got != want:
        raise Rejected(f"checkpoint '{key}' shapes {got} do not match the configured network {want}")
    return clf(params)


def _evaluate(cfg: ExperimentConfig, out: str, base_dir: str) -> int:
    world = make_world(cfg, cfg.data_seed, base_dir)
    clf = _checkpoint_classifier(cfg, base_dir, world.num_classes, world.dim)
    res = ScenarioResult("eval", cfg.seed, accuracy=clf.accuracy(world.x_test, world.y_test),
                         boundary_angle=classifier_angle(world, clf))
    RunReport([res], cfg.echo(), cfg.seed).write(out)
    print(f"test accuracy {res.accuracy:.4f}")
    return EXIT_OK


def _render(cfg: ExperimentConfig, out: str, base_dir: str) -> int:
    world = make_world(cfg, cfg.data_seed, base_dir)
    if world.dim != 2:
        raise Rejected("render-surface needs two-dimensional data")
    clf = _checkpoint_classifier(cfg, base_dir, world.num_classes, world.dim)
    bounds = (cfg.raster_min, cfg.raster_max, cfg.raster_min, cfg.raster_max)
    raster = toy.rasterize_surface(clf, bounds, cfg.raster_resolution)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "surface.ppm")
    write_raster_ppm(raster, path)
    print(f"wrote {path}")
    return EXIT_OK


def _report_exit(report: RunReport) -> int:
    print(report.text(), end="")
    return EXIT_OK if report.ok else EXIT_FAILED


def run_command(command: str, cfg: ExperimentConfig, out: str, base_dir: str = ".") -> int:
    missing = cfg.missing_files(base_dir)
    if missing:
        raise Rejected(f"referenced file(s) not found: {', '.join(missing)}")
    if command == "eval":
        return _evaluate(cfg, out, base_dir)
    if command == "render-surface":
        return _render(cfg, out, base_dir)
    if command == "compare":
        report = run_comparison(cfg, out, base_dir)
        print(comparison_table(report), end="")
        return EXIT_OK if report.ok else EXIT_FAILED
    if command == "toy-overlap" and not cfg.is_toy:
        raise Rejected("toy-overlap needs a toy dataset with a known posterior")
    return _report_exit(run_scenarios(cfg, COMMANDS[command], out, base_dir, cfg.repeats))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threeplayer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "render-surface", "eval", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed (nonnegative integer)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise Rejected(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
            cfg = cfg.replace(seed=args.seed)
        cfg = cfg.replace(out=args.out)
        return run_command(args.command, cfg, args.out, os.path.dirname(os.path.abspath(args.config)))
    except (Rejected, ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED


if __name__ == "__main__":
    sys.exit(main())
