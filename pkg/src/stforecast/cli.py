"""Command-line front end: generate, select, train, forecast, sweep, report.

Experiments are defined by config files; flags carry only run-level knobs
(seed and worker overrides, input/output paths). Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import sys
import time

from .config import ExperimentConfig, parse_config
from .embedding import FeatureParams, build_patterns, select_features
from .errors import ConfigError, DivergenceError, GridFileError, SelectionError
from .experiment import (SweepConfig, TrialConfig, read_records, report,
                         run_sweep, summarize)
from .forecast import forecast
from .grid import denormalize, normalize, read_grid, split, write_grid
from .metrics import ssim
from .network import (NetworkConfig, TrainConfig, init_network, load_network,
                      save_network, train)
from .systems import simulate_henon, simulate_ks, simulate_lorenz96


def _parse_params(text: str) -> FeatureParams:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"expected I,J,K,L with four integers, got {text!r}")
    return FeatureParams(*(int(p) for p in parts))


def _run_dir(config_path: str) -> str:
    """Fresh output directory keyed by config content and start time."""
    with open(config_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()[:8]
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = os.path.join("runs", f"{digest}-{stamp}")
    os.makedirs(path, exist_ok=True)
    return path


def _out_dir(args) -> str:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        return args.out
    return _run_dir(args.config)


def _simulate(cfg: ExperimentConfig, seed: int | None):
    system = cfg.system
    if seed is not None and cfg.system_kind != "ks":
        system = dataclasses.replace(system, seed=seed)
    if cfg.system_kind == "henon":
        return simulate_henon(system)
    if cfg.system_kind == "lorenz96":
        return simulate_lorenz96(system)
    return simulate_ks(system)


def _obtain_grid(cfg: ExperimentConfig, args):
    grid_path = getattr(args, "grid", None)
    if grid_path:
        return read_grid(grid_path)
    if cfg.system_kind == "file":
        return read_grid(cfg.grid_path)
    return _simulate(cfg, args.seed)


def _select(cfg: ExperimentConfig, train_grid):
    return select_features(normalize(train_grid, cfg.normalizer), cfg.selection)


def _stencil(cfg: ExperimentConfig, args, train_grid) -> FeatureParams:
    if getattr(args, "params", None):
        return _parse_params(args.params)
    print("no --params given; selecting from training data", file=sys.stderr)
    return _select(cfg, train_grid).params


def _write_profile_csv(path, header, columns):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def cmd_generate(args) -> int:
    cfg = parse_config(args.config)
    if cfg.system_kind == "file":
        print("error: config reads a grid file; nothing to generate",
              file=sys.stderr)
        return 1
    grid = _simulate(cfg, args.seed)
    out = args.out or os.path.join(_run_dir(args.config), "generated.grid")
    write_grid(grid, out)
    print(f"wrote {grid.n_steps}x{grid.n_sites} grid to {out}")
    return 0


def cmd_select(args) -> int:
    cfg = parse_config(args.config)
    grid = _obtain_grid(cfg, args)
    parts = split(grid, cfg.n_train)
    result = _select(cfg, parts.train)
    i, j, k, l = result.params.as_tuple()
    print(f"I* = {i}")
    print(f"J* = {j}")
    print(f"K* = {k}")
    print(f"L* = {l}")
    out = _out_dir(args)
    _write_profile_csv(os.path.join(out, "mi_temporal.csv"),
                       ("lag", "mi_bits"),
                       (result.temporal_mi.lags.tolist(),
                        result.temporal_mi.mi_bits.tolist()))
    _write_profile_csv(os.path.join(out, "mi_spatial.csv"),
                       ("lag", "mi_bits"),
                       (result.spatial_mi.lags.tolist(),
                        result.spatial_mi.mi_bits.tolist()))
    _write_profile_csv(os.path.join(out, "fnn_temporal.csv"),
                       ("dim", "false_fraction"),
                       (result.temporal_fnn.dims.tolist(),
                        result.temporal_fnn.false_fraction.tolist()))
    _write_profile_csv(os.path.join(out, "fnn_spatial.csv"),
                       ("dim", "false_fraction"),
                       (result.spatial_fnn.dims.tolist(),
                        result.spatial_fnn.false_fraction.tolist()))
    print(f"profiles written under {out}")
    return 0


def cmd_train(args) -> int:
    cfg = parse_config(args.config)
    grid = _obtain_grid(cfg, args)
    parts = split(grid, cfg.n_train)
    params = _stencil(cfg, args, parts.train)
    norm_train = normalize(parts.train, cfg.normalizer)
    patterns = build_patterns(norm_train, params, cfg.boundary)
    seed = args.seed if args.seed is not None else 0
    net = init_network(NetworkConfig(params.input_dim, cfg.hidden_units,
                                     cfg.activation, cfg.alpha_rng,
                                     cfg.beta_rng, seed=seed))
    result = train(net, patterns, TrainConfig(cfg.eta, cfg.momentum,
                                              cfg.n_steps, seed=seed + 1,
                                              batch_size=cfg.batch_size,
                                              error_clip=cfg.error_clip))
    out = args.out or os.path.join(_run_dir(args.config), "network.txt")
    save_network(result.network, out)
    i, j, k, l = params.as_tuple()
    print(f"trained on {len(patterns)} patterns with I,J,K,L = {i},{j},{k},{l}")
    print(f"final train mse = {result.final_mse:.6g}")
    print(f"network written to {out}")
    return 0


def cmd_forecast(args) -> int:
    cfg = parse_config(args.config)
    grid = _obtain_grid(cfg, args)
    parts = split(grid, cfg.n_train)
    params = _stencil(cfg, args, parts.train)
    net = load_network(args.net)
    norm_train = normalize(parts.train, cfg.normalizer)
    rollout = forecast(net, norm_train, params, parts.test.n_steps,
                       cfg.boundary)
    predicted = denormalize(rollout.predicted, cfg.normalizer)
    out = args.out or os.path.join(_run_dir(args.config), "forecast.grid")
    write_grid(predicted, out)
    score = ssim(predicted, parts.test, cfg.ssim_config)
    print(f"forecast {predicted.n_steps}x{predicted.n_sites} grid written to {out}")
    print(f"ssim vs test = {score:.9g}")
    return 0


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    grid = _obtain_grid(cfg, args)
    parts = split(grid, cfg.n_train)
    optimal = cfg.sweep.optimal
    if optimal is None:
        print("no optimal stencil in config; selecting from training data",
              file=sys.stderr)
        optimal = _select(cfg, parts.train).params
        i, j, k, l = optimal.as_tuple()
        print(f"selected optimal I,J,K,L = {i},{j},{k},{l}")
    trial_config = TrialConfig(
        optimal=optimal,
        hidden_units=cfg.hidden_units,
        activation=cfg.activation,
        alpha_rng=cfg.alpha_rng,
        beta_rng=cfg.beta_rng,
        eta=cfg.eta,
        momentum=cfg.momentum,
        n_steps=cfg.sweep.train_steps or cfg.n_steps,
        normalizer=cfg.normalizer,
        boundary=cfg.boundary,
        ssim_config=cfg.ssim_config,
        batch_size=cfg.batch_size,
        error_clip=cfg.error_clip,
    )
    sweep_config = SweepConfig(
        trials=args.trials or cfg.sweep.trials,
        i_range=cfg.sweep.i_range,
        j_range=cfg.sweep.j_range,
        k_range=cfg.sweep.k_range,
        l_range=cfg.sweep.l_range,
        trial_config=trial_config,
        master_seed=args.seed if args.seed is not None else cfg.sweep.master_seed,
    )
    out = args.out or os.path.join(_run_dir(args.config), "records.csv")

    def progress(record):
        score = "-" if record.ssim is None else f"{record.ssim:.4f}"
        i, j, k, l = record.params.as_tuple()
        print(f"trial {record.trial}: I,J,K,L = {i},{j},{k},{l}  "
              f"ssim = {score}  [{record.status}]")

    records = run_sweep(parts, sweep_config, records_path=out,
                        workers=args.workers or cfg.sweep.workers,
                        progress=progress)
    summary_path = os.path.splitext(out)[0] + "_summary.csv"
    bins, best = report(records, summary_path)
    print(f"{len(records)} records written to {out}; summary in {summary_path}")
    _print_best(best)
    return 0


def _print_best(best) -> None:
    if best is None:
        print("no successful trials")
        return
    i, j, k, l = best.params.as_tuple()
    print(f"best: trial {best.trial} with I,J,K,L = {i},{j},{k},{l}, "
          f"d_e = {best.d_e:.6g}, ssim = {best.ssim:.9g}")


def cmd_report(args) -> int:
    records = read_records(args.records)
    if args.out:
        bins, best = report(records, args.out)
        print(f"summary written to {args.out}")
    else:
        bins, best = summarize(records)
    for b in bins:
        print(f"d_e in [{b.de_bin_lo:g}, {b.de_bin_hi:g}): n = {b.count}, "
              f"median ssim = {b.median_ssim:.6g}, max ssim = {b.max_ssim:.6g}")
    _print_best(best)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "select": cmd_select,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stforecast",
        description="Embedding-guided feature selection and neural "
                    "forecasting of spatiotemporal grids.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="experiment config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed")
        p.add_argument("--out", default=None, help="output path")

    p = sub.add_parser("generate", help="simulate a system and write its grid")
    common(p)

    p = sub.add_parser("select", help="select stencil parameters from training data")
    common(p)
    p.add_argument("--grid", default=None, help="read this grid file instead of simulating")

    p = sub.add_parser("train", help="train a network at a stencil")
    common(p)
    p.add_argument("--grid", default=None, help="read this grid file instead of simulating")
    p.add_argument("--params", default=None, help="stencil as I,J,K,L (default: select)")

    p = sub.add_parser("forecast", help="closed-loop forecast over the test split")
    common(p)
    p.add_argument("--grid", default=None, help="read this grid file instead of simulating")
    p.add_argument("--params", default=None, help="stencil as I,J,K,L (default: select)")
    p.add_argument("--net", required=True, help="network file from the train command")

    p = sub.add_parser("sweep", help="Monte Carlo sweep over stencils")
    common(p)
    p.add_argument("--grid", default=None, help="read this grid file instead of simulating")
    p.add_argument("--workers", type=int, default=None,
                   help="concurrent trial processes (default: config)")
    p.add_argument("--trials", type=int, default=None,
                   help="trial count override (default: config)")

    p = sub.add_parser("report", help="summarize a records file")
    p.add_argument("--records", required=True, help="records CSV from a sweep")
    p.add_argument("--out", default=None, help="summary CSV path")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GridFileError, DivergenceError, SelectionError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
