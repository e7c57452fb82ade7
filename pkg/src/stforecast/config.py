"""Experiment config files: INI sections mapping onto the module configs.

A config fully describes one experiment: the data source (a synthetic
system or a grid file), the train/test split, normalization, selection
knobs, network and training hyperparameters, and the Monte Carlo sweep.
Configs are committed artifacts; run-level knobs (seeds, output paths,
worker counts) stay on the command line.

Parse errors name the offending key and its line in the file.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass

from .embedding import BOUNDARY_POLICIES, FeatureParams, SelectionConfig
from .errors import ConfigError
from .grid import Normalizer, VALID_NORMALIZER_KINDS
from .metrics import SSIMConfig
from .network import ACTIVATIONS
from .systems import HenonLatticeConfig, KSConfig, Lorenz96Config

SYSTEM_KINDS = ("henon", "lorenz96", "ks", "file")

REQUIRED_KEYS = ("system.kind", "split.n_train", "normalizer.kind",
                 "network.hidden_units", "training.eta", "training.n_steps")


@dataclass(frozen=True)
class SweepSettings:
    """Sweep section: trial count, sampling ranges, reference stencil."""

    trials: int
    i_range: tuple[int, int]
    j_range: tuple[int, int]
    k_range: tuple[int, int]
    l_range: tuple[int, int]
    optimal: FeatureParams | None
    train_steps: int | None   # reduced budget for sweep trials, if set
    workers: int
    master_seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view of one experiment config file."""

    system_kind: str
    system: HenonLatticeConfig | Lorenz96Config | KSConfig | None
    grid_path: str | None
    n_train: int
    normalizer: Normalizer
    selection: SelectionConfig
    hidden_units: int
    activation: str
    alpha_rng: float
    beta_rng: float
    eta: float
    momentum: float
    n_steps: int
    batch_size: int
    error_clip: float | None
    boundary: str
    ssim_config: SSIMConfig
    sweep: SweepSettings


class _ConfigReader:
    """configparser wrapper that reports key lines on errors."""

    def __init__(self, path):
        self.path = path
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        self.parser = parser
        self.lines = text.splitlines()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        in_section = False
        header = re.compile(r"^\s*\[(?P<name>[^\]]+)\]")
        for lineno, raw in enumerate(self.lines, start=1):
            match = header.match(raw)
            if match:
                if in_section:
                    return None
                in_section = match.group("name").strip() == section
                if in_section and key is None:
                    return lineno
                continue
            if in_section and key is not None:
                if re.match(rf"^\s*{re.escape(key)}\s*[=:]", raw):
                    return lineno
        return None

    def fail(self, message: str, section: str, key: str | None = None):
        name = f"{section}.{key}" if key else section
        raise ConfigError(message, key=name, line=self.line_of(section, key))

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                self.fail("required key is missing", section, key)
            return default
        return self.parser.get(section, key).strip()

    def _typed(self, convert, type_name, section, key, default, required):
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            return convert(text)
        except ValueError:
            self.fail(f"expected {type_name}, got {text!r}", section, key)

    def get_int(self, section, key, default=None, required=False) -> int:
        return self._typed(int, "an integer", section, key, default, required)

    def get_float(self, section, key, default=None, required=False) -> float:
        return self._typed(float, "a number", section, key, default, required)

    def get_bool(self, section, key, default=None, required=False) -> bool:
        def convert(text):
            lowered = text.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        return self._typed(convert, "a boolean", section, key, default, required)

    def get_choice(self, section, key, choices, default=None, required=False) -> str:
        value = self.raw(section, key, None, required)
        if value is None:
            return default
        if value not in choices:
            self.fail(f"must be one of {', '.join(choices)}; got {value!r}",
                      section, key)
        return value

    def get_range(self, section, key, default=None) -> tuple[int, int]:
        def convert(text):
            lo, _, hi = text.partition(":")
            return int(lo), int(hi)
        return self._typed(convert, "a range like 0:5", section, key,
                           default, required=False)

    def get_params(self, section, key, default=None) -> FeatureParams | None:
        text = self.raw(section, key)
        if text is None:
            return default
        parts = text.split(",")
        if len(parts) != 4:
            self.fail(f"expected four integers I,J,K,L, got {text!r}", section, key)
        try:
            return FeatureParams(*(int(p) for p in parts))
        except ValueError as exc:
            self.fail(str(exc), section, key)

    def check_unknown(self, known: dict[str, set[str]]):
        for section in self.parser.sections():
            if section not in known:
                self.fail(f"unknown section; expected one of "
                          f"{', '.join(sorted(known))}", section)
            for key in self.parser.options(section):
                if key not in known[section]:
                    self.fail("unknown key", section, key)


_KNOWN_KEYS = {
    "system": {"kind", "sites", "steps", "seed", "burn_in", "forcing", "dt",
               "domain_length", "modes", "path", "boundary_value_u",
               "boundary_value_v"},
    "split": {"n_train"},
    "normalizer": {"kind", "shift", "scale"},
    "selection": {"bins", "spatial_bins", "max_temporal_lag", "max_spatial_lag",
                  "max_dim", "r_tol", "a_tol", "fnn_threshold", "plateau_drop",
                  "plateau_window", "smooth_window", "spatial_smooth_window"},
    "network": {"hidden_units", "activation", "alpha_rng", "beta_rng"},
    "training": {"eta", "momentum", "n_steps", "batch_size", "error_clip"},
    "forecast": {"boundary"},
    "metrics": {"ssim_window"},
    "sweep": {"trials", "i_range", "j_range", "k_range", "l_range", "optimal",
              "train_steps", "workers", "master_seed"},
}


def _system_config(reader: _ConfigReader, kind: str):
    sec = "system"
    try:
        if kind == "henon":
            return HenonLatticeConfig(
                sites=reader.get_int(sec, "sites", 100),
                steps=reader.get_int(sec, "steps", 531),
                seed=reader.get_int(sec, "seed", required=True),
                boundary_value_u=reader.get_float(sec, "boundary_value_u", 0.5),
                boundary_value_v=reader.get_float(sec, "boundary_value_v", 0.0),
                burn_in=reader.get_int(sec, "burn_in", 0),
            ), None
        if kind == "lorenz96":
            return Lorenz96Config(
                sites=reader.get_int(sec, "sites", 40),
                forcing=reader.get_float(sec, "forcing", 5.0),
                dt=reader.get_float(sec, "dt", 0.05),
                steps=reader.get_int(sec, "steps", 531),
                seed=reader.get_int(sec, "seed", required=True),
                burn_in=reader.get_int(sec, "burn_in", 0),
            ), None
        if kind == "ks":
            return KSConfig(
                domain_length=reader.get_float(sec, "domain_length", 22.0),
                dt=reader.get_float(sec, "dt", 0.5),
                modes=reader.get_int(sec, "modes", 64),
                steps=reader.get_int(sec, "steps", 531),
                burn_in=reader.get_int(sec, "burn_in", 0),
            ), None
    except ConfigError:
        raise
    except ValueError as exc:
        reader.fail(str(exc), sec)
    path = reader.raw(sec, "path", required=True)
    return None, path


def parse_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    reader = _ConfigReader(path)
    if not reader.parser.sections():
        raise ConfigError(
            f"config file {path} is empty; required keys: "
            + ", ".join(REQUIRED_KEYS)
        )
    reader.check_unknown(_KNOWN_KEYS)

    kind = reader.get_choice("system", "kind", SYSTEM_KINDS, required=True)
    system, grid_path = _system_config(reader, kind)
    if grid_path is not None:
        # Relative data paths resolve against the config file's directory.
        if not os.path.isabs(grid_path):
            grid_path = os.path.normpath(
                os.path.join(os.path.dirname(os.path.abspath(path)), grid_path)
            )
        if not os.path.exists(grid_path):
            reader.fail(f"grid file does not exist: {grid_path}", "system", "path")

    n_train = reader.get_int("split", "n_train", required=True)
    if n_train < 1:
        reader.fail(f"n_train must be >= 1, got {n_train}", "split", "n_train")

    norm_kind = reader.get_choice("normalizer", "kind", VALID_NORMALIZER_KINDS,
                                  required=True)
    try:
        normalizer = Normalizer(
            kind=norm_kind,
            shift=reader.get_float("normalizer", "shift", 0.0),
            scale=reader.get_float("normalizer", "scale", 1.0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        reader.fail(str(exc), "normalizer", "scale")

    try:
        selection = SelectionConfig(
            bins=reader.get_int("selection", "bins", 16),
            spatial_bins=reader.get_int("selection", "spatial_bins"),
            max_temporal_lag=reader.get_int("selection", "max_temporal_lag"),
            max_spatial_lag=reader.get_int("selection", "max_spatial_lag"),
            max_dim=reader.get_int("selection", "max_dim", 8),
            r_tol=reader.get_float("selection", "r_tol", 15.0),
            a_tol=reader.get_float("selection", "a_tol", 2.0),
            fnn_threshold=reader.get_float("selection", "fnn_threshold", 0.01),
            plateau_drop=reader.get_float("selection", "plateau_drop", 0.5),
            plateau_window=reader.get_int("selection", "plateau_window", 3),
            smooth_window=reader.get_int("selection", "smooth_window", 1),
            spatial_smooth_window=reader.get_int("selection",
                                                 "spatial_smooth_window"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        reader.fail(str(exc), "selection")

    hidden_units = reader.get_int("network", "hidden_units", required=True)
    if hidden_units < 1:
        reader.fail(f"hidden_units must be >= 1, got {hidden_units}",
                    "network", "hidden_units")
    activation = reader.get_choice("network", "activation", ACTIVATIONS, "relu")

    eta = reader.get_float("training", "eta", required=True)
    momentum = reader.get_float("training", "momentum", 0.0)
    n_steps = reader.get_int("training", "n_steps", required=True)
    batch_size = reader.get_int("training", "batch_size", 1)
    error_clip = None
    clip_text = reader.raw("training", "error_clip")
    if clip_text is not None and clip_text.lower() != "none":
        error_clip = reader.get_float("training", "error_clip")
    if not eta >= 0:
        reader.fail(f"eta must be >= 0, got {eta}", "training", "eta")
    if not 0 <= momentum < 1:
        reader.fail(f"momentum must be in [0, 1), got {momentum}",
                    "training", "momentum")
    if n_steps < 1:
        reader.fail(f"n_steps must be >= 1, got {n_steps}", "training", "n_steps")
    if batch_size < 1:
        reader.fail(f"batch_size must be >= 1, got {batch_size}",
                    "training", "batch_size")
    if error_clip is not None and not error_clip > 0:
        reader.fail(f"error_clip must be positive or none, got {error_clip}",
                    "training", "error_clip")

    boundary = reader.get_choice("forecast", "boundary", BOUNDARY_POLICIES, "wrap")

    try:
        ssim_config = SSIMConfig(window=reader.get_int("metrics", "ssim_window", 8))
    except ConfigError:
        raise
    except ValueError as exc:
        reader.fail(str(exc), "metrics", "ssim_window")

    try:
        sweep = SweepSettings(
            trials=reader.get_int("sweep", "trials", 100),
            i_range=reader.get_range("sweep", "i_range", (0, 5)),
            j_range=reader.get_range("sweep", "j_range", (0, 8)),
            k_range=reader.get_range("sweep", "k_range", (1, 12)),
            l_range=reader.get_range("sweep", "l_range", (1, 12)),
            optimal=reader.get_params("sweep", "optimal"),
            train_steps=reader.get_int("sweep", "train_steps"),
            workers=reader.get_int("sweep", "workers", 1),
            master_seed=reader.get_int("sweep", "master_seed", 0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        reader.fail(str(exc), "sweep")
    if sweep.trials < 1:
        reader.fail(f"trials must be >= 1, got {sweep.trials}", "sweep", "trials")
    if sweep.workers < 1:
        reader.fail(f"workers must be >= 1, got {sweep.workers}", "sweep", "workers")

    return ExperimentConfig(
        system_kind=kind,
        system=system,
        grid_path=grid_path,
        n_train=n_train,
        normalizer=normalizer,
        selection=selection,
        hidden_units=hidden_units,
        activation=activation,
        alpha_rng=reader.get_float("network", "alpha_rng", 1.0e-3),
        beta_rng=reader.get_float("network", "beta_rng", -0.5),
        eta=eta,
        momentum=momentum,
        n_steps=n_steps,
        batch_size=batch_size,
        error_clip=error_clip,
        boundary=boundary,
        ssim_config=ssim_config,
        sweep=sweep,
    )
