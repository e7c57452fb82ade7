"""Monte Carlo sweeps over stencil parameters, with persisted records.

A trial is one full pipeline run at a candidate stencil: normalize the
training data, build patterns, initialize and train a network, roll out a
closed-loop forecast over the test horizon, denormalize, and score the
forecast against the test grid with SSIM. A sweep samples many stencils
uniformly from configured ranges and records one row per trial.

Trials never abort a sweep: infeasible stencils and diverged runs are
recorded with a status instead of raising. Every trial is deterministic
given its seed (derived from the master seed and trial index), so sweeps
are resumable and individual trials re-runnable in isolation.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from .embedding import FeatureParams, build_patterns
from .errors import DivergenceError
from .forecast import forecast
from .grid import Normalizer, SpatioTemporalGrid, SplitGrid, denormalize, normalize
from .metrics import SSIMConfig, distance_euclidean, distance_manhattan, ssim
from .network import NetworkConfig, TrainConfig, init_network, train

RECORD_COLUMNS = ("trial", "I", "J", "K", "L", "d_e", "d_manhattan",
                  "ssim", "train_mse", "wall_time_s", "seed", "status")
SUMMARY_COLUMNS = ("de_bin_lo", "de_bin_hi", "count", "median_ssim", "max_ssim")
STATUSES = ("ok", "diverged", "infeasible")


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs besides its stencil and seed."""

    optimal: FeatureParams
    hidden_units: int
    activation: str
    alpha_rng: float
    beta_rng: float
    eta: float
    momentum: float
    n_steps: int
    normalizer: Normalizer
    boundary: str
    ssim_config: SSIMConfig = SSIMConfig()
    batch_size: int = 1
    error_clip: float | None = None


@dataclass(frozen=True)
class SweepConfig:
    """Trial count, stencil sampling ranges, and the shared trial config."""

    trials: int
    i_range: tuple[int, int]
    j_range: tuple[int, int]
    k_range: tuple[int, int]
    l_range: tuple[int, int]
    trial_config: TrialConfig
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        for name, (lo, hi) in (("i_range", self.i_range), ("j_range", self.j_range),
                               ("k_range", self.k_range), ("l_range", self.l_range)):
            if lo > hi:
                raise ValueError(f"{name} is empty: ({lo}, {hi})")
            floor = 1 if name in ("k_range", "l_range") else 0
            if lo < floor:
                raise ValueError(f"{name} lower bound must be >= {floor}, got {lo}")


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one trial; ssim and train_mse are None unless status is ok."""

    trial: int
    params: FeatureParams
    d_e: float
    d_manhattan: float
    ssim: float | None
    train_mse: float | None
    wall_time_s: float
    seed: int
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}, got {self.status!r}")
        if self.status == "ok":
            if self.ssim is None or not math.isfinite(self.ssim):
                raise ValueError("an ok record needs a finite ssim")
            if self.train_mse is None or not math.isfinite(self.train_mse):
                raise ValueError("an ok record needs a finite train_mse")

    def reproducible_fields(self) -> tuple:
        """Every field except wall time, which varies between runs."""
        return (self.trial, self.params.as_tuple(), self.d_e, self.d_manhattan,
                self.ssim, self.train_mse, self.seed, self.status)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Seed for one trial; derived so trials are re-runnable in isolation."""
    return master_seed + trial_index


def run_trial(train_grid: SpatioTemporalGrid, test_grid: SpatioTemporalGrid,
              params: FeatureParams, cfg: TrialConfig, seed: int,
              trial: int = 0) -> TrialRecord:
    """Run the normalize/train/forecast/score pipeline for one stencil.

    Failures are encoded in the record status: stencils the training grid
    cannot accommodate come back ``infeasible``, runs whose training or
    forecast blows up come back ``diverged``.
    """
    t0 = time.perf_counter()
    d_e = distance_euclidean(params, cfg.optimal)
    d_m = distance_manhattan(params, cfg.optimal)

    def finish(status, score=None, train_mse=None):
        return TrialRecord(trial, params, d_e, d_m, score, train_mse,
                           time.perf_counter() - t0, seed, status)

    try:
        norm_train = normalize(train_grid, cfg.normalizer)
        patterns = build_patterns(norm_train, params, cfg.boundary)
    except ValueError:
        return finish("infeasible")

    init_seed, sgd_seed = (int(s) for s in
                           np.random.SeedSequence(seed).generate_state(2))
    net_config = NetworkConfig(params.input_dim, cfg.hidden_units,
                               cfg.activation, cfg.alpha_rng, cfg.beta_rng,
                               seed=init_seed)
    train_config = TrainConfig(cfg.eta, cfg.momentum, cfg.n_steps,
                               seed=sgd_seed, batch_size=cfg.batch_size,
                               error_clip=cfg.error_clip)
    try:
        result = train(init_network(net_config), patterns, train_config)
        rollout = forecast(result.network, norm_train, params,
                           test_grid.n_steps, cfg.boundary)
        predicted = denormalize(rollout.predicted, cfg.normalizer)
        score = ssim(predicted, test_grid, cfg.ssim_config)
    except DivergenceError:
        return finish("diverged")
    except ValueError:
        # Non-finite values out of the denormalizer or the scorer.
        return finish("diverged")
    if not math.isfinite(score):
        return finish("diverged")
    return finish("ok", score, result.final_mse)


def sample_stencils(sweep: SweepConfig) -> list[FeatureParams]:
    """The sweep's trial stencils, drawn uniformly from the ranges.

    All draws come from one stream seeded by master_seed, in trial order
    with fields ordered I, J, K, L, so trial t's stencil never depends on
    how many trials ran before it.
    """
    rng = np.random.default_rng(sweep.master_seed)
    out = []
    for _ in range(sweep.trials):
        draws = [int(rng.integers(lo, hi + 1)) for lo, hi in
                 (sweep.i_range, sweep.j_range, sweep.k_range, sweep.l_range)]
        out.append(FeatureParams(*draws))
    return out


def _run_indexed_trial(args) -> TrialRecord:
    train_grid, test_grid, params, cfg, seed, trial = args
    return run_trial(train_grid, test_grid, params, cfg, seed, trial)


def run_sweep(split: SplitGrid, sweep: SweepConfig, records_path=None,
              workers: int = 1, progress=None) -> list[TrialRecord]:
    """Run (or resume) a Monte Carlo sweep, returning records by trial index.

    With a ``records_path``, finished trials are appended to the CSV as
    they complete and trials already present in the file are not rerun; on
    completion the file is rewritten sorted by trial index, so interrupted
    and uninterrupted sweeps end with the same file. ``progress`` is an
    optional callable receiving each finished record.
    """
    stencils = sample_stencils(sweep)
    done: dict[int, TrialRecord] = {}
    if records_path is not None:
        try:
            for record in read_records(records_path):
                done[record.trial] = record
        except FileNotFoundError:
            write_records([], records_path)

    tasks = [
        (split.train, split.test, stencils[t], sweep.trial_config,
         trial_seed(sweep.master_seed, t), t)
        for t in range(sweep.trials) if t not in done
    ]

    def record_done(record):
        done[record.trial] = record
        if records_path is not None:
            _append_record(record, records_path)
        if progress is not None:
            progress(record)

    if workers <= 1:
        for task in tasks:
            record_done(_run_indexed_trial(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_indexed_trial, task) for task in tasks]
            for future in as_completed(futures):
                record_done(future.result())

    records = [done[t] for t in sorted(done)]
    if records_path is not None:
        write_records(records, records_path)
    return records


# ---------------------------------------------------------------------------
# Record persistence
# ---------------------------------------------------------------------------

def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _record_row(record: TrialRecord) -> list[str]:
    i, j, k, l = record.params.as_tuple()
    return [_format_value(v) for v in (
        record.trial, i, j, k, l, record.d_e, record.d_manhattan,
        record.ssim, record.train_mse, record.wall_time_s,
        record.seed, record.status)]


def write_records(records, path) -> None:
    """Write trial records as CSV with a fixed column header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for record in records:
            writer.writerow(_record_row(record))


def _append_record(record: TrialRecord, path) -> None:
    with open(path, "a", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerow(_record_row(record))


def read_records(path) -> list[TrialRecord]:
    """Read trial records written by write_records (or a resumed sweep)."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and tuple(header) != RECORD_COLUMNS:
            raise ValueError(f"unexpected record columns in {path}: {header}")
        for row in reader:
            if len(row) != len(RECORD_COLUMNS):
                raise ValueError(f"malformed record row in {path}: {row}")
            records.append(TrialRecord(
                trial=int(row[0]),
                params=FeatureParams(int(row[1]), int(row[2]),
                                     int(row[3]), int(row[4])),
                d_e=float(row[5]),
                d_manhattan=float(row[6]),
                ssim=float(row[7]) if row[7] else None,
                train_mse=float(row[8]) if row[8] else None,
                wall_time_s=float(row[9]),
                seed=int(row[10]),
                status=row[11],
            ))
    return records


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryBin:
    """SSIM statistics for records whose d_e falls in [lo, hi)."""

    de_bin_lo: float
    de_bin_hi: float
    count: int
    median_ssim: float
    max_ssim: float


def summarize(records) -> tuple[list[SummaryBin], TrialRecord | None]:
    """Bin ok records by d_e (width 1) and find the best-SSIM record."""
    scored = [r for r in records if r.status == "ok"]
    if not scored:
        return [], None
    best = max(scored, key=lambda r: r.ssim)
    bins = []
    top = int(math.floor(max(r.d_e for r in scored))) + 1
    for lo in range(top):
        values = [r.ssim for r in scored if lo <= r.d_e < lo + 1]
        if not values:
            continue
        bins.append(SummaryBin(float(lo), float(lo + 1), len(values),
                               float(np.median(values)), float(max(values))))
    return bins, best


def report(records, summary_path) -> tuple[list[SummaryBin], TrialRecord | None]:
    """Write the binned d_e/SSIM summary CSV; returns (bins, best record)."""
    bins, best = summarize(records)
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for b in bins:
            writer.writerow([_format_value(v) for v in
                             (b.de_bin_lo, b.de_bin_hi, b.count,
                              b.median_ssim, b.max_ssim)])
    return bins, best
