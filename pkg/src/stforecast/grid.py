"""Spatiotemporal grid container, train/test splitting, normalization, file I/O.

The grid is the universal data carrier: a real scalar field s^n_m sampled on
N time steps (rows) and M spatial sites (columns), stored time-major in
double precision. Grids are immutable after construction so they can be
shared freely across worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridFileError

VALID_NORMALIZER_KINDS = ("linear", "logarithmic")


@dataclass(frozen=True, eq=False)
class SpatioTemporalGrid:
    """A scalar field on N time steps x M spatial sites.

    Parameters
    ----------
    values : array_like, shape (N, M)
        Field samples, time-major: values[n, m] is the value at time step n
        and spatial site m. Stored as read-only float64.
    time_step : float, optional
        Physical time step between rows (1.0 for maps).
    space_label : str, optional
        Description of the spatial axis (e.g. "latitude").
    """

    values: np.ndarray
    time_step: float = 1.0
    space_label: str | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise ValueError(f"grid values must be 2-D, got ndim={v.ndim}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"grid must be at least 1x1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must all be finite")
        if not self.time_step > 0:
            raise ValueError(f"time_step must be positive, got {self.time_step}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_steps(self) -> int:
        """Number of time steps N (rows)."""
        return self.values.shape[0]

    @property
    def n_sites(self) -> int:
        """Number of spatial sites M (columns)."""
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpatioTemporalGrid):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and self.time_step == other.time_step
            and self.space_label == other.space_label
        )

    def __repr__(self) -> str:
        return (
            f"SpatioTemporalGrid(N={self.n_steps}, M={self.n_sites}, "
            f"time_step={self.time_step})"
        )


@dataclass(frozen=True)
class SplitGrid:
    """Row-exact partition of a grid into a training and a test segment."""

    train: SpatioTemporalGrid
    test: SpatioTemporalGrid

    def __post_init__(self):
        if self.train.n_sites != self.test.n_sites:
            raise ValueError(
                "train and test must share the spatial axis: "
                f"M={self.train.n_sites} vs M={self.test.n_sites}"
            )


def split(grid: SpatioTemporalGrid, n_train: int) -> SplitGrid:
    """Split a grid into the first ``n_train`` rows and the remainder.

    Requires 1 <= n_train < N so both segments are non-empty. Concatenating
    train and test rows reproduces the source grid exactly.
    """
    n_train = int(n_train)
    if not 1 <= n_train < grid.n_steps:
        raise ValueError(
            f"n_train must satisfy 1 <= n_train < N={grid.n_steps}, got {n_train}"
        )
    train = SpatioTemporalGrid(
        grid.values[:n_train], grid.time_step, grid.space_label
    )
    test = SpatioTemporalGrid(
        grid.values[n_train:], grid.time_step, grid.space_label
    )
    return SplitGrid(train, test)


@dataclass(frozen=True)
class Normalizer:
    """Fit-free elementwise normalization y = f(x).

    linear:       y = shift + x / scale
    logarithmic:  y = shift + ln(1 + x) / scale,  valid for x > -1

    Parameters are supplied explicitly (the experiments list them per
    system); nothing is estimated from data. ``scale`` must be nonzero.
    """

    kind: str
    shift: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in VALID_NORMALIZER_KINDS:
            raise ValueError(
                f"normalizer kind must be one of {VALID_NORMALIZER_KINDS}, "
                f"got {self.kind!r}"
            )
        if self.scale == 0:
            raise ValueError("normalizer scale must be nonzero")
        if not (math.isfinite(self.shift) and math.isfinite(self.scale)):
            raise ValueError("normalizer parameters must be finite")

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            return self.shift + x / self.scale
        if np.any(x <= -1.0):
            raise ValueError(
                "logarithmic normalizer requires every value > -1"
            )
        return self.shift + np.log1p(x) / self.scale

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "linear":
            return (y - self.shift) * self.scale
        return np.expm1((y - self.shift) * self.scale)


def normalize(grid: SpatioTemporalGrid, norm: Normalizer) -> SpatioTemporalGrid:
    """Apply a normalizer elementwise, returning a new grid."""
    return SpatioTemporalGrid(
        norm.forward(grid.values), grid.time_step, grid.space_label
    )


def denormalize(grid: SpatioTemporalGrid, norm: Normalizer) -> SpatioTemporalGrid:
    """Invert a normalizer elementwise, returning a new grid."""
    return SpatioTemporalGrid(
        norm.inverse(grid.values), grid.time_step, grid.space_label
    )


def write_grid(grid: SpatioTemporalGrid, path) -> None:
    """Write a grid as comma-separated text, one time slice per line.

    Values are printed with %.17g so finite doubles round-trip exactly
    through read_grid.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for row in grid.values:
            fh.write(",".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def read_grid(path, time_step: float = 1.0,
              space_label: str | None = None) -> SpatioTemporalGrid:
    """Read a grid from comma-separated text.

    Rows are time slices; lines starting with ``#`` (after optional leading
    whitespace) and blank lines are ignored. Parse failures raise
    GridFileError naming the offending 1-based line number.
    """
    rows = []
    width = None
    first_line = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split(",")
            try:
                row = [float(tok) for tok in tokens]
            except ValueError:
                raise GridFileError(
                    f"non-numeric token in row: {text[:60]!r}", line=lineno
                ) from None
            if not all(math.isfinite(x) for x in row):
                raise GridFileError("non-finite value in row", line=lineno)
            if width is None:
                width, first_line = len(row), lineno
            elif len(row) != width:
                raise GridFileError(
                    f"row has {len(row)} columns, expected {width} "
                    f"(as on line {first_line})",
                    line=lineno,
                )
            rows.append(row)
    if not rows:
        raise GridFileError(f"no data rows in {path}")
    return SpatioTemporalGrid(np.array(rows), time_step, space_label)
