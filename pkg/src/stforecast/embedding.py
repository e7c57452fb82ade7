"""Embedding-based feature selection and input-pattern construction.

The forecasting network sees, for every site m and time n, a stencil of
grid values: the site itself, its I spatial neighbours on each side at
spacing K, and J past copies of that row at temporal spacing L. The four
stencil parameters are selected from the training data alone:

* temporal lag L and spatial lag K from the first minimum of the average
  mutual information between lagged copies of the signal,
* temporal depth J and spatial half-width I from the embedding dimension
  at which the fraction of false nearest neighbours falls below a
  threshold.

References
----------
.. [1] A. M. Fraser and H. L. Swinney, "Independent coordinates for
   strange attractors from mutual information", Phys. Rev. A 33 (1986).
.. [2] M. B. Kennel, R. Brown and H. D. I. Abarbanel, "Determining
   embedding dimension for phase-space reconstruction using a
   geometrical construction", Phys. Rev. A 45 (1992) 3403.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.spatial import cKDTree

from .errors import SelectionError
from .grid import SpatioTemporalGrid

AXES = ("temporal", "spatial")
BOUNDARY_POLICIES = ("wrap", "skip", "clamp")


# ---------------------------------------------------------------------------
# Feature stencil
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureParams:
    """Stencil quadruple (I, J, K, L).

    spatial_halfwidth I >= 0 : neighbours on each side of the centre site
    temporal_depth   J >= 0 : past rows included beyond the current one
    spatial_lag      K >= 1 : site spacing within a row
    temporal_lag     L >= 1 : row spacing between temporal copies
    """

    spatial_halfwidth: int
    temporal_depth: int
    spatial_lag: int
    temporal_lag: int

    def __post_init__(self):
        if self.spatial_halfwidth < 0:
            raise ValueError(f"spatial_halfwidth must be >= 0, got {self.spatial_halfwidth}")
        if self.temporal_depth < 0:
            raise ValueError(f"temporal_depth must be >= 0, got {self.temporal_depth}")
        if self.spatial_lag < 1:
            raise ValueError(f"spatial_lag must be >= 1, got {self.spatial_lag}")
        if self.temporal_lag < 1:
            raise ValueError(f"temporal_lag must be >= 1, got {self.temporal_lag}")

    @property
    def input_dim(self) -> int:
        """Length of the input vector, (2I+1)(J+1)."""
        return (2 * self.spatial_halfwidth + 1) * (self.temporal_depth + 1)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.spatial_halfwidth, self.temporal_depth,
                self.spatial_lag, self.temporal_lag)


# ---------------------------------------------------------------------------
# Mutual information
# ---------------------------------------------------------------------------

def _entropy_bits_from_counts(counts: np.ndarray, total: int) -> float:
    # H = log2(n) - (1/n) sum c log2(c); fsum keeps the sum independent of
    # term order so equal count multisets give bit-identical entropies.
    acc = math.fsum(c * math.log2(c) for c in counts.ravel() if c > 0)
    return math.log2(total) - acc / total


def binned_entropy(a: np.ndarray, bins: int = 16) -> float:
    """Shannon entropy in bits of an equal-width histogram of ``a``."""
    a = np.asarray(a, dtype=np.float64)
    if a.size < 2:
        raise ValueError(f"need at least 2 samples, got {a.size}")
    if np.ptp(a) == 0:
        return 0.0
    counts, _ = np.histogram(a, bins=bins)
    return _entropy_bits_from_counts(counts, a.size)


def mutual_information(a: np.ndarray, b: np.ndarray, bins: int = 16) -> float:
    """Histogram mutual information between two series, in bits.

    Uses a bins x bins joint histogram with equal-width bins spanning each
    series' own range, evaluated as H(a) + H(b) - H(a,b). The estimate is
    clamped at zero. A constant (zero-range) input is degenerate and
    yields exactly 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"series must be 1-D with equal length, got {a.shape} and {b.shape}")
    if a.size < 2 * bins:
        raise ValueError(f"need at least 2*bins = {2 * bins} samples, got {a.size}")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    joint, _, _ = np.histogram2d(a, b, bins=bins)
    n = a.size
    h_a = _entropy_bits_from_counts(joint.sum(axis=1), n)
    h_b = _entropy_bits_from_counts(joint.sum(axis=0), n)
    h_ab = _entropy_bits_from_counts(joint, n)
    return max(h_a + h_b - h_ab, 0.0)


@dataclass(frozen=True)
class MIProfile:
    """Average mutual information per lag along one grid axis.

    zero_bits holds the lag-0 value of the profile, i.e. the average
    binned entropy of the lines (MI of a series with itself). It serves
    as the left neighbour of lag 1 in minimum detection, so a profile
    whose true first minimum sits at lag 1 is detectable.
    """

    lags: np.ndarray
    mi_bits: np.ndarray
    axis: str
    degenerate: np.ndarray  # True where every line had zero range
    zero_bits: float | None = None

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.int64)
        mi = np.asarray(self.mi_bits, dtype=np.float64)
        deg = np.asarray(self.degenerate, dtype=bool)
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if lags.size == 0 or lags[0] != 1 or np.any(np.diff(lags) <= 0):
            raise ValueError("lags must increase strictly from 1")
        if lags.shape != mi.shape or lags.shape != deg.shape:
            raise ValueError("profile arrays must share one shape")
        if np.any(mi < 0):
            raise ValueError("mutual information must be nonnegative")
        if self.zero_bits is not None and not self.zero_bits >= 0:
            raise ValueError(f"zero_bits must be >= 0, got {self.zero_bits}")
        for name, arr in (("lags", lags), ("mi_bits", mi), ("degenerate", deg)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _axis_lines(grid: SpatioTemporalGrid, axis: str) -> np.ndarray:
    """Lines along an axis as rows: time series per site, or row profiles."""
    if axis == "temporal":
        return grid.values.T
    if axis == "spatial":
        return grid.values
    raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def _mi_profile(grid: SpatioTemporalGrid, axis: str, max_lag: int,
                bins: int) -> MIProfile:
    lines = _axis_lines(grid, axis)
    length = lines.shape[1]
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if not max_lag < length / 2:
        raise ValueError(
            f"max_lag must be < half the {axis} extent ({length}), got {max_lag}"
        )
    lags = np.arange(1, max_lag + 1)
    mi = np.zeros(max_lag)
    degenerate = np.zeros(max_lag, dtype=bool)
    # Constant lines carry no information at any lag; they are excluded
    # from the average rather than diluting it with zeros.
    active = [line for line in lines if np.ptp(line) > 0]
    if not active:
        return MIProfile(lags, mi, axis, np.ones(max_lag, dtype=bool),
                         zero_bits=0.0)
    for i, lag in enumerate(lags):
        values = [mutual_information(line[:-lag], line[lag:], bins) for line in active]
        mi[i] = float(np.mean(values))
    # Lag 0 of this profile: MI of a line with itself is its entropy.
    zero = float(np.mean([binned_entropy(line, bins) for line in active]))
    return MIProfile(lags, mi, axis, degenerate, zero_bits=zero)


def temporal_mi_profile(grid: SpatioTemporalGrid, max_lag: int,
                        bins: int = 16) -> MIProfile:
    """Average over sites of MI between a site's series and its lagged copy."""
    return _mi_profile(grid, "temporal", max_lag, bins)


def spatial_mi_profile(grid: SpatioTemporalGrid, max_lag: int,
                       bins: int = 16) -> MIProfile:
    """Average over rows of MI between a row and its spatially shifted copy."""
    return _mi_profile(grid, "spatial", max_lag, bins)


def first_minimum(profile: MIProfile, plateau_drop: float = 0.5,
                  plateau_window: int = 3, smooth_window: int = 1) -> int:
    """First minimum of an MI profile, with a plateau fallback.

    Returns the smallest lag that is a strict interior local minimum of
    the profile. The lag-0 value carried by the profile (``zero_bits``,
    the average line entropy) acts as the left neighbour of lag 1, so a
    minimum at lag 1 counts as interior. If no minimum exists, falls
    back to the smallest lag whose MI has dropped to ``plateau_drop`` of
    the lag-1 value and changes by less than 5% over the following
    ``plateau_window`` lags. ``smooth_window`` > 1 applies a moving
    average before either rule, for noisy profiles.
    """
    mi = np.asarray(profile.mi_bits, dtype=np.float64)
    lags = profile.lags
    if smooth_window > 1:
        mi = uniform_filter1d(mi, size=smooth_window, mode="nearest")
    if profile.zero_bits is not None:
        # Anchor after smoothing: the entropy is exact, not noisy.
        scan = np.concatenate([[profile.zero_bits], mi])
        offset = 0
    else:
        scan = mi
        offset = 1
    for i in range(1, scan.size - 1):
        if scan[i - 1] > scan[i] < scan[i + 1]:
            return int(lags[i - 1 + offset])
    for i in range(mi.size - plateau_window):
        if mi[i] > plateau_drop * mi[0]:
            continue
        ref = max(abs(mi[i]), 1e-300)
        ahead = mi[i + 1:i + 1 + plateau_window]
        if np.all(np.abs(ahead - mi[i]) / ref < 0.05):
            return int(lags[i])
    raise SelectionError(
        f"no {profile.axis} minimum or plateau within max lag {int(lags[-1])}; "
        "widen the lag range"
    )


# ---------------------------------------------------------------------------
# False nearest neighbours
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FNNProfile:
    """Fraction of false nearest neighbours per embedding dimension."""

    dims: np.ndarray
    false_fraction: np.ndarray
    axis: str
    degenerate: bool = False

    def __post_init__(self):
        dims = np.asarray(self.dims, dtype=np.int64)
        frac = np.asarray(self.false_fraction, dtype=np.float64)
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if dims.size == 0 or dims[0] != 1 or np.any(np.diff(dims) != 1):
            raise ValueError("dims must increase by 1 from 1")
        if dims.shape != frac.shape:
            raise ValueError("profile arrays must share one shape")
        if np.any((frac < 0) | (frac > 1)):
            raise ValueError("false_fraction must lie in [0, 1]")
        for name, arr in (("dims", dims), ("false_fraction", frac)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _line_false_fraction(series: np.ndarray, lag: int, dim: int,
                         r_tol: float, a_tol: float) -> float:
    """Kennel false-neighbour fraction for one series at one dimension."""
    count = series.size - dim * lag
    vectors = np.column_stack([series[j * lag:j * lag + count] for j in range(dim)])
    ahead = series[dim * lag:dim * lag + count]
    dist, index = cKDTree(vectors).query(vectors, k=2)
    neighbour = index[:, 1]
    dist = dist[:, 1]
    next_diff = np.abs(ahead - ahead[neighbour])
    sigma = series.std()
    # Criterion 1: the extra coordinate stretches the pair by > r_tol.
    # Criterion 2: the stretched pair is no longer small on the attractor.
    false = (next_diff > r_tol * dist) | (
        np.sqrt(dist ** 2 + next_diff ** 2) > a_tol * sigma
    )
    return float(np.mean(false))


def false_nearest_neighbors(grid: SpatioTemporalGrid, axis: str, lag: int,
                            max_dim: int = 8, r_tol: float = 15.0,
                            a_tol: float = 2.0) -> FNNProfile:
    """False-nearest-neighbour fractions along one grid axis.

    Each line along the axis is delay-embedded with the given lag at
    dimensions 1..max_dim; a neighbour is false when adding the next
    coordinate stretches the pair beyond r_tol times its distance, or
    beyond a_tol times the line's standard deviation. Fractions are
    averaged over all non-constant lines.
    """
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    if max_dim < 1:
        raise ValueError(f"max_dim must be >= 1, got {max_dim}")
    lines = _axis_lines(grid, axis)
    length = lines.shape[1]
    if length - max_dim * lag < 2:
        raise ValueError(
            f"need at least max_dim*lag + 2 = {max_dim * lag + 2} samples "
            f"along the {axis} axis, got {length}"
        )
    dims = np.arange(1, max_dim + 1)
    active = [line for line in lines if np.ptp(line) > 0]
    if not active:
        return FNNProfile(dims, np.zeros(max_dim), axis, degenerate=True)
    fractions = np.empty(max_dim)
    for i, dim in enumerate(dims):
        fractions[i] = np.mean(
            [_line_false_fraction(line, lag, int(dim), r_tol, a_tol) for line in active]
        )
    return FNNProfile(dims, fractions, axis, degenerate=False)


def embedding_dimension(profile: FNNProfile, threshold: float = 0.01,
                        on_miss: str = "error") -> int:
    """Smallest dimension whose false-neighbour fraction is below threshold.

    Short or noisy lines leave a residual fraction that never reaches the
    threshold. ``on_miss`` controls that case: "error" raises, "minimum"
    returns the dimension with the smallest fraction (the unfolding has
    saturated there even if the floor stays above the threshold).
    """
    below = np.nonzero(profile.false_fraction < threshold)[0]
    if below.size > 0:
        return int(profile.dims[below[0]])
    if on_miss == "minimum":
        return int(profile.dims[np.argmin(profile.false_fraction)])
    if on_miss == "error":
        raise SelectionError(
            f"{profile.axis} false-neighbour fraction never fell below "
            f"{threshold} up to dimension {int(profile.dims[-1])}; raise max_dim"
        )
    raise ValueError(f"on_miss must be 'error' or 'minimum', got {on_miss!r}")


# ---------------------------------------------------------------------------
# Selection pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionConfig:
    """Knobs for the lag / dimension selection pipeline.

    ``bins`` and ``smooth_window`` shape the temporal MI profile. The
    spatial axis is usually much shorter than the temporal one, so it
    gets its own ``spatial_bins`` / ``spatial_smooth_window`` (defaulting
    to the temporal values when unset): long series support fine
    histograms and benefit from smoothing, short rows need coarse
    histograms and none.
    """

    bins: int = 16
    spatial_bins: int | None = None
    max_temporal_lag: int | None = None
    max_spatial_lag: int | None = None
    max_dim: int = 8
    r_tol: float = 15.0
    a_tol: float = 2.0
    fnn_threshold: float = 0.01
    plateau_drop: float = 0.5
    plateau_window: int = 3
    smooth_window: int = 1
    spatial_smooth_window: int | None = None

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if self.spatial_bins is not None and self.spatial_bins < 2:
            raise ValueError(f"spatial_bins must be >= 2, got {self.spatial_bins}")
        if not 0 < self.plateau_drop <= 1:
            raise ValueError(f"plateau_drop must be in (0, 1], got {self.plateau_drop}")
        if self.plateau_window < 1:
            raise ValueError(f"plateau_window must be >= 1, got {self.plateau_window}")
        if self.smooth_window < 1:
            raise ValueError(f"smooth_window must be >= 1, got {self.smooth_window}")
        if self.spatial_smooth_window is not None and self.spatial_smooth_window < 1:
            raise ValueError(
                f"spatial_smooth_window must be >= 1, got {self.spatial_smooth_window}")
        if not 0 < self.fnn_threshold < 1:
            raise ValueError(f"fnn_threshold must be in (0, 1), got {self.fnn_threshold}")


@dataclass(frozen=True)
class SelectionResult:
    """Selected stencil parameters plus the profiles they came from."""

    params: FeatureParams
    temporal_mi: MIProfile
    spatial_mi: MIProfile
    temporal_fnn: FNNProfile
    spatial_fnn: FNNProfile


def select_features(grid: SpatioTemporalGrid,
                    config: SelectionConfig = SelectionConfig()) -> SelectionResult:
    """Select (I, J, K, L) from training data.

    L and K are the first minima of the temporal and spatial MI profiles.
    The temporal embedding dimension d found by the false-neighbour test
    gives J = d - 1 (current row plus J past copies); the spatial test
    gives I = ceil((d - 1)/2) (2I+1 sites centred on the target). When a
    false-neighbour fraction never crosses the threshold, the dimension
    with the smallest fraction is used instead.
    """
    n, m = grid.shape
    s_bins = config.spatial_bins if config.spatial_bins is not None else config.bins
    s_smooth = (config.spatial_smooth_window
                if config.spatial_smooth_window is not None
                else config.smooth_window)
    # MI at lag ell sees extent - ell samples per line and needs 2*bins of
    # them, so the scan range is capped accordingly.
    max_t = config.max_temporal_lag
    if max_t is None:
        max_t = min(64, (n - 1) // 2)
    max_t = min(max_t, n - 2 * config.bins)
    max_s = config.max_spatial_lag
    if max_s is None:
        max_s = min(16, (m - 1) // 2)
    max_s = min(max_s, m - 2 * s_bins)
    if max_t < 1 or max_s < 1:
        raise SelectionError(
            f"grid of shape {grid.shape} is too small to scan lags with "
            f"{config.bins} histogram bins"
        )

    temporal_mi = temporal_mi_profile(grid, max_t, config.bins)
    lag_l = first_minimum(temporal_mi, config.plateau_drop,
                          config.plateau_window, config.smooth_window)
    spatial_mi = spatial_mi_profile(grid, max_s, s_bins)
    lag_k = first_minimum(spatial_mi, config.plateau_drop,
                          config.plateau_window, s_smooth)

    max_dim_t = min(config.max_dim, (n - 2) // lag_l)
    max_dim_s = min(config.max_dim, (m - 2) // lag_k)
    if max_dim_t < 1 or max_dim_s < 1:
        raise SelectionError("grid too small for the false-neighbour test")
    temporal_fnn = false_nearest_neighbors(
        grid, "temporal", lag_l, max_dim_t, config.r_tol, config.a_tol)
    spatial_fnn = false_nearest_neighbors(
        grid, "spatial", lag_k, max_dim_s, config.r_tol, config.a_tol)

    depth_j = embedding_dimension(temporal_fnn, config.fnn_threshold,
                                  on_miss="minimum") - 1
    halfwidth_i = math.ceil(
        (embedding_dimension(spatial_fnn, config.fnn_threshold,
                             on_miss="minimum") - 1) / 2
    )
    params = FeatureParams(halfwidth_i, depth_j, lag_k, lag_l)
    return SelectionResult(params, temporal_mi, spatial_mi,
                           temporal_fnn, spatial_fnn)


# ---------------------------------------------------------------------------
# Pattern construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeaturePattern:
    """One (input stencil, next-step target) training pair."""

    input: np.ndarray
    target: float
    origin: tuple[int, int]  # (n, m), 0-based indices of the stencil centre


@dataclass(frozen=True)
class PatternSet:
    """Dense collection of feature patterns, time-major then site order."""

    inputs: np.ndarray    # (count, input_dim)
    targets: np.ndarray   # (count,)
    origins: np.ndarray   # (count, 2), rows (n, m)
    params: FeatureParams
    boundary: str

    def __post_init__(self):
        for name in ("inputs", "targets", "origins"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, index: int) -> FeaturePattern:
        n, m = self.origins[index]
        return FeaturePattern(self.inputs[index], float(self.targets[index]),
                              (int(n), int(m)))


def _site_columns(m_sites: int, halfwidth: int, spatial_lag: int,
                  boundary: str) -> tuple[np.ndarray, np.ndarray]:
    """Stencil column indices (offset x site) and the admissible-site mask."""
    if boundary not in BOUNDARY_POLICIES:
        raise ValueError(f"boundary must be one of {BOUNDARY_POLICIES}, got {boundary!r}")
    sites = np.arange(m_sites)
    offsets = np.arange(-halfwidth, halfwidth + 1) * spatial_lag
    columns = offsets[:, None] + sites[None, :]
    if boundary == "wrap":
        columns = np.mod(columns, m_sites)
        mask = np.ones(m_sites, dtype=bool)
    elif boundary == "clamp":
        columns = np.clip(columns, 0, m_sites - 1)
        mask = np.ones(m_sites, dtype=bool)
    else:  # skip
        mask = (columns >= 0).all(axis=0) & (columns <= m_sites - 1).all(axis=0)
        columns = np.clip(columns, 0, m_sites - 1)
    return columns, mask


def stencil_inputs(values: np.ndarray, n: int, params: FeatureParams,
                   boundary: str) -> tuple[np.ndarray, np.ndarray]:
    """Input vectors for every site at time row ``n``.

    Returns (inputs, mask): inputs has shape (M, (2I+1)(J+1)) with layout
    input[j*(2I+1) + (i+I)] = s[n - j*L, m + i*K]; mask marks sites whose
    stencil stays inside the grid under the boundary policy.
    """
    i_w, j_d, k_lag, l_lag = (params.spatial_halfwidth, params.temporal_depth,
                              params.spatial_lag, params.temporal_lag)
    if n - j_d * l_lag < 0:
        raise ValueError(f"row {n} has fewer than J*L = {j_d * l_lag} rows above it")
    m_sites = values.shape[1]
    columns, mask = _site_columns(m_sites, i_w, k_lag, boundary)
    width = 2 * i_w + 1
    inputs = np.empty((m_sites, width * (j_d + 1)))
    for j in range(j_d + 1):
        block = values[n - j * l_lag][columns]      # (width, M)
        inputs[:, j * width:(j + 1) * width] = block.T
    return inputs, mask


def build_patterns(grid: SpatioTemporalGrid, params: FeatureParams,
                   boundary: str = "wrap") -> PatternSet:
    """All (stencil, next value) pairs a grid admits for given parameters.

    Rows n = J*L .. N-2 contribute patterns (each needs J*L rows of
    history and one future row for the target); under the skip policy only
    sites whose stencil stays inside the grid do.
    """
    values = grid.values
    n_steps, m_sites = values.shape
    depth = params.temporal_depth * params.temporal_lag
    if depth + 1 > n_steps - 1:
        raise ValueError(
            f"J*L + 1 = {depth + 1} must be <= N - 1 = {n_steps - 1}; "
            "grid too short for these parameters"
        )
    _, mask = _site_columns(m_sites, params.spatial_halfwidth,
                            params.spatial_lag, boundary)
    sites = np.nonzero(mask)[0]
    if sites.size == 0:
        raise ValueError(
            "no admissible site: spatial stencil halfwidth "
            f"{params.spatial_halfwidth * params.spatial_lag} exceeds the grid "
            f"width {m_sites} under the skip policy"
        )
    rows = np.arange(depth, n_steps - 1)
    inputs = np.empty((rows.size, sites.size, params.input_dim))
    for r, n in enumerate(rows):
        full, _ = stencil_inputs(values, int(n), params, boundary)
        inputs[r] = full[sites]
    targets = values[rows + 1][:, sites]
    origins = np.stack(np.broadcast_arrays(rows[:, None], sites[None, :]), axis=-1)
    return PatternSet(
        inputs.reshape(-1, params.input_dim),
        targets.reshape(-1),
        origins.reshape(-1, 2),
        params,
        boundary,
    )
