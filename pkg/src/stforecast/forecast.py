"""Closed-loop multi-step forecasting from a trained network.

The forecast is iterated: each new time slice is predicted for all sites
at once from a rolling buffer holding the last J*L+1 known rows, then
appended to the buffer so later steps feed on earlier predictions. The
test data is never consulted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import BOUNDARY_POLICIES, FeatureParams, stencil_inputs
from .grid import SpatioTemporalGrid
from .network import Network, forward_batch


@dataclass(frozen=True)
class ForecastResult:
    """Predicted grid (None when horizon is 0) plus the run's settings."""

    predicted: SpatioTemporalGrid | None
    horizon: int
    params: FeatureParams
    boundary: str


def forecast(net: Network, train_tail: SpatioTemporalGrid,
             params: FeatureParams, horizon: int,
             boundary: str = "wrap") -> ForecastResult:
    """Roll the network forward ``horizon`` steps past the training data.

    ``train_tail`` must hold at least J*L+1 rows and be normalized the
    same way the training patterns were. Under the skip policy, edge sites
    whose stencil would leave the grid are filled with their previous
    value (persistence). The predicted grid has shape horizon x M.
    """
    if boundary not in BOUNDARY_POLICIES:
        raise ValueError(f"boundary must be one of {BOUNDARY_POLICIES}, got {boundary!r}")
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if net.input_dim != params.input_dim:
        raise ValueError(
            f"network input_dim {net.input_dim} does not match "
            f"stencil dimension {params.input_dim}"
        )
    depth = params.temporal_depth * params.temporal_lag
    if train_tail.n_steps < depth + 1:
        raise ValueError(
            f"train_tail has {train_tail.n_steps} rows, stencil needs J*L+1 = {depth + 1}"
        )
    if horizon == 0:
        return ForecastResult(None, 0, params, boundary)

    m_sites = train_tail.n_sites
    # Rolling buffer: the needed history plus room for one appended row.
    buffer = np.empty((depth + 2, m_sites))
    buffer[:depth + 1] = train_tail.values[train_tail.n_steps - depth - 1:]
    out = np.empty((horizon, m_sites))
    for h in range(horizon):
        inputs, mask = stencil_inputs(buffer[:depth + 1], depth, params, boundary)
        row = forward_batch(net, inputs)
        row[~mask] = buffer[depth, ~mask]
        out[h] = row
        buffer[depth + 1] = row
        buffer[:depth + 1] = buffer[1:]
    predicted = SpatioTemporalGrid(out, train_tail.time_step,
                                   train_tail.space_label)
    return ForecastResult(predicted, horizon, params, boundary)
