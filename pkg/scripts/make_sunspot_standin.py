"""Generate a synthetic stand-in for a latitude-resolved sunspot grid.

The real dataset (monthly sunspot counts binned by solar latitude) is not
redistributable, so the file-backed pipeline is exercised with a synthetic
look-alike instead: two wings of activity that begin each cycle at mid
latitudes and drift toward the equator, modulated by an 11-year amplitude
envelope with cycle-to-cycle variation and multiplicative noise. Only the
gross statistical shape matters; no attempt is made to match any recorded
cycle.

Usage:
    python3 scripts/make_sunspot_standin.py data/sunspot_synthetic.grid
"""

from __future__ import annotations

import argparse

import numpy as np

from stforecast.grid import SpatioTemporalGrid, write_grid

CYCLE_MONTHS = 132            # nominal 11-year activity cycle
LATITUDE_SPAN = 40.0          # wings live within +-40 degrees
WING_START = 28.0             # cycles start near +-28 degrees
WING_END = 6.0                # and end near +-6 degrees
WING_WIDTH = 7.0              # Gaussian half-width of a wing, degrees


def synthesize(steps: int, sites: int, seed: int) -> SpatioTemporalGrid:
    rng = np.random.default_rng(seed)
    latitude = np.linspace(-LATITUDE_SPAN, LATITUDE_SPAN, sites)
    n_cycles = steps // CYCLE_MONTHS + 2
    # Per-cycle peak amplitudes and small period jitter.
    peaks = 90.0 * (0.6 + 0.8 * rng.random(n_cycles))
    starts = CYCLE_MONTHS * np.arange(n_cycles)
    starts = starts + rng.integers(-8, 9, n_cycles)
    starts[0] = min(starts[0], 0)

    values = np.zeros((steps, sites))
    for t in range(steps):
        cycle = int(np.searchsorted(starts, t, side="right")) - 1
        phase = (t - starts[cycle]) / CYCLE_MONTHS
        if phase > 1.0:
            cycle += 1
            phase = max((t - starts[cycle]) / CYCLE_MONTHS, 0.0)
        envelope = peaks[cycle] * np.sin(np.pi * min(phase, 1.0)) ** 2
        centre = WING_START + (WING_END - WING_START) * phase
        wings = (np.exp(-0.5 * ((latitude - centre) / WING_WIDTH) ** 2)
                 + np.exp(-0.5 * ((latitude + centre) / WING_WIDTH) ** 2))
        noise = rng.lognormal(mean=0.0, sigma=0.35, size=sites)
        values[t] = envelope * wings * noise
    # Counts are nonnegative and reported to one decimal.
    values = np.round(np.maximum(values, 0.0), 1)
    return SpatioTemporalGrid(values, time_step=1.0, space_label="latitude")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", help="output grid path")
    parser.add_argument("--steps", type=int, default=1888)
    parser.add_argument("--sites", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    grid = synthesize(args.steps, args.sites, args.seed)
    write_grid(grid, args.out)
    print(f"wrote {grid.n_steps}x{grid.n_sites} grid to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
