"""Embedding-guided feature selection for neural forecasting of
spatiotemporal grids.

The pipeline: simulate or load a grid, split it, pick the input stencil
(I, J, K, L) from mutual-information minima and false-nearest-neighbour
dimensions, train a one-hidden-layer network on stencil/next-value pairs,
roll out a closed-loop forecast, and score it against the test split with
SSIM. Monte Carlo sweeps relate forecast quality to the distance from the
selected stencil.
"""

from .embedding import (FeatureParams, FeaturePattern, FNNProfile, MIProfile,
                        PatternSet, SelectionConfig, SelectionResult,
                        binned_entropy, build_patterns, embedding_dimension,
                        false_nearest_neighbors, first_minimum,
                        mutual_information, select_features,
                        spatial_mi_profile, stencil_inputs,
                        temporal_mi_profile)
from .errors import (ConfigError, DivergenceError, GridFileError,
                     SelectionError)
from .experiment import (SummaryBin, SweepConfig, TrialConfig, TrialRecord,
                         read_records, report, run_sweep, run_trial,
                         sample_stencils, summarize, trial_seed,
                         write_records)
from .forecast import ForecastResult, forecast
from .grid import (Normalizer, SpatioTemporalGrid, SplitGrid, denormalize,
                   normalize, read_grid, split, write_grid)
from .metrics import (SSIMConfig, distance_euclidean, distance_manhattan,
                      ssim)
from .network import (Gradients, Network, NetworkConfig, TrainConfig,
                      TrainResult, backprop_gradients, forward,
                      forward_batch, init_network, learning_rate,
                      load_network, mse, save_network, train)
from .systems import (ETDRK4Coefficients, HenonLatticeConfig, KSConfig,
                      Lorenz96Config, etdrk4_coefficients, etdrk4_step,
                      henon_local_update, lorenz96_rhs, rk4_step,
                      simulate_henon, simulate_ks, simulate_lorenz96)

__version__ = "0.1.0"
