"""One-hidden-layer feedforward network trained by stochastic backprop.

The model is y = act(b2 + w2 . act(b1 + W1 x)) with the same activation on
the hidden layer and the output. Training performs single-sample
stochastic gradient descent with classical momentum and the hyperbolic
learning-rate decay eta_n = eta / (1 + n/10000).

The update loop is compiled with numba when available (pure-python
fallback otherwise, same semantics); sample indices are pregenerated from
a seeded PCG64 stream so training is reproducible either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorate(func):
            return func

        return decorate

ACTIVATIONS = ("relu", "logistic")
LR_DECAY_STEPS = 10000.0
TRACE_EVERY = 1000


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and initialization of the network.

    Weights start uniform on alpha_rng * [beta_rng, beta_rng+1), i.e.
    beta_rng centres the distribution (in units of alpha_rng) and
    alpha_rng sets its width; beta_rng = -0.5 gives weights symmetric
    about zero. Biases start uniform on [0, alpha_rng). Keeping the
    biases non-negative matters for relu: the data fed to the network is
    normalized to be non-negative, so with near-zero weights a negative
    output bias would put the output unit on the flat side of relu for
    every pattern and no gradient could ever reach the weights.
    """

    input_dim: int
    hidden_units: int
    activation: str = "relu"
    alpha_rng: float = 1.0e-3
    beta_rng: float = -0.5
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.hidden_units < 1:
            raise ValueError(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )


@dataclass(frozen=True)
class Network:
    """Immutable weights of a trained or freshly initialized network."""

    w1: np.ndarray        # (hidden, input_dim)
    b1: np.ndarray        # (hidden,)
    w2: np.ndarray        # (hidden,)
    b2: float
    activation: str

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=np.float64, copy=True)
        b1 = np.array(self.b1, dtype=np.float64, copy=True)
        w2 = np.array(self.w2, dtype=np.float64, copy=True)
        if w1.ndim != 2 or b1.ndim != 1 or w2.ndim != 1:
            raise ValueError("w1 must be 2-D, b1 and w2 1-D")
        hidden = w1.shape[0]
        if b1.shape[0] != hidden or w2.shape[0] != hidden:
            raise ValueError(
                f"inconsistent hidden sizes: w1 {w1.shape}, b1 {b1.shape}, w2 {w2.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )
        arrays = {"w1": w1, "b1": b1, "w2": w2}
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not math.isfinite(self.b2):
            raise ValueError("b2 must be finite")
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_units(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Stochastic gradient descent hyperparameters.

    error_clip, when set, caps the prediction error entering the
    backward pass at +-error_clip (the robust-regression trick of
    switching from squared to absolute loss on large residuals). It
    tames the violent early steps single-sample SGD can take at high
    learning rates on poorly scaled data. The clip only affects
    updates; reported losses are true squared errors. The sensible
    value is scale dependent, so there is no default.
    """

    eta: float
    momentum: float = 0.0
    n_steps: int = 1
    seed: int = 0
    batch_size: int = 1
    error_clip: float | None = None

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.error_clip is not None and not self.error_clip > 0:
            raise ValueError(
                f"error_clip must be positive or None, got {self.error_clip}"
            )


@dataclass(frozen=True)
class TrainResult:
    """Trained network plus a subsampled loss trace and the final MSE."""

    network: Network
    trace_steps: np.ndarray   # update indices, every TRACE_EVERY steps
    trace_loss: np.ndarray    # per-sample squared error at those steps
    final_mse: float


def learning_rate(eta: float, step: int) -> float:
    """Learning rate at update ``step``: eta / (1 + step/10000)."""
    return eta / (1.0 + step / LR_DECAY_STEPS)


def init_network(config: NetworkConfig) -> Network:
    """Draw weights uniform on alpha_rng*[beta_rng, beta_rng+1), biases on [0, alpha_rng).

    Draw order is w1 (row-major), b1, w2, b2 from a single PCG64 stream,
    so identical configs give identical networks.
    """
    rng = np.random.default_rng(config.seed)
    lo = config.alpha_rng * config.beta_rng

    def weights(*shape):
        return lo + config.alpha_rng * rng.random(shape)

    def biases(*shape):
        return config.alpha_rng * rng.random(shape)

    return Network(
        w1=weights(config.hidden_units, config.input_dim),
        b1=biases(config.hidden_units),
        w2=weights(config.hidden_units),
        b2=float(biases()),
        activation=config.activation,
    )


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act_deriv(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        # Subgradient at 0 is defined as 0.
        return (z > 0).astype(np.float64)
    s = _act(z, activation)
    return s * (1.0 - s)


def forward(net: Network, x: np.ndarray) -> float:
    """Network output for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    return float(forward_batch(net, x[None, :])[0])


def forward_batch(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Network outputs for a (count, input_dim) matrix of inputs."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != net.input_dim:
        raise ValueError(
            f"inputs have shape {inputs.shape}, expected (*, {net.input_dim})"
        )
    hidden = _act(net.b1 + inputs @ net.w1.T, net.activation)
    return _act(net.b2 + hidden @ net.w2, net.activation)


def mse(net: Network, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error of the network over a pattern set."""
    residual = np.asarray(targets, dtype=np.float64) - forward_batch(net, inputs)
    return float(np.mean(residual ** 2))


@dataclass(frozen=True)
class Gradients:
    """Gradients of the squared error w.r.t. every weight and bias."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float


def backprop_gradients(net: Network, x: np.ndarray, target: float) -> Gradients:
    """Exact gradients of (target - forward(net, x))^2."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    z1 = net.b1 + net.w1 @ x
    hidden = _act(z1, net.activation)
    z2 = np.atleast_1d(net.b2 + net.w2 @ hidden)
    output = float(_act(z2, net.activation)[0])
    # dL/dz2 for L = (t - yhat)^2
    delta2 = -2.0 * (target - output) * float(_act_deriv(z2, net.activation)[0])
    delta1 = delta2 * net.w2 * _act_deriv(z1, net.activation)
    return Gradients(
        w1=np.outer(delta1, x),
        b1=delta1,
        w2=delta2 * hidden,
        b2=delta2,
    )


@njit(cache=True)
def _train_loop(w1, b1, w2, b2_box, inputs, targets, sample_idx, relu,
                eta, momentum, batch_size, error_clip, trace_loss):
    hidden, input_dim = w1.shape
    n_updates = sample_idx.shape[0] // batch_size
    vw1 = np.zeros((hidden, input_dim))
    vb1 = np.zeros(hidden)
    vw2 = np.zeros(hidden)
    vb2 = 0.0
    z1 = np.zeros(hidden)
    h = np.zeros(hidden)
    dact1 = np.zeros(hidden)
    gw1 = np.zeros((hidden, input_dim))
    gb1 = np.zeros(hidden)
    gw2 = np.zeros(hidden)
    b2 = b2_box[0]

    for n in range(n_updates):
        gw1[:, :] = 0.0
        gb1[:] = 0.0
        gw2[:] = 0.0
        gb2 = 0.0
        loss = 0.0
        for s in range(batch_size):
            p = sample_idx[n * batch_size + s]
            x = inputs[p]
            for i in range(hidden):
                acc = b1[i]
                for j in range(input_dim):
                    acc += w1[i, j] * x[j]
                z1[i] = acc
                if relu:
                    h[i] = acc if acc > 0.0 else 0.0
                    dact1[i] = 1.0 if acc > 0.0 else 0.0
                else:
                    if acc >= 0.0:
                        sig = 1.0 / (1.0 + math.exp(-acc))
                    else:
                        ez = math.exp(acc)
                        sig = ez / (1.0 + ez)
                    h[i] = sig
                    dact1[i] = sig * (1.0 - sig)
            z2 = b2
            for i in range(hidden):
                z2 += w2[i] * h[i]
            if relu:
                yhat = z2 if z2 > 0.0 else 0.0
                dact2 = 1.0 if z2 > 0.0 else 0.0
            else:
                if z2 >= 0.0:
                    yhat = 1.0 / (1.0 + math.exp(-z2))
                else:
                    ez = math.exp(z2)
                    yhat = ez / (1.0 + ez)
                dact2 = yhat * (1.0 - yhat)
            err = targets[p] - yhat
            loss += err * err
            if err > error_clip:
                err = error_clip
            elif err < -error_clip:
                err = -error_clip
            delta2 = -2.0 * err * dact2
            gb2 += delta2
            for i in range(hidden):
                gw2[i] += delta2 * h[i]
                d1 = delta2 * w2[i] * dact1[i]
                gb1[i] += d1
                for j in range(input_dim):
                    gw1[i, j] += d1 * x[j]
        loss /= batch_size
        if n % TRACE_EVERY == 0:
            trace_loss[n // TRACE_EVERY] = loss
        if not math.isfinite(loss):
            b2_box[0] = b2
            return n
        eta_n = eta / (1.0 + n / LR_DECAY_STEPS)
        scale = eta_n / batch_size
        vb2 = momentum * vb2 - scale * gb2
        b2 += vb2
        for i in range(hidden):
            vw2[i] = momentum * vw2[i] - scale * gw2[i]
            w2[i] += vw2[i]
            vb1[i] = momentum * vb1[i] - scale * gb1[i]
            b1[i] += vb1[i]
            for j in range(input_dim):
                vw1[i, j] = momentum * vw1[i, j] - scale * gw1[i, j]
                w1[i, j] += vw1[i, j]
    b2_box[0] = b2
    return -1


def train(net: Network, patterns, tcfg: TrainConfig) -> TrainResult:
    """Run stochastic gradient descent with momentum from a starting network.

    ``patterns`` is anything with ``inputs``/``targets`` arrays (a
    PatternSet) or an (inputs, targets) pair. Each update samples
    ``batch_size`` patterns uniformly (seeded), averages their gradients,
    and applies a momentum step with the decayed learning rate. A
    per-sample loss trace is recorded every 1000 updates. The input
    network is not modified.
    """
    if hasattr(patterns, "inputs"):
        inputs, targets = patterns.inputs, patterns.targets
    else:
        inputs, targets = patterns
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or targets.ndim != 1 or inputs.shape[0] != targets.shape[0]:
        raise ValueError(
            f"inputs {inputs.shape} and targets {targets.shape} do not align"
        )
    if inputs.shape[0] == 0:
        raise ValueError("cannot train on an empty pattern set")
    if inputs.shape[1] != net.input_dim:
        raise ValueError(
            f"patterns have dimension {inputs.shape[1]}, network expects {net.input_dim}"
        )

    rng = np.random.default_rng(tcfg.seed)
    sample_idx = rng.integers(0, inputs.shape[0],
                              size=tcfg.n_steps * tcfg.batch_size)
    w1 = net.w1.copy()
    b1 = net.b1.copy()
    w2 = net.w2.copy()
    b2_box = np.array([net.b2])
    n_traces = (tcfg.n_steps - 1) // TRACE_EVERY + 1
    trace_loss = np.full(n_traces, np.nan)

    error_clip = np.inf if tcfg.error_clip is None else tcfg.error_clip
    diverged_at = _train_loop(
        w1, b1, w2, b2_box, inputs, targets, sample_idx,
        net.activation == "relu", tcfg.eta, tcfg.momentum,
        tcfg.batch_size, error_clip, trace_loss,
    )
    if diverged_at >= 0:
        raise DivergenceError("training loss became non-finite", step=int(diverged_at))

    trained = Network(w1, b1, w2, float(b2_box[0]), net.activation)
    trace_steps = np.arange(n_traces) * TRACE_EVERY
    return TrainResult(trained, trace_steps, trace_loss,
                       mse(trained, inputs, targets))


def save_network(net: Network, path) -> None:
    """Write a network as text: header line, then w1 rows, b1, w2, b2.

    All values use 17 significant digits so load_network round-trips
    exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{net.input_dim} {net.hidden_units} {net.activation}\n")
        for row in net.w1:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        fh.write(" ".join(f"{v:.17g}" for v in net.b1) + "\n")
        fh.write(" ".join(f"{v:.17g}" for v in net.w2) + "\n")
        fh.write(f"{net.b2:.17g}\n")


def load_network(path) -> Network:
    """Read a network written by save_network."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty network file: {path}")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"malformed network header: {lines[0]!r}")
    input_dim, hidden = int(header[0]), int(header[1])
    activation = header[2]
    expected = hidden + 3
    if len(lines) != 1 + expected:
        raise ValueError(
            f"network file has {len(lines) - 1} data lines, expected {expected}"
        )
    w1 = np.array([[float(tok) for tok in lines[1 + i].split()]
                   for i in range(hidden)])
    if w1.shape != (hidden, input_dim):
        raise ValueError(f"w1 block has shape {w1.shape}, expected {(hidden, input_dim)}")
    b1 = np.array([float(tok) for tok in lines[1 + hidden].split()])
    w2 = np.array([float(tok) for tok in lines[2 + hidden].split()])
    b2 = float(lines[3 + hidden])
    return Network(w1, b1, w2, b2, activation)
