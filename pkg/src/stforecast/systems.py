"""Deterministic generators for three synthetic spatiotemporal systems.

Three classic testbeds for spatiotemporal chaos, each emitted as a
SpatioTemporalGrid:

* a lattice of diffusively coupled Henon maps with pinned boundaries,
* the Lorenz-96 model integrated with classical RK4,
* the Kuramoto-Sivashinsky equation on a periodic domain integrated
  pseudospectrally with ETDRK4.

All generators are pure functions of their config: the same config (and
seed, where one applies) reproduces the same grid bit for bit. Random
initial conditions use numpy's seeded PCG64 generator so grids are
reproducible across platforms.

References
----------
.. [1] E. N. Lorenz, "Predictability: a problem partly solved",
   Proc. ECMWF Seminar on Predictability, 1996.
.. [2] A.-K. Kassam and L. N. Trefethen, "Fourth-order time-stepping for
   stiff PDEs", SIAM J. Sci. Comput. 26 (2005) 1214-1233.
.. [3] S. M. Cox and P. C. Matthews, "Exponential time differencing for
   stiff systems", J. Comput. Phys. 176 (2002) 430-455.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .grid import SpatioTemporalGrid

# Henon map coefficients, fixed by the lattice update rule.
HENON_A = 1.45
HENON_B = 0.3

# Any state exceeding this magnitude is treated as a blown-up trajectory.
DIVERGENCE_LIMIT = 1.0e6


def _check_finite(row: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(row)) or np.max(np.abs(row)) > DIVERGENCE_LIMIT:
        raise DivergenceError("trajectory diverged", step=step)


# ---------------------------------------------------------------------------
# Coupled Henon map lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HenonLatticeConfig:
    """Lattice of coupled Henon maps with fixed (pinned) boundary columns."""

    sites: int
    steps: int
    seed: int
    boundary_value_u: float = 0.5
    boundary_value_v: float = 0.0
    burn_in: int = 0

    def __post_init__(self):
        if self.sites < 3:
            raise ValueError(f"sites must be >= 3, got {self.sites}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")


def henon_local_update(u_left: float, u_center: float, u_right: float,
                       v: float) -> tuple[float, float]:
    """One site of the coupled-Henon update.

    u' = 1 - 1.45 [u/2 + (u_left + u_right)/4]^2 + 0.3 v,  v' = u.
    """
    coupled = 0.5 * u_center + 0.25 * (u_left + u_right)
    return 1.0 - HENON_A * coupled * coupled + HENON_B * v, u_center


def simulate_henon(config: HenonLatticeConfig) -> SpatioTemporalGrid:
    """Simulate the coupled Henon lattice, returning the grid of u values.

    Interior sites start from uniform [0, 1) draws; boundary columns are
    pinned to (boundary_value_u, boundary_value_v) at every step, the
    initial one included. Row 0 of the output is the state after burn_in
    updates; each later row advances one map iteration.
    """
    m = config.sites
    rng = np.random.default_rng(config.seed)
    u = rng.uniform(0.0, 1.0, size=m)
    v = np.zeros(m)
    u[0] = u[-1] = config.boundary_value_u
    v[0] = v[-1] = config.boundary_value_v

    def advance(u, v, step):
        coupled = 0.5 * u[1:-1] + 0.25 * (u[:-2] + u[2:])
        u_next = u.copy()
        v_next = v.copy()
        u_next[1:-1] = 1.0 - HENON_A * coupled * coupled + HENON_B * v[1:-1]
        v_next[1:-1] = u[1:-1]
        _check_finite(u_next, step)
        return u_next, v_next

    for step in range(config.burn_in):
        u, v = advance(u, v, step)

    out = np.empty((config.steps, m))
    out[0] = u
    for n in range(1, config.steps):
        u, v = advance(u, v, config.burn_in + n)
        out[n] = u
    return SpatioTemporalGrid(out, time_step=1.0)


# ---------------------------------------------------------------------------
# Lorenz-96
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lorenz96Config:
    """Lorenz-96 model on a ring of sites with constant forcing.

    The initial state is either given explicitly or generated as the
    equilibrium (F, ..., F) plus 0.01 * standard normal perturbations
    drawn from the seeded generator.
    """

    sites: int = 40
    forcing: float = 5.0
    dt: float = 0.05
    steps: int = 1
    seed: int | None = None
    initial_state: tuple[float, ...] | None = None
    burn_in: int = 0

    def __post_init__(self):
        if self.sites < 4:
            raise ValueError(f"sites must be >= 4, got {self.sites}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.initial_state is None and self.seed is None:
            raise ValueError("provide either initial_state or seed")
        if self.initial_state is not None:
            state = tuple(float(x) for x in self.initial_state)
            if len(state) != self.sites:
                raise ValueError(
                    f"initial_state has {len(state)} entries, expected {self.sites}"
                )
            object.__setattr__(self, "initial_state", state)


def lorenz96_rhs(state: np.ndarray, forcing: float) -> np.ndarray:
    """Cyclic Lorenz-96 tendency (x_{j+1} - x_{j-2}) x_{j-1} - x_j + F."""
    x = np.asarray(state, dtype=np.float64)
    if x.size < 4:
        raise ValueError(f"state needs >= 4 sites, got {x.size}")
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + forcing


def rk4_step(rhs, state: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of x' = rhs(x)."""
    k1 = rhs(state)
    k2 = rhs(state + 0.5 * dt * k1)
    k3 = rhs(state + 0.5 * dt * k2)
    k4 = rhs(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate_lorenz96(config: Lorenz96Config) -> SpatioTemporalGrid:
    """Integrate Lorenz-96 with RK4, recording one row per time step."""
    if config.initial_state is not None:
        x = np.array(config.initial_state, dtype=np.float64)
    else:
        rng = np.random.default_rng(config.seed)
        x = config.forcing + 0.01 * rng.standard_normal(config.sites)

    def rhs(state):
        return lorenz96_rhs(state, config.forcing)

    for step in range(config.burn_in):
        x = rk4_step(rhs, x, config.dt)
        _check_finite(x, step)

    out = np.empty((config.steps, config.sites))
    out[0] = x
    for n in range(1, config.steps):
        x = rk4_step(rhs, x, config.dt)
        _check_finite(x, config.burn_in + n)
        out[n] = x
    return SpatioTemporalGrid(out, time_step=config.dt)


# ---------------------------------------------------------------------------
# Kuramoto-Sivashinsky
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KSConfig:
    """Kuramoto-Sivashinsky equation u_t = -u u_x - u_xx - u_xxxx, periodic.

    ``domain_length`` is the spatial period and ``modes`` the number of
    collocation points. The default initial profile is u = 1e-5 on
    x in [5, 15] and zero elsewhere; an explicit profile overrides it.
    ``include_nonlinear=False`` integrates only the linear part, which has
    the exact single-mode solution exp((k^2 - k^4) t).
    """

    domain_length: float = 22.0
    dt: float = 0.5
    modes: int = 64
    steps: int = 1
    initial_profile: tuple[float, ...] | None = None
    burn_in: int = 0
    include_nonlinear: bool = True

    def __post_init__(self):
        if not self.domain_length > 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.modes < 16 or self.modes % 2 != 0:
            raise ValueError(f"modes must be even and >= 16, got {self.modes}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.initial_profile is not None:
            profile = tuple(float(x) for x in self.initial_profile)
            if len(profile) != self.modes:
                raise ValueError(
                    f"initial_profile has {len(profile)} entries, expected {self.modes}"
                )
            object.__setattr__(self, "initial_profile", profile)

    def collocation_points(self) -> np.ndarray:
        return self.domain_length * np.arange(self.modes) / self.modes


@dataclass(frozen=True)
class ETDRK4Coefficients:
    """Precomputed ETDRK4 update coefficients for a diagonal linear operator.

    The phi-function coefficients are evaluated by averaging over a contour
    of points around each eigenvalue of dt*linear, which sidesteps the
    cancellation that direct formulas suffer for small |dt*linear|
    (Kassam & Trefethen 2005).
    """

    dt: float
    modes: int
    wavenumbers: np.ndarray   # k for each rfft mode
    deriv: np.ndarray         # ik with the Nyquist entry zeroed
    dealias: np.ndarray       # 2/3-rule mask applied to the nonlinear product
    exp_full: np.ndarray      # exp(dt * linear)
    exp_half: np.ndarray      # exp(dt * linear / 2)
    f0: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray

    def __post_init__(self):
        for name in ("wavenumbers", "deriv", "dealias", "exp_full",
                     "exp_half", "f0", "f1", "f2", "f3"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def etdrk4_coefficients(modes: int, domain_length: float, dt: float,
                        contour_points: int = 16) -> ETDRK4Coefficients:
    """Precompute ETDRK4 coefficients for the KS linear operator k^2 - k^4."""
    k = 2.0 * np.pi * np.fft.rfftfreq(modes, d=domain_length / modes)
    lin = k ** 2 - k ** 4

    # ik for the spectral derivative; zero the Nyquist mode of odd
    # derivatives on even-length real transforms.
    deriv = 1j * k.copy()
    if modes % 2 == 0:
        deriv[-1] = 0.0

    idx = np.arange(modes // 2 + 1)
    dealias = (idx <= modes // 3).astype(np.float64)

    roots = np.exp(1j * np.pi * (np.arange(contour_points) + 0.5) / contour_points)
    lr = dt * lin[:, None] + roots[None, :]
    exp_lr = np.exp(lr)
    f0 = dt * ((np.expm1(lr / 2.0) / lr).mean(axis=1)).real
    f1 = dt * (((-4.0 - lr + exp_lr * (4.0 - 3.0 * lr + lr ** 2)) / lr ** 3).mean(axis=1)).real
    f2 = dt * (((2.0 + lr + exp_lr * (lr - 2.0)) / lr ** 3).mean(axis=1)).real
    f3 = dt * (((-4.0 - 3.0 * lr - lr ** 2 + exp_lr * (4.0 - lr)) / lr ** 3).mean(axis=1)).real

    return ETDRK4Coefficients(
        dt=dt, modes=modes, wavenumbers=k, deriv=deriv, dealias=dealias,
        exp_full=np.exp(dt * lin), exp_half=np.exp(0.5 * dt * lin),
        f0=f0, f1=f1, f2=f2, f3=f3,
    )


def _ks_nonlinear(v: np.ndarray, coef: ETDRK4Coefficients) -> np.ndarray:
    """Pseudospectral -u u_x = -(1/2) d(u^2)/dx with 2/3 dealiasing."""
    u = np.fft.irfft(v, n=coef.modes)
    return -0.5 * coef.deriv * (coef.dealias * np.fft.rfft(u * u))


def etdrk4_step(v: np.ndarray, coef: ETDRK4Coefficients,
                include_nonlinear: bool = True) -> np.ndarray:
    """Advance one ETDRK4 step in rfft space."""
    if not include_nonlinear:
        return coef.exp_full * v
    n0 = _ks_nonlinear(v, coef)
    a = coef.exp_half * v + coef.f0 * n0
    na = _ks_nonlinear(a, coef)
    b = coef.exp_half * v + coef.f0 * na
    nb = _ks_nonlinear(b, coef)
    c = coef.exp_half * a + coef.f0 * (2.0 * nb - n0)
    nc = _ks_nonlinear(c, coef)
    return coef.exp_full * v + coef.f1 * n0 + 2.0 * coef.f2 * (na + nb) + coef.f3 * nc


def simulate_ks(config: KSConfig) -> SpatioTemporalGrid:
    """Integrate KS with ETDRK4, recording real-space collocation values."""
    if config.initial_profile is not None:
        u0 = np.array(config.initial_profile, dtype=np.float64)
    else:
        x = config.collocation_points()
        u0 = np.where((x >= 5.0) & (x <= 15.0), 1.0e-5, 0.0)

    coef = etdrk4_coefficients(config.modes, config.domain_length, config.dt)
    v = np.fft.rfft(u0)

    for step in range(config.burn_in):
        v = etdrk4_step(v, coef, config.include_nonlinear)

    out = np.empty((config.steps, config.modes))
    out[0] = np.fft.irfft(v, n=config.modes)
    _check_finite(out[0], config.burn_in)
    for n in range(1, config.steps):
        v = etdrk4_step(v, coef, config.include_nonlinear)
        out[n] = np.fft.irfft(v, n=config.modes)
        _check_finite(out[n], config.burn_in + n)
    return SpatioTemporalGrid(out, time_step=config.dt)
