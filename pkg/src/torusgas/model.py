"""Constitutive laws, dissipation operators, and the semi-discrete system.

The momentum equation is evolved in conservative form,

    d/dt rho = -(rho u)_x
    d/dt m   = -(rho u^2)_x - p(rho)_x + c_nl D_nl + c_loc D_loc + rho f,

with power-law pressure p = c_p rho^gamma and viscosity mu = c_mu rho^alpha.
The two dissipation mechanisms share a transport structure: each admits a
field Q with material derivative D_t Q = -(1/rho) D (note the minus sign:
direct computation gives D_t Q_nl = -L^s(rho u) + u L^s rho), so that
X = u + c_nl Q_nl + c_loc Q_loc satisfies D_t X = -h_x(rho) + f with
h'(r) = p'(r)/r.  The diagnostics module leans on this rewrite.

All nonlinear products are formed in physical space and dealiased with the
two-thirds rule to suppress aliasing-driven spurious entropy production.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral
from .errors import ParameterError, VacuumError
from .spectral import Grid, dealias, derivative, require_finite


@dataclass(frozen=True)
class ModelParams:
    """Constitutive constants and dissipation weights.

    sigma is the derived order of the total dissipation operator: 2 when the
    local channel is active, else the fractional order s.
    """

    c_p: float = 1.0
    gamma: float = 1.0
    c_mu: float = 1.0
    alpha: float = 0.0
    c_nl: float = 0.0
    c_loc: float = 1.0
    s: float = 1.5
    tau: float = 0.0
    rho_bar: float = 1.0
    allow_inviscid: bool = False

    def __post_init__(self):
        if self.c_p < 0:
            raise ParameterError(f"pressure constant must be >= 0, got c_p={self.c_p}")
        if self.gamma <= 0:
            raise ParameterError(f"pressure exponent must be > 0, got gamma={self.gamma}")
        if self.c_mu <= 0:
            raise ParameterError(f"viscosity constant must be > 0, got c_mu={self.c_mu}")
        if self.alpha < 0:
            raise ParameterError(f"viscosity exponent must be >= 0, got alpha={self.alpha}")
        if self.c_nl < 0 or self.c_loc < 0:
            raise ParameterError("dissipation weights c_nl, c_loc must be >= 0")
        if not 0.0 < self.s < 2.0:
            raise ParameterError(f"fractional order must lie in (0, 2), got s={self.s}")
        if not 0.0 <= self.tau < self.s:
            raise ParameterError(f"topological weight must satisfy 0 <= tau < s, got tau={self.tau}")
        if self.rho_bar <= 0:
            raise ParameterError(f"reference density must be > 0, got rho_bar={self.rho_bar}")
        if self.c_nl + self.c_loc <= 0 and not self.allow_inviscid:
            raise ParameterError("no dissipation present (c_nl + c_loc = 0); "
                                 "set allow_inviscid=True to run the inviscid stress test")

    @property
    def sigma(self) -> float:
        return 2.0 if self.c_loc > 0 else self.s


@dataclass
class State:
    """Density/velocity pair at one time instant."""

    grid: Grid
    rho: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def validate(self, vacuum_floor: float = 0.0):
        require_finite(self.rho, "density")
        require_finite(self.u, "velocity")
        mn = float(np.min(self.rho))
        if mn <= vacuum_floor:
            raise VacuumError(
                f"density minimum {mn:.3e} at or below floor {vacuum_floor:.3e}",
                t=self.t, x=float(self.grid.nodes[int(np.argmin(self.rho))]),
            )
        return self

    def mass(self) -> float:
        return spectral.integral(self.grid, self.rho)

    def momentum(self) -> float:
        return spectral.integral(self.grid, self.rho * self.u)


@dataclass
class Tendency:
    """Time derivatives of (rho, m) with m = rho*u the momentum density."""

    d_rho: np.ndarray
    d_m: np.ndarray


# ---------------------------------------------------------------------------
# Constitutive laws


def pressure(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    _require_positive(rho, p.gamma < 1)
    return p.c_p * rho**p.gamma


def pressure_prime(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    _require_positive(rho, p.gamma < 1)
    return p.c_p * p.gamma * rho ** (p.gamma - 1.0)


def viscosity(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    return p.c_mu * rho**p.alpha


def h_prime(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """h'(rho) = p'(rho)/rho, the enthalpy-gradient factor."""
    _require_positive(rho)
    return p.c_p * p.gamma * rho ** (p.gamma - 2.0)


def _require_positive(rho: np.ndarray, needed: bool = True):
    if needed and float(np.min(rho)) <= 0.0:
        raise VacuumError("operation requires strictly positive density")


# ---------------------------------------------------------------------------
# Transported quantities


def q_local(grid: Grid, rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """Q_loc = mu(rho) * rho_x / rho^2."""
    _require_positive(rho)
    return viscosity(rho, p) * derivative(grid, rho, 1) / rho**2


def q_nonlocal(grid: Grid, rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """Q_nl = (d/dx)^-1 L^s rho, fixed to zero mean."""
    lap = spectral.frac_laplacian(grid, rho, p.s)
    return spectral.antiderivative_zero_mean(grid, lap)


def x_variable(state: State, p: ModelParams) -> np.ndarray:
    """X = u + c_nl Q_nl + c_loc Q_loc, the transported velocity surrogate."""
    _require_positive(state.rho)
    x = state.u.copy()
    if p.c_nl > 0:
        x = x + p.c_nl * q_nonlocal(state.grid, state.rho, p)
    if p.c_loc > 0:
        x = x + p.c_loc * q_local(state.grid, state.rho, p)
    return x


MAX_HIERARCHY = 4


@dataclass
class DerivedFields:
    """Bundle of the transport-structure fields derived from one state."""

    q_loc: np.ndarray
    q_nl: np.ndarray
    x_var: np.ndarray
    x_n: list
    h_prime: np.ndarray

    @classmethod
    def from_state(cls, state: State, p: ModelParams, n_max: int = 1) -> "DerivedFields":
        levels = x_hierarchy(state, p, n_max)
        return cls(
            q_loc=q_local(state.grid, state.rho, p),
            q_nl=q_nonlocal(state.grid, state.rho, p),
            x_var=levels[0],
            x_n=levels,
            h_prime=h_prime(state.rho, p),
        )


def x_hierarchy(state: State, p: ModelParams, n_max: int) -> list[np.ndarray]:
    """X_0 = X and X_n = (X_{n-1})_x / rho, up to the cap n_max <= 4.

    Each level spends one derivative and one division by rho, so levels
    beyond the cap are numerically fragile and intentionally rejected.
    """
    if not 0 <= n_max <= MAX_HIERARCHY:
        raise ParameterError(f"hierarchy depth must lie in [0, {MAX_HIERARCHY}], got {n_max}")
    _require_positive(state.rho)
    levels = [x_variable(state, p)]
    for _ in range(n_max):
        levels.append(derivative(state.grid, levels[-1], 1) / state.rho)
    return levels


# ---------------------------------------------------------------------------
# Dissipation operators


def d_local(state: State, p: ModelParams) -> np.ndarray:
    """Divergence-form local dissipation (mu(rho) u_x)_x."""
    _require_positive(state.rho)
    g = state.grid
    return derivative(g, dealias(g, viscosity(state.rho, p) * derivative(g, state.u, 1)), 1)


def d_nonlocal(state: State, p: ModelParams) -> np.ndarray:
    """Commutator-form alignment dissipation rho * [L^s(rho u) - u L^s(rho)]."""
    g = state.grid
    rho, u = state.rho, state.u
    m = dealias(g, rho * u)
    comm = spectral.frac_laplacian(g, m, p.s) - dealias(g, u * spectral.frac_laplacian(g, rho, p.s))
    return dealias(g, rho * comm)


@lru_cache(maxsize=32)
def _deriv_multiplier(n: int) -> np.ndarray:
    ik = 1j * np.arange(n // 2 + 1, dtype=float)
    ik[-1] = 0.0  # Nyquist mode has no well-defined first derivative
    return ik


@lru_cache(maxsize=32)
def _dealias_multiplier(n: int) -> np.ndarray:
    k = np.arange(n // 2 + 1, dtype=float)
    return (k <= n // 3).astype(float)


def rhs(state: State, p: ModelParams, force=None) -> Tendency:
    """Semi-discrete right-hand side in conservative (rho, m) variables.

    ``force`` may be None, a force field sampled on the grid, or any object
    with a ``field(grid, t)`` method (see timestepping.Forcing).

    The body fuses the transform pipeline (each product is dealiased in the
    same pass that differentiates or filters it) but computes exactly the
    composition of the public operators: -(dealias(rho u))_x for the mass
    tendency and flux/pressure-gradient/dissipation/forcing terms for the
    momentum tendency, matching d_local / d_nonlocal bit patterns.
    """
    g = state.grid
    state.validate(vacuum_floor=0.0)
    rho, u = state.rho, state.u
    n = g.n
    ik = _deriv_multiplier(n)
    mask = _dealias_multiplier(n)
    rfft, irfft = np.fft.rfft, np.fft.irfft

    mh = rfft(rho * u) * mask
    m = irfft(mh, n)
    d_rho = -irfft(ik * mh, n)

    d_m = -irfft(ik * (rfft(m * u) * mask), n)
    d_m -= irfft(ik * (rfft(pressure(rho, p)) * mask), n)
    if p.c_nl > 0:
        sym = spectral._frac_multiplier(n, p.s)
        lap_m = irfft(sym * mh, n)
        lap_rho = irfft(sym * rfft(rho), n)
        comm = lap_m - irfft(rfft(u * lap_rho) * mask, n)
        d_m += p.c_nl * irfft(rfft(rho * comm) * mask, n)
    if p.c_loc > 0:
        ux = irfft(ik * rfft(u), n)
        d_m += p.c_loc * irfft(ik * (rfft(viscosity(rho, p) * ux) * mask), n)
    f = _force_field(force, g, state.t)
    if f is not None:
        d_m += irfft(rfft(rho * f) * mask, n)

    require_finite(d_rho, "density tendency")
    require_finite(d_m, "momentum tendency")
    return Tendency(d_rho=d_rho, d_m=d_m)


def _force_field(force, grid: Grid, t: float):
    if force is None:
        return None
    if hasattr(force, "field"):
        return force.field(grid, t)
    return np.asarray(force, dtype=float)


# ---------------------------------------------------------------------------
# Pressure potentials


def pi0_pointwise(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """Pressure potential pi_0(rho) = rho * int_{rho_bar}^{rho} p(s)/s^2 ds.

    Evaluated by the closed form of the integral in each gamma branch; for
    gamma > 1 the reference density is 0 (the integral converges there), for
    gamma = 1 it is rho_bar (set to mass/(2*pi) for flocking runs), and for
    gamma < 1 the integral from rho_bar is kept as written.
    """
    _require_positive(rho)
    if p.gamma > 1:
        return p.c_p / (p.gamma - 1.0) * rho**p.gamma
    if p.gamma == 1:
        return p.c_p * rho * np.log(rho / p.rho_bar)
    return p.c_p * rho * (rho ** (p.gamma - 1.0) - p.rho_bar ** (p.gamma - 1.0)) / (p.gamma - 1.0)


def pi_n_pointwise(grid: Grid, rho: np.ndarray, p: ModelParams, n: int) -> np.ndarray:
    """Higher-order potential pi_n = h'(rho) (d^n rho)^2 / (2 rho^(2n))."""
    if n < 1:
        raise ParameterError(f"potential order must be >= 1, got {n}")
    _require_positive(rho)
    dn = derivative(grid, rho, n)
    return 0.5 * h_prime(rho, p) * dn**2 / rho ** (2 * n)


def phi_s_rho_factor(a, b, p: ModelParams):
    """Average pressure slope int_0^1 p'(theta*a + (1-theta)*b) dtheta.

    Closed form c_p (a^gamma - b^gamma)/(a - b), continued by c_p gamma
    a^(gamma-1) on the diagonal.  This secant form is exactly the factor
    that turns the pressure/operator pairing into a symmetric double sum,
    so it must not be replaced by a quadrature approximation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise VacuumError("pressure-slope factor requires positive arguments")
    diff = a - b
    near = np.abs(diff) <= 1e-12 * (a + b)
    safe = np.where(near, 1.0, diff)
    secant = p.c_p * (a**p.gamma - b**p.gamma) / safe
    diag = p.c_p * p.gamma * a ** (p.gamma - 1.0)
    out = np.where(near, diag, secant)
    return float(out) if out.ndim == 0 else out


def psi_viscosity_potential(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """psi with psi'(r) = mu(r)/r: c_mu r^alpha / alpha, or c_mu log r at alpha = 0."""
    _require_positive(rho)
    if p.alpha > 0:
        return p.c_mu * rho**p.alpha / p.alpha
    return p.c_mu * np.log(rho)
