"""Explicit time integration of the semi-discrete system.

A third-order strong-stability-preserving Runge-Kutta scheme advances the
conservative pair (rho, m); velocity is recovered by pointwise division
guarded by the vacuum floor.  Vacuum is a hard stop carrying time and
location - the no-vacuum condition is the continuation criterion for this
system, so breaching it is a first-class terminal status rather than an
error to regularize away.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import NumericFaultError, ParameterError, VacuumError
from .model import ModelParams, State, pressure_prime, rhs, viscosity
from .spectral import Grid, dealias

STATUS_COMPLETED = "completed"
STATUS_VACUUM = "vacuum_detected"
STATUS_FAULT = "numeric_fault"


@dataclass(frozen=True)
class StepControl:
    """Step-size control and run bookkeeping knobs."""

    t_final: float
    cfl: float = 0.4
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    vacuum_floor: float = 1e-8
    record_every: int = 1

    def __post_init__(self):
        if self.t_final < 0:
            raise ParameterError(f"t_final must be >= 0, got {self.t_final}")
        if not 0.0 < self.cfl <= 1.0:
            raise ParameterError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.dt_min <= 0 or self.dt_max <= 0 or self.dt_min > self.dt_max:
            raise ParameterError("need 0 < dt_min <= dt_max")
        if self.vacuum_floor <= 0:
            raise ParameterError(f"vacuum_floor must be > 0, got {self.vacuum_floor}")
        if self.record_every < 1:
            raise ParameterError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class Forcing:
    """Deterministic bounded external force f(x, t)."""

    kind: str = "zero"
    amplitude: float = 0.0
    mode: int = 1
    frequency: float = 1.0

    KINDS = ("zero", "standing_wave", "traveling_wave")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"forcing kind must be one of {self.KINDS}, got {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ParameterError("forcing amplitude must be finite")

    def field(self, grid: Grid, t: float):
        if self.kind == "zero" or self.amplitude == 0.0:
            return None
        x = grid.nodes
        if self.kind == "standing_wave":
            return self.amplitude * np.cos(self.mode * x) * np.cos(self.frequency * t)
        return self.amplitude * np.cos(self.mode * x - self.frequency * t)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0


@dataclass
class Trajectory:
    """Recorded states of one run plus terminal bookkeeping."""

    grid: Grid
    params: ModelParams
    control: StepControl
    forcing: Forcing
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    status: str = STATUS_COMPLETED
    n_steps: int = 0
    fault_detail: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def final_state(self) -> State:
        return self.states[-1]


def stable_dt(state: State, p: ModelParams, ctl: StepControl) -> float:
    """Explicit-stability step bound for the advective, local, nonlocal channels.

    dt = cfl * min( dx/max(|u| + sqrt(p')),
                    dx^2/max(c_loc mu/rho),
                    dx^s/(c_nl max(rho) kappa_s) ),  kappa_s = (n/3)^s/(n dx)^s,

    clamped to [dt_min, dt_max].  kappa_s normalizes the fractional-symbol
    bound so the constraint keeps the same form at every resolution.
    """
    state.validate(vacuum_floor=0.0)
    g = state.grid
    dx = g.dx
    bounds = []
    wave = float(np.max(np.abs(state.u) + np.sqrt(np.maximum(pressure_prime(state.rho, p), 0.0))))
    if wave > 0:
        bounds.append(dx / wave)
    if p.c_loc > 0:
        nu = float(np.max(p.c_loc * viscosity(state.rho, p) / state.rho))
        if nu > 0:
            bounds.append(dx**2 / nu)
    if p.c_nl > 0:
        kappa = (g.n / 3.0) ** p.s / (g.n * dx) ** p.s
        bounds.append(dx**p.s / (p.c_nl * float(np.max(state.rho)) * kappa))
    dt = ctl.cfl * min(bounds) if bounds else ctl.dt_max
    return float(min(max(dt, ctl.dt_min), ctl.dt_max))


def step(state: State, dt: float, p: ModelParams, force=None,
         vacuum_floor: float = 1e-8) -> State:
    """One SSP-RK3 (Shu-Osher) step of the conservative pair (rho, m)."""
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    g = state.grid
    rho0, m0 = state.rho, state.rho * state.u
    t0 = state.t

    def stage(rho, m, t):
        st = _as_state(g, rho, m, t, vacuum_floor)
        k = rhs(st, p, force)
        return k.d_rho, k.d_m

    k1r, k1m = stage(rho0, m0, t0)
    r1, m1 = rho0 + dt * k1r, m0 + dt * k1m
    k2r, k2m = stage(r1, m1, t0 + dt)
    r2 = 0.75 * rho0 + 0.25 * (r1 + dt * k2r)
    m2 = 0.75 * m0 + 0.25 * (m1 + dt * k2m)
    k3r, k3m = stage(r2, m2, t0 + 0.5 * dt)
    rho = rho0 / 3.0 + 2.0 / 3.0 * (r2 + dt * k3r)
    m = m0 / 3.0 + 2.0 / 3.0 * (m2 + dt * k3m)

    rho = dealias(g, rho)
    m = dealias(g, m)
    out = _as_state(g, rho, m, t0 + dt, vacuum_floor)
    return out


def _as_state(grid: Grid, rho: np.ndarray, m: np.ndarray, t: float,
              vacuum_floor: float) -> State:
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(m))):
        raise NumericFaultError(f"non-finite fields at t={t:.6g}")
    mn = float(np.min(rho))
    if mn < vacuum_floor:
        raise VacuumError(
            f"vacuum at t={t:.6g}: min density {mn:.3e} < floor {vacuum_floor:.3e}",
            t=t, x=float(grid.nodes[int(np.argmin(rho))]),
        )
    return State(grid=grid, rho=rho, u=m / rho, t=t)


def run(init: State, p: ModelParams, ctl: StepControl, force: Forcing | None = None,
        observer=None) -> Trajectory:
    """Integrate to t_final or until vacuum / numeric fault.

    The observer (if given) is called as observer(state, n_accepted) at t=0,
    every record_every accepted steps, and at the final time.  Termination
    is always surfaced in Trajectory.status, never as silent truncation.

    The step size is frozen at the initial stability bound and only ever
    shrunk (when the state stiffens), so recording intervals stay uniform -
    the balance-residual windows require that.
    """
    force = force or Forcing()
    init.validate(vacuum_floor=ctl.vacuum_floor)
    traj = Trajectory(grid=init.grid, params=p, control=ctl, forcing=force)

    def record(st, n_acc):
        traj.times.append(st.t)
        traj.states.append(st)
        if observer is not None:
            observer(st, n_acc)

    state = init
    record(state, 0)
    n_acc = 0
    dt_frozen = stable_dt(state, p, ctl)
    try:
        while state.t < ctl.t_final - 1e-14 * max(ctl.t_final, 1.0):
            dt_frozen = min(dt_frozen, stable_dt(state, p, ctl))
            dt = min(dt_frozen, ctl.t_final - state.t)
            state = step(state, dt, p, force, vacuum_floor=ctl.vacuum_floor)
            n_acc += 1
            at_end = state.t >= ctl.t_final - 1e-14 * max(ctl.t_final, 1.0)
            if n_acc % ctl.record_every == 0 or at_end:
                record(state, n_acc)
    except VacuumError as exc:
        traj.status = STATUS_VACUUM
        traj.fault_detail = str(exc)
    except NumericFaultError as exc:
        traj.status = STATUS_FAULT
        traj.fault_detail = str(exc)
    traj.n_steps = n_acc
    return traj


# ---------------------------------------------------------------------------
# Initial data presets

PRESETS = ("perturbed_constant", "bimodal_flock", "random_bandlimited")


def initial_data(preset: str, grid: Grid, seed: int = 0, epsilon: float = 0.1,
                 mode: int = 1, rho_bar: float = 1.0) -> State:
    """Deterministic initial states with the zero-total-momentum gauge."""
    x = grid.nodes
    if preset == "perturbed_constant":
        rho = rho_bar + epsilon * np.cos(mode * x)
        u = epsilon * np.sin(mode * x)
    elif preset == "bimodal_flock":
        c1, c2 = 0.5 * np.pi, 1.5 * np.pi
        bump1 = np.exp(6.0 * (np.cos(x - c1) - 1.0))
        bump2 = np.exp(6.0 * (np.cos(x - c2) - 1.0))
        rho = rho_bar * (1.0 + 0.8 * (bump1 + bump2))
        u = epsilon * (bump1 - bump2)
    elif preset == "random_bandlimited":
        rng = np.random.default_rng(seed)
        kmax = max(1, grid.n // 8)
        rho = rho_bar + _band_limited(rng, x, kmax, 0.3 * rho_bar)
        lo = float(np.min(rho))
        floor = 0.2 * rho_bar
        if lo < floor:
            rho = rho_bar + (rho - rho_bar) * (rho_bar - floor) / (rho_bar - lo)
        u = _band_limited(rng, x, kmax, epsilon)
    else:
        raise ParameterError(f"unknown initial-data preset {preset!r}; choose from {PRESETS}")

    rho = dealias(grid, rho)
    u = dealias(grid, u)
    if float(np.min(rho)) <= 0.0:
        raise ParameterError(f"preset {preset!r} produced nonpositive density "
                             f"(min {float(np.min(rho)):.3e}); reduce epsilon")
    u = u - spectral.integral(grid, rho * u) / spectral.integral(grid, rho)
    return State(grid=grid, rho=rho, u=u, t=0.0)


def _band_limited(rng, x, kmax, amplitude):
    g = np.zeros_like(x)
    for k in range(1, kmax + 1):
        a, b = rng.standard_normal(2)
        g += (a * np.cos(k * x) + b * np.sin(k * x)) / k**2
    peak = float(np.max(np.abs(g)))
    return amplitude * g / peak if peak > 0 else g


def state_from_snapshot(doc: dict) -> State:
    """Re-ingest a snapshot record (as written by the run command) as an
    initial state; the arrays round-trip bit-exactly through the JSON text."""
    try:
        grid = Grid(int(doc["n"]))
        rho = np.asarray(doc["rho"], dtype=float)
        u = np.asarray(doc["u"], dtype=float)
        t = float(doc.get("t", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed snapshot record: {exc}") from exc
    if abs(float(doc.get("length", spectral.TWO_PI)) - spectral.TWO_PI) > 1e-12:
        raise ParameterError("snapshot domain length must be 2*pi")
    if rho.shape != (grid.n,) or u.shape != (grid.n,):
        raise ParameterError("snapshot arrays must have length n")
    return State(grid=grid, rho=rho, u=u, t=t).validate()
