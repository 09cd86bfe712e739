"""Entropy-hierarchy functionals, balance-law residuals, and flocking metrics.

The hierarchy starts from the transported variable X (velocity plus the
dissipation-transport fields) and climbs by X_n = (X_{n-1})_x / rho with a
matching pressure potential at each level:

    E   = 1/2 int rho u^2   + int pi_0        (energy)
    H_0 = 1/2 int rho X^2   + int pi_0        (first entropy)
    H_n = 1/2 int rho X_n^2 + int pi_n        (higher entropies)

Every O(n^2) double sum pairs fields against the circulant row of the
spectral fractional operator (spectral.spectral_kernel_matrix), so the
energy/entropy dissipation identities hold discretely to rounding:
the double sums are the exact quadratic-form duals of the operators the
dynamics actually applies.  Balance residuals are integrator-agnostic:
centered differences across the recording cadence and trapezoid time
integrals, second-order accurate in the recording interval.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model, spectral
from .errors import ParameterError, VacuumError
from .model import ModelParams, State
from .spectral import Grid


@dataclass
class DiagRecord:
    """One timestamped row of every diagnostic functional and residual."""

    t: float
    mass: float
    momentum: float
    energy: float
    h0: float
    h1: float
    h2: float
    hn: list | None
    diss_energy_nl: float
    diss_energy_loc: float
    diss_entropy_nl: float
    diss_entropy_loc: float
    cross_diss: float
    velocity_variance: float
    l1_dist: float
    min_rho: float
    rho_lower_bound_est: float | None
    x_transport_resid: float | None = None
    energy_balance_resid: float | None = None
    bd_balance_resid: float | None = None
    aux: dict = field(default_factory=dict, repr=False, compare=False)

    SCHEMA = (
        "t", "mass", "momentum", "energy", "h0", "h1", "h2", "hn",
        "diss_energy_nl", "diss_energy_loc", "diss_entropy_nl", "diss_entropy_loc",
        "cross_diss", "velocity_variance", "l1_dist", "min_rho",
        "rho_lower_bound_est", "x_transport_resid", "energy_balance_resid",
        "bd_balance_resid",
    )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.SCHEMA}


# ---------------------------------------------------------------------------
# Scalar functionals


def energy(state: State, p: ModelParams) -> float:
    g = state.grid
    kinetic = 0.5 * spectral.inner(g, state.rho, state.u**2)
    return kinetic + spectral.integral(g, model.pi0_pointwise(state.rho, p))


def bd_entropy(state: State, p: ModelParams) -> float:
    g = state.grid
    x = model.x_variable(state, p)
    return 0.5 * spectral.inner(g, state.rho, x**2) + spectral.integral(
        g, model.pi0_pointwise(state.rho, p)
    )


def hn_entropy(state: State, p: ModelParams, n: int) -> float:
    if not 1 <= n <= model.MAX_HIERARCHY:
        raise ParameterError(f"entropy order must lie in [1, {model.MAX_HIERARCHY}], got {n}")
    g = state.grid
    xn = model.x_hierarchy(state, p, n)[n]
    kinetic = 0.5 * spectral.inner(g, state.rho, xn**2)
    return kinetic + spectral.integral(g, model.pi_n_pointwise(g, state.rho, p, n))


def dissipation_functionals(state: State, p: ModelParams, kernel: np.ndarray | None = None):
    """(diss_energy_nl, diss_energy_loc, diss_entropy_nl, diss_entropy_loc, cross_diss).

    The nonlocal pair are O(n^2) double sums against the spectral kernel row;
    with the secant pressure-slope factor they reproduce the pairings
    -<u, D_nl> and -<p(rho), L^s rho> exactly (up to rounding).
    """
    g = state.grid
    rho, u = state.rho, state.u
    if float(np.min(rho)) <= 0.0:
        raise VacuumError("dissipation functionals require strictly positive density")
    if kernel is None:
        kernel = spectral.spectral_kernel_matrix(g, p.s)

    du = u[:, None] - u[None, :]
    drho = rho[:, None] - rho[None, :]
    rho_outer = rho[:, None] * rho[None, :]

    diss_energy_nl = 0.5 * spectral.double_integral(g, kernel * du**2 * rho_outer)
    diss_entropy_nl = 0.5 * spectral.double_integral(
        g, kernel * model.phi_s_rho_factor(rho[:, None], rho[None, :], p) * drho**2
    )

    ux = spectral.derivative(g, u, 1)
    rx = spectral.derivative(g, rho, 1)
    mu = model.viscosity(rho, p)
    diss_energy_loc = spectral.integral(g, mu * ux**2)
    diss_entropy_loc = spectral.integral(g, mu * model.pressure_prime(rho, p) * rx**2 / rho**2)

    q_nl = model.q_nonlocal(g, rho, p)
    q_loc = model.q_local(g, rho, p)
    cross_diss = spectral.integral(g, rho * q_nl * q_loc)

    return diss_energy_nl, diss_energy_loc, diss_entropy_nl, diss_entropy_loc, cross_diss


def flocking_metrics(state: State, p: ModelParams):
    """(velocity_variance, l1_dist, ck_gap).

    velocity_variance is the rho-weighted squared velocity spread over the
    torus square; l1_dist the L1 distance of the density to its mean level
    M/(2 pi).  ck_gap = int pi_0 - (1/2) l1_dist^2 carries the classical
    Csiszar-Kullback/Pinsker constant 1/2, under which the gap is
    nonnegative for every positive density; it is only defined for the
    linear pressure law (gamma = 1), with the reference density pinned to
    the mass average.
    """
    g = state.grid
    rho, u = state.rho, state.u
    if float(np.min(rho)) <= 0.0:
        raise VacuumError("flocking metrics require strictly positive density")
    du = u[:, None] - u[None, :]
    velocity_variance = spectral.double_integral(g, du**2 * rho[:, None] * rho[None, :])
    mass = spectral.integral(g, rho)
    level = mass / spectral.TWO_PI
    l1_dist = spectral.integral(g, np.abs(rho - level))
    ck_gap = None
    if p.gamma == 1:
        p_ck = ModelParams(c_p=p.c_p, gamma=1.0, c_mu=p.c_mu, alpha=p.alpha,
                           c_nl=p.c_nl, c_loc=p.c_loc, s=p.s, tau=p.tau,
                           rho_bar=level, allow_inviscid=True)
        ck_gap = spectral.integral(g, model.pi0_pointwise(rho, p_ck)) - 0.5 * l1_dist**2
    return velocity_variance, l1_dist, ck_gap


def density_lower_bound_estimate(state: State, p: ModelParams) -> float:
    """A-priori density floor from the total variation of rho^(alpha - 1/2).

    Valid for alpha in (0, 1/2): since rho exceeds its mean somewhere and
    alpha - 1/2 < 0, the pointwise bound rho^(alpha-1/2) <= mean^(alpha-1/2)
    + int |d/dx rho^(alpha-1/2)| inverts to a lower bound on min rho.  The
    mass average is used as the anchor; it is what the mean-value argument
    actually guarantees.
    """
    if not 0.0 < p.alpha < 0.5:
        raise ParameterError(f"lower-bound estimate requires alpha in (0, 1/2), got {p.alpha}")
    g = state.grid
    rho = state.rho
    if float(np.min(rho)) <= 0.0:
        raise VacuumError("lower-bound estimate requires strictly positive density")
    expo = p.alpha - 0.5
    anchor = spectral.integral(g, rho) / spectral.TWO_PI
    tv = spectral.integral(g, np.abs(spectral.derivative(g, rho**expo, 1)))
    return float((anchor**expo + tv) ** (-1.0 / (0.5 - p.alpha)))


def decay_fit(times, energies, t_start: float = 10.0, t_reach: float = 50.0):
    """(sup of E(t) * t / ln t over t >= t_start, nonincreasing flag)."""
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if len(times) < 2 or float(times[-1]) < t_reach:
        raise ParameterError(f"decay window too short: need records reaching t >= {t_reach}")
    sel = times >= t_start
    if not np.any(sel):
        raise ParameterError(f"decay window has no records with t >= {t_start}")
    sup_stat = float(np.max(energies[sel] * times[sel] / np.log(times[sel])))
    slack = 1e-12 * (abs(float(energies[0])) + 1.0)
    nonincreasing = bool(np.all(np.diff(energies) <= slack))
    return sup_stat, nonincreasing


def exponential_envelope(times, values, margin: float = 10.0):
    """Fit log(values) ~ a + b t; report (a, b, within) where ``within`` says
    every sample sits under margin * exp(a + b t).  Used to certify that a
    hierarchy level stays finite with at-worst exponential growth."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 2:
        raise ParameterError("envelope fit needs at least 2 samples")
    if not np.all(np.isfinite(values)):
        return 0.0, 0.0, False
    logs = np.log(np.maximum(values, 1e-300))
    b, a = np.polyfit(times, logs, 1)
    within = bool(np.all(values <= margin * np.exp(a + b * times) + 1e-300))
    return float(a), float(b), within


# ---------------------------------------------------------------------------
# Window residuals


def _window(records, need_diss: bool = False):
    if len(records) < 3:
        raise ParameterError("balance residual needs >= 3 consecutive records")
    ts = np.array([r.t for r in records])
    dts = np.diff(ts)
    if np.any(dts <= 0) or abs(dts.max() - dts.min()) > 1e-9 * max(dts.max(), 1e-30):
        raise ParameterError("balance residual needs a uniform recording interval")
    return ts


def energy_balance_residual(records) -> float:
    """|Delta E - int (dissipation + force work) dt| / (|E| + 1) over the window."""
    ts = _window(records)
    rhs_vals = [
        -r.aux["c_nl"] * r.diss_energy_nl - r.aux["c_loc"] * r.diss_energy_loc
        + r.aux.get("force_work_energy", 0.0)
        for r in records
    ]
    delta = records[-1].energy - records[0].energy
    mid = records[len(records) // 2]
    return float(abs(delta - np.trapezoid(rhs_vals, ts)) / (abs(mid.energy) + 1.0))


def bd_balance_residual(records) -> float:
    """Same construction for the first entropy H_0 and its dissipation pair."""
    ts = _window(records)
    rhs_vals = [
        -r.aux["c_nl"] * r.diss_entropy_nl - r.aux["c_loc"] * r.diss_entropy_loc
        + r.aux.get("force_work_bd", 0.0)
        for r in records
    ]
    delta = records[-1].h0 - records[0].h0
    mid = records[len(records) // 2]
    return float(abs(delta - np.trapezoid(rhs_vals, ts)) / (abs(mid.h0) + 1.0))


def x_transport_residual(states, p: ModelParams, force=None) -> float:
    """L2 norm of d/dt X + u X_x + h'(rho) rho_x - f at the window midpoint.

    ``states`` are three consecutive State snapshots at a uniform recording
    interval; the time derivative is the centered difference across them.
    """
    if len(states) != 3:
        raise ParameterError("transport residual needs exactly 3 consecutive states")
    s0, s1, s2 = states
    dt0, dt1 = s1.t - s0.t, s2.t - s1.t
    if dt0 <= 0 or dt1 <= 0 or abs(dt1 - dt0) > 1e-9 * max(dt0, dt1):
        raise ParameterError("transport residual needs a uniform recording interval")
    g = s1.grid
    x0 = model.x_variable(s0, p)
    x1 = model.x_variable(s1, p)
    x2 = model.x_variable(s2, p)
    dxdt = (x2 - x0) / (s2.t - s0.t)
    resid = dxdt + s1.u * spectral.derivative(g, x1, 1)
    resid += model.h_prime(s1.rho, p) * spectral.derivative(g, s1.rho, 1)
    f = model._force_field(force, g, s1.t)
    if f is not None:
        resid -= f
    return float(np.sqrt(spectral.inner(g, resid, resid)))


# ---------------------------------------------------------------------------
# Trajectory-level engine


class DiagnosticsEngine:
    """Observer that assembles DiagRecords during a run.

    Records are emitted at the integrator's recording cadence; the O(n^2)
    double sums run every ``double_integral_cadence``-th record (other rows
    carry nulls there).  ``finalize`` fills the three balance-residual
    columns on interior records using centered windows.
    """

    def __init__(self, grid: Grid, p: ModelParams, force=None,
                 hierarchy_depth: int = 2, double_integral_cadence: int = 1):
        if not 1 <= hierarchy_depth <= model.MAX_HIERARCHY:
            raise ParameterError(
                f"hierarchy depth must lie in [1, {model.MAX_HIERARCHY}], got {hierarchy_depth}")
        if double_integral_cadence < 1:
            raise ParameterError("double_integral_cadence must be >= 1")
        self.grid = grid
        self.params = p
        self.force = force
        self.hierarchy_depth = hierarchy_depth
        self.cadence = double_integral_cadence
        self.kernel = spectral.spectral_kernel_matrix(grid, p.s)
        self.records: list[DiagRecord] = []
        self._states: list[State] = []

    def observe(self, state: State, n_accepted: int):
        self.records.append(self.record_for(state, len(self.records)))
        self._states.append(state)

    def record_for(self, state: State, index: int = 0) -> DiagRecord:
        g, p = self.grid, self.params
        with_sums = index % self.cadence == 0
        levels = model.x_hierarchy(state, p, self.hierarchy_depth)
        ent = {}
        for n in range(1, self.hierarchy_depth + 1):
            kinetic = 0.5 * spectral.inner(g, state.rho, levels[n] ** 2)
            ent[n] = kinetic + spectral.integral(g, model.pi_n_pointwise(g, state.rho, p, n))

        if with_sums:
            de_nl, de_loc, ds_nl, ds_loc, cross = dissipation_functionals(state, p, self.kernel)
            vv, l1, ck = flocking_metrics(state, p)
        else:
            de_nl = de_loc = ds_nl = ds_loc = cross = vv = l1 = None
            ck = None

        lower = None
        if 0.0 < p.alpha < 0.5:
            lower = density_lower_bound_estimate(state, p)

        f = model._force_field(self.force, g, state.t)
        x = levels[0]
        aux = {
            "c_nl": p.c_nl,
            "c_loc": p.c_loc,
            "force_work_energy": spectral.integral(g, state.rho * state.u * f) if f is not None else 0.0,
            "force_work_bd": spectral.integral(g, state.rho * x * f) if f is not None else 0.0,
            "ck_gap": ck,
        }
        return DiagRecord(
            t=state.t,
            mass=state.mass(),
            momentum=state.momentum(),
            energy=energy(state, p),
            h0=0.5 * spectral.inner(g, state.rho, x**2)
            + spectral.integral(g, model.pi0_pointwise(state.rho, p)),
            h1=ent.get(1, 0.0),
            h2=ent.get(2) if self.hierarchy_depth >= 2 else None,
            hn=[ent[n] for n in range(3, self.hierarchy_depth + 1)] or None,
            diss_energy_nl=de_nl,
            diss_energy_loc=de_loc,
            diss_entropy_nl=ds_nl,
            diss_entropy_loc=ds_loc,
            cross_diss=cross,
            velocity_variance=vv,
            l1_dist=l1,
            min_rho=float(np.min(state.rho)),
            rho_lower_bound_est=lower,
            aux=aux,
        )

    def finalize(self):
        """Fill residual columns on interior records with uniform neighbors."""
        recs, states = self.records, self._states
        for i in range(1, len(recs) - 1):
            window = recs[i - 1 : i + 2]
            if any(r.diss_energy_nl is None for r in window):
                continue
            try:
                recs[i].energy_balance_resid = energy_balance_residual(window)
                recs[i].bd_balance_resid = bd_balance_residual(window)
                recs[i].x_transport_resid = x_transport_residual(
                    states[i - 1 : i + 2], self.params, self.force)
            except ParameterError:
                continue  # non-uniform spacing at the trajectory tail
        return self.records
