"""Built-in invariant suites behind the ``selftest`` CLI command.

Each suite re-derives an identity, sign condition, or bound from scratch on
seeded data and reports pass/fail.  ``fault`` injects a deliberate kernel
mis-normalization so the harness itself can be tested: a corrupted constant
must make the dissipation-identity suite fail.
"""

import numpy as np

from . import diagnostics as diag
from . import model, spectral
from .model import ModelParams
from .spectral import FracKernelSpec, Grid
from .timestepping import Forcing, StepControl, initial_data, run


def _seeded_states(grid, count, epsilon=0.5, start=0):
    return [initial_data("random_bandlimited", grid, seed=start + i, epsilon=epsilon)
            for i in range(count)]


def suite_operators(fault=None):
    g = Grid(256)
    x = g.nodes
    checks = []

    d = spectral.derivative(g, np.sin(x), 1)
    checks.append(("d/dx sin = cos", float(np.max(np.abs(d - np.cos(x)))) < 1e-12))

    f = _seeded_states(g, 1)[0].rho
    f = f - np.mean(f)
    rt = spectral.derivative(g, spectral.antiderivative_zero_mean(g, f), 1)
    checks.append(("antiderivative round trip", float(np.max(np.abs(rt - f))) < 1e-10))

    ok_eig = True
    eps = np.finfo(float).eps
    j = np.arange(g.n)
    for s in (0.5, 1.0, 1.5, 1.9):
        # roundoff floor: forward-transform noise amplified by the full symbol range
        floor = 4 * eps * (2.0 / g.n) * np.sum(np.arange(1, g.n // 2 + 1, dtype=float) ** s)
        for k in (1, 3, 5, 40):
            fk = np.cos(2 * np.pi * ((k * j) % g.n) / g.n)
            out = spectral.frac_laplacian(g, fk, s)
            err = float(np.max(np.abs(out + k**s * fk))) / max(1.0, float(k) ** s)
            ok_eig = ok_eig and err <= max(1e-12, floor / max(1.0, float(k) ** s))
    checks.append(("fractional symbol on cosines", ok_eig))

    rng = np.random.default_rng(11)
    a = spectral.dealias(g, rng.standard_normal(g.n))
    b = spectral.dealias(g, rng.standard_normal(g.n))
    la = spectral.frac_laplacian(g, a, 1.3)
    lb = spectral.frac_laplacian(g, b, 1.3)
    sym = abs(spectral.inner(g, la, b) - spectral.inner(g, a, lb))
    checks.append(("self-adjointness", sym < 1e-10 * np.linalg.norm(a) * np.linalg.norm(b)))
    checks.append(("negative semidefiniteness", spectral.inner(g, a, la) <= 1e-12))

    # quadrature converges monotonically to the spectral form under doubling
    c_fault = 1.0 if fault != "kernel_norm" else 1.001
    errs = []
    for n, k_img in ((128, 32), (256, 64), (512, 128)):
        gq = Grid(n)
        fq = np.cos(gq.nodes) + 0.3 * np.sin(2 * gq.nodes)
        spec = FracKernelSpec(s=1.2, c_norm=c_fault * spectral.normalization_constant(1.2),
                              k_images=k_img)
        qd = spectral.frac_laplacian_quadrature(gq, fq, spec)
        sp = spectral.frac_laplacian(gq, fq, 1.2)
        errs.append(float(np.linalg.norm(qd - sp) / np.linalg.norm(sp)))
    checks.append(("quadrature convergence " + "->".join(f"{e:.1e}" for e in errs),
                   errs[0] > errs[1] > errs[2] and errs[2] < 1.2e-2))

    da = spectral.dealias(g, np.cos((g.n // 2 - 1) * x))
    checks.append(("dealias removes super-cutoff mode", float(np.max(np.abs(da))) < 1e-12))

    return checks


def suite_dissipation(fault=None):
    g = Grid(128)
    checks = []
    scale = 1.0 if fault != "kernel_norm" else 1.001
    for gamma in (0.5, 1.0, 2.0):
        p = ModelParams(c_p=1.0, gamma=gamma, c_mu=1.0, alpha=0.3,
                        c_nl=1.0, c_loc=1.0, s=1.6)
        kernel = scale * spectral.spectral_kernel_matrix(g, p.s)
        worst = 0.0
        for st in _seeded_states(g, 7, start=int(10 * gamma)):
            de_nl, _, ds_nl, _, _ = diag.dissipation_functionals(st, p, kernel)
            lhs_ent = -spectral.inner(g, model.pressure(st.rho, p),
                                      spectral.frac_laplacian(g, st.rho, p.s))
            lhs_en = -spectral.inner(g, st.u, model.d_nonlocal(st, p))
            worst = max(worst,
                        abs(lhs_ent - ds_nl) / max(abs(ds_nl), 1e-300),
                        abs(lhs_en - de_nl) / max(abs(de_nl), 1e-300))
        checks.append((f"pairing identities gamma={gamma} (worst {worst:.1e})", worst < 1e-6))

    sign_ok = True
    for gamma in (0.5, 1.0, 2.0):
        for alpha in (0.1, 0.3, 1.0):
            p = ModelParams(c_p=1.0, gamma=gamma, c_mu=1.0, alpha=alpha,
                            c_nl=1.0, c_loc=1.0, s=1.5)
            for st in _seeded_states(g, 4, start=int(31 * gamma + 7 * alpha)):
                vals = diag.dissipation_functionals(st, p)
                sign_ok = sign_ok and all(v >= -1e-8 for v in vals)
    checks.append(("sign battery over gamma x alpha", sign_ok))
    return checks


def suite_poscross(fault=None):
    g = Grid(128)
    worst_sign = np.inf
    worst_alt = 0.0
    for alpha in (0.0, 0.1, 0.3, 1.0):
        p = ModelParams(c_p=1.0, gamma=1.0, c_mu=1.0, alpha=alpha,
                        c_nl=1.0, c_loc=1.0, s=1.4)
        for st in _seeded_states(g, 12, start=int(100 * alpha)):
            cross = spectral.integral(
                g, st.rho * model.q_nonlocal(g, st.rho, p) * model.q_local(g, st.rho, p))
            alt = -spectral.inner(g, model.psi_viscosity_potential(st.rho, p),
                                  spectral.frac_laplacian(g, st.rho, p.s))
            worst_sign = min(worst_sign, cross)
            worst_alt = max(worst_alt, abs(cross - alt))
    return [
        (f"cross-dissipation nonnegative (min {worst_sign:.2e})", worst_sign >= -1e-8),
        (f"potential-form identity (worst {worst_alt:.2e})", worst_alt < 1e-8),
    ]


def suite_ck(fault=None):
    g = Grid(256)
    p = ModelParams(c_p=1.0, gamma=1.0, c_mu=1.0, alpha=0.1, c_nl=1.0, c_loc=1.0, s=1.5)
    worst = np.inf
    for seed in range(100):
        st = initial_data("random_bandlimited", g, seed=seed, epsilon=0.3)
        rho = st.rho / st.mass()  # unit mass
        st_unit = model.State(grid=g, rho=rho, u=st.u)
        _, _, gap = diag.flocking_metrics(st_unit, p)
        worst = min(worst, gap)
    return [(f"Csiszar-Kullback gap over 100 densities (min {worst:.2e})", worst >= -1e-8)]


def suite_envar(fault=None):
    g = Grid(128)
    p = ModelParams(c_p=1.0, gamma=1.0, c_mu=1.0, alpha=0.1, c_nl=1.0, c_loc=1.0, s=1.5)
    worst = 0.0
    for seed in range(20):
        st = initial_data("random_bandlimited", g, seed=seed, epsilon=0.7)
        vv, _, _ = diag.flocking_metrics(st, p)
        rhs = st.mass() * spectral.integral(g, st.rho * st.u**2)
        worst = max(worst, abs(0.5 * vv - rhs) / max(abs(rhs), 1e-300))
    return [(f"variance identity on zero-momentum states (worst {worst:.1e})", worst < 1e-8)]


def suite_lowerbound(fault=None):
    g = Grid(64)
    p = ModelParams(c_p=1.0, gamma=2.0, c_mu=1.0, alpha=0.25, c_nl=1.0, c_loc=1.0, s=1.75)
    init = initial_data("perturbed_constant", g, epsilon=0.3, mode=1)
    eng = diag.DiagnosticsEngine(g, p)
    traj = run(init, p, StepControl(t_final=2.0, record_every=50, dt_max=1.0),
               Forcing(), observer=eng.observe)
    ok = traj.status == "completed" and all(
        r.rho_lower_bound_est <= r.min_rho + 1e-12 for r in eng.records)
    margin = min(r.min_rho - r.rho_lower_bound_est for r in eng.records)
    return [(f"density floor dominance on a short run (margin {margin:.2e})", ok)]


def suite_conservation(fault=None):
    g = Grid(64)
    p = ModelParams(c_p=1.0, gamma=1.0, c_mu=1.0, alpha=0.5, c_nl=1.0, c_loc=1.0, s=1.5)
    init = initial_data("random_bandlimited", g, seed=3, epsilon=0.4)
    eng = diag.DiagnosticsEngine(g, p)
    traj = run(init, p, StepControl(t_final=0.2, record_every=1000, dt_max=2e-4),
               Forcing(), observer=eng.observe)
    m0 = eng.records[0].mass
    dm = max(abs(r.mass - m0) for r in eng.records) / m0
    scale = m0 * float(np.max(np.abs(init.u)))
    dp = max(abs(r.momentum - eng.records[0].momentum) for r in eng.records) / scale
    ok = traj.status == "completed" and dm < 1e-10 and dp < 1e-10
    return [(f"mass/momentum drift over {traj.n_steps} steps ({dm:.1e}, {dp:.1e})", ok)]


def suite_topolimit(fault=None):
    g = Grid(384)
    x = g.nodes
    rep = spectral.limit_s_to_2_check(g, np.cos(x), 1.0 + 0.3 * np.sin(x),
                                      tau=1.0, s_list=(1.7, 1.85, 1.95))
    deltas = "->".join(f"{d:.1e}" for d in rep["delta"])
    return [(f"topological s->2 limit ({deltas})", rep["decreasing"])]


SUITES = {
    "operators": suite_operators,
    "dissipation": suite_dissipation,
    "poscross": suite_poscross,
    "ck": suite_ck,
    "envar": suite_envar,
    "lowerbound": suite_lowerbound,
    "conservation": suite_conservation,
    "topolimit": suite_topolimit,
}


def run_selftest(name_filter=None, fault=None, stream=print) -> int:
    names = [n for n in SUITES if name_filter is None or name_filter in n]
    if not names:
        stream(f"no selftest suite matches filter {name_filter!r}")
        return 1
    all_ok = True
    for name in names:
        try:
            checks = SUITES[name](fault=fault)
        except Exception as exc:  # surfaced as a suite failure, not a crash
            checks = [(f"raised {type(exc).__name__}: {exc}", False)]
        suite_ok = all(ok for _, ok in checks)
        all_ok = all_ok and suite_ok
        stream(f"[{'PASS' if suite_ok else 'FAIL'}] {name}")
        for label, ok in checks:
            stream(f"    {'ok ' if ok else 'FAIL'} {label}")
    return 0 if all_ok else 1
