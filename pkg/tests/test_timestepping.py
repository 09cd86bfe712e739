import numpy as np
import pytest

from torusgas.errors import NumericFaultError, ParameterError, VacuumError
from torusgas.model import ModelParams, State
from torusgas.spectral import Grid, integral
from torusgas.timestepping import (Forcing, StepControl, initial_data, run,
                                   stable_dt, step)

G64 = Grid(64)


def params(**kw):
    base = dict(c_p=1.0, gamma=1.0, c_mu=1.0, alpha=0.0, c_nl=0.0, c_loc=1.0, s=1.5)
    base.update(kw)
    return ModelParams(**base)


def ctl(**kw):
    base = dict(t_final=1.0, dt_max=1.0)
    base.update(kw)
    return StepControl(**base)


class TestStepControl:
    @pytest.mark.parametrize("kw", [
        dict(t_final=-1.0), dict(cfl=0.0), dict(cfl=1.5),
        dict(dt_min=1e-3, dt_max=1e-4), dict(vacuum_floor=0.0),
        dict(record_every=0),
    ])
    def test_validation(self, kw):
        base = dict(t_final=1.0)
        base.update(kw)
        with pytest.raises(ParameterError):
            StepControl(**base)


class TestForcing:
    def test_zero_kind_ignores_fields(self):
        f = Forcing(kind="zero", amplitude=3.0, mode=5, frequency=2.0)
        assert f.field(G64, 0.5) is None
        assert f.is_zero

    def test_standing_wave(self):
        f = Forcing(kind="standing_wave", amplitude=2.0, mode=3, frequency=0.5)
        out = f.field(G64, 1.0)
        assert np.allclose(out, 2.0 * np.cos(3 * G64.nodes) * np.cos(0.5))

    def test_traveling_wave(self):
        f = Forcing(kind="traveling_wave", amplitude=1.0, mode=2, frequency=1.5)
        out = f.field(G64, 2.0)
        assert np.allclose(out, np.cos(2 * G64.nodes - 3.0))

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            Forcing(kind="white_noise")


class TestStableDt:
    def test_pure_acoustic(self):
        # u = 0, no dissipation, gamma = 1, rho = 1, c_p = 1: dt = cfl * dx
        st = State(G64, np.ones(64), np.zeros(64))
        p = params(c_nl=0.0, c_loc=0.0, allow_inviscid=True)
        c = ctl(cfl=0.4)
        assert stable_dt(st, p, c) == pytest.approx(0.4 * G64.dx, rel=1e-12)

    def test_scaling_with_resolution(self):
        p_adv = params(c_nl=0.0, c_loc=0.0, allow_inviscid=True)
        p_loc = params(c_p=0.0, c_loc=1.0, alpha=0.0)
        vals = {}
        for n in (64, 128):
            g = Grid(n)
            st = State(g, np.ones(n), np.zeros(n))
            vals[n] = (stable_dt(st, p_adv, ctl()), stable_dt(st, p_loc, ctl()))
        assert vals[128][0] == pytest.approx(vals[64][0] / 2, rel=1e-12)
        assert vals[128][1] == pytest.approx(vals[64][1] / 4, rel=1e-12)

    def test_clamped_to_dt_max(self):
        st = State(G64, np.ones(64), np.zeros(64))
        p = params(c_p=0.0, c_nl=0.0, c_loc=0.0, allow_inviscid=True)
        assert stable_dt(st, p, ctl(dt_max=1e-3)) == 1e-3

    def test_returned_dt_stable_4x_not(self):
        # stiff local preset: empirical stability bisection
        p = params(gamma=2.0, alpha=0.0, c_loc=1.0, c_nl=0.0)
        init = initial_data("perturbed_constant", G64, epsilon=0.3, mode=2)
        dt = stable_dt(init, p, ctl(cfl=0.4))
        st = init
        for _ in range(400):
            st = step(st, dt, p)
        assert float(np.max(np.abs(st.u))) < 10.0
        with pytest.raises((NumericFaultError, VacuumError)):
            st = init
            for _ in range(400):
                st = step(st, 4 * dt, p)
            raise NumericFaultError("no blowup detected")  # pragma: no cover


class TestStep:
    def test_equilibrium_fixed_point(self):
        st = State(G64, np.full(64, 1.2), np.zeros(64))
        p = params(c_nl=1.0, c_loc=1.0, alpha=0.5, gamma=2.0, s=1.5)
        out = step(st, 1e-3, p)
        assert np.max(np.abs(out.rho - st.rho)) <= 1e-14
        assert np.max(np.abs(out.u)) <= 1e-14

    def test_conservation_over_1000_steps(self):
        p = params(c_nl=1.0, c_loc=1.0, alpha=0.5, gamma=1.0, s=1.5)
        st = initial_data("random_bandlimited", G64, seed=7, epsilon=0.4)
        m0, p0 = st.mass(), st.momentum()
        scale = m0 * float(np.max(np.abs(st.u)))
        dt = stable_dt(st, p, ctl())
        for _ in range(1000):
            st = step(st, dt, p)
        assert abs(st.mass() - m0) / m0 <= 1e-10
        assert abs(st.momentum() - p0) / scale <= 1e-10

    def test_vacuum_error_carries_location(self):
        rho = np.full(64, 1.0)
        st = State(G64, rho, 3.0 * np.sin(G64.nodes))
        p = params(c_p=0.1, c_loc=1e-6, alpha=0.0, gamma=1.0)
        with pytest.raises(VacuumError) as info:
            cur = st
            for _ in range(2000):
                cur = step(cur, 2e-3, p, vacuum_floor=0.5)
        assert info.value.t is not None
        assert info.value.x is not None

    def test_third_order_convergence(self):
        p = params(gamma=2.0, alpha=1.0, c_loc=1.0, c_nl=0.0)
        init = initial_data("perturbed_constant", G64, epsilon=0.05, mode=1)
        T = 0.04

        def integrate(nsteps):
            st = init
            for _ in range(nsteps):
                st = step(st, T / nsteps, p)
            return st

        ref = integrate(512)
        errs = [float(np.max(np.abs(integrate(n).rho - ref.rho))
                      + np.max(np.abs(integrate(n).u - ref.u)))
                for n in (16, 32)]
        assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.25)


class TestRun:
    def test_zero_horizon(self):
        init = initial_data("perturbed_constant", G64, epsilon=0.1)
        traj = run(init, params(), StepControl(t_final=0.0))
        assert traj.status == "completed"
        assert len(traj.states) == 1 and traj.times == [0.0]

    def test_bd_regime_completes_bounded(self):
        p = params(gamma=2.0, alpha=0.25, c_loc=1.0, c_nl=1.0, s=1.75)
        init = initial_data("perturbed_constant", G64, epsilon=0.3, mode=1)
        traj = run(init, p, ctl(t_final=2.0, record_every=100))
        assert traj.status == "completed"
        assert min(float(np.min(st.rho)) for st in traj.states) > 0.1

    def test_adversarial_never_faults(self):
        # deep density well, steep exponents, strong velocity
        p = params(gamma=0.5, alpha=0.9, c_loc=1.0, c_nl=0.0)
        rho = 1.0 + 0.1 * np.cos(G64.nodes) - 0.85 * np.exp(
            4.0 * (np.cos(G64.nodes - np.pi) - 1.0))
        u = 1.5 * np.sin(G64.nodes)
        init = State(G64, rho, u)
        traj = run(init, p, ctl(t_final=1.0, record_every=50))
        assert traj.status in ("completed", "vacuum_detected")
        if traj.status == "vacuum_detected":
            assert traj.fault_detail

    def test_recording_cadence_and_monotone_times(self):
        init = initial_data("perturbed_constant", G64, epsilon=0.1)
        traj = run(init, params(), ctl(t_final=0.05, record_every=7))
        assert traj.times[0] == 0.0
        assert all(b > a for a, b in zip(traj.times, traj.times[1:]))

    def test_determinism_bit_identical(self):
        p = params(c_nl=1.0, c_loc=1.0, alpha=0.3, s=1.5)
        c = ctl(t_final=0.05, record_every=10)
        outs = []
        for _ in range(2):
            init = initial_data("random_bandlimited", G64, seed=42, epsilon=0.5)
            traj = run(init, p, c)
            outs.append(traj)
        for a, b in zip(outs[0].states, outs[1].states):
            assert np.array_equal(a.rho, b.rho)
            assert np.array_equal(a.u, b.u)


class TestInitialData:
    def test_zero_epsilon_equilibrium(self):
        st = initial_data("perturbed_constant", G64, epsilon=0.0)
        assert np.max(np.abs(st.rho - 1.0)) <= 1e-14
        assert np.max(np.abs(st.u)) <= 1e-14

    def test_bimodal_zero_momentum(self):
        st = initial_data("bimodal_flock", G64, epsilon=0.5)
        assert abs(integral(G64, st.rho * st.u)) <= 1e-12

    def test_same_seed_bit_identical(self):
        a = initial_data("random_bandlimited", G64, seed=11)
        b = initial_data("random_bandlimited", G64, seed=11)
        assert np.array_equal(a.rho, b.rho) and np.array_equal(a.u, b.u)

    def test_random_respects_density_floor(self):
        for seed in range(20):
            st = initial_data("random_bandlimited", G64, seed=seed)
            assert float(np.min(st.rho)) >= 0.2 - 1e-9

    def test_nonpositive_density_rejected(self):
        with pytest.raises(ParameterError):
            initial_data("perturbed_constant", G64, epsilon=1.5)

    def test_unknown_preset(self):
        with pytest.raises(ParameterError):
            initial_data("solitary_wave", G64)


class TestSnapshotIngestion:
    def test_round_trip_bit_exact(self):
        import json

        from torusgas.timestepping import state_from_snapshot

        st = initial_data("random_bandlimited", G64, seed=13, epsilon=0.5)
        row = json.dumps({"n": 64, "length": G64.length, "t": 0.75,
                          "rho": [float(v) for v in st.rho],
                          "u": [float(v) for v in st.u]})
        back = state_from_snapshot(json.loads(row))
        assert back.t == 0.75
        assert np.array_equal(back.rho, st.rho)
        assert np.array_equal(back.u, st.u)

    def test_resume_from_snapshot(self):
        from torusgas.timestepping import state_from_snapshot

        st = initial_data("perturbed_constant", G64, epsilon=0.1)
        doc = {"n": 64, "t": 0.5, "rho": list(map(float, st.rho)),
               "u": list(map(float, st.u))}
        resumed = state_from_snapshot(doc)
        traj = run(resumed, params(), ctl(t_final=0.55, record_every=5))
        assert traj.status == "completed"
        assert traj.times[0] == 0.5

    def test_malformed_rejected(self):
        from torusgas.timestepping import state_from_snapshot

        with pytest.raises(ParameterError):
            state_from_snapshot({"n": 64, "rho": [1.0], "u": [0.0]})
        with pytest.raises(ParameterError):
            state_from_snapshot({"rho": [1.0] * 64, "u": [0.0] * 64})
