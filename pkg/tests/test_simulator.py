import numpy as np
import pytest

from qgkit import qgf
from qgkit.grid import Grid, ScalarField, random_bandlimited_values
from qgkit.models import (
    LayeredState,
    ModelIIParams,
    ModelIParams,
    table1_grid,
    table1_params,
)
from qgkit.simulator import (
    BlowUpError,
    SimConfig,
    Trajectory,
    cfl_dt,
    diagnostics,
    initial_state,
    run,
    step,
)

MODEL_I = ModelIParams(rho1=1.0, rho2=2.0, H1=1.0, H2=1.0, l=1.0, g=1.0)
MODEL_II = ModelIIParams(lam=1.0)


def periodic_grid(n=64, length=2.0 * np.pi):
    h = length / n
    return Grid(n, n, h, h)


def test_zero_state_fixed_point():
    g = periodic_grid(32)
    st = initial_state(MODEL_I, g, "rest")
    nxt = step(MODEL_I, st, 0.1)
    assert np.max(np.abs(nxt.omega_array())) == 0.0
    assert np.max(np.abs(nxt.psi_array())) == 0.0
    assert nxt.t == pytest.approx(0.1)


def test_model2_steady_solution_unchanged():
    g = periodic_grid(64)
    k = 2.0 * np.pi / (g.nx * g.dx)
    X, _ = g.mesh()
    psi = [ScalarField(g, 0.5 * np.sin(k * X))] * 2
    st = LayeredState.from_psi(MODEL_II, psi)
    out = step(MODEL_II, st, 0.05)
    drift = np.max(np.abs(out.psi_array() - st.psi_array()))
    assert drift < 1e-12


def test_model3_one_step_taylor():
    p = table1_params()
    g = table1_grid(32)
    st = initial_state(p, g, "rest")
    dt = 500.0
    out = step(p, st, dt)
    from qgkit.models import ekman_pumping

    expect = dt * p.f0 / p.H1 * ekman_pumping(p, g.y())
    got = out.omega_array()[0] - st.omega_array()[0]
    # interior only; walls pinned to beta0*y
    err = np.max(np.abs(got[1:-1, 1:-1] - expect[None, 1:-1]))
    # O(dt^2) correction: one RK substage advects the forced field
    assert err < 1e-3 * np.max(np.abs(expect))


def test_nsteps_zero_single_snapshot():
    g = periodic_grid(16)
    cfg = SimConfig(MODEL_I, g, dt=0.1, nsteps=0)
    traj = run(cfg)
    assert len(traj.states) == 1
    assert traj.states[0].t == 0.0
    assert len(traj.diagnostics) == 1


def test_determinism():
    g = periodic_grid(32)
    cfg = SimConfig(MODEL_II, g, dt=0.02, nsteps=10, output_every=5,
                    initial=("random-bandlimited", 12, 3, 1.0))
    a = run(cfg)
    b = run(cfg)
    for sa, sb in zip(a.states, b.states):
        assert np.array_equal(sa.omega_array(), sb.omega_array())


def test_unforced_invariants_short():
    # weak coupling so per-layer energy is (near-)invariant physics;
    # acceptance runs the full 1000-step version
    g = periodic_grid(48)
    weak = ModelIIParams(lam=1000.0)
    cfg = SimConfig(weak, g, dt=0.01, nsteps=100,
                    initial=("random-bandlimited", 4, 2, 1.0))
    traj = run(cfg)
    e0 = np.array(traj.diagnostics[0]["energy"])
    e1 = np.array(traj.diagnostics[-1]["energy"])
    z0 = np.array(traj.diagnostics[0]["enstrophy"])
    z1 = np.array(traj.diagnostics[-1]["enstrophy"])
    assert np.max(np.abs(e1 - e0) / e0) < 1e-5
    assert np.max(np.abs(z1 - z0) / z0) < 1e-5


def test_timestep_convergence_order():
    g = periodic_grid(32)
    init = initial_state(MODEL_II, g, ("random-bandlimited", 8, 2, 1.0))
    T = 0.32
    finals = {}
    for dt in (0.04, 0.02, 0.005):
        cfg = SimConfig(MODEL_II, g, dt=dt, nsteps=int(round(T / dt)), initial=init)
        traj = run(cfg)
        assert traj.states[-1].t == pytest.approx(T)
        finals[dt] = traj.states[-1].omega_array()
    e1 = np.max(np.abs(finals[0.04] - finals[0.005]))
    e2 = np.max(np.abs(finals[0.02] - finals[0.005]))
    assert np.log2(e1 / e2) >= 2.5


def test_blowup_detected():
    g = periodic_grid(16)
    X, Y = g.mesh()
    big = 1e13
    psi = [ScalarField(g, big * np.sin(X) * np.cos(Y)),
           ScalarField(g, -big * np.cos(X) * np.sin(Y))]
    st = LayeredState.from_psi(MODEL_II, psi)
    cfg = SimConfig(MODEL_II, g, dt=1.0, nsteps=50, initial=st)
    with pytest.raises(BlowUpError) as exc:
        run(cfg)
    assert exc.value.step_index >= 1


def test_cfl_warning():
    g = periodic_grid(32)
    init = initial_state(MODEL_II, g, ("random-bandlimited", 1, 2, 1.0))
    big_dt = 10.0 * cfl_dt(g, init)
    cfg = SimConfig(MODEL_II, g, dt=big_dt, nsteps=0, initial=init)
    with pytest.warns(UserWarning, match="CFL"):
        run(cfg)


class TestDiagnostics:
    def test_zero_state(self):
        g = periodic_grid(16)
        st = initial_state(MODEL_I, g, "rest")
        d = diagnostics(MODEL_I, st)
        assert d["energy"] == [0.0, 0.0]
        assert d["enstrophy"] == [0.0, 0.0]
        assert d["mean_pv"] == [0.0, 0.0]
        assert d["grad_max"] == 0.0

    def test_single_mode_energy(self):
        g = periodic_grid(64)
        k = 2.0 * np.pi / (g.nx * g.dx)
        X, _ = g.mesh()
        psi = [ScalarField(g, np.sin(k * X)), ScalarField(g, np.zeros(g.shape))]
        st = LayeredState.from_psi(MODEL_II, psi)
        d = diagnostics(MODEL_II, st)
        area = (g.nx * g.dx) * (g.ny * g.dy)
        # discrete |grad|^2 of the sin(kx) mode is the 5-point symbol
        kd2 = 4.0 * np.sin(k * g.dx / 2.0) ** 2 / g.dx**2
        assert d["energy"][0] == pytest.approx(0.5 * kd2 * area / 2.0, rel=1e-12)
        assert d["energy"][0] == pytest.approx(0.5 * k**2 * area / 2.0, rel=(k * g.dx) ** 2)

    def test_model3_rest_mean_pv_zero(self):
        p = table1_params()
        g = table1_grid(32)
        st = initial_state(p, g, "rest")
        d = diagnostics(p, st)
        # area mean of beta0*y on the symmetric basin
        assert abs(d["mean_pv"][0]) < 1e-12 * p.beta0 * p.L


class TestArtifacts:
    def test_qgf_round_trip(self, tmp_path):
        g = periodic_grid(16)
        rng = np.random.default_rng(0)
        layers = [rng.standard_normal(g.shape) for _ in range(2)]
        path = tmp_path / "snap.qgf"
        qgf.write_snapshot(path, g, 12.5, layers)
        header, back = qgf.read_snapshot(path)
        assert header["nx"] == g.nx and header["ny"] == g.ny
        assert header["nlayers"] == 2
        assert header["time"] == 12.5
        assert header["dx"] == g.dx
        for a, b in zip(layers, back):
            assert np.array_equal(a, b)

    def test_qgf_bad_magic(self, tmp_path):
        path = tmp_path / "bad.qgf"
        path.write_bytes(b"NOPE" + b"\x00" * 60)
        with pytest.raises(ValueError):
            qgf.read_snapshot(path)

    def test_trajectory_outputs(self, tmp_path):
        g = periodic_grid(16)
        cfg = SimConfig(MODEL_II, g, dt=0.05, nsteps=4, output_every=2,
                        initial=("random-bandlimited", 5, 2, 0.5))
        traj = run(cfg)
        assert len(traj.states) == 3  # steps 0, 2, 4
        paths = traj.write_snapshots(tmp_path)
        assert len(paths) == 3
        csv_path = traj.write_diagnostics_csv(tmp_path / "diag.csv")
        text = open(csv_path).read().splitlines()
        assert text[0] == "step,time,layer,energy,enstrophy,mean_pv"
        assert len(text) == 1 + 5 * 2  # 5 steps x 2 layers
