import numpy as np
import pytest

from qgkit.grid import BASIN, Grid
from qgkit.models import ModelIIParams, ModelIParams, table1_params
from qgkit.reduction import (
    Profile,
    assemble_invariant_solution,
    build_reduced,
    characteristic_roots,
    closed_form_states,
    integrate_reduced,
    pde_residual,
    rk4,
)

MODEL_I = ModelIParams(rho1=1.0, rho2=2.0, H1=1.0, H2=1.0, l=1.0, g=1.0)
MODEL_II = ModelIIParams(lam=1.0)
MU = (1.0, 0.5, 1.0, 1.0)


def residual_grid(n, length=1.0):
    h = length / (n - 1)
    return Grid(n, n, h, h, topology=BASIN)


class TestBuildReduced:
    def test_model1_coefficients(self):
        sys = build_reduced(MODEL_I, MU)
        assert sys.n == 6
        eq1, eq2 = sys.equations
        p, (mu1, mu2, mu3, mu4) = MODEL_I, MU
        l2 = p.l**2
        assert eq1.coeffs["1"] == (mu1 - mu2) * l2 * p.rho1
        assert eq1.coeffs["R'"] == -mu4 * l2 * p.rho1
        assert eq1.coeffs["S'"] == mu3 * l2 * p.rho1
        assert eq1.coeffs["R'''"] == -(p.rho1 - p.rho2) * p.g * p.H1 * mu3
        assert eq2.coeffs["1"] == mu1 * l2 * p.rho1 - mu2 * l2 * p.rho2
        assert eq2.coeffs["S'''"] == -(p.rho1 - p.rho2) * p.g * p.H2 * mu4
        # inhomogeneity present in equation 1
        assert eq1.coeffs["1"] == pytest.approx(0.5)

    def test_model2_coefficients(self):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        assert sys.n == 6
        eq1, eq2 = sys.equations
        lam2 = MODEL_II.lam**2
        assert eq1.coeffs == {"N'": 1.0, "M'": -1.0, "N'''": -lam2}
        assert eq2.coeffs == {"N'": -1.0, "M'": 1.0, "M'''": -lam2}

    def test_model3_coefficients(self):
        p = table1_params()
        k1, k2, k3 = 0.5, 1.0, 1.5
        sys = build_reduced(p, (k1, k2, k3))
        assert sys.n == 10
        eq1, eq2, eq3 = sys.equations
        dr12 = -p.rho0 * p.g1p
        dr23 = -p.rho0 * p.g2p
        f2, L, r0 = p.f0**2, p.L, p.rho0
        assert eq1.coeffs["V'"] == -f2 * L**2 * k1 * r0**2
        assert eq1.coeffs["U'"] == k2 * f2 * L**2 * r0**2
        assert eq1.coeffs["1"] == dr12 * p.beta0 * p.H1 * L**2 * k1 * r0
        assert eq1.coeffs["U'''"] == dr12 * p.H1 * L**2 * k1 * r0
        assert eq1.coeffs["U''''"] == -dr12 * p.A_H * p.H1 * L**2 * r0
        # wind forcing carries -L*pi*tau0*sin(pi s/L) (alpha = 0 here)
        s = 0.5 * L
        assert eq1.forcing(s) == pytest.approx(dr12 * (-L * np.pi * p.tau0))
        assert eq2.coeffs["V'"] == f2 * (k2 - k1) * r0 * dr23
        assert eq2.coeffs["W'"] == k2 * f2 * dr12 * r0
        assert eq2.coeffs["U'"] == -k2 * dr23 * f2 * r0
        assert eq2.coeffs["V'''"] == -k2 * dr23 * p.H2 * dr12
        assert eq3.coeffs["V'"] == -p.H2 * f2 * k3 * r0
        assert eq3.coeffs["W'"] == f2 * (k2 * p.H3 - p.H3 * k3 + p.H2 * k3) * r0
        assert eq3.coeffs["W'''"] == p.H3 * p.H2 * k3 * dr23

    def test_first_order_form_matches_scalar_form(self):
        # expanding y' = A y + b back to scalar form reproduces each equation
        rng = np.random.default_rng(4)
        for sys in (
            build_reduced(MODEL_I, MU),
            build_reduced(MODEL_II, (1.0, 2.0)),
            build_reduced(table1_params(), (0.5, 1.0, 1.5)),
        ):
            y = rng.standard_normal(sys.n)
            s = 0.3 * (table1_params().L if sys.model == "III" else 1.0)
            dy = sys.rhs(s, y)
            labels = sys.labels
            for eq in sys.equations:
                base = eq.leading.rstrip("'")
                order = len(eq.leading) - len(base)
                row = labels.index(base) + order - 1
                lead_val = dy[row]
                acc = eq.coeffs.get("1", 0.0) + (eq.forcing(s) if eq.forcing else 0.0)
                for term, c in eq.coeffs.items():
                    if term in ("1", eq.leading):
                        continue
                    acc += c * y[labels.index(term)]
                acc += eq.coeffs[eq.leading] * lead_val
                scale = max(abs(eq.coeffs[eq.leading] * lead_val), 1.0)
                assert abs(acc) < 1e-12 * scale

    def test_degenerate_constants_rejected(self):
        with pytest.raises(ValueError, match="mu3"):
            build_reduced(MODEL_I, (1.0, 0.5, 0.0, 1.0))
        with pytest.raises(ValueError, match="sigma2"):
            build_reduced(MODEL_II, (1.0, 0.0))
        with pytest.raises(ValueError, match="kappa2"):
            build_reduced(table1_params(), (0.5, 0.0, 1.5))


class TestIntegrate:
    def test_zero_initial_zero_forcing(self):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        prof = integrate_reduced(sys, y0=np.zeros(6), s_range=(0.0, 1.0), h=0.01)
        assert np.max(np.abs(prof.states)) == 0.0

    def test_rk4_scalar_benchmark(self):
        _, out = rk4(lambda s, y: y, [1.0], 0.0, 1.0, 1e-2)
        assert abs(out[-1, 0] - np.e) < 1e-8

    def test_rk4_order(self):
        # observed temporal order >= 3.9 on a smooth system
        rhs = lambda s, y: np.array([y[1], -np.sin(y[0]) + np.cos(3.0 * s)])
        ref = rk4(rhs, [0.3, -0.2], 0.0, 2.0, 1e-4)[1][-1]
        errs = [np.max(np.abs(rk4(rhs, [0.3, -0.2], 0.0, 2.0, h)[1][-1] - ref))
                for h in (0.02, 0.01)]
        assert np.log2(errs[0] / errs[1]) >= 3.9

    def test_matches_matrix_exponential(self):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        y0 = sys.default_y0()
        prof = integrate_reduced(sys, y0=y0, s_range=(0.0, 1.0), h=1e-3)
        exact = closed_form_states(sys, y0, prof.s[::100])
        got = prof.states[::100]
        ref = np.max(np.abs(exact))
        assert np.max(np.abs(got - exact)) <= 1e-6 * ref

    def test_model1_closed_form_with_constant_forcing(self):
        sys = build_reduced(MODEL_I, MU)
        y0 = sys.default_y0()
        prof = integrate_reduced(sys, y0=y0, s_range=(0.0, 1.0), h=1e-3)
        exact = closed_form_states(sys, y0, prof.s[::100])
        assert np.max(np.abs(prof.states[::100] - exact)) <= 1e-8 * np.max(np.abs(exact))

    def test_profile_csv(self, tmp_path):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        prof = integrate_reduced(sys, s_range=(0.0, 0.5), h=0.05)
        path = prof.write_csv(tmp_path / "profile.csv")
        lines = open(path).read().splitlines()
        assert lines[0] == "s,M,N"
        assert len(lines) == 12


class TestCharacteristicRoots:
    def test_model2_real_pair(self):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        roots = characteristic_roots(sys)
        assert len(roots) == 6
        expected = np.sort([0, 0, 0, 0, np.sqrt(2.0), -np.sqrt(2.0)])
        assert np.allclose(np.sort(roots.real), expected, atol=1e-10)
        assert np.max(np.abs(roots.imag)) < 1e-10

    def test_model2_imaginary_pair(self):
        sys = build_reduced(ModelIIParams(lam=1.0), (1.0, -1.0))
        roots = characteristic_roots(sys)
        nz = roots[np.abs(roots) > 1e-8]
        assert len(nz) == 2
        assert np.max(np.abs(nz.real)) < 1e-10
        assert np.allclose(np.sort(nz.imag), [-np.sqrt(2.0), np.sqrt(2.0)], atol=1e-10)

    def test_root_count_equals_dimension(self):
        for sys in (
            build_reduced(MODEL_I, MU),
            build_reduced(MODEL_II, (2.0, 3.0)),
            build_reduced(table1_params(), (0.5, 1.0, 1.5)),
        ):
            assert len(characteristic_roots(sys)) == sys.n

    def test_determinant_identity_grid(self):
        # nonzero roots satisfy r^2 = (s1^2 + s2^2)/(s1 s2 lam^2)
        for s1 in (-2.0, -1.0, 0.5, 1.0, 2.0):
            for s2 in (-1.5, -0.5, 1.0, 1.5, 3.0):
                for lam in (0.5, 1.0, 2.0):
                    sys = build_reduced(ModelIIParams(lam=lam), (s1, s2))
                    roots = characteristic_roots(sys)
                    nz = roots[np.abs(roots) > 1e-6]
                    assert len(nz) == 2
                    target = (s1**2 + s2**2) / (s1 * s2 * lam**2)
                    for r in nz:
                        assert abs(r**2 - target) < 1e-10 * max(abs(target), 1.0)


class TestAssembleAndResidual:
    def test_model1_linear_exact(self):
        # R = S = 0, mu1 = mu2 = 0: psi_i linear in x; residual at roundoff
        params = MODEL_I
        sys = build_reduced(params, (0.0, 0.0, 1.0, 2.0))
        s = np.linspace(-0.1, 1.1, 61)
        prof = Profile(sys, s, np.zeros((61, 6)))
        sol = assemble_invariant_solution(sys, prof)
        g = residual_grid(32)
        res = pde_residual(params, sol, g, [0.0, 0.01, 0.02])
        assert res["max_overall"] <= 1e-10

    def test_model2_sampler_formula(self):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        prof = integrate_reduced(sys, s_range=(-0.1, 1.1), h=0.01)
        sol = assemble_invariant_solution(sys, prof)
        x = np.array([0.2, 0.5])
        vals = sol.sample(0.0, x, np.zeros_like(x))
        m = prof.spline("M")(x)
        assert np.allclose(vals[0], m, atol=1e-12)

    def test_model3_rest_profile_formula(self):
        p = table1_params()
        sys = build_reduced(p, (0.5, 1.0, 1.5))
        s = np.linspace(-p.L, p.L, 41)
        prof = Profile(sys, s, np.zeros((41, 10)))
        sol = assemble_invariant_solution(sys, prof)
        X = np.array([[0.0, 1.0e5]])
        Y = np.zeros_like(X)
        t = 7.0
        vals = sol.sample(t, X, Y)
        for k, kap in enumerate((0.5, 1.0, 1.5)):
            assert np.allclose(vals[k], t + kap * X, rtol=1e-12)

    def test_sampling_outside_profile_rejected(self):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        prof = integrate_reduced(sys, s_range=(0.0, 0.5), h=0.01)
        sol = assemble_invariant_solution(sys, prof)
        with pytest.raises(ValueError, match="profile range"):
            sol.sample(0.0, np.array([0.9]), np.array([0.0]))

    def residual_of_model2(self, n, corrupt=1.0):
        sys = build_reduced(MODEL_II, (1.0, 1.0))
        # asymmetric initial state so the baroclinic (exponential) modes are
        # excited; the default symmetric one degenerates to M = N = x here
        y0 = np.array([0.0, 1.0, 0.5, 0.0, -0.3, 0.2])
        prof = integrate_reduced(sys, y0=y0, s_range=(-0.1, 1.1), h=1.2 / 1200)
        if corrupt != 1.0:
            states = prof.states.copy()
            for lab in ("M", "M'", "M''"):
                states[:, sys.labels.index(lab)] *= corrupt
            prof = Profile(sys, prof.s, states)
        sol = assemble_invariant_solution(sys, prof)
        g = residual_grid(n)
        trim = 3 * (n // 32)
        res = pde_residual(MODEL_II, sol, g, [0.0, 0.005, 0.01], trim=trim)
        return res["max_overall"]

    def test_model2_residual_convergence(self):
        r32 = self.residual_of_model2(32)
        r64 = self.residual_of_model2(64)
        r128 = self.residual_of_model2(128)
        assert np.log2(r32 / r64) >= 1.9
        assert np.log2(r64 / r128) >= 1.9

    def test_corrupted_profile_detected(self):
        clean = self.residual_of_model2(64)
        bad = self.residual_of_model2(64, corrupt=1.1)
        assert bad >= 100.0 * clean

    def test_model1_residual_convergence(self):
        params = MODEL_I
        sys = build_reduced(params, MU)
        prof = integrate_reduced(sys, s_range=(-0.1, 1.1), h=1.2 / 1200)
        sol = assemble_invariant_solution(sys, prof)
        res = []
        for n in (32, 64):
            g = residual_grid(n)
            r = pde_residual(params, sol, g, [0.0, 0.005, 0.01], trim=3 * (n // 32))
            res.append(r["max_overall"])
        assert np.log2(res[0] / res[1]) >= 1.9
