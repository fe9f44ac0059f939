"""Symmetry-reduced ODE systems and the invariant solutions they generate.

Each model's travelling/shear-invariant ansatz turns the PDE system into a
constant-coefficient linear ODE system in one variable.  This module builds
those systems as explicit scalar coefficient tables, converts them to first
order, integrates them (classical RK4), analyzes their characteristic roots,
assembles the invariant streamfunctions, and closes the loop with a discrete
PDE-residual oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .models import (
    MODEL_I,
    MODEL_II,
    MODEL_III,
    ModelParams,
    pde_residual_frames,
)
from .solutions import AnalyticSolution, sample_frames

BLOWUP_LIMIT = 1e15

# state layout per model: label of each first-order component
STATE_LABELS = {
    MODEL_I: ("R", "R'", "R''", "S", "S'", "S''"),
    MODEL_II: ("M", "M'", "M''", "N", "N'", "N''"),
    MODEL_III: ("U", "U'", "U''", "U'''", "V", "V'", "V''", "W", "W'", "W''"),
}
UNKNOWNS = {
    MODEL_I: ("R", "S"),
    MODEL_II: ("M", "N"),
    MODEL_III: ("U", "V", "W"),
}
FIRST_DERIV_INDEX = {
    MODEL_I: (1, 4),
    MODEL_II: (1, 4),
    MODEL_III: (1, 5, 8),
}


@dataclass(frozen=True)
class ScalarEquation:
    """One scalar ODE: sum coeffs[term]*term + forcing(s) = 0.

    Terms name derivatives like "R'", "S'''"; "1" is the constant term.
    leading is the highest-derivative term, whose coefficient must not vanish.
    """

    coeffs: dict
    leading: str
    forcing: object = None  # callable s -> value, or None

    def solve_leading(self, state_value, s, labels):
        """Value of the leading derivative given the lower-order state."""
        acc = self.coeffs.get("1", 0.0)
        if self.forcing is not None:
            acc = acc + self.forcing(s)
        for term, c in self.coeffs.items():
            if term in ("1", self.leading):
                continue
            acc = acc + c * state_value[labels.index(term)]
        return -acc / self.coeffs[self.leading]


@dataclass(frozen=True)
class ReducedSystem:
    """First-order form y' = A y + b(s) of a model's reduced ODE system."""

    model: str
    params: ModelParams
    constants: dict
    svar: str
    equations: tuple[ScalarEquation, ...]
    A: np.ndarray = field(repr=False)
    b_const: np.ndarray = field(repr=False)
    forcing_rows: tuple  # (row index, callable) pairs

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def labels(self):
        return STATE_LABELS[self.model]

    @property
    def unknowns(self):
        return UNKNOWNS[self.model]

    def b(self, s):
        out = self.b_const.copy()
        for row, fn in self.forcing_rows:
            out[row] += fn(s)
        return out

    def rhs(self, s, y):
        return self.A @ y + self.b(s)

    def default_y0(self):
        y0 = np.zeros(self.n)
        y0[list(FIRST_DERIV_INDEX[self.model])] = 1.0
        return y0


def _require_nonzero(name, value):
    if value == 0:
        raise ValueError(f"degenerate constant: {name} must be nonzero "
                         "(it divides a leading derivative)")


def _model1_equations(p, mu):
    mu1, mu2, mu3, mu4 = mu
    _require_nonzero("mu3", mu3)
    _require_nonzero("mu4", mu4)
    l2 = p.l**2
    eq1 = ScalarEquation(
        coeffs={
            "1": (mu1 - mu2) * l2 * p.rho1,
            "R'": -mu4 * l2 * p.rho1,
            "S'": mu3 * l2 * p.rho1,
            "R'''": -(p.rho1 - p.rho2) * p.g * p.H1 * mu3,
        },
        leading="R'''",
    )
    eq2 = ScalarEquation(
        coeffs={
            "1": mu1 * l2 * p.rho1 - mu2 * l2 * p.rho2,
            "R'": -mu4 * l2 * p.rho1,
            "S'": mu3 * l2 * p.rho1,
            "S'''": -(p.rho1 - p.rho2) * p.g * p.H2 * mu4,
        },
        leading="S'''",
    )
    return (eq1, eq2)


def _model2_equations(p, sigma):
    s1, s2 = sigma
    _require_nonzero("sigma1", s1)
    _require_nonzero("sigma2", s2)
    lam2 = p.lam**2
    eq1 = ScalarEquation(
        coeffs={"N'": s1, "M'": -s2, "N'''": -s2 * lam2},
        leading="N'''",
    )
    eq2 = ScalarEquation(
        coeffs={"N'": -s1, "M'": s2, "M'''": -s1 * lam2},
        leading="M'''",
    )
    return (eq1, eq2)


def _model3_equations(p, kappa):
    k1, k2, k3 = kappa
    _require_nonzero("A_H", p.A_H)
    _require_nonzero("kappa2", k2)
    _require_nonzero("kappa3", k3)
    # density differences via the printed reduced-gravity relation
    dr12 = -p.rho0 * p.g1p  # rho1 - rho2
    dr23 = -p.rho0 * p.g2p  # rho2 - rho3
    f2, L, r0 = p.f0**2, p.L, p.rho0
    L2 = L * L

    def wind(s):
        return dr12 * (-L * np.pi * p.tau0 + 2.0 * np.pi * s * p.alpha * p.tau0) * np.sin(
            np.pi * s / L
        )

    eq1 = ScalarEquation(
        coeffs={
            "V'": -f2 * L2 * k1 * r0**2,
            "U'": k2 * f2 * L2 * r0**2,
            "1": dr12 * p.beta0 * p.H1 * L2 * k1 * r0,
            "U'''": dr12 * p.H1 * L2 * k1 * r0,
            "U''''": -dr12 * p.A_H * p.H1 * L2 * r0,
        },
        leading="U''''",
        forcing=wind,
    )
    eq2 = ScalarEquation(
        coeffs={
            "V'": f2 * (k2 - k1) * r0 * dr23,
            "W'": k2 * f2 * dr12 * r0,
            "U'": -k2 * dr23 * f2 * r0,
            "1": -k2 * dr23 * p.H2 * dr12 * p.beta0,
            "V'''": -k2 * dr23 * p.H2 * dr12,
        },
        leading="V'''",
    )
    eq3 = ScalarEquation(
        coeffs={
            "V'": -p.H2 * f2 * k3 * r0,
            "W'": f2 * (k2 * p.H3 - p.H3 * k3 + p.H2 * k3) * r0,
            "1": p.H3 * p.H2 * k3 * dr23 * p.beta0,
            "W'''": p.H3 * p.H2 * k3 * dr23,
        },
        leading="W'''",
    )
    return (eq1, eq2, eq3)


def build_reduced(params: ModelParams, constants) -> ReducedSystem:
    """Build a model's reduced ODE system.

    constants: Model I: (mu1, mu2, mu3, mu4); Model II: (sigma1, sigma2);
    Model III: (kappa1, kappa2, kappa3).  The independent variable is y for
    Models I and III, x for Model II.
    """
    constants = tuple(float(c) for c in constants)
    if params.model == MODEL_I:
        if len(constants) != 4:
            raise ValueError("Model I needs (mu1, mu2, mu3, mu4)")
        eqs = _model1_equations(params, constants)
        svar = "y"
        cdict = dict(zip(("mu1", "mu2", "mu3", "mu4"), constants))
    elif params.model == MODEL_II:
        if len(constants) != 2:
            raise ValueError("Model II needs (sigma1, sigma2)")
        eqs = _model2_equations(params, constants)
        svar = "x"
        cdict = dict(zip(("sigma1", "sigma2"), constants))
    elif params.model == MODEL_III:
        if len(constants) != 3:
            raise ValueError("Model III needs (kappa1, kappa2, kappa3)")
        eqs = _model3_equations(params, constants)
        svar = "y"
        cdict = dict(zip(("kappa1", "kappa2", "kappa3"), constants))
    else:
        raise ValueError(f"unknown model {params.model!r}")

    labels = STATE_LABELS[params.model]
    n = len(labels)
    A = np.zeros((n, n))
    b_const = np.zeros(n)
    forcing_rows = []
    # chain rows: each label whose successor is its derivative
    lead_rows = {}
    for eq in eqs:
        base = eq.leading.rstrip("'")
        order = len(eq.leading) - len(base)
        # row of the highest stored derivative of this unknown
        row = labels.index(base) + order - 1
        lead_rows[row] = eq
    for i, lab in enumerate(labels):
        if i in lead_rows:
            eq = lead_rows[i]
            lead_c = eq.coeffs[eq.leading]
            for term, c in eq.coeffs.items():
                if term == eq.leading:
                    continue
                if term == "1":
                    b_const[i] -= c / lead_c
                else:
                    A[i, labels.index(term)] -= c / lead_c
            if eq.forcing is not None:
                fn = eq.forcing
                forcing_rows.append((i, lambda s, fn=fn, lc=lead_c: -fn(s) / lc))
        else:
            A[i, i + 1] = 1.0
    return ReducedSystem(
        params.model, params, cdict, svar, tuple(eqs), A, b_const, tuple(forcing_rows)
    )


@dataclass(frozen=True)
class Profile:
    """Reduced unknowns (and stored derivatives) sampled on a uniform 1-D mesh."""

    system: ReducedSystem
    s: np.ndarray
    states: np.ndarray  # (N, n)

    def column(self, label):
        return self.states[:, self.system.labels.index(label)]

    def spline(self, label):
        return CubicSpline(self.s, self.column(label))

    def write_csv(self, path):
        names = self.system.unknowns
        with open(path, "w", newline="") as fh:
            fh.write("s," + ",".join(names) + "\n")
            cols = [self.column(u) for u in names]
            for k in range(len(self.s)):
                fh.write(
                    ",".join([repr(float(self.s[k]))] + [repr(float(c[k])) for c in cols])
                    + "\n"
                )
        return path


def rk4(rhs, y0, s0, s1, h):
    """Classical fixed-step RK4; returns (s values, states).

    Global error O(h^4) on smooth systems; halts on blow-up (|y| > 1e15).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    s0, s1 = float(s0), float(s1)
    if not np.isfinite([s0, s1]).all() or s1 <= s0:
        raise ValueError("integration range must be finite with s1 > s0")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    nsteps = int(round((s1 - s0) / h))
    h = (s1 - s0) / nsteps
    out = np.empty((nsteps + 1, len(y)))
    svals = s0 + h * np.arange(nsteps + 1)
    out[0] = y
    for k in range(nsteps):
        s = svals[k]
        k1 = rhs(s, y)
        k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(s + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y).all() or np.max(np.abs(y)) > BLOWUP_LIMIT:
            raise RuntimeError(f"blow-up at s = {svals[k + 1]:g}")
        out[k + 1] = y
    return svals, out


def integrate_reduced(system: ReducedSystem, y0=None, s_range=(0.0, 1.0), h=1e-2) -> Profile:
    """Fixed-step classical RK4 over s_range.

    Default initial state: zeros except unit first derivatives.
    """
    y = system.default_y0() if y0 is None else y0
    svals, out = rk4(system.rhs, y, s_range[0], s_range[1], h)
    return Profile(system, svals, out)


def characteristic_roots(system: ReducedSystem, snap_tol=1e-7):
    """Eigenvalues of the homogeneous first-order system, sorted (real, imag).

    The structural zero roots of these systems sit in defective Jordan blocks,
    where eigensolvers return O(eps^(1/2)) perturbations; magnitudes below
    snap_tol * max(1, |A|) are snapped to exact zero.
    """
    roots = np.linalg.eigvals(system.A)
    lim = snap_tol * max(1.0, float(np.max(np.abs(system.A))))
    roots[np.abs(roots) < lim] = 0.0
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


def closed_form_states(system: ReducedSystem, y0, s_values):
    """Matrix-exponential solution for systems with constant inhomogeneity.

    Independent oracle for the RK4 path (augmented-state expm).  Rejects
    systems with s-dependent forcing.
    """
    if system.forcing_rows:
        raise ValueError("closed form available only for constant inhomogeneity")
    n = system.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = system.A
    M[:n, n] = system.b_const
    z0 = np.concatenate([np.asarray(y0, dtype=float), [1.0]])
    out = np.empty((len(s_values), n))
    for k, s in enumerate(np.asarray(s_values, dtype=float)):
        out[k] = (expm(M * s) @ z0)[:n]
    return out


def assemble_invariant_solution(
    system: ReducedSystem, profile: Profile, time_function=None
) -> AnalyticSolution:
    """Invariant streamfunctions from a reduced profile.

    Model I:  psi_i = mu_i t + mu_{i+2} x + {R,S}(y)
    Model II: psi_i = T(t) + sigma_i y + {M,N}(x)
    Model III:psi_i = T(t) + kappa_i x + {U,V,W}(y)
    with T the supplied antiderivative of the arbitrary time function
    (default T(t) = t).
    """
    if time_function is None:
        def time_function(t):
            return t

    model = system.model
    c = system.constants
    splines = [profile.spline(u) for u in system.unknowns]
    smin, smax = profile.s[0], profile.s[-1]

    def check_range(v):
        lim = 1e-9 * max(abs(smin), abs(smax), 1.0)
        if np.min(v) < smin - lim or np.max(v) > smax + lim:
            raise ValueError(
                f"sampling outside the profile range [{smin:g}, {smax:g}]"
            )

    if model == MODEL_I:
        def sample(t, X, Y):
            check_range(Y)
            return [
                c["mu1"] * t + c["mu3"] * X + splines[0](Y),
                c["mu2"] * t + c["mu4"] * X + splines[1](Y),
            ]
    elif model == MODEL_II:
        def sample(t, X, Y):
            check_range(X)
            T = time_function(t)
            return [
                T + c["sigma1"] * Y + splines[0](X),
                T + c["sigma2"] * Y + splines[1](X),
            ]
    else:
        def sample(t, X, Y):
            check_range(Y)
            T = time_function(t)
            return [
                T + c["kappa1"] * X + splines[0](Y),
                T + c["kappa2"] * X + splines[1](Y),
                T + c["kappa3"] * X + splines[2](Y),
            ]

    return AnalyticSolution(system.params.nlayers, sample)


def pde_residual(params: ModelParams, sol, grid, times, trim=3):
    """Discrete PDE residual of a space-time solution on grid x times.

    Central differences in all variables; reports {"max", "rms"} per layer
    over interior points (see models.pde_residual_frames).
    """
    frames = sample_frames(sol, grid, times)
    return pde_residual_frames(params, grid, times, frames, trim=trim)
