"""The three layered quasi-geostrophic models.

Each model is a parameter record plus a linear potential-vorticity map

    omega_i = lap(psi_i) + sum_j C_ij psi_j  (+ beta0*y for the ocean model)

with a constant inter-layer coupling matrix C, and an evolution equation

    d omega_i / dt + [omega_i, psi_i] = RHS_i

where RHS is zero for the two f-plane models and friction plus Ekman pumping
for the three-layer wind-driven ocean model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    BASIN,
    Grid,
    ScalarField,
    deriv_values,
    jacobian_values,
    laplacian_values,
    solve_helmholtz_basin,
    solve_helmholtz_periodic,
)

MODEL_I = "I"
MODEL_II = "II"
MODEL_III = "III"


@dataclass(frozen=True)
class ModelIParams:
    """Two-layer f-plane point-vortex model.

    rho1 < rho2 are the layer densities (kg/m^3), H1, H2 the thicknesses (m),
    l the Coriolis parameter (1/s), g gravity (m/s^2).
    """

    rho1: float
    rho2: float
    H1: float
    H2: float
    l: float
    g: float

    model = MODEL_I
    nlayers = 2

    def __post_init__(self):
        if not (0 < self.rho1 < self.rho2):
            raise ValueError(f"need 0 < rho1 < rho2, got rho1={self.rho1}, rho2={self.rho2}")
        if self.H1 <= 0 or self.H2 <= 0:
            raise ValueError("layer thicknesses must be positive")
        if self.g <= 0:
            raise ValueError("g must be positive")

    @property
    def alpha2(self):
        return self.rho1 / self.rho2

    def eps(self, i):
        """Stretching coefficient of layer i (1-based)."""
        rho = self.rho1 if i == 1 else self.rho2
        H = self.H1 if i == 1 else self.H2
        return self.l**2 * rho / ((self.rho2 - self.rho1) * self.g * H)


@dataclass(frozen=True)
class ModelIIParams:
    """Simplified two-layer model; lam is the Rossby radius of deformation (m)."""

    lam: float

    model = MODEL_II
    nlayers = 2

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("Rossby radius must be positive")


@dataclass(frozen=True)
class ModelIIIParams:
    """Three-layer wind-driven double-gyre ocean model on a 2L x 2L basin."""

    f0: float
    beta0: float
    rho0: float
    H1: float
    H2: float
    H3: float
    g1p: float
    g2p: float
    A_H: float
    tau0: float
    mu0: float
    alpha: float
    L: float

    model = MODEL_III
    nlayers = 3

    def __post_init__(self):
        for name in ("H1", "H2", "H3", "g1p", "g2p"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.A_H < 0:
            raise ValueError("A_H must be non-negative")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.L <= 0:
            raise ValueError("basin half-width L must be positive")
        mu = math.pi * self.tau0 / (self.rho0 * self.f0 * self.L)
        if abs(mu - self.mu0) > 1e-6 * abs(self.mu0):
            raise ValueError(
                f"mu0 = {self.mu0:g} inconsistent with pi*tau0/(rho0*f0*L) = {mu:g}"
            )

    @classmethod
    def with_derived_L(cls, **kw):
        """Construct with L derived from the mu0 relation L = pi*tau0/(rho0*f0*mu0)."""
        L = math.pi * kw["tau0"] / (kw["rho0"] * kw["f0"] * kw["mu0"])
        return cls(L=L, **kw)


def table1_params(alpha=0.0):
    """The bundled three-layer parameter preset (decimal literals)."""
    return ModelIIIParams.with_derived_L(
        f0=1.0e-4,
        beta0=1.6e-11,
        rho0=1.0e3,
        H1=6.0e2,
        H2=1.4e3,
        H3=2.0e3,
        g1p=2.0e-2,
        g2p=3.0e-2,
        A_H=3.0e2,
        tau0=1.0e-1,
        mu0=2.5e-6,
        alpha=alpha,
    )


def table1_grid(n=64):
    """Square n x n basin grid spanning [-L, L]^2 for the table1 preset."""
    p = table1_params()
    h = 2.0 * p.L / (n - 1)
    return Grid(n, n, h, h, x0=-p.L, y0=-p.L, topology=BASIN)


ModelParams = ModelIParams | ModelIIParams | ModelIIIParams


def coupling_matrix(params: ModelParams) -> np.ndarray:
    """Constant inter-layer coupling matrix C of the PV map."""
    if params.model == MODEL_I:
        e1, e2, a2 = params.eps(1), params.eps(2), params.alpha2
        return np.array([[-e1, e1], [-e2 * a2, e2]])
    if params.model == MODEL_II:
        s = 1.0 / params.lam**2
        return np.array([[-s, s], [s, -s]])
    f2 = params.f0**2
    a1 = f2 / (params.H1 * params.g1p)
    b1 = f2 / (params.H2 * params.g1p)
    b2 = f2 / (params.H2 * params.g2p)
    c2 = f2 / (params.H3 * params.g2p)
    return np.array(
        [
            [-a1, a1, 0.0],
            [b1, -(b1 + b2), b2],
            [0.0, c2, -c2],
        ]
    )


def _beta_field(params, grid):
    if params.model != MODEL_III:
        return 0.0
    _, Y = grid.mesh()
    return params.beta0 * Y


def potential_vorticity_values(params, grid, psi, periodic=None):
    """PV arrays from streamfunction arrays psi (nl, nx, ny)."""
    if periodic is None:
        periodic = grid.periodic
    C = coupling_matrix(params)
    lap = np.stack(
        [laplacian_values(psi[i], grid.dx, grid.dy, periodic) for i in range(len(psi))]
    )
    omega = lap + np.einsum("ij,jxy->ixy", C, np.asarray(psi))
    return omega + _beta_field(params, grid)


def potential_vorticity(params: ModelParams, psi: list[ScalarField]) -> list[ScalarField]:
    """omega_i = lap(psi_i) + coupling (+ beta0*y for the ocean model)."""
    if len(psi) != params.nlayers:
        raise ValueError(f"model {params.model} needs {params.nlayers} layers, got {len(psi)}")
    grid = psi[0].grid
    if any(f.grid != grid for f in psi):
        raise ValueError("all layers must share a grid")
    arr = potential_vorticity_values(params, grid, np.stack([f.values for f in psi]))
    return [ScalarField(grid, a) for a in arr]


def _modal_decomposition(params):
    C = coupling_matrix(params)
    w, V = np.linalg.eig(C)
    scale = max(np.max(np.abs(C)), 1e-300)
    if np.max(np.abs(w.imag)) > 1e-9 * scale:
        raise ValueError("coupling matrix has unexpectedly complex eigenvalues")
    w = w.real
    V = V.real
    w[np.abs(w) < 1e-13 * scale] = 0.0
    return w, V, np.linalg.inv(V)


def invert_pv_values(params, grid, omega, beta_y_included=True):
    """Streamfunction arrays from PV arrays (nl, nx, ny)."""
    omega = np.asarray(omega, dtype=float)
    if params.model == MODEL_III and beta_y_included:
        omega = omega - _beta_field(params, grid)
    w, V, Vinv = _modal_decomposition(params)
    modal = np.einsum("ij,jxy->ixy", Vinv, omega)
    solved = np.empty_like(modal)
    for m, wm in enumerate(w):
        c = -wm  # (lap + wm) phi = rhs  <=>  (lap - c) phi = rhs
        if grid.periodic:
            solved[m] = solve_helmholtz_periodic(modal[m], grid.dx, grid.dy, c)
        else:
            solved[m] = solve_helmholtz_basin(modal[m], grid.dx, grid.dy, c)
    return np.einsum("ij,jxy->ixy", V, solved)


def invert_pv(
    params: ModelParams, omega: list[ScalarField], beta_y_included: bool = True
) -> list[ScalarField]:
    """Invert the PV map by vertical-mode decomposition.

    Diagonalizes the coupling matrix, performs one Helmholtz solve per mode,
    and recombines.  For the ocean model, beta_y_included says omega still
    carries the beta0*y term (subtracted before inversion).  Zero-eigenvalue
    modes are gauged per the grid topology (zero mean / zero walls).
    """
    if len(omega) != params.nlayers:
        raise ValueError(f"model {params.model} needs {params.nlayers} layers, got {len(omega)}")
    grid = omega[0].grid
    psi = invert_pv_values(
        params, grid, np.stack([f.values for f in omega]), beta_y_included
    )
    return [ScalarField(grid, a) for a in psi]


@dataclass(frozen=True)
class LayeredState:
    """Time plus per-layer streamfunctions and potential vorticities."""

    t: float
    psi: tuple[ScalarField, ...]
    omega: tuple[ScalarField, ...]

    @property
    def grid(self):
        return self.psi[0].grid

    @classmethod
    def from_psi(cls, params, psi, t=0.0):
        return cls(t, tuple(psi), tuple(potential_vorticity(params, list(psi))))

    @classmethod
    def from_omega(cls, params, omega, t=0.0, beta_y_included=True):
        psi = invert_pv(params, list(omega), beta_y_included)
        return cls(t, tuple(psi), tuple(omega))

    def psi_array(self):
        return np.stack([f.values for f in self.psi])

    def omega_array(self):
        return np.stack([f.values for f in self.omega])


def consistency_defect(params, state):
    """Relative mismatch between state.omega and PV(state.psi)."""
    w = potential_vorticity_values(params, state.grid, state.psi_array())
    ref = max(np.max(np.abs(w)), 1e-300)
    return float(np.max(np.abs(w - state.omega_array())) / ref)


def wind_stress(params: ModelIIIParams, y):
    """Zonal surface wind stress tau^x(y) in N/m^2 (tau^y = 0)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < -params.L - 1e-9 * params.L) or np.any(y > params.L + 1e-9 * params.L):
        raise ValueError("y outside the basin [-L, L]")
    a, L = params.alpha, params.L
    val = params.tau0 * (
        (1.0 - 2.0 * a * y / L) * np.cos(np.pi * y / L)
        + (2.0 * a / np.pi) * np.sin(np.pi * y / L)
    )
    return val if val.ndim else float(val)


def ekman_pumping(params: ModelIIIParams, y):
    """Ekman pumping profile Omega_e(y) in m/s; equals -(d tau^x/dy)/(rho0 f0)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < -params.L - 1e-9 * params.L) or np.any(y > params.L + 1e-9 * params.L):
        raise ValueError("y outside the basin [-L, L]")
    a, L = params.alpha, params.L
    val = params.mu0 * (1.0 - 2.0 * a * y / L) * np.sin(np.pi * y / L)
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class DiagnosticFields:
    """Interface perturbations and forcing profiles of the ocean model."""

    h1: ScalarField
    h2: ScalarField
    tau_x: np.ndarray
    omega_e: np.ndarray


def diagnostic_fields(params: ModelIIIParams, psi: list[ScalarField]) -> DiagnosticFields:
    grid = psi[0].grid
    h1 = params.f0 * (psi[0].values - psi[1].values) / params.g1p
    h2 = params.f0 * (psi[1].values - psi[2].values) / params.g2p
    y = grid.y()
    return DiagnosticFields(
        ScalarField(grid, h1),
        ScalarField(grid, h2),
        wind_stress(params, y),
        ekman_pumping(params, y),
    )


def _freeslip_biharmonic(values, grid):
    """lap(lap(psi)) with the intermediate vorticity zeroed on basin walls."""
    z = laplacian_values(values, grid.dx, grid.dy, periodic=False)
    z[0, :] = 0.0
    z[-1, :] = 0.0
    z[:, 0] = 0.0
    z[:, -1] = 0.0
    return laplacian_values(z, grid.dx, grid.dy, periodic=False)


def forcing_values(params, grid):
    """Layer-1 forcing field (f0/H1)*Omega_e(y) on the grid (ocean model)."""
    prof = params.f0 / params.H1 * ekman_pumping(params, grid.y())
    return np.broadcast_to(prof[None, :], grid.shape)


def tendency_values(params, grid, psi, omega):
    """d omega_i/dt arrays from psi/omega arrays (nl, nx, ny)."""
    nl = params.nlayers
    out = np.empty_like(np.asarray(omega, dtype=float))
    for i in range(nl):
        out[i] = -jacobian_values(
            omega[i], psi[i], grid.dx, grid.dy, grid.periodic, scheme="arakawa"
        )
    if params.model == MODEL_III:
        for i in range(nl):
            if grid.periodic:
                lap2 = laplacian_values(
                    laplacian_values(psi[i], grid.dx, grid.dy, True), grid.dx, grid.dy, True
                )
            else:
                lap2 = _freeslip_biharmonic(psi[i], grid)
            out[i] += params.A_H * lap2
        out[0] += forcing_values(params, grid)
        if not grid.periodic:
            # walls keep omega = beta0*y for all time
            out[:, 0, :] = 0.0
            out[:, -1, :] = 0.0
            out[:, :, 0] = 0.0
            out[:, :, -1] = 0.0
    return out


def tendency(params: ModelParams, state: LayeredState) -> list[ScalarField]:
    """Right-hand side d omega_i/dt of the evolution equations."""
    if consistency_defect(params, state) > 1e-6:
        raise ValueError("state psi and omega are inconsistent")
    grid = state.grid
    arr = tendency_values(params, grid, state.psi_array(), state.omega_array())
    return [ScalarField(grid, a) for a in arr]


def rhs_frames(params, grid, psi_frames):
    """Model RHS (friction + forcing) for sampled frames, plain central stencils.

    psi_frames: (T, nl, nx, ny).  Zero for the f-plane models.
    """
    if params.model != MODEL_III:
        return np.zeros_like(psi_frames)
    out = np.empty_like(psi_frames)
    for s in range(psi_frames.shape[0]):
        for i in range(params.nlayers):
            lap1 = laplacian_values(psi_frames[s, i], grid.dx, grid.dy, periodic=False)
            out[s, i] = params.A_H * laplacian_values(lap1, grid.dx, grid.dy, periodic=False)
        out[s, 0] += forcing_values(params, grid)
    return out


def pde_residual_frames(params, grid, times, psi_frames, trim=3):
    """Discrete PDE residual d omega/dt + [omega, psi] - RHS of sampled frames.

    All derivatives are plain second-order central differences (one-sided at
    the sample-box edges, which the trim then discards), so the same evaluator
    serves periodic solutions, basin solutions, and analytic samplers.

    psi_frames: (T, nl, nx, ny) at uniformly spaced times (T >= 3).
    Returns {"max": per-layer, "rms": per-layer, "max_overall": float} over the
    interior box.
    """
    times = np.asarray(times, dtype=float)
    psi_frames = np.asarray(psi_frames, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least 3 time samples for central differences")
    dt = np.diff(times)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
        raise ValueError("time samples must be uniformly spaced")
    dt = dt[0]
    T, nl = psi_frames.shape[:2]
    omega = np.stack(
        [
            potential_vorticity_values(params, grid, psi_frames[s], periodic=False)
            for s in range(T)
        ]
    )
    rhs = rhs_frames(params, grid, psi_frames)
    res = []
    for s in range(1, T - 1):
        dwdt = (omega[s + 1] - omega[s - 1]) / (2.0 * dt)
        jac = np.stack(
            [
                jacobian_values(
                    omega[s, i], psi_frames[s, i], grid.dx, grid.dy, False, scheme="central"
                )
                for i in range(nl)
            ]
        )
        res.append(dwdt + jac - rhs[s])
    res = np.stack(res)[:, :, trim:-trim, trim:-trim]
    mx = np.max(np.abs(res), axis=(0, 2, 3))
    rms = np.sqrt(np.mean(res**2, axis=(0, 2, 3)))
    return {"max": mx, "rms": rms, "max_overall": float(np.max(mx))}
