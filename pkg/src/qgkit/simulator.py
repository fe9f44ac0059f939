"""Time integration of the layered models.

Prognostic variable is the per-layer potential vorticity; the streamfunction
is recovered by PV inversion after every Runge-Kutta substage.  The stepper is
the explicit three-stage strong-stability-preserving Runge-Kutta scheme
(order 3), and advection uses the enstrophy/energy-neutral Jacobian, so the
unforced inviscid models conserve their quadratic invariants to the time
integrator's accuracy.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qgf
from .grid import (
    Grid,
    ScalarField,
    deriv_values,
    laplacian_values,
    random_bandlimited_values,
)
from .models import (
    MODEL_III,
    LayeredState,
    ModelParams,
    invert_pv_values,
    potential_vorticity_values,
    tendency_values,
)

BLOWUP_LIMIT = 1e15


class BlowUpError(RuntimeError):
    """Integration produced non-finite or absurdly large values."""

    def __init__(self, step_index, max_abs):
        super().__init__(f"blow-up at step {step_index}: max |omega| = {max_abs:.3e}")
        self.step_index = step_index
        self.max_abs = max_abs


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    initial is either a LayeredState or a named preset: "rest" or
    ("random-bandlimited", seed, kmax, amplitude) with amplitude the peak |psi|.
    """

    params: ModelParams
    grid: Grid
    dt: float
    nsteps: int
    output_every: int = 1
    initial: object = "rest"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.nsteps < 0:
            raise ValueError("nsteps must be non-negative")
        if self.output_every < 1:
            raise ValueError("output_every must be >= 1")


@dataclass
class Trajectory:
    """Snapshots at the output cadence plus per-step diagnostics rows."""

    params: ModelParams
    grid: Grid
    states: list[LayeredState] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    def psi_frames(self):
        """(T, nl, nx, ny) array of streamfunction snapshots."""
        return np.stack([s.psi_array() for s in self.states])

    def write_snapshots(self, outdir, prefix="snap"):
        paths = []
        for k, s in enumerate(self.states):
            path = f"{outdir}/{prefix}_{k:06d}.qgf"
            qgf.write_snapshot(path, self.grid, s.t, list(s.psi_array()))
            paths.append(path)
        return paths

    def write_diagnostics_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "layer", "energy", "enstrophy", "mean_pv"])
            for row in self.diagnostics:
                for i in range(self.params.nlayers):
                    w.writerow(
                        [
                            row["step"],
                            repr(row["time"]),
                            i + 1,
                            repr(row["energy"][i]),
                            repr(row["enstrophy"][i]),
                            repr(row["mean_pv"][i]),
                        ]
                    )
        return path


def grad_max(grid, psi):
    """max over layers and points of |grad psi|."""
    gmax = 0.0
    for p in np.asarray(psi):
        px = deriv_values(p, grid.dx, "x", 1, grid.periodic)
        py = deriv_values(p, grid.dy, "y", 1, grid.periodic)
        gmax = max(gmax, float(np.max(np.sqrt(px * px + py * py))))
    return gmax


def diagnostics(params: ModelParams, state: LayeredState) -> dict:
    """Per-layer energy and enstrophy, mean PV, and max |grad psi|.

    energy_i = 0.5 sum |grad psi_i|^2 dA, realized as -0.5 sum psi_i lap(psi_i) dA
    (the compact-difference gradient form; it is the quadratic form the
    enstrophy-neutral Jacobian conserves, and second-order accurate).
    """
    grid = state.grid
    dA = grid.cell_area
    psi = state.psi_array()
    omega = state.omega_array()
    energy, enstrophy, mean_pv = [], [], []
    for i in range(params.nlayers):
        lap = laplacian_values(psi[i], grid.dx, grid.dy, grid.periodic)
        energy.append(-0.5 * float(np.sum(psi[i] * lap)) * dA)
        enstrophy.append(0.5 * float(np.sum(omega[i] ** 2)) * dA)
        mean_pv.append(float(np.mean(omega[i])))
    return {
        "energy": energy,
        "enstrophy": enstrophy,
        "mean_pv": mean_pv,
        "grad_max": grad_max(grid, psi),
    }


def _apply_walls(params, grid, omega):
    """Re-impose the free-slip wall value omega = beta0*y on the ocean basin."""
    if params.model != MODEL_III or grid.periodic:
        return omega
    by = params.beta0 * grid.y()
    omega[:, 0, :] = by[None, :]
    omega[:, -1, :] = by[None, :]
    bx0 = params.beta0 * grid.y0
    bx1 = params.beta0 * (grid.y0 + (grid.ny - 1) * grid.dy)
    omega[:, :, 0] = bx0
    omega[:, :, -1] = bx1
    return omega


def step_values(params, grid, psi, omega, dt):
    """One SSP-RK3 step on raw arrays; returns (psi, omega) at t + dt.

    Raises BlowUpError (with step_index -1, filled in by the caller) as soon
    as any substage produces non-finite or absurdly large vorticity.
    """

    def stage(w):
        mx = float(np.max(np.abs(w)))
        if not np.isfinite(mx) or mx > BLOWUP_LIMIT:
            raise BlowUpError(-1, mx)
        w = _apply_walls(params, grid, w)
        p = invert_pv_values(params, grid, w)
        return p, w

    p0, w0 = psi, omega
    k1 = tendency_values(params, grid, p0, w0)
    p1, w1 = stage(w0 + dt * k1)
    k2 = tendency_values(params, grid, p1, w1)
    p2, w2 = stage(0.75 * w0 + 0.25 * (w1 + dt * k2))
    k3 = tendency_values(params, grid, p2, w2)
    pn, wn = stage(w0 / 3.0 + (2.0 / 3.0) * (w2 + dt * k3))
    return pn, wn


def step(params: ModelParams, state: LayeredState, dt: float) -> LayeredState:
    """Advance a state by one SSP-RK3 step."""
    grid = state.grid
    psi, omega = step_values(params, grid, state.psi_array(), state.omega_array(), dt)
    return LayeredState(
        state.t + dt,
        tuple(ScalarField(grid, p) for p in psi),
        tuple(ScalarField(grid, w) for w in omega),
    )


def initial_state(params, grid, initial, t=0.0) -> LayeredState:
    """Materialize an initial state from a LayeredState or a named preset."""
    if isinstance(initial, LayeredState):
        return initial
    if initial == "rest":
        psi = np.zeros((params.nlayers, grid.nx, grid.ny))
    elif isinstance(initial, tuple) and initial and initial[0] == "random-bandlimited":
        _, seed, kmax, amplitude = initial
        rng = np.random.default_rng(seed)
        psi = np.stack(
            [
                random_bandlimited_values(grid, kmax, amplitude, rng, window=not grid.periodic)
                for _ in range(params.nlayers)
            ]
        )
    else:
        raise ValueError(f"unknown initial-state preset {initial!r}")
    omega = potential_vorticity_values(params, grid, psi)
    return LayeredState(
        t,
        tuple(ScalarField(grid, p) for p in psi),
        tuple(ScalarField(grid, w) for w in omega),
    )


def cfl_dt(grid, state):
    """Advective CFL estimate 0.5 * min(dx, dy) / max |grad psi|."""
    g = grad_max(grid, state.psi_array())
    if g == 0.0:
        return np.inf
    return 0.5 * min(grid.dx, grid.dy) / g


def run(config: SimConfig) -> Trajectory:
    """Integrate per config; deterministic given the config (presets are seeded)."""
    params, grid = config.params, config.grid
    state = initial_state(params, grid, config.initial)
    limit = cfl_dt(grid, state)
    if config.dt > limit:
        warnings.warn(
            f"dt = {config.dt:g} exceeds the advective CFL estimate {limit:g} "
            "at initialization",
            stacklevel=2,
        )
    traj = Trajectory(params, grid)
    psi, omega = state.psi_array(), state.omega_array()
    t = state.t

    def record(step_index, psi, omega, t, snapshot):
        st = LayeredState(
            t,
            tuple(ScalarField(grid, p) for p in psi),
            tuple(ScalarField(grid, w) for w in omega),
        )
        d = diagnostics(params, st)
        d.update(step=step_index, time=t)
        traj.diagnostics.append(d)
        if snapshot:
            traj.states.append(st)

    record(0, psi, omega, t, snapshot=True)
    for n in range(1, config.nsteps + 1):
        try:
            psi, omega = step_values(params, grid, psi, omega, config.dt)
        except BlowUpError as err:
            raise BlowUpError(n, err.max_abs) from None
        t = state.t + n * config.dt
        mx = float(np.max(np.abs(omega)))
        if not np.isfinite(mx) or mx > BLOWUP_LIMIT:
            raise BlowUpError(n, mx)
        record(n, psi, omega, t, snapshot=(n % config.output_every == 0))
    return traj
