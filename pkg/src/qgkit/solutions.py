"""Space-time solution samplers.

Two kinds of solution feed the symmetry and residual machinery: analytic
samplers (closed-form fields, evaluated exactly anywhere) and sampled
solutions (simulation snapshots, interpolated bicubically in space and
cubically in time).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .grid import Grid


class CoverageError(ValueError):
    """A transformed solution needs samples outside the sampled domain."""

    def __init__(self, message, uncovered_fraction):
        super().__init__(f"{message} (uncovered fraction {uncovered_fraction:.3g})")
        self.uncovered_fraction = uncovered_fraction


@dataclass(frozen=True)
class AnalyticSolution:
    """Closed-form space-time solution: sample(t, X, Y) -> list of layer arrays."""

    nlayers: int
    sample_fn: Callable

    def sample(self, t, X, Y):
        out = self.sample_fn(t, X, Y)
        if len(out) != self.nlayers:
            raise ValueError("sampler returned wrong layer count")
        return [np.asarray(a, dtype=float) for a in out]


class SampledSolution:
    """Uniformly time-sampled frames on a grid, with smooth interpolation.

    frames: (T, nl, nx, ny).  Spatial evaluation off grid points is bicubic
    (periodic wrap on periodic grids, clamped edges on basins); temporal
    evaluation off snapshot times is cubic Lagrange.
    """

    def __init__(self, grid: Grid, times, frames, coverage_tol=0.005):
        times = np.asarray(times, dtype=float)
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 4 or frames.shape[0] != len(times):
            raise ValueError("frames must be (T, nl, nx, ny) matching times")
        if len(times) >= 2:
            dt = np.diff(times)
            if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(dt[0]), 1e-300):
                raise ValueError("snapshot times must be uniformly spaced")
        self.grid = grid
        self.times = times
        self.frames = frames
        self.nlayers = frames.shape[1]
        self.coverage_tol = coverage_tol

    @classmethod
    def from_trajectory(cls, traj):
        return cls(traj.grid, traj.times, traj.psi_frames())

    def _spatial_sample(self, frame, X, Y):
        g = self.grid
        ix = (np.asarray(X, dtype=float) - g.x0) / g.dx
        iy = (np.asarray(Y, dtype=float) - g.y0) / g.dy
        if g.periodic:
            mode = "grid-wrap"
        else:
            mode = "nearest"
            out_x = (ix < -0.5) | (ix > g.nx - 0.5)
            out_y = (iy < -0.5) | (iy > g.ny - 0.5)
            frac = float(np.mean(out_x | out_y))
            if frac > self.coverage_tol:
                raise CoverageError("sample points leave the basin", frac)
        coords = np.stack([np.ravel(ix), np.ravel(iy)])
        out = [
            ndimage.map_coordinates(frame[i], coords, order=3, mode=mode).reshape(
                np.shape(X)
            )
            for i in range(self.nlayers)
        ]
        return out

    def _time_blend(self, t):
        times = self.times
        T = len(times)
        if T == 1:
            return self.frames[0]
        dt = times[1] - times[0]
        u = (t - times[0]) / dt
        k = int(round(u))
        if 0 <= k < T and abs(u - k) < 1e-9:
            return self.frames[k]
        if u < -1e-9 or u > T - 1 + 1e-9:
            raise CoverageError(f"time {t:g} outside sampled range", 1.0)
        if T < 4:
            raise ValueError("need at least 4 snapshots for off-node time sampling")
        j = int(np.floor(u))
        j = min(max(j, 1), T - 3)
        idx = [j - 1, j, j + 1, j + 2]
        w = np.array(
            [
                np.prod([(u - m) / (n - m) for m in idx if m != n])
                for n in idx
            ]
        )
        return np.einsum("s,sixy->ixy", w, self.frames[idx])

    def sample(self, t, X, Y):
        return self._spatial_sample(self._time_blend(float(t)), X, Y)


def sample_frames(sol, grid, times):
    """Sample a solution on grid x times; returns (T, nl, nx, ny)."""
    X, Y = grid.mesh()
    return np.stack([np.stack(sol.sample(t, X, Y)) for t in times])
