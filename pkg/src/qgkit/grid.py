"""Discrete calculus on uniform 2-D grids.

Fields live on a uniform rectangular mesh, stored as (nx, ny) arrays with
``values[i, j]`` the sample at ``(x0 + i*dx, y0 + j*dy)``.  Two topologies are
supported: ``periodic`` (both directions wrap; the domain length is nx*dx) and
``basin`` (closed rectangle; one-sided stencils at the walls).

All derivative operators are second-order accurate central differences in the
interior and exact on polynomials of degree <= 2, including the one-sided
closures used at basin walls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

PERIODIC = "periodic"
BASIN = "basin"


class HelmholtzError(ValueError):
    """Raised when a Helmholtz problem has no (unique) solution on the grid.

    Carries ``residual`` when a candidate solution was produced but failed the
    residual target.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular mesh.

    nx, ny   -- point counts (>= 8)
    dx, dy   -- spacing in meters (> 0)
    x0, y0   -- coordinates of the (0, 0) point
    topology -- "periodic" (doubly periodic) or "basin" (closed rectangle
                [x0, x0+(nx-1)dx] x [y0, y0+(ny-1)dy])
    """

    nx: int
    ny: int
    dx: float
    dy: float
    x0: float = 0.0
    y0: float = 0.0
    topology: str = PERIODIC

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.nx}x{self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError(f"grid spacing must be positive, got dx={self.dx}, dy={self.dy}")
        if self.topology not in (PERIODIC, BASIN):
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def periodic(self):
        return self.topology == PERIODIC

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def cell_area(self):
        return self.dx * self.dy

    def x(self):
        return self.x0 + self.dx * np.arange(self.nx)

    def y(self):
        return self.y0 + self.dy * np.arange(self.ny)

    def mesh(self):
        """Coordinate meshes X, Y, each (nx, ny)."""
        return np.meshgrid(self.x(), self.y(), indexing="ij")


@dataclass(frozen=True)
class ScalarField:
    """A real field sampled on a grid.  Immutable once constructed."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


def _check_axis_order(axis, order):
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")


def deriv_values(values, h, axis, order, periodic):
    """Derivative of a raw (nx, ny) array along axis 0 (x) or 1 (y).

    Central differences in the interior; periodic wrap or second-order
    one-sided closures at the first/last line for non-periodic data.
    """
    v = np.asarray(values, dtype=float)
    ax = 0 if axis == "x" else 1
    if periodic:
        p1 = np.roll(v, -1, axis=ax)
        m1 = np.roll(v, 1, axis=ax)
        if order == 1:
            return (p1 - m1) / (2.0 * h)
        return (p1 - 2.0 * v + m1) / (h * h)

    out = np.empty_like(v)
    # views with the differenced axis first
    w = v if ax == 0 else v.T
    o = out if ax == 0 else out.T
    if order == 1:
        o[1:-1] = (w[2:] - w[:-2]) / (2.0 * h)
        o[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
        o[-1] = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * h)
    else:
        o[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (h * h)
        o[0] = (2.0 * w[0] - 5.0 * w[1] + 4.0 * w[2] - w[3]) / (h * h)
        o[-1] = (2.0 * w[-1] - 5.0 * w[-2] + 4.0 * w[-3] - w[-4]) / (h * h)
    return out


def laplacian_values(values, dx, dy, periodic):
    return deriv_values(values, dx, "x", 2, periodic) + deriv_values(values, dy, "y", 2, periodic)


def deriv(f: ScalarField, axis: str, order: int) -> ScalarField:
    """Second-order accurate spatial derivative of a field."""
    _check_axis_order(axis, order)
    g = f.grid
    h = g.dx if axis == "x" else g.dy
    return ScalarField(g, deriv_values(f.values, h, axis, order, g.periodic))


def laplacian(f: ScalarField) -> ScalarField:
    """Five-point Laplacian: deriv(f, x, 2) + deriv(f, y, 2)."""
    g = f.grid
    return ScalarField(g, laplacian_values(f.values, g.dx, g.dy, g.periodic))


def biharmonic(f: ScalarField) -> ScalarField:
    """Discrete nabla^4 as the composition laplacian(laplacian(f))."""
    return laplacian(laplacian(f))


def _jacobian_central(a, b, dx, dy, periodic):
    ax = deriv_values(a, dx, "x", 1, periodic)
    ay = deriv_values(a, dy, "y", 1, periodic)
    bx = deriv_values(b, dx, "x", 1, periodic)
    by = deriv_values(b, dy, "y", 1, periodic)
    return ax * by - ay * bx


def _jacobian_arakawa(a, b, dx, dy):
    """Nine-point average of the three equivalent flux forms, on padded data.

    Caller supplies arrays already extended so that np.roll wrap reads the
    correct neighbour values (identity for periodic data, zero ghost ring for
    basin data).
    """

    def ip(f):
        return np.roll(f, -1, axis=0)

    def im(f):
        return np.roll(f, 1, axis=0)

    def jp(f):
        return np.roll(f, -1, axis=1)

    def jm(f):
        return np.roll(f, 1, axis=1)

    fac = 1.0 / (4.0 * dx * dy)
    jpp = ((ip(a) - im(a)) * (jp(b) - jm(b)) - (jp(a) - jm(a)) * (ip(b) - im(b))) * fac
    jpx = (
        ip(a) * (ip(jp(b)) - ip(jm(b)))
        - im(a) * (im(jp(b)) - im(jm(b)))
        - jp(a) * (ip(jp(b)) - im(jp(b)))
        + jm(a) * (ip(jm(b)) - im(jm(b)))
    ) * fac
    jxp = (
        ip(jp(a)) * (jp(b) - ip(b))
        - im(jm(a)) * (im(b) - jm(b))
        - im(jp(a)) * (jp(b) - im(b))
        + ip(jm(a)) * (ip(b) - jm(b))
    ) * fac
    return (jpp + jpx + jxp) / 3.0


def jacobian_values(a, b, dx, dy, periodic, scheme="arakawa"):
    if scheme == "central":
        return _jacobian_central(a, b, dx, dy, periodic)
    if scheme != "arakawa":
        raise ValueError(f"unknown jacobian scheme {scheme!r}")
    if periodic:
        return _jacobian_arakawa(a, b, dx, dy)
    # zero ghost ring; consistent with psi = 0, omega-anomaly = 0 walls
    ap = np.pad(a, 1)
    bp = np.pad(b, 1)
    return _jacobian_arakawa(ap, bp, dx, dy)[1:-1, 1:-1]


def jacobian(a: ScalarField, b: ScalarField, scheme: str = "arakawa") -> ScalarField:
    """Jacobian bracket [a, b] = a_x b_y - a_y b_x.

    scheme="central": product of central first derivatives (residual oracles).
    scheme="arakawa": the energy/enstrophy-neutral nine-point average used by
    the time stepper.  Both are antisymmetric to roundoff.
    """
    if a.grid != b.grid:
        raise ValueError("jacobian operands must share a grid")
    g = a.grid
    return ScalarField(g, jacobian_values(a.values, b.values, g.dx, g.dy, g.periodic, scheme))


def _periodic_symbols(n, h):
    # eigenvalues of the 1-D central second difference for each FFT mode
    k = np.arange(n)
    return -4.0 * np.sin(np.pi * k / n) ** 2 / (h * h)


def _dirichlet_symbols(m, h):
    # eigenvalues of the interior central second difference with zero walls
    p = np.arange(1, m + 1)
    return -4.0 * np.sin(np.pi * p / (2.0 * (m + 1))) ** 2 / (h * h)


def solve_helmholtz_periodic(rhs, dx, dy, c, mean_rtol=1e-12):
    """Solve (lap - c) u = rhs on a doubly periodic grid, zero-mean gauge.

    Exact per-FFT-mode division against the discrete Laplacian symbol;
    c may be any non-resonant real shift.
    """
    nx, ny = rhs.shape
    sym = _periodic_symbols(nx, dx)[:, None] + _periodic_symbols(ny, dy)[None, :] - c
    rhat = np.fft.fft2(rhs)
    scale = max(np.max(np.abs(sym[0, 0] - sym)), abs(c), 1.0)
    if c == 0.0:
        mean = rhat[0, 0] / (nx * ny)
        lim = mean_rtol * max(np.max(np.abs(rhs)), 1e-300)
        if abs(mean) > lim:
            raise HelmholtzError(
                f"c = 0 on a periodic grid requires zero-mean rhs; mean = {mean.real:.3e}"
            )
        rhat[0, 0] = 0.0
        sym[0, 0] = 1.0  # gauge: zero-mean solution
    elif np.min(np.abs(sym)) < 1e-12 * scale:
        raise HelmholtzError(f"shift c = {c:g} resonates with a discrete Laplacian eigenvalue")
    u = np.fft.ifft2(rhat / sym).real
    if c == 0.0:
        u -= u.mean()
    return u


def solve_helmholtz_basin(rhs, dx, dy, c):
    """Solve (lap - c) u = rhs with u = 0 on the walls (dirichlet-zero gauge).

    Direct DST-I diagonalization of the interior problem; the residual of the
    interior equation is at roundoff.
    """
    nx, ny = rhs.shape
    sym = (
        _dirichlet_symbols(nx - 2, dx)[:, None]
        + _dirichlet_symbols(ny - 2, dy)[None, :]
        - c
    )
    scale = max(np.max(np.abs(sym + c)), abs(c), 1.0)
    if np.min(np.abs(sym)) < 1e-12 * scale:
        raise HelmholtzError(f"shift c = {c:g} resonates with a discrete Laplacian eigenvalue")
    inner = rhs[1:-1, 1:-1]
    rhat = scipy.fft.dstn(inner, type=1, norm="ortho")
    u = np.zeros_like(rhs)
    u[1:-1, 1:-1] = scipy.fft.dstn(rhat / sym, type=1, norm="ortho")
    return u


def helmholtz_solve(rhs: ScalarField, c: float, gauge: str | None = None) -> ScalarField:
    """Solve (lap - c) u = rhs for u.

    c is an inverse length squared, normally >= 0; signed shifts are accepted
    as long as they do not resonate with a discrete Laplacian eigenvalue.
    gauge defaults to (and must match) the grid topology: "zero-mean" for
    periodic grids, "dirichlet-zero" for basins.
    """
    g = rhs.grid
    expected = "zero-mean" if g.periodic else "dirichlet-zero"
    if gauge is None:
        gauge = expected
    if gauge != expected:
        raise ValueError(f"gauge {gauge!r} is not available on a {g.topology} grid")
    if g.periodic:
        u = solve_helmholtz_periodic(rhs.values, g.dx, g.dy, c)
    else:
        u = solve_helmholtz_basin(rhs.values, g.dx, g.dy, c)
    return ScalarField(g, u)


def random_bandlimited_values(grid, kmax, amplitude, rng, window=False):
    """Random smooth field: integer Fourier modes up to |k| <= kmax.

    Wavenumbers are integer multiples of 2*pi/extent per direction.  With
    window=True the field is multiplied by sin-profiles vanishing on basin
    walls.  Normalized so max|f| = amplitude.
    """
    X, Y = grid.mesh()
    lx = grid.nx * grid.dx if grid.periodic else (grid.nx - 1) * grid.dx
    ly = grid.ny * grid.dy if grid.periodic else (grid.ny - 1) * grid.dy
    f = np.zeros(grid.shape)
    for kx in range(-kmax, kmax + 1):
        for ky in range(-kmax, kmax + 1):
            if kx == 0 and ky == 0:
                continue
            if kx * kx + ky * ky > kmax * kmax:
                continue
            amp = rng.standard_normal()
            ph = rng.uniform(0.0, 2.0 * np.pi)
            f += amp * np.cos(
                2.0 * np.pi * kx * (X - grid.x0) / lx
                + 2.0 * np.pi * ky * (Y - grid.y0) / ly
                + ph
            )
    if window:
        f *= np.sin(np.pi * (X - grid.x0) / lx) * np.sin(np.pi * (Y - grid.y0) / ly)
    peak = np.max(np.abs(f))
    if peak > 0:
        f *= amplitude / peak
    return f
