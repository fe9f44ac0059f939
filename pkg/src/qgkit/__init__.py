"""Layered quasi-geostrophic simulation and verification toolkit."""

from .grid import (
    BASIN,
    PERIODIC,
    Grid,
    HelmholtzError,
    ScalarField,
    biharmonic,
    deriv,
    helmholtz_solve,
    jacobian,
    laplacian,
)
from .models import (
    LayeredState,
    ModelIIIParams,
    ModelIIParams,
    ModelIParams,
    diagnostic_fields,
    ekman_pumping,
    invert_pv,
    potential_vorticity,
    table1_grid,
    table1_params,
    tendency,
    wind_stress,
)
from .simulator import BlowUpError, SimConfig, Trajectory, diagnostics, run, step

__all__ = [
    "BASIN",
    "PERIODIC",
    "Grid",
    "HelmholtzError",
    "ScalarField",
    "biharmonic",
    "deriv",
    "helmholtz_solve",
    "jacobian",
    "laplacian",
    "LayeredState",
    "ModelIParams",
    "ModelIIParams",
    "ModelIIIParams",
    "diagnostic_fields",
    "ekman_pumping",
    "invert_pv",
    "potential_vorticity",
    "table1_grid",
    "table1_params",
    "tendency",
    "wind_stress",
    "BlowUpError",
    "SimConfig",
    "Trajectory",
    "diagnostics",
    "run",
    "step",
]
