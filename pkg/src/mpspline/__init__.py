"""C1 cubic splines on multi-patch logical grids.

Interface derivatives are reconstructed from nearby node values so that
independently built patch splines join with C1 continuity.  The package also
contains a backward semi-Lagrangian advection solver on mapped polar grids,
a stability study of continuity-only coupling and an experiment harness.
"""

from ._accel import BACKEND
from .errors import ConfigError, LayoutError, MpsError, NumericalError, OutOfDomainError
from .interface_calculus import (
    coefficient_table,
    exact_stencil,
    explicit_uniform,
    recursive_uniform,
    select_truncation,
    three_point,
    truncated_stencil,
)
from .mappings import Mapping, MappingKind
from .multipatch_core import (
    EXACT,
    BoundaryKind,
    Conformity,
    Direction,
    LocalSplineBuilder,
    MultipatchDomain,
    PatchField,
    PatchGrid,
    PlanMode,
    assemble_plan,
    build_local_splines,
    equivalent_global_spline,
    locate,
    locate_logical,
    truncated,
)
from .semi_lagrangian import AdvectionField, BslConfig, BslSolver, TracerKind, bsl_step
from .spline_core import Axis, BreakPoints, Spline2D, TensorInterpolator

__version__ = "0.1.0"
