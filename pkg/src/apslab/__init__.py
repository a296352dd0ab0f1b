"""Numerical laboratory for delocalised eta invariants and equivariant APS indices on model geometries."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .eta import EtaConfig, decay_diagnostic, eta_invariant, perturb, projection_trace
from .geometry import (
    ActionSpec,
    BoundaryOperator,
    ScenarioSpec,
    build_boundary_operator,
    build_cutoffs,
    build_double,
    spectral_gap,
)
from .heat import TR_map, g_trace, heat_kernel
from .index import (
    IndexConfig,
    build_parametrix,
    cylinder_boundary_term,
    fixed_point_term,
    g_index,
    interior_mismatch_term,
    interior_term,
    perturbed_operator,
    verify_aps,
)
