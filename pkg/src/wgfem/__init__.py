"""Lowest-order weak Galerkin solver for 2D elliptic interface problems.

The pieces, bottom up: ``element`` holds the per-triangle RT0 kernels,
``mesh`` builds and validates interface-fitted triangulations, ``problems``
defines the benchmark catalog, ``assembly``/``solver`` produce and solve the
saddle-point system, ``analysis`` measures errors and convergence orders,
and ``cli`` wires everything into the ``wgfem`` command.
"""

from .analysis import (
    ErrorRecord,
    StudyReport,
    convergence_study,
    error_norms,
    render_table,
)
from .assembly import DofMap, SparseSystem, assemble, build_dof_map
from .curves import Rect
from .mesh import (
    REGION1,
    REGION2,
    EdgeKind,
    TriMesh,
    generate_curved_fitted,
    generate_structured_fitted,
    ingest_mesh,
    mesh_stats,
    write_mesh,
)
from .problems import ProblemSpec, builtin_problem, default_level_h
from .solver import SolveReport, solve

__version__ = "0.1.0"

__all__ = [
    "ErrorRecord",
    "StudyReport",
    "convergence_study",
    "error_norms",
    "render_table",
    "DofMap",
    "SparseSystem",
    "assemble",
    "build_dof_map",
    "Rect",
    "REGION1",
    "REGION2",
    "EdgeKind",
    "TriMesh",
    "generate_curved_fitted",
    "generate_structured_fitted",
    "ingest_mesh",
    "mesh_stats",
    "write_mesh",
    "ProblemSpec",
    "builtin_problem",
    "default_level_h",
    "SolveReport",
    "solve",
    "__version__",
]
