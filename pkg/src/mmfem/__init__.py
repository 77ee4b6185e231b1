"""Finite element solver for the Poisson problem on stacks of freely
overlapping triangle meshes, glued with interface penalties and overlap
stabilization, plus the geometric kernel the discretization requires."""

from .mesh import (
    Mesh,
    MeshQuality,
    mesh_quality,
    rect_mesh,
    transform_mesh,
    unit_square_mesh,
)
from .geometry import (
    AABB,
    AABBTree,
    Containment,
    ConvexPolygon,
    Interval,
    build_aabb_tree,
    clip_segment_against_triangle,
    graham_scan,
    interval_subtract,
    orient2d,
    point_in_triangle,
    tree_collide,
    tree_point_query,
    triangle_triangle_intersection,
    triangulate_convex_polygon,
)
from .quadrature import (
    InterfaceRule,
    QuadratureRule,
    gauss_segment_rule,
    inclusion_exclusion_cut_rule,
    map_rule_to_triangle,
    overlap_rule,
    reference_triangle_rule,
)
from .multimesh import (
    CellClass,
    InterfaceEntry,
    MultiMesh,
    OverlapEntry,
    build_multimesh,
    locate_point,
    multimesh_stats,
)
from .fespace import (
    Element,
    DofMap,
    MultiMeshFunction,
    MultiMeshFunctionSpace,
    build_space,
    interpolate,
)
from .assembly import (
    AssembledSystem,
    PoissonProblem,
    StabilizationKind,
    apply_dirichlet,
    assemble_interface,
    assemble_overlap_stab,
    assemble_poisson,
    assemble_projection,
    assemble_volume,
)
from .linalg import (
    CSRMatrix,
    SolveReport,
    cg_solve,
    dense_lu_solve,
    estimate_condition_number,
    matvec,
)

__version__ = "0.1.0"
