"""Geometry engine for orthosecting tetrahedra.

Constructs, solves for, and verifies pairs of tetrahedra whose
non-corresponding edges intersect orthogonally, including the common
sphere of intersection points, pedal-chain completion and reconstruction,
conjugate partners, and the isogonally self-conjugate curve traced by
projected solution vertices.
"""

__version__ = "0.1.0"

from .errors import (
    CurvePointError,
    DegenerateError,
    GeometryError,
    NotOrthologicError,
    NotOrthosectingError,
    ReconstructionError,
    SceneError,
    SimsonDegenerateError,
)
from .geom_core import (
    Circle3D,
    Line,
    LineClosest,
    Plane,
    Point,
    SphereOrPlane,
    Tolerance,
    circle_through,
    closest_points,
    concurrency_point,
    foot_on_line,
    meet_planes,
    project_to_plane,
    sphere_through,
)
from .orthology import (
    EDGE_PAIRINGS,
    LabelingResult,
    OrthologyReport,
    Tetrahedron,
    construct_orthologic,
    edge_orthogonality_residuals,
    find_labeling,
    orthology_centers,
    pair_tolerance,
)
from .pedal import (
    CircularNet,
    PedalChain,
    PedalTriangle,
    SphericalChain,
    chain_carrier,
    chain_from_pair,
    chain_sphere_residual,
    circular_net,
    complete_chain,
    isogonal_conjugate,
    pedal_circle,
    pedal_triangle,
    reconstruct_tetrahedron,
    recover_source,
    spherical_chain,
    spherical_parameters,
)
from .solver import (
    ResidualVector,
    SolutionBranch,
    SolverConfig,
    SolveResult,
    intersection_gaps,
    orthosect_residuals,
    solve,
    solve_detailed,
    solve_from_curve_point,
    trace_family,
)
from .analysis import (
    CurveTrace,
    DegreeEstimate,
    SequenceRun,
    SphereReport,
    conjugate,
    estimate_degree,
    iterate_sequence,
    trace_curve,
    verify_sphere,
)
from .scene import Report, Scene, load_scene, save_scene
