from .config import RateReport, StudyConfig, fit_rate
from .studies import (
    error_norms,
    exact_solution,
    run_condition_scaling,
    run_convergence,
    run_thin_intersection,
    thin_stack,
)
from .electro import (
    RigidBody,
    default_bodies,
    interface_jump_max,
    polygon_disk_mesh,
    polygon_properties,
    regular_polygon,
    run_electrostatics,
    solve_field,
)
