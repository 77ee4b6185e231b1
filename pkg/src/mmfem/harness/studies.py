"""Error norms and the convergence / robustness / conditioning studies."""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from ..assembly import (
    PoissonProblem,
    assemble_poisson,
    dump_matrix_coo,
    solution_function,
    solve_system,
)
from ..fespace import build_space
from ..linalg import cg_solve, estimate_condition_number
from ..mesh import mesh_quality, rect_mesh, transform_mesh, unit_square_mesh
from ..multimesh import CellClass, build_multimesh
from ..quadrature import dump_rule_csv, map_rule_to_triangle, reference_triangle_rule
from .config import RateReport, fit_rate, write_csv, write_metadata


def exact_solution():
    """The manufactured solution sin(pi x) sin(pi y) with its gradient and
    the matching right-hand side of -Δu = f."""
    u = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    grad = lambda x, y: (
        np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
        np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
    )
    f = lambda x, y: 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)
    return u, grad, f


def error_norms(u_h, exact, exact_grad, order=None):
    """L2 and H1-seminorm errors integrated over the visible region with
    the same plain/signed rules the assembly uses."""
    space = u_h.space
    mm = space.multimesh
    if order is None:
        order = 2 * space.degree + 2
    ref = reference_triangle_rule(order)
    e_l2 = 0.0
    e_h1 = 0.0
    for p, mesh in enumerate(mm.parts):
        classes = mm.classes[p]
        for c in range(mesh.num_cells):
            if classes[c] == CellClass.COVERED:
                continue
            if classes[c] == CellClass.UNCUT:
                rule = map_rule_to_triangle(ref, mesh.cell_coords(c))
            else:
                rule = mm.cut_rules[p][c]
                if not len(rule):
                    continue
            x, y = rule.points[:, 0], rule.points[:, 1]
            dv = u_h.eval_in_cell(p, c, rule.points) - exact(x, y)
            g = u_h.grad_in_cell(p, c, rule.points)
            gx, gy = exact_grad(x, y)
            e_l2 += float(np.dot(rule.weights, dv * dv))
            e_h1 += float(np.dot(rule.weights, (g[:, 0] - gx) ** 2 + (g[:, 1] - gy) ** 2))
    return math.sqrt(abs(e_l2)), math.sqrt(abs(e_h1))


# --------------------------------------------------------------------------
# Random part placement for the convergence study
# --------------------------------------------------------------------------


def place_random_squares(n_parts, rng, margin=0.05, side_range=(0.1, 0.4)):
    """Seeded random square poses (center, side, angle) kept ``margin``
    away from the boundary of the unit square by rejection."""
    poses = []
    for _ in range(n_parts):
        for _attempt in range(1000):
            side = rng.uniform(*side_range)
            angle = rng.uniform(0.0, 2.0 * np.pi)
            center = rng.uniform(0.0, 1.0, size=2)
            half = side / 2.0
            corners = np.array(
                [[-half, -half], [half, -half], [half, half], [-half, half]]
            )
            c, s = math.cos(angle), math.sin(angle)
            R = np.array([[c, -s], [s, c]])
            world = corners @ R.T + center
            if np.all(world > margin) and np.all(world < 1.0 - margin):
                poses.append({"center": center, "side": side, "angle": angle})
                break
        else:
            raise RuntimeError("could not place a part inside the margin")
    return poses


def square_part_mesh(pose, target_h):
    """Mesh a posed square at roughly the background resolution."""
    side = pose["side"]
    n = max(1, round(side / target_h))
    m = rect_mesh(0.0, 0.0, side, side, n, n)
    center = np.asarray(pose["center"])
    return transform_mesh(
        m,
        translation=center - side / 2.0,
        rotation=pose["angle"],
        pivot=np.array([side / 2.0, side / 2.0]),
    )


# --------------------------------------------------------------------------
# Convergence study
# --------------------------------------------------------------------------


def run_convergence(cfg, out_dir=None):
    """Solve the manufactured problem on randomly placed parts over a
    refinement sequence; fit L2/H1 rates per polynomial degree."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u, grad_u, f = exact_solution()
    rng = np.random.default_rng(cfg.seed)
    poses = place_random_squares(cfg.n_parts, rng)
    degrees = list(cfg.degrees)
    beta1 = 10.0 if cfg.beta1 is None else cfg.beta1
    build_order = 2 * max(degrees)

    rows = []
    reports = []
    covered_parts = set()
    t_start = time.time()
    series = {p: {"h": [], "ndof": [], "l2": [], "h1": []} for p in degrees}
    for level in range(cfg.levels):
        n_bg = cfg.coarsest * 2**level
        bg = unit_square_mesh(n_bg, n_bg)
        target_h = 1.0 / n_bg
        parts = [bg] + [square_part_mesh(pose, target_h) for pose in poses]
        mm = build_multimesh(parts, order=build_order)
        for p in range(1, mm.num_parts):
            if np.all(mm.classes[p] == CellClass.COVERED):
                covered_parts.add(p)
        h_global = max(mm.part_h)
        if cfg.dump_quadrature and level == 0:
            rules = [r for d in mm.cut_rules for r in d.values()]
            if rules:
                dump_rule_csv(rules[0], out / "cut_rule_sample.csv")
        for p_deg in degrees:
            beta0 = 6.0 * p_deg**2 if cfg.beta0 is None else cfg.beta0
            space = build_space(mm, p_deg)
            problem = PoissonProblem(rhs=f, beta0=beta0, beta1=beta1)
            system = assemble_poisson(space, problem)
            if cfg.dump_matrix and level == 0:
                dump_matrix_coo(system.A, out / f"matrix_p{p_deg}.txt")
            x, _ = solve_system(system, rtol=1e-11)
            u_h = solution_function(space, x)
            el2, eh1 = error_norms(u_h, u, grad_u)
            series[p_deg]["h"].append(h_global)
            series[p_deg]["ndof"].append(space.total_dofs)
            series[p_deg]["l2"].append(el2)
            series[p_deg]["h1"].append(eh1)
            rows.append((cfg.n_parts, p_deg, level, h_global, space.total_dofs,
                         el2, eh1))
    for p_deg in degrees:
        s = series[p_deg]
        reports.append(
            RateReport(
                n_parts=cfg.n_parts,
                degree=p_deg,
                h=s["h"],
                ndof=s["ndof"],
                err_l2=s["l2"],
                err_h1=s["h1"],
                l2_rate=fit_rate(s["h"], s["l2"]),
                h1_rate=fit_rate(s["h"], s["h1"]),
            )
        )

    write_csv(out / "convergence.csv",
              ["N", "p", "level", "h", "ndof", "err_l2", "err_h1"], rows)
    write_metadata(
        out / "convergence_meta.json",
        cfg,
        {
            "rates": {
                f"p{r.degree}": {"l2": r.l2_rate, "h1": r.h1_rate} for r in reports
            },
            "completely_covered_parts": sorted(covered_parts),
            "runtime_s": time.time() - t_start,
            "scale_note": "desk scale: N <= 4, p <= 2, 4 levels",
        },
    )
    if cfg.figures:
        from .plots import convergence_figure

        convergence_figure(reports, out / "convergence.png")
    return reports


# --------------------------------------------------------------------------
# Thin-intersection robustness and condition-number scaling
# --------------------------------------------------------------------------


def thin_stack(n_parts, k, n_unit, x0_override=None):
    """Mesh stack of the near-touching configuration: a background frame,
    the unit square, and n_parts-1 inner rectangles whose left edges sit
    at 2^-k times their rest offset (or at a fixed override)."""
    n_bg = max(1, round(1.5 * n_unit))
    parts = [
        rect_mesh(-0.25, -0.25, 1.25, 1.25, n_bg, n_bg),
        unit_square_mesh(n_unit, n_unit),
    ]
    h = 1.0 / n_unit
    for i in range(2, n_parts + 1):
        a = i * math.pi / (10.0 * n_parts)
        w = 1.0 - 2.0 * a
        x0 = (2.0**-k) * a if x0_override is None else x0_override
        y0 = a
        nx = max(1, round(w / h))
        ny = max(1, round((1.0 - 2.0 * a) / h))
        parts.append(rect_mesh(x0, y0, x0 + w, 1.0 - y0, nx, ny))
    return parts


def _solve_thin(parts, beta0, beta1):
    u, grad_u, f = exact_solution()
    mm = build_multimesh(parts, order=2)
    space = build_space(mm, 1)
    # the manufactured solution does not vanish on the enlarged background
    # boundary, so its trace is imposed there
    problem = PoissonProblem(rhs=f, beta0=beta0, beta1=beta1, dirichlet=u)
    system = assemble_poisson(space, problem)
    x, report = solve_system(system, rtol=1e-11)
    u_h = solution_function(space, x)
    el2, eh1 = error_norms(u_h, u, grad_u)
    return mm, space, system, u_h, el2, eh1, report


def run_thin_intersection(cfg, out_dir=None):
    """Errors and condition number as the inner parts approach the unit
    square's left edge down to machine-precision separation.

    The default resolution keeps the rest configuration (k = 0) in the
    same interface-stacking regime as the near-touching limit, the regime
    the reported experiments occupy throughout.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    beta0 = 10.0 if cfg.beta0 is None else cfg.beta0
    beta1 = 5.0 if cfg.beta1 is None else cfg.beta1
    rows = []
    t_start = time.time()
    for k in cfg.thin_k:
        parts = thin_stack(cfg.n_parts, k, cfg.coarsest)
        mm, space, system, u_h, el2, eh1, _ = _solve_thin(parts, beta0, beta1)
        kappa = estimate_condition_number(system.A, active=system.free_dofs)
        x0 = (2.0**-k) * (2 * math.pi / (10.0 * cfg.n_parts)) if cfg.n_parts >= 2 else 0.0
        rows.append((cfg.n_parts, k, x0, el2, eh1, kappa))
    write_csv(out / "thin.csv", ["N", "k", "x0", "err_l2", "err_h1", "kappa"], rows)
    write_metadata(out / "thin_meta.json", cfg,
                   {"runtime_s": time.time() - t_start})
    if cfg.figures:
        from .plots import thin_figure

        thin_figure(rows, out / "thin.png")
    return rows


def run_condition_scaling(cfg, out_dir=None):
    """Condition number against mesh size at a fixed, machine-precision
    part separation; reports the fitted log-log slope."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    beta0 = 10.0 if cfg.beta0 is None else cfg.beta0
    beta1 = 5.0 if cfg.beta1 is None else cfg.beta1
    rows = []
    hs = []
    kappas = []
    t_start = time.time()
    for level in range(cfg.levels):
        n_unit = cfg.coarsest * 2**level
        parts = thin_stack(cfg.n_parts, 0, n_unit, x0_override=cfg.x0_fixed)
        mm, space, system, u_h, el2, eh1, _ = _solve_thin(parts, beta0, beta1)
        kappa = estimate_condition_number(system.A, active=system.free_dofs)
        _, rep = cg_solve(system.A, system.b, preconditioner="jacobi", rtol=1e-10)
        h = max(mm.part_h)
        rows.append((level, h, kappa, rep.iterations))
        hs.append(h)
        kappas.append(kappa)
    slope = fit_rate(hs, kappas)
    write_csv(out / "condscale.csv", ["level", "h", "kappa", "cg_iters"], rows)
    write_metadata(out / "condscale_meta.json", cfg,
                   {"slope": slope, "runtime_s": time.time() - t_start})
    if cfg.figures:
        from .plots import condscale_figure

        condscale_figure(rows, slope, out / "condscale.png")
    return rows, slope
