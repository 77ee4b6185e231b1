"""Charged rigid bodies repelling each other inside a box.

Each convex body carries its own boundary-fitted mesh (interior cells
marked as charged) superimposed on a large background mesh that models
the far-field zero potential.  Every step rebuilds the cut configuration
at the current poses, solves for the potential, projects the field,
integrates force and torque over the bodies, and advances them with the
symplectic Euler scheme; wall contact reverses the normal velocity and
the angular velocity.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..assembly import (
    PoissonProblem,
    StabilizationKind,
    assemble_poisson,
    assemble_projection,
    solution_function,
    solve_system,
)
from ..fespace import build_space, export_vertex_values
from ..mesh import Mesh, rect_mesh, transform_mesh
from ..multimesh import CellClass, build_multimesh
from ..quadrature import map_rule_to_triangle, reference_triangle_rule
from .config import write_csv, write_metadata

CHARGE_DENSITY = 10.0


def regular_polygon(sides, radius, phase=0.0):
    ang = phase + 2.0 * np.pi * np.arange(sides) / sides
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


def polygon_properties(vertices, density=1.0):
    """(area, centroid, moment of inertia about the centroid) of a simple
    polygon with constant density."""
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
    area = 0.5 * cross.sum()
    cx = ((v[:, 0] + w[:, 0]) * cross).sum() / (6.0 * area)
    cy = ((v[:, 1] + w[:, 1]) * cross).sum() / (6.0 * area)
    # second polar moment about the origin, then shift to the centroid
    ixy = (cross * (np.sum(v * v, axis=1) + np.sum(v * w, axis=1)
                    + np.sum(w * w, axis=1))).sum() / 12.0
    inertia = density * (ixy - area * (cx * cx + cy * cy))
    return density * area, np.array([cx, cy]), inertia


def polygon_disk_mesh(polygon, rings_in=2, rings_out=1, pad=0.3, subdiv=2):
    """Boundary-fitted mesh of a convex polygon plus a surrounding band.

    Radial rings of scaled polygon outlines are triangulated around the
    centroid; the polygon boundary is exactly a ring, so the cells split
    cleanly into charged interior and neutral exterior.

    Returns (mesh, interior) with a boolean marker per cell.
    """
    poly = np.asarray(polygon, dtype=float)
    _, center, _ = polygon_properties(poly)
    boundary = []
    m = len(poly)
    for k in range(m):
        a, b = poly[k], poly[(k + 1) % m]
        for s in range(subdiv):
            boundary.append(a + (s / subdiv) * (b - a))
    boundary = np.asarray(boundary)
    nring = len(boundary)

    scales = [l / rings_in for l in range(1, rings_in + 1)]
    scales += [1.0 + pad * l / rings_out for l in range(1, rings_out + 1)]
    vertices = [center]
    for s in scales:
        vertices.append(center + s * (boundary - center))
    vertices = np.vstack(vertices)

    def ring_vid(ring, k):
        return 1 + (ring - 1) * nring + (k % nring)

    cells = []
    markers = []
    for k in range(nring):
        cells.append((0, ring_vid(1, k), ring_vid(1, k + 1)))
        markers.append(True)
    for ring in range(1, len(scales)):
        interior = ring < rings_in
        for k in range(nring):
            a = ring_vid(ring, k)
            b = ring_vid(ring, k + 1)
            c = ring_vid(ring + 1, k + 1)
            d = ring_vid(ring + 1, k)
            cells.append((a, b, c))
            cells.append((a, c, d))
            markers.extend([interior, interior])
    return Mesh(vertices, np.asarray(cells)), np.asarray(markers, dtype=bool)


@dataclass
class RigidBody:
    """A charged convex body with its carrier mesh and dynamic state."""

    part: int
    polygon: np.ndarray  # rest outline
    base_mesh: Mesh
    interior: np.ndarray  # per-cell charge marker
    charge: float
    mass: float
    inertia: float
    com0: np.ndarray  # rest center of mass
    pos: np.ndarray  # displacement of the center of mass
    vel: np.ndarray
    theta: float = 0.0
    omega: float = 0.0

    @property
    def com(self):
        return self.com0 + self.pos

    def current_mesh(self):
        return transform_mesh(self.base_mesh, translation=self.pos,
                              rotation=self.theta, pivot=self.com0)

    def current_polygon(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        R = np.array([[c, -s], [s, c]])
        return (self.polygon - self.com0) @ R.T + self.com

    def state_dict(self):
        return {
            "part": self.part,
            "pos": self.pos.tolist(),
            "vel": self.vel.tolist(),
            "theta": self.theta,
            "omega": self.omega,
        }


def make_body(part, sides, radius, center, phase=0.0, cells=2):
    poly = regular_polygon(sides, radius, phase) + np.asarray(center, dtype=float)
    mass, com, inertia = polygon_properties(poly, density=1.0)
    mesh, interior = polygon_disk_mesh(poly, rings_in=cells, rings_out=1,
                                       pad=0.35, subdiv=cells)
    return RigidBody(
        part=part,
        polygon=poly,
        base_mesh=mesh,
        interior=interior,
        charge=CHARGE_DENSITY,
        mass=mass,
        inertia=inertia,
        com0=com,
        pos=np.zeros(2),
        vel=np.zeros(2),
    )


def default_bodies(cells=2):
    return [
        make_body(1, 4, 0.28, (-0.55, -0.42), phase=0.3, cells=cells),
        make_body(2, 5, 0.26, (0.55, -0.35), phase=1.1, cells=cells),
        make_body(3, 6, 0.27, (0.05, 0.55), phase=0.2, cells=cells),
    ]


def charge_density_fn(bodies):
    """Pointwise charge density at the current poses: CHARGE_DENSITY
    inside any body outline, zero elsewhere (outlines are mesh lines, so
    this matches the cell markers)."""
    polys = [b.current_polygon() for b in bodies]

    def rho(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for poly in polys:
            inside = np.ones_like(out, dtype=bool)
            m = len(poly)
            for k in range(m):
                ax, ay = poly[k]
                bx, by = poly[(k + 1) % m]
                inside &= (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= 0.0
            out[inside] = CHARGE_DENSITY
        return out

    return rho


def body_force_torque(mm, body, mesh_index, e_x, e_y):
    """Force and torque from the projected field, integrated over the
    interior-marked cells with plain/signed visible rules."""
    mesh = mm.parts[mesh_index]
    ref = reference_triangle_rule(2)
    com = body.com
    F = np.zeros(2)
    T = 0.0
    for c in np.where(body.interior)[0]:
        cls = mm.classes[mesh_index][c]
        if cls == CellClass.COVERED:
            continue
        if cls == CellClass.UNCUT:
            rule = map_rule_to_triangle(ref, mesh.cell_coords(c))
        else:
            rule = mm.cut_rules[mesh_index][c]
            if not len(rule):
                continue
        ex = e_x.eval_in_cell(mesh_index, c, rule.points)
        ey = e_y.eval_in_cell(mesh_index, c, rule.points)
        F[0] += float(np.dot(rule.weights, ex))
        F[1] += float(np.dot(rule.weights, ey))
        rx = rule.points[:, 0] - com[0]
        ry = rule.points[:, 1] - com[1]
        T += float(np.dot(rule.weights, rx * ey - ry * ex))
    return F, T


def solve_field(bodies, bg, beta0=10.0, beta1=1.0, rtol=1e-10):
    """One electrostatic solve at the current poses: potential with the
    value-jump stabilization, then the stabilized field projection."""
    parts = [bg] + [b.current_mesh() for b in bodies]
    mm = build_multimesh(parts, order=2)
    space = build_space(mm, 1)
    problem = PoissonProblem(
        rhs=charge_density_fn(bodies),
        beta0=beta0,
        beta1=beta1,
        stabilization=StabilizationKind.VALUE_JUMP_H2,
    )
    system = assemble_poisson(space, problem)
    phi_vec, _ = solve_system(system, rtol=rtol)
    phi = solution_function(space, phi_vec)
    sys_x, sys_y = assemble_projection(space, phi, beta0=beta0, beta1=beta1)
    ex_vec, _ = solve_system(sys_x, rtol=rtol)
    ey_vec, _ = solve_system(sys_y, rtol=rtol)
    return mm, space, phi, solution_function(space, ex_vec), solution_function(space, ey_vec)


def step_bodies(bodies, forces, torques, dt, box_half):
    """Symplectic Euler: velocities from current forces first, then
    positions from the new velocities; elastic wall reflection."""
    for body, F, T in zip(bodies, forces, torques):
        body.vel = body.vel + dt * F / body.mass
        body.omega = body.omega + dt * T / body.inertia
        body.pos = body.pos + dt * body.vel
        body.theta = body.theta + dt * body.omega
        poly = body.current_polygon()
        hit = False
        for axis in (0, 1):
            over = poly[:, axis].max() - box_half
            if over > 0.0:
                if body.vel[axis] > 0.0:
                    body.vel[axis] = -body.vel[axis]
                body.pos[axis] -= over
                hit = True
            under = -box_half - poly[:, axis].min()
            if under > 0.0:
                if body.vel[axis] < 0.0:
                    body.vel[axis] = -body.vel[axis]
                body.pos[axis] += under
                hit = True
        if hit:
            body.omega = -body.omega


def interface_jump_max(mm, space, f):
    """Largest |[f]| over all interface quadrature points."""
    worst = 0.0
    for entry in mm.interfaces:
        pts = entry.rule.rule.points
        vi = f.eval_in_cell(entry.i, entry.cell_i, pts)
        vj = f.eval_in_cell(entry.j, entry.cell_j, pts)
        worst = max(worst, float(np.abs(vi - vj).max()))
    return worst


def run_electrostatics(cfg, out_dir=None):
    """Time-step three charged bodies bouncing inside a rigid box."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    beta0 = 10.0 if cfg.beta0 is None else cfg.beta0
    beta1 = 1.0 if cfg.beta1 is None else cfg.beta1
    bodies = default_bodies(cells=cfg.body_cells)
    bg = rect_mesh(-cfg.bg_half, -cfg.bg_half, cfg.bg_half, cfg.bg_half,
                   cfg.bg_cells, cfg.bg_cells)
    rows = []
    t_start = time.time()
    for step in range(cfg.steps):
        try:
            mm, space, phi, e_x, e_y = solve_field(bodies, bg, beta0, beta1)
            forces = []
            torques = []
            for body in bodies:
                F, T = body_force_torque(mm, body, body.part, e_x, e_y)
                forces.append(F)
                torques.append(T)
        except Exception as exc:
            dump = out / f"failure_step{step}.json"
            with open(dump, "w") as f:
                json.dump({"step": step,
                           "bodies": [b.state_dict() for b in bodies]}, f,
                          indent=2)
            raise RuntimeError(
                f"electrostatics step {step} failed ({exc}); poses dumped to "
                f"{dump}"
            ) from exc
        t = step * cfg.dt
        for body, F, T in zip(bodies, forces, torques):
            com = body.com
            rows.append((step, t, body.part, com[0], com[1], body.vel[0],
                         body.vel[1], body.omega, body.theta, F[0], F[1], T))
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            export_vertex_values(phi, out / f"potential_step{step:04d}.csv")
        step_bodies(bodies, forces, torques, cfg.dt, cfg.box_half)
    write_csv(out / "trajectory.csv",
              ["step", "t", "body", "cx", "cy", "vx", "vy", "omega", "theta",
               "Fx", "Fy", "T"], rows)
    write_metadata(out / "electro_meta.json", cfg, {
        "runtime_s": time.time() - t_start,
        "final_bodies": [b.state_dict() for b in bodies],
    })
    if cfg.figures:
        from .plots import electro_figure

        electro_figure(rows, cfg.box_half, out / "trajectory.png")
    return rows, bodies
