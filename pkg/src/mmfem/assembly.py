"""Assembly of the stacked-mesh Poisson discretization.

Three passes build the system: visible-volume stiffness and load,
symmetric interface coupling with penalty (jump [v] = v_i - v_j, average
flux with weight 1/2), and overlap stabilization in one of two variants
(gradient jump, or value jump scaled by h^-2).  Boundary conditions are
imposed strongly on the background mesh by symmetric elimination;
inactive DOFs are pinned the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fespace import (
    MultiMeshFunction,
    cell_reference_map,
    physical_to_reference,
)
from .linalg import CSRMatrix
from .multimesh import CellClass
from .quadrature import reference_triangle_rule


class StabilizationKind(Enum):
    GRADIENT_JUMP = "gradient_jump"
    VALUE_JUMP_H2 = "value_jump_h2"


@dataclass
class PoissonProblem:
    """-Δu = f with u = g on the outer boundary (g = 0 by default).

    beta0 scales the interface penalty, beta1 the overlap stabilization;
    both must be positive for a coercive bilinear form.
    """

    rhs: callable
    beta0: float
    beta1: float
    stabilization: StabilizationKind = StabilizationKind.GRADIENT_JUMP
    dirichlet: callable = None

    def __post_init__(self):
        if self.beta0 <= 0.0 or self.beta1 < 0.0:
            raise ValueError("need beta0 > 0 and beta1 >= 0")


@dataclass
class AssembledSystem:
    A: CSRMatrix
    b: np.ndarray
    dirichlet_dofs: np.ndarray
    pinned_dofs: np.ndarray

    @property
    def constrained_dofs(self):
        return np.union1d(self.dirichlet_dofs, self.pinned_dofs)

    @property
    def free_dofs(self):
        return np.setdiff1d(np.arange(len(self.b)), self.constrained_dofs)


class _Triplets:
    def __init__(self):
        self.rows = []
        self.cols = []
        self.vals = []

    def add_cells(self, dofs, local):
        """dofs (m, nb), local (m, nb, nb)."""
        m, nb = dofs.shape
        self.rows.append(np.repeat(dofs, nb, axis=1).ravel())
        self.cols.append(np.tile(dofs, (1, nb)).ravel())
        self.vals.append(local.ravel())

    def add_block(self, dofs, local):
        """dofs (nb,), local (nb, nb)."""
        nb = len(dofs)
        self.rows.append(np.repeat(dofs, nb))
        self.cols.append(np.tile(dofs, nb))
        self.vals.append(local.ravel())

    def to_csr(self, n):
        if not self.rows:
            return CSRMatrix.from_triplets(n, np.empty(0, int), np.empty(0, int),
                                           np.empty(0))
        return CSRMatrix.from_triplets(
            n,
            np.concatenate(self.rows),
            np.concatenate(self.cols),
            np.concatenate(self.vals),
        )


def _cell_geometry(coords):
    """Vectorized affine data for (m, 3, 2) cell coordinates."""
    v0 = coords[:, 0]
    J = np.stack([coords[:, 1] - v0, coords[:, 2] - v0], axis=-1)  # columns
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1]
    Jinv[:, 0, 1] = -J[:, 0, 1]
    Jinv[:, 1, 0] = -J[:, 1, 0]
    Jinv[:, 1, 1] = J[:, 0, 0]
    Jinv /= det[:, None, None]
    return v0, J, Jinv, det


def _tabulate_in_cell(space, part, cell, pts):
    """Basis values and physical gradients at physical points of a cell."""
    coords = space.multimesh.parts[part].cell_coords(cell)
    ref = physical_to_reference(coords, pts)
    vals, grads = space.element.tabulate(ref)
    _, _, Jinv, _ = cell_reference_map(coords)
    return vals, grads @ Jinv


def assemble_volume(space, problem, order=None):
    """Stiffness and load over the visible region: plain rules on uncut
    cells, stored signed rules on cut cells, nothing on covered cells.

    Returns (A, b) of full system size.
    """
    mm = space.multimesh
    if order is None:
        order = 2 * space.degree
    ref = reference_triangle_rule(order)
    vals_ref, grads_ref = space.element.tabulate(ref.points)
    trip = _Triplets()
    b = np.zeros(space.total_dofs)
    f = problem.rhs

    for p, mesh in enumerate(mm.parts):
        dm = space.dofmaps[p]
        classes = mm.classes[p]
        uncut = np.where(classes == CellClass.UNCUT)[0]
        if len(uncut):
            coords = mesh.all_cell_coords()[uncut]
            v0, J, Jinv, det = _cell_geometry(coords)
            pg = np.einsum("qbl,mlk->mqbk", grads_ref, Jinv)
            K = np.einsum("q,m,mqak,mqbk->mab", ref.weights, det, pg, pg,
                          optimize=True)
            X = v0[:, None, :] + np.einsum("mik,qk->mqi", J, ref.points)
            fv = f(X[..., 0], X[..., 1])
            fv = np.broadcast_to(fv, X.shape[:2])
            bl = np.einsum("q,m,mq,qa->ma", ref.weights, det, fv, vals_ref)
            dofs = space.offsets[p] + dm.cell_dofs[uncut]
            trip.add_cells(dofs, K)
            np.add.at(b, dofs.ravel(), bl.ravel())
        for ci in sorted(mm.cut_rules[p]):
            rule = mm.cut_rules[p][ci]
            if not len(rule):
                continue
            vals, pg = _tabulate_in_cell(space, p, ci, rule.points)
            K = np.einsum("q,qak,qbk->ab", rule.weights, pg, pg)
            fv = np.broadcast_to(
                f(rule.points[:, 0], rule.points[:, 1]), (len(rule),)
            )
            bl = np.einsum("q,q,qa->a", rule.weights, fv, vals)
            dofs = space.cell_dofs(p, ci)
            trip.add_block(dofs, K)
            np.add.at(b, dofs, bl)
    return trip.to_csr(space.total_dofs), b


def assemble_interface(space, problem):
    """Symmetric interface coupling: consistency terms with the average
    normal flux of the higher part, and the penalty
    beta0 (h_i^-1 + h_j^-1) ([v], [w])."""
    mm = space.multimesh
    trip = _Triplets()
    for entry in mm.interfaces:
        qr = entry.rule.rule
        nrm = entry.rule.normal
        vals_i, pg_i = _tabulate_in_cell(space, entry.i, entry.cell_i, qr.points)
        vals_j, pg_j = _tabulate_in_cell(space, entry.j, entry.cell_j, qr.points)
        jump = np.concatenate([vals_i, -vals_j], axis=1)
        flux = 0.5 * np.concatenate([pg_i @ nrm, pg_j @ nrm], axis=1)
        X = np.einsum("q,qa,qb->ab", qr.weights, flux, jump)
        pen = problem.beta0 * (
            1.0 / mm.part_h[entry.i] + 1.0 / mm.part_h[entry.j]
        )
        local = -(X + X.T) + pen * np.einsum(
            "q,qa,qb->ab", qr.weights, jump, jump
        )
        dofs = np.concatenate(
            [space.cell_dofs(entry.i, entry.cell_i),
             space.cell_dofs(entry.j, entry.cell_j)]
        )
        trip.add_block(dofs, local)
    return trip.to_csr(space.total_dofs)


def assemble_overlap_stab(space, problem):
    """Overlap stabilization on the hidden regions O_ij.

    GRADIENT_JUMP: beta1 ([grad v], [grad w]); VALUE_JUMP_H2:
    beta1 (h_i^-2 + h_j^-2) ([v], [w]).  The stored (possibly signed)
    overlap rules are used as-is.
    """
    mm = space.multimesh
    trip = _Triplets()
    if problem.beta1 == 0.0:
        return trip.to_csr(space.total_dofs)
    value_jump = problem.stabilization == StabilizationKind.VALUE_JUMP_H2
    for entry in mm.overlaps:
        qr = entry.rule
        vals_i, pg_i = _tabulate_in_cell(space, entry.i, entry.cell_i, qr.points)
        vals_j, pg_j = _tabulate_in_cell(space, entry.j, entry.cell_j, qr.points)
        if value_jump:
            jump = np.concatenate([vals_i, -vals_j], axis=1)
            scale = problem.beta1 * (
                mm.part_h[entry.i] ** -2 + mm.part_h[entry.j] ** -2
            )
            local = scale * np.einsum("q,qa,qb->ab", qr.weights, jump, jump)
        else:
            g = np.concatenate([pg_i, -pg_j], axis=1)
            local = problem.beta1 * np.einsum(
                "q,qak,qbk->ab", qr.weights, g, g
            )
        dofs = np.concatenate(
            [space.cell_dofs(entry.i, entry.cell_i),
             space.cell_dofs(entry.j, entry.cell_j)]
        )
        trip.add_block(dofs, local)
    return trip.to_csr(space.total_dofs)


def _constrain(A, b, dofs, values):
    """Symmetric elimination: rows and columns of ``dofs`` are replaced by
    identity, the right-hand side absorbs the prescribed values."""
    n = len(b)
    rows, cols, vals = A.to_coo()
    is_con = np.zeros(n, dtype=bool)
    is_con[dofs] = True
    g = np.zeros(n)
    g[dofs] = values
    b = b.copy()
    sel = is_con[cols] & ~is_con[rows]
    np.subtract.at(b, rows[sel], vals[sel] * g[cols[sel]])
    keep = ~is_con[rows] & ~is_con[cols]
    rows = np.concatenate([rows[keep], dofs])
    cols = np.concatenate([cols[keep], dofs])
    vals = np.concatenate([vals[keep], np.ones(len(dofs))])
    b[dofs] = g[dofs]
    return CSRMatrix.from_triplets(n, rows, cols, vals), b


def boundary_dofs(space):
    """Global DOFs on the outer boundary (background part only; higher
    parts do not touch it)."""
    return space.offsets[0] + space.dofmaps[0].boundary_dofs()


def apply_dirichlet(A, b, space, value_fn=None):
    """Impose u = g on the background boundary and pin inactive DOFs.

    ``value_fn(x, y)`` defaults to zero.  Elimination is symmetric:
    constrained rows and columns become identity rows with the prescribed
    value on the right-hand side.
    """
    bdofs = boundary_dofs(space)
    if value_fn is None:
        gvals = np.zeros(len(bdofs))
    else:
        xy = space.dofmaps[0].dof_coords[bdofs - space.offsets[0]]
        gvals = np.broadcast_to(
            np.asarray(value_fn(xy[:, 0], xy[:, 1]), dtype=float), (len(bdofs),)
        )
    pinned = np.setdiff1d(space.inactive_dofs, bdofs)
    dofs = np.concatenate([bdofs, pinned])
    values = np.concatenate([gvals, np.zeros(len(pinned))])
    order = np.argsort(dofs, kind="stable")
    A2, b2 = _constrain(A, b, dofs[order], values[order])
    return AssembledSystem(A2, b2, dirichlet_dofs=np.sort(bdofs),
                           pinned_dofs=np.sort(pinned))


def assemble_poisson(space, problem, order=None):
    """Full system: volume + interface + overlap stabilization, then
    boundary conditions and pinning."""
    A_vol, b = assemble_volume(space, problem, order=order)
    A = A_vol + assemble_interface(space, problem)
    A = A + assemble_overlap_stab(space, problem)
    return apply_dirichlet(A, b, space, value_fn=problem.dirichlet)


def _assemble_projection_matrix(space, beta0, beta1, order):
    mm = space.multimesh
    ref = reference_triangle_rule(order)
    vals_ref, _ = space.element.tabulate(ref.points)
    trip = _Triplets()
    for p, mesh in enumerate(mm.parts):
        dm = space.dofmaps[p]
        uncut = np.where(mm.classes[p] == CellClass.UNCUT)[0]
        if len(uncut):
            coords = mesh.all_cell_coords()[uncut]
            _, _, _, det = _cell_geometry(coords)
            M = np.einsum("q,m,qa,qb->mab", ref.weights, det, vals_ref, vals_ref,
                          optimize=True)
            trip.add_cells(space.offsets[p] + dm.cell_dofs[uncut], M)
        for ci in sorted(mm.cut_rules[p]):
            rule = mm.cut_rules[p][ci]
            if not len(rule):
                continue
            vals, _ = _tabulate_in_cell(space, p, ci, rule.points)
            M = np.einsum("q,qa,qb->ab", rule.weights, vals, vals)
            trip.add_block(space.cell_dofs(p, ci), M)
    for entry in mm.interfaces:
        qr = entry.rule.rule
        vals_i, _ = _tabulate_in_cell(space, entry.i, entry.cell_i, qr.points)
        vals_j, _ = _tabulate_in_cell(space, entry.j, entry.cell_j, qr.points)
        jump = np.concatenate([vals_i, -vals_j], axis=1)
        pen = beta0 * (1.0 / mm.part_h[entry.i] + 1.0 / mm.part_h[entry.j])
        local = pen * np.einsum("q,qa,qb->ab", qr.weights, jump, jump)
        dofs = np.concatenate(
            [space.cell_dofs(entry.i, entry.cell_i),
             space.cell_dofs(entry.j, entry.cell_j)]
        )
        trip.add_block(dofs, local)
    for entry in mm.overlaps:
        qr = entry.rule
        vals_i, _ = _tabulate_in_cell(space, entry.i, entry.cell_i, qr.points)
        vals_j, _ = _tabulate_in_cell(space, entry.j, entry.cell_j, qr.points)
        jump = np.concatenate([vals_i, -vals_j], axis=1)
        scale = beta1 * (mm.part_h[entry.i] ** -2 + mm.part_h[entry.j] ** -2)
        local = scale * np.einsum("q,qa,qb->ab", qr.weights, jump, jump)
        dofs = np.concatenate(
            [space.cell_dofs(entry.i, entry.cell_i),
             space.cell_dofs(entry.j, entry.cell_j)]
        )
        trip.add_block(dofs, local)
    return trip.to_csr(space.total_dofs)


def _projection_rhs(space, phi, order):
    """Right-hand sides for both components of -grad(phi), integrated
    cellwise with visible rules."""
    mm = space.multimesh
    ref = reference_triangle_rule(order)
    vals_ref, grads_ref = space.element.tabulate(ref.points)
    rhs = np.zeros((2, space.total_dofs))
    for p, mesh in enumerate(mm.parts):
        dm = space.dofmaps[p]
        uncut = np.where(mm.classes[p] == CellClass.UNCUT)[0]
        if len(uncut):
            coords = mesh.all_cell_coords()[uncut]
            _, _, Jinv, det = _cell_geometry(coords)
            pg = np.einsum("qbl,mlk->mqbk", grads_ref, Jinv)
            dofs = space.offsets[p] + dm.cell_dofs[uncut]
            coef = phi.coefficients[dofs]  # (m, nb)
            gphi = np.einsum("mqbk,mb->mqk", pg, coef)
            bl = -np.einsum("q,m,mqk,qa->kma", ref.weights, det, gphi, vals_ref,
                            optimize=True)
            for k in range(2):
                np.add.at(rhs[k], dofs.ravel(), bl[k].ravel())
        for ci in sorted(mm.cut_rules[p]):
            rule = mm.cut_rules[p][ci]
            if not len(rule):
                continue
            vals, pg = _tabulate_in_cell(space, p, ci, rule.points)
            dofs = space.cell_dofs(p, ci)
            gphi = np.einsum("qbk,b->qk", pg, phi.coefficients[dofs])
            bl = -np.einsum("q,qk,qa->ka", rule.weights, gphi, vals)
            for k in range(2):
                np.add.at(rhs[k], dofs, bl[k])
    return rhs


def assemble_projection(space, phi, beta0, beta1, order=None):
    """Stabilized L2 projection of -grad(phi) onto the space, one system
    per Cartesian component (they share the matrix).

    Inactive DOFs are pinned to keep the mass-like matrix definite.
    """
    if order is None:
        order = 2 * space.degree
    A = _assemble_projection_matrix(space, beta0, beta1, order)
    rhs = _projection_rhs(space, phi, order)
    pinned = space.inactive_dofs
    systems = []
    for k in range(2):
        Ak, bk = _constrain(A, rhs[k], pinned, np.zeros(len(pinned)))
        systems.append(
            AssembledSystem(Ak, bk, dirichlet_dofs=np.empty(0, dtype=np.int64),
                            pinned_dofs=pinned.copy())
        )
    return tuple(systems)


def solve_system(system, rtol=1e-12, maxit=None):
    """Jacobi-CG solve of an assembled system; raises on non-convergence."""
    from .linalg import cg_solve

    x, report = cg_solve(system.A, system.b, preconditioner="jacobi",
                         rtol=rtol, maxit=maxit)
    if not report.converged:
        raise RuntimeError(
            f"conjugate gradients stalled: relative residual "
            f"{report.relative_residual:.3e} after {report.iterations} iterations"
        )
    return x, report


def dump_matrix_coo(A, path):
    """Text dump ``row col value``, one entry per line."""
    rows, cols, vals = A.to_coo()
    with open(path, "w") as f:
        for r, c, v in zip(rows, cols, vals):
            f.write(f"{r} {c} {v!r}\n")


def solution_function(space, x):
    """Wrap a solved coefficient vector as a multimesh function."""
    return MultiMeshFunction(space, x)
