"""Lagrange elements, per-part DOF maps, and the direct-sum function space
over a mesh stack.

A multimesh function is a tuple of standard finite element functions, one
per part; evaluation at a point uses the topmost part containing it.
DOFs are allocated on full premeshes; DOFs supported only on covered
cells are marked inactive (they are pinned during assembly).
"""

from __future__ import annotations

import numpy as np

from .multimesh import CellClass, locate_point


class Element:
    """Nodal Lagrange basis of degree 1 or 2 on the reference triangle
    (0,0)-(1,0)-(0,1).

    Degree 1 nodes: the vertices.  Degree 2 adds midpoints of local edges
    (0,1), (1,2), (2,0) as nodes 3, 4, 5.
    """

    def __init__(self, degree):
        if degree not in (1, 2):
            raise ValueError(f"unsupported polynomial degree {degree}")
        self.degree = degree
        self.ndofs = 3 if degree == 1 else 6
        if degree == 1:
            self.ref_nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        else:
            self.ref_nodes = np.array(
                [
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [0.0, 1.0],
                    [0.5, 0.0],
                    [0.5, 0.5],
                    [0.0, 0.5],
                ]
            )

    def tabulate(self, pts):
        """Basis values and reference gradients at reference points.

        Returns (values (n, ndofs), grads (n, ndofs, 2)).
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        xi, eta = pts[:, 0], pts[:, 1]
        lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)  # (n, 3)
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (3, 2)
        n = len(pts)
        if self.degree == 1:
            vals = lam
            grads = np.broadcast_to(dlam, (n, 3, 2)).copy()
            return vals, grads
        vals = np.empty((n, 6))
        grads = np.empty((n, 6, 2))
        for a in range(3):
            vals[:, a] = lam[:, a] * (2.0 * lam[:, a] - 1.0)
            grads[:, a, :] = (4.0 * lam[:, a, None] - 1.0) * dlam[a]
        edges = ((0, 1), (1, 2), (2, 0))
        for k, (p, q) in enumerate(edges):
            vals[:, 3 + k] = 4.0 * lam[:, p] * lam[:, q]
            grads[:, 3 + k, :] = 4.0 * (
                lam[:, p, None] * dlam[q] + lam[:, q, None] * dlam[p]
            )
        return vals, grads


def eval_basis(element, ref_point):
    """Values and reference gradients of all basis functions at one
    reference point."""
    vals, grads = element.tabulate(np.asarray(ref_point).reshape(1, 2))
    return vals[0], grads[0]


class DofMap:
    """Global DOF numbering for one mesh: vertex DOFs first, then (for
    degree 2) one DOF per undirected edge, identified by its sorted
    vertex-index pair."""

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        nv = mesh.num_vertices
        if degree == 1:
            self.ndofs = nv
            self.cell_dofs = mesh.cells.copy()
            self.dof_coords = mesh.vertices.copy()
        else:
            edge_ids = {}
            cell_dofs = np.empty((mesh.num_cells, 6), dtype=np.int64)
            cell_dofs[:, :3] = mesh.cells
            for c in range(mesh.num_cells):
                v = mesh.cells[c]
                for k in range(3):
                    key = (min(v[k], v[(k + 1) % 3]), max(v[k], v[(k + 1) % 3]))
                    if key not in edge_ids:
                        edge_ids[key] = len(edge_ids)
                    cell_dofs[c, 3 + k] = nv + edge_ids[key]
            self.ndofs = nv + len(edge_ids)
            self.cell_dofs = cell_dofs
            coords = np.empty((self.ndofs, 2))
            coords[:nv] = mesh.vertices
            for (va, vb), e in edge_ids.items():
                coords[nv + e] = 0.5 * (mesh.vertices[va] + mesh.vertices[vb])
            self.dof_coords = coords

    def boundary_dofs(self):
        """DOFs lying on the mesh boundary."""
        dofs = set()
        for cell, ledge in self.mesh.boundary_facets:
            v = self.mesh.cells[cell]
            dofs.add(int(v[ledge]))
            dofs.add(int(v[(ledge + 1) % 3]))
            if self.degree == 2:
                dofs.add(int(self.cell_dofs[cell, 3 + ledge]))
        return np.array(sorted(dofs), dtype=np.int64)


class MultiMeshFunctionSpace:
    """Direct sum of per-part Lagrange spaces on a built multimesh.

    Global DOF = part offset + local DOF.  ``inactive_dofs`` lists global
    DOFs every supporting cell of which is covered.
    """

    def __init__(self, multimesh, degree):
        self.multimesh = multimesh
        self.degree = degree
        self.element = Element(degree)
        self.dofmaps = [DofMap(m, degree) for m in multimesh.parts]
        self.offsets = np.concatenate(
            [[0], np.cumsum([dm.ndofs for dm in self.dofmaps])]
        )
        self.total_dofs = int(self.offsets[-1])
        self.inactive_dofs = self._find_inactive()

    def _find_inactive(self):
        inactive = []
        for p, dm in enumerate(self.dofmaps):
            classes = self.multimesh.classes[p]
            supported = np.zeros(dm.ndofs, dtype=bool)
            alive = classes != CellClass.COVERED
            if np.any(alive):
                supported[np.unique(dm.cell_dofs[alive])] = True
            inactive.extend(self.offsets[p] + np.where(~supported)[0])
        return np.array(sorted(int(d) for d in inactive), dtype=np.int64)

    def num_parts(self):
        return self.multimesh.num_parts

    def cell_dofs(self, part, cell):
        """Global DOF indices of one cell."""
        return self.offsets[part] + self.dofmaps[part].cell_dofs[cell]

    def part_range(self, part):
        return range(int(self.offsets[part]), int(self.offsets[part + 1]))


def build_space(multimesh, degree):
    """Create the direct-sum space of the given degree (1 or 2)."""
    return MultiMeshFunctionSpace(multimesh, degree)


def cell_reference_map(coords):
    """Affine map data for a cell: (v0, J, Jinv, det) with x = v0 + J ξ."""
    v0 = coords[0]
    J = np.column_stack([coords[1] - v0, coords[2] - v0])
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    Jinv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
    return v0, J, Jinv, det


def physical_to_reference(coords, pts, clamp=1e-12):
    """Map physical points into a cell's reference coordinates.

    Tiny excursions outside the reference triangle (constructed-point
    rounding) are clamped; large ones indicate a wrong cell and raise.
    """
    v0, _, Jinv, _ = cell_reference_map(coords)
    ref = (np.asarray(pts, dtype=float).reshape(-1, 2) - v0) @ Jinv.T
    lo = ref.min() if len(ref) else 0.0
    hi = (ref[:, 0] + ref[:, 1]).max() if len(ref) else 0.0
    if lo < -1e-8 or hi > 1.0 + 1e-8:
        raise ValueError(
            f"point maps outside the reference cell (min {lo:.3e}, "
            f"max sum {hi:.3e})"
        )
    if clamp:
        np.clip(ref, 0.0, None, out=ref)
        s = ref.sum(axis=1)
        over = s > 1.0
        if np.any(over):
            ref[over] /= s[over, None]
    return ref


class MultiMeshFunction:
    """Coefficient vector over a multimesh function space."""

    def __init__(self, space, coefficients=None):
        self.space = space
        if coefficients is None:
            coefficients = np.zeros(space.total_dofs)
        self.coefficients = np.asarray(coefficients, dtype=float)
        if self.coefficients.shape != (space.total_dofs,):
            raise ValueError("coefficient vector has wrong length")

    def eval_in_cell(self, part, cell, pts):
        """Values at physical points known to lie in the given cell."""
        coords = self.space.multimesh.parts[part].cell_coords(cell)
        ref = physical_to_reference(coords, pts)
        vals, _ = self.space.element.tabulate(ref)
        dofs = self.space.cell_dofs(part, cell)
        return vals @ self.coefficients[dofs]

    def grad_in_cell(self, part, cell, pts):
        """Gradients at physical points known to lie in the given cell."""
        coords = self.space.multimesh.parts[part].cell_coords(cell)
        v0, J, Jinv, det = cell_reference_map(coords)
        ref = physical_to_reference(coords, pts)
        _, grads = self.space.element.tabulate(ref)
        phys = grads @ Jinv  # d(phi)/dx_k = dphi/dxi_m * dxi_m/dx_k
        dofs = self.space.cell_dofs(part, cell)
        return np.einsum("nbk,b->nk", phys, self.coefficients[dofs])

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(f, x):
    """Value of a multimesh function at a point, taken from the topmost
    part containing it."""
    hit = locate_point(f.space.multimesh, x)
    if hit is None:
        raise ValueError(f"point ({x[0]!r}, {x[1]!r}) lies outside every part")
    part, cell = hit
    return float(f.eval_in_cell(part, cell, np.asarray(x).reshape(1, 2))[0])


def interpolate(g, space):
    """Nodal interpolant of ``g(x, y)`` on every part; inactive DOFs are
    zeroed.  ``g`` must broadcast over coordinate arrays."""
    f = MultiMeshFunction(space)
    for p, dm in enumerate(space.dofmaps):
        xy = dm.dof_coords
        vals = np.asarray(g(xy[:, 0], xy[:, 1]), dtype=float)
        vals = np.broadcast_to(vals, (dm.ndofs,))
        f.coefficients[space.offsets[p] : space.offsets[p] + dm.ndofs] = vals
    if len(space.inactive_dofs):
        f.coefficients[space.inactive_dofs] = 0.0
    return f


def export_vertex_values(f, path):
    """CSV snapshot ``part,vertex,x,y,value`` of the vertex DOFs."""
    space = f.space
    with open(path, "w") as out:
        out.write("part,vertex,x,y,value\n")
        for p, mesh in enumerate(space.multimesh.parts):
            base = space.offsets[p]
            for v in range(mesh.num_vertices):
                x, y = mesh.vertices[v]
                out.write(f"{p},{v},{x!r},{y!r},{f.coefficients[base + v]!r}\n")
