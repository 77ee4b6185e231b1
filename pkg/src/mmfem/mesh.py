"""Triangle meshes: structured generators, rigid transforms, quality metrics.

A mesh stores vertex coordinates, counter-clockwise cell connectivity and
the list of boundary facets (edges owned by exactly one cell).  Meshes are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MeshQuality:
    """Size and shape-regularity summary of a mesh.

    h   : largest cell diameter
    c0  : largest diam(K)^2 / |K| (shape regularity; 4 for a right
          isoceles triangle, ~4.62 for equilateral)
    c1  : ratio of largest to smallest cell area
    """

    h: float
    c0: float
    c1: float


class Mesh:
    """Immutable 2D triangle mesh.

    Parameters
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array
        Vertex indices of each triangle, counter-clockwise.

    Boundary facets are derived on construction: facet ``(c, k)`` is the
    edge from local vertex ``k`` to ``(k+1) % 3`` of cell ``c`` shared by
    no other cell.
    """

    def __init__(self, vertices, cells):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must be an (nv, 2) array")
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise ValueError("cells must be an (nc, 3) array")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertex coordinates must be finite")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise ValueError("cell indices out of range")

        self.vertices = vertices
        self.cells = cells
        areas = self.cell_areas()
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise ValueError(
                f"cell {bad} is degenerate or clockwise (signed area {areas[bad]:.3e})"
            )
        self.boundary_facets = self._find_boundary_facets()
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        self.boundary_facets.setflags(write=False)

    # -- topology -----------------------------------------------------

    def _find_boundary_facets(self):
        count = {}
        owner = {}
        for c in range(len(self.cells)):
            v = self.cells[c]
            for k in range(3):
                key = (min(v[k], v[(k + 1) % 3]), max(v[k], v[(k + 1) % 3]))
                count[key] = count.get(key, 0) + 1
                if key not in owner:
                    owner[key] = (c, k)
        facets = [owner[key] for key in owner if count[key] == 1]
        facets.sort()
        return np.asarray(facets, dtype=np.int64).reshape(-1, 2)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    def edge_set(self):
        """Set of undirected edges as sorted vertex-index pairs."""
        edges = set()
        for v in self.cells:
            for k in range(3):
                a, b = int(v[k]), int(v[(k + 1) % 3])
                edges.add((min(a, b), max(a, b)))
        return edges

    # -- geometry -----------------------------------------------------

    def cell_coords(self, c):
        """(3, 2) vertex coordinates of cell ``c``."""
        return self.vertices[self.cells[c]]

    def all_cell_coords(self):
        """(nc, 3, 2) coordinates for every cell."""
        return self.vertices[self.cells]

    def cell_areas(self):
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def cell_boxes(self):
        """(nc, 4) per-cell bounding boxes as (xmin, ymin, xmax, ymax)."""
        p = self.vertices[self.cells]
        return np.concatenate([p.min(axis=1), p.max(axis=1)], axis=1)

    def facet_endpoints(self, cell, ledge):
        """Physical endpoints (a, b) of local edge ``ledge`` of ``cell``,
        oriented counter-clockwise (outward normal to the right)."""
        v = self.cells[cell]
        a = self.vertices[v[ledge]]
        b = self.vertices[v[(ledge + 1) % 3]]
        return a, b

    def facet_outward_normal(self, cell, ledge):
        a, b = self.facet_endpoints(cell, ledge)
        d = b - a
        length = math.hypot(d[0], d[1])
        return np.array([d[1] / length, -d[0] / length])

    # -- serialization ------------------------------------------------

    def to_json_dict(self):
        return {
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
        }

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)

    @classmethod
    def from_json_dict(cls, data):
        return cls(np.asarray(data["vertices"]), np.asarray(data["cells"]))

    @classmethod
    def load_json(cls, path):
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def unit_square_mesh(nx, ny):
    """Structured triangulation of [0,1]^2 with 2*nx*ny cells.

    Every grid square is split along its lower-left to upper-right
    diagonal (fixed direction for reproducibility).
    """
    return rect_mesh(0.0, 0.0, 1.0, 1.0, nx, ny)


def rect_mesh(x0, y0, x1, y1, nx, ny):
    """Structured triangulation of the rectangle [x0,x1] x [y0,y1]."""
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle [{x0},{x1}] x [{y0},{y1}]")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((ll, lr, ur))
            cells.append((ll, ur, ul))
    return Mesh(vertices, np.asarray(cells))


def transform_mesh(m, translation=(0.0, 0.0), rotation=0.0, pivot=(0.0, 0.0)):
    """Rigidly transform a mesh: rotate by ``rotation`` radians about
    ``pivot``, then translate.  Connectivity is unchanged."""
    pivot = np.asarray(pivot, dtype=float)
    translation = np.asarray(translation, dtype=float)
    c, s = math.cos(rotation), math.sin(rotation)
    R = np.array([[c, -s], [s, c]])
    verts = (m.vertices - pivot) @ R.T + pivot + translation
    return Mesh(verts, m.cells)


def mesh_quality(m):
    """Compute (h, c0, c1) for a mesh; see :class:`MeshQuality`."""
    if m.num_cells == 0:
        raise ValueError("empty mesh")
    p = m.all_cell_coords()
    e0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    e1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    e2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    diam = np.maximum(e0, np.maximum(e1, e2))
    areas = m.cell_areas()
    return MeshQuality(
        h=float(diam.max()),
        c0=float((diam**2 / areas).max()),
        c1=float(areas.max() / areas.min()),
    )
