"""Cut configuration of an ordered mesh stack.

Part 0 is the background; higher parts hide lower ones.  Building a
:class:`MultiMesh` computes, for every part: the cell classification
(uncut / cut / covered), signed quadrature rules on the visible portion
of cut cells, quadrature on the pairwise overlap regions (hidden parts of
active cells below a higher part), and the interface segments where a
part's boundary runs over lower parts, with outward normals and 1D rules.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geometry import (
    Containment,
    Interval,
    build_aabb_tree,
    clip_segment_against_triangle,
    interval_subtract,
    point_in_triangle,
    tree_collide,
    tree_point_query,
    triangle_area,
    triangles_overlap,
)
from .mesh import mesh_quality
from .quadrature import (
    EPS_AREA_REL,
    InterfaceRule,
    QuadratureRule,
    gauss_segment_rule,
    inclusion_exclusion_cut_rule,
    map_rule_to_triangle,
    overlap_rule,
    reference_triangle_rule,
)

# A cell is COVERED when its visible quadrature mass falls below this
# fraction of its area; robust against slivers at machine-precision
# separations.
EPS_COVERED = 1e-12

# Interface sub-segments shorter than this fraction of the owning part's
# mesh size are dropped (below constructed-point precision).
EPS_SEGMENT_REL = 1e-13


class CellClass(IntEnum):
    UNCUT = 0
    CUT = 1
    COVERED = 2


@dataclass
class OverlapEntry:
    """Quadrature on the part of cell_i (part i) hidden below the visible
    domain of part j > i, restricted to the pair (cell_i, cell_j)."""

    i: int
    j: int
    cell_i: int
    cell_j: int
    rule: QuadratureRule


@dataclass
class InterfaceEntry:
    """One straight sub-segment of the visible boundary of part i lying
    over part j < i, with the outward normal of part i."""

    i: int
    j: int
    facet: tuple  # (cell index in part i, local edge)
    cell_i: int
    cell_j: int
    segment: tuple  # (a, b) physical endpoints
    rule: InterfaceRule


class MultiMesh:
    """Built cut configuration; immutable once constructed."""

    def __init__(self, parts, order):
        self.parts = list(parts)
        self.order = order
        self.trees = [build_aabb_tree(m) for m in self.parts]
        self.part_h = [mesh_quality(m).h for m in self.parts]
        self.classes = []  # per part: (nc,) int array of CellClass
        self.cut_rules = []  # per part: dict cell -> QuadratureRule
        self.overlaps = []  # list[OverlapEntry]
        self.interfaces = []  # list[InterfaceEntry]
        self.delta = np.zeros((len(self.parts), len(self.parts)), dtype=int)
        self.n_overlaps = 0
        self.eta = 1.0

    @property
    def num_parts(self):
        return len(self.parts)

    def cell_class(self, part, cell):
        return CellClass(self.classes[part][cell])

    def visible_measures(self):
        """Per-part visible measure: uncut areas plus cut-rule masses."""
        out = []
        for p, mesh in enumerate(self.parts):
            areas = mesh.cell_areas()
            uncut = self.classes[p] == CellClass.UNCUT
            total = float(areas[uncut].sum())
            total += sum(r.mass for r in self.cut_rules[p].values())
            out.append(total)
        return out

    def class_counts(self):
        out = []
        for cls in self.classes:
            out.append(
                {
                    "uncut": int(np.sum(cls == CellClass.UNCUT)),
                    "cut": int(np.sum(cls == CellClass.CUT)),
                    "covered": int(np.sum(cls == CellClass.COVERED)),
                }
            )
        return out

    def diagnostics(self):
        measures = self.visible_measures()
        return {
            "num_parts": self.num_parts,
            "class_counts": self.class_counts(),
            "delta": self.delta.tolist(),
            "n_overlaps": self.n_overlaps,
            "eta": self.eta,
            "visible_measures": measures,
            "total_visible_measure": float(sum(measures)),
        }

    def dump_diagnostics(self, path):
        with open(path, "w") as f:
            json.dump(self.diagnostics(), f, indent=2, sort_keys=True)


def _validate_containment(parts, trees):
    bg_tree, bg_mesh = trees[0], parts[0]
    for p in range(1, len(parts)):
        for v, vertex in enumerate(parts[p].vertices):
            if not tree_point_query(bg_tree, bg_mesh, vertex):
                raise ValueError(
                    f"part {p} extends outside the background: vertex {v} at "
                    f"({vertex[0]!r}, {vertex[1]!r}) lies in no background cell"
                )


def _collision_maps(parts, trees):
    """Exact cell-cell interior collisions for every ordered part pair.

    Returns ``pairs[(i, j)] = [(ci, cj), ...]`` for i < j and
    ``cutters_on[i][ci] = [(j, cj), ...]`` sorted by (j, cj).
    """
    n = len(parts)
    pairs = {}
    cutters_on = [dict() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            plist = []
            for ci, cj in tree_collide(trees[i], trees[j]):
                if triangles_overlap(parts[i].cell_coords(ci), parts[j].cell_coords(cj)):
                    plist.append((ci, cj))
                    cutters_on[i].setdefault(ci, []).append((j, cj))
            pairs[(i, j)] = plist
    return pairs, cutters_on


def _vertex_exactly_visible(vertex, parts, trees, above):
    """Exact predicate check: the vertex lies strictly outside every cell
    of every higher part."""
    for k in above:
        for ck in trees[k].query_point(vertex):
            if point_in_triangle(vertex, parts[k].cell_coords(ck)) != Containment.OUTSIDE:
                return False
    return True


def classify_cells(parts, trees, cutters_on, part, order):
    """Classify each cell of one part and build cut rules.

    UNCUT without collisions against higher parts; otherwise CUT with the
    signed visible rule, or COVERED when the visible mass is below
    ``EPS_COVERED`` times the cell area.  A cell with a corner that exact
    predicates place strictly outside all higher parts is kept CUT even
    when its visible mass is below quadrature resolution: its boundary
    facets still carry interface coupling, and the overlap stabilization
    keeps its DOFs well-posed (the near-touching regime).
    """
    mesh = parts[part]
    above = list(range(part + 1, len(parts)))
    classes = np.full(mesh.num_cells, CellClass.UNCUT, dtype=int)
    rules = {}
    for ci, hits in sorted(cutters_on[part].items()):
        K = mesh.cell_coords(ci)
        cutters = [parts[j].cell_coords(cj) for (j, cj) in hits]
        rule = inclusion_exclusion_cut_rule(K, cutters, order)
        if rule.mass < EPS_COVERED * triangle_area(K) and not any(
            _vertex_exactly_visible(v, parts, trees, above) for v in K
        ):
            classes[ci] = CellClass.COVERED
        else:
            classes[ci] = CellClass.CUT
            rules[ci] = rule
    return classes, rules


def compute_overlaps(parts, pairs, cutters_on, classes, order):
    """Overlap entries O_ij for all part pairs i < j.

    Active (non-covered) cells of part i paired with non-covered cells of
    part j; anything hidden below parts above j is removed by the same
    signed construction.  Entries with negligible mass are dropped.
    """
    entries = []
    for (i, j), plist in sorted(pairs.items()):
        for ci, cj in plist:
            if classes[i][ci] == CellClass.COVERED:
                continue
            if classes[j][cj] == CellClass.COVERED:
                continue
            K = parts[i].cell_coords(ci)
            C = parts[j].cell_coords(cj)
            higher = [
                parts[k].cell_coords(ck)
                for (k, ck) in cutters_on[i].get(ci, [])
                if k > j
            ]
            rule = overlap_rule(K, C, higher, order)
            if rule.mass > EPS_AREA_REL * triangle_area(K):
                entries.append(OverlapEntry(i, j, ci, cj, rule))
    return entries


def _facet_hidden_intervals(a, b, parts, trees, above):
    """Clip the facet (a, b) against every cell of the given higher parts;
    union of the clipped parameter intervals."""
    xmin, xmax = min(a[0], b[0]), max(a[0], b[0])
    ymin, ymax = min(a[1], b[1]), max(a[1], b[1])
    hidden = []
    for k in above:
        for ck in trees[k].query_box(xmin, ymin, xmax, ymax):
            iv = clip_segment_against_triangle(a, b, parts[k].cell_coords(ck))
            if iv is not None and iv.length > 0.0:
                hidden.append(iv)
    return hidden


def _facet_split_params(a, b, parts, trees, below, lo, hi):
    """Clip endpoints from every lower-part cell, restricted to (lo, hi);
    these are the only parameters where ownership can change."""
    xmin, xmax = min(a[0], b[0]), max(a[0], b[0])
    ymin, ymax = min(a[1], b[1]), max(a[1], b[1])
    params = []
    for j in below:
        for cj in trees[j].query_box(xmin, ymin, xmax, ymax):
            iv = clip_segment_against_triangle(a, b, parts[j].cell_coords(cj))
            if iv is None:
                continue
            for t in (iv.t0, iv.t1):
                if lo < t < hi:
                    params.append(t)
    params.sort()
    merged = []
    for t in params:
        if not merged or t - merged[-1] > 1e-12:
            merged.append(t)
    return merged


def _own_segment(mid, part, parts, trees, classes):
    """Topmost part below ``part`` containing ``mid``, preferring parts
    whose containing cell is active; returns (j, cell_j) or None."""
    fallback = None
    for j in range(part - 1, -1, -1):
        cells = tree_point_query(trees[j], parts[j], mid)
        if not cells:
            continue
        active = [c for c in cells if classes[j][c] != CellClass.COVERED]
        if active:
            return j, active[0]
        if fallback is None:
            fallback = (j, cells[0])
    return fallback


def compute_interfaces(parts, trees, classes, part, order, part_h):
    """Interface entries for the boundary of one part.

    Each boundary facet is clipped against all higher parts (hidden
    portions removed), split where lower-part cell boundaries cross it,
    and each remaining sub-segment is attributed to the topmost lower
    part containing its midpoint.
    """
    mesh = parts[part]
    above = list(range(part + 1, len(parts)))
    below = list(range(part))
    entries = []
    min_len = EPS_SEGMENT_REL * part_h[part]
    for cell, ledge in mesh.boundary_facets:
        if classes[part][cell] == CellClass.COVERED:
            continue  # inactive cell: no trace dofs on this facet
        a, b = mesh.facet_endpoints(cell, ledge)
        normal = mesh.facet_outward_normal(cell, ledge)
        flen = math.hypot(b[0] - a[0], b[1] - a[1])
        hidden = _facet_hidden_intervals(a, b, parts, trees, above)
        visible = interval_subtract([Interval(0.0, 1.0)], hidden)
        for iv in visible:
            cuts = _facet_split_params(a, b, parts, trees, below, iv.t0, iv.t1)
            ts = [iv.t0] + cuts + [iv.t1]
            for t0, t1 in zip(ts[:-1], ts[1:]):
                if (t1 - t0) * flen <= min_len:
                    continue
                pa = a + t0 * (b - a)
                pb = a + t1 * (b - a)
                mid = a + (0.5 * (t0 + t1)) * (b - a)
                owner = _own_segment(mid, part, parts, trees, classes)
                if owner is None:
                    raise ValueError(
                        f"interface segment of part {part} (cell {cell}, edge "
                        f"{ledge}) has midpoint ({mid[0]!r}, {mid[1]!r}) in no "
                        "lower part; inconsistent geometry"
                    )
                j, cell_j = owner
                rule = gauss_segment_rule(order, pa, pb)
                entries.append(
                    InterfaceEntry(
                        i=part,
                        j=j,
                        facet=(int(cell), int(ledge)),
                        cell_i=int(cell),
                        cell_j=int(cell_j),
                        segment=(pa, pb),
                        rule=InterfaceRule(rule, normal, pa, pb),
                    )
                )
    return entries


def build_multimesh(parts, order=2):
    """Build the full cut configuration of an ordered mesh stack.

    ``parts[0]`` must contain every higher part; a violation is rejected
    with a diagnostic naming the offending vertex.  Output is
    deterministic for identical input.
    """
    if not parts:
        raise ValueError("need at least a background mesh")
    mm = MultiMesh(parts, order)
    _validate_containment(mm.parts, mm.trees)
    pairs, cutters_on = _collision_maps(mm.parts, mm.trees)

    for p in range(mm.num_parts):
        classes, rules = classify_cells(mm.parts, mm.trees, cutters_on, p, order)
        mm.classes.append(classes)
        mm.cut_rules.append(rules)

    mm.overlaps = compute_overlaps(mm.parts, pairs, cutters_on, mm.classes, order)
    for p in range(1, mm.num_parts):
        mm.interfaces.extend(
            compute_interfaces(mm.parts, mm.trees, mm.classes, p, order, mm.part_h)
        )

    for e in mm.overlaps:
        mm.delta[e.i, e.j] = 1
    if mm.num_parts > 1:
        mm.n_overlaps = int(max(mm.delta[:j, j].sum() for j in range(1, mm.num_parts)))
    fractions = []
    for p, mesh in enumerate(mm.parts):
        areas = mesh.cell_areas()
        for ci, rule in mm.cut_rules[p].items():
            # slivers below quadrature resolution report machine epsilon
            fractions.append(max(rule.mass / areas[ci], np.finfo(float).eps))
    mm.eta = float(min(fractions)) if fractions else 1.0
    return mm


def locate_point(mm, x):
    """(part, cell) of the topmost part containing ``x``; None outside."""
    for p in range(mm.num_parts - 1, -1, -1):
        cells = tree_point_query(mm.trees[p], mm.parts[p], x)
        if cells:
            return p, cells[0]
    return None


@dataclass
class MultiMeshStats:
    delta: np.ndarray
    n_overlaps: int
    eta: float
    visible_measures: list


def multimesh_stats(mm):
    """Summary statistics: indicator matrix, maximum overlap count,
    smallest visible volume fraction, per-part visible measures."""
    return MultiMeshStats(
        delta=mm.delta.copy(),
        n_overlaps=mm.n_overlaps,
        eta=mm.eta,
        visible_measures=mm.visible_measures(),
    )
