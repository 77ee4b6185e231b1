"""Quadrature rules: reference-cell tables, affine push-forwards, and
signed rules on cut cells and overlaps built by inclusion-exclusion.

Weights of cut-cell and overlap rules may be negative; the weight sum of
any rule equals the signed measure of the set it represents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    triangle_area,
    triangle_triangle_intersection,
    triangulate_convex_polygon,
)

# Pruning threshold for sub-simplices created during inclusion-exclusion,
# relative to the area of the root cell.
EPS_AREA_REL = 1e-14


@dataclass
class QuadratureRule:
    """Points with signed weights; physical coordinates unless stated."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must have equal length")

    def __len__(self):
        return len(self.weights)

    @property
    def mass(self):
        return float(self.weights.sum())

    def integrate(self, f):
        """Apply the rule to a callable f(x, y) (vectorized)."""
        return float(np.dot(self.weights, f(self.points[:, 0], self.points[:, 1])))

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 2)), np.empty(0))

    @classmethod
    def concatenate(cls, rules):
        rules = [r for r in rules if len(r)]
        if not rules:
            return cls.empty()
        return cls(
            np.concatenate([r.points for r in rules]),
            np.concatenate([r.weights for r in rules]),
        )


@dataclass
class InterfaceRule:
    """1D rule along an interface segment plus the outward unit normal of
    the higher-ranked mesh; weights are positive arclengths."""

    rule: QuadratureRule
    normal: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)


# --------------------------------------------------------------------------
# Reference rules
# --------------------------------------------------------------------------

# Symmetric rules on the reference triangle (0,0)-(1,0)-(0,1), exact for
# total degree <= key; weights sum to 1/2.  Classic compact schemes
# (Strang-Fix / Dunavant).
_TRIANGLE_TABLES = {}

_TRIANGLE_TABLES[1] = (
    [[1.0 / 3.0, 1.0 / 3.0]],
    [0.5],
)
_TRIANGLE_TABLES[2] = (
    [[1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 6.0]],
    [1.0 / 6.0] * 3,
)
_TRIANGLE_TABLES[3] = (
    [
        [0.659027622374092, 0.231933368553031],
        [0.659027622374092, 0.109039009072877],
        [0.231933368553031, 0.659027622374092],
        [0.231933368553031, 0.109039009072877],
        [0.109039009072877, 0.659027622374092],
        [0.109039009072877, 0.231933368553031],
    ],
    [1.0 / 12.0] * 6,
)
_TRIANGLE_TABLES[4] = (
    [
        [0.816847572980459, 0.091576213509771],
        [0.091576213509771, 0.816847572980459],
        [0.091576213509771, 0.091576213509771],
        [0.108103018168070, 0.445948490915965],
        [0.445948490915965, 0.108103018168070],
        [0.445948490915965, 0.445948490915965],
    ],
    [0.109951743655322 / 2.0] * 3 + [0.223381589678011 / 2.0] * 3,
)
_TRIANGLE_TABLES[5] = (
    [
        [1.0 / 3.0, 1.0 / 3.0],
        [0.797426985353087, 0.101286507323456],
        [0.101286507323456, 0.797426985353087],
        [0.101286507323456, 0.101286507323456],
        [0.059715871789770, 0.470142064105115],
        [0.470142064105115, 0.059715871789770],
        [0.470142064105115, 0.470142064105115],
    ],
    [0.225 / 2.0]
    + [0.125939180544827 / 2.0] * 3
    + [0.132394152788506 / 2.0] * 3,
)
_TRIANGLE_TABLES[6] = (
    [
        [0.873821971016996, 0.063089014491502],
        [0.063089014491502, 0.873821971016996],
        [0.063089014491502, 0.063089014491502],
        [0.501426509658179, 0.249286745170910],
        [0.249286745170910, 0.501426509658179],
        [0.249286745170910, 0.249286745170910],
        [0.636502499121399, 0.310352451033785],
        [0.636502499121399, 0.053145049844816],
        [0.310352451033785, 0.636502499121399],
        [0.310352451033785, 0.053145049844816],
        [0.053145049844816, 0.636502499121399],
        [0.053145049844816, 0.310352451033785],
    ],
    [0.050844906370207 / 2.0] * 3
    + [0.116786275726379 / 2.0] * 3
    + [0.082851075618374 / 2.0] * 6,
)

_MAX_ORDER = 10


def _collapsed_triangle_rule(order):
    # tensor Gauss-Legendre on the unit square mapped by (u, v) ->
    # (u, v(1-u)) with Jacobian (1-u); exact for total degree <= order
    n = (order + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    pts = []
    wts = []
    for i in range(n):
        for j in range(n):
            pts.append([u[i], u[j] * (1.0 - u[i])])
            wts.append(wu[i] * wu[j] * (1.0 - u[i]))
    return pts, wts


def reference_triangle_rule(order):
    """Rule on the reference triangle (0,0)-(1,0)-(0,1) exact for all
    polynomials of total degree <= order; weights sum to 1/2.

    Orders 1-6 use compact symmetric tables, 7-10 a collapsed
    Gauss-Legendre product rule.
    """
    if not isinstance(order, (int, np.integer)) or not (1 <= order <= _MAX_ORDER):
        raise ValueError(f"unsupported quadrature order {order!r} (need 1..{_MAX_ORDER})")
    if order in _TRIANGLE_TABLES:
        pts, wts = _TRIANGLE_TABLES[order]
    else:
        pts, wts = _collapsed_triangle_rule(order)
    wts = np.asarray(wts, dtype=float)
    wts = wts * (0.5 / wts.sum())  # pin the mass to the cell measure
    return QuadratureRule(np.asarray(pts), wts)


def map_rule_to_triangle(ref, tri):
    """Push a reference rule forward to a physical triangle: points map
    affinely, weights scale by |det J| = 2 area."""
    tri = np.asarray(tri, dtype=float)
    v0 = tri[0]
    J = np.array([tri[1] - v0, tri[2] - v0])  # rows
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if det == 0.0:
        raise ValueError("degenerate triangle")
    pts = v0 + ref.points @ J
    return QuadratureRule(pts, ref.weights * abs(det))


def gauss_segment_rule(order, a, b):
    """Gauss-Legendre rule along the segment from a to b; weight sum is
    the segment length."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    if length == 0.0:
        raise ValueError("degenerate segment")
    n = max(1, (order + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    pts = a + np.outer(t, b - a)
    return QuadratureRule(pts, 0.5 * w * length)


# --------------------------------------------------------------------------
# Signed rules on cut geometry
# --------------------------------------------------------------------------


def _tri_box(tri):
    xs = (tri[0][0], tri[1][0], tri[2][0])
    ys = (tri[0][1], tri[1][1], tri[2][1])
    return min(xs), min(ys), max(xs), max(ys)


def _extend_signed_pieces(pieces, cutter, eps):
    """One inclusion-exclusion step: for every signed simplex intersect
    with the cutter and append the opposite-signed triangulation.
    Box-disjoint pairs are skipped outright."""
    cb = _tri_box(cutter)
    new = []
    for sign, tri, box in pieces:
        if box[2] < cb[0] or cb[2] < box[0] or box[3] < cb[1] or cb[3] < box[1]:
            continue
        poly = triangle_triangle_intersection(tri, cutter)
        for sub in triangulate_convex_polygon(poly):
            if triangle_area(sub) > eps:
                new.append((-sign, sub, _tri_box(sub)))
    pieces.extend(new)


def _emit(pieces, order):
    ref = reference_triangle_rule(order)
    rules = []
    for sign, tri, _box in pieces:
        r = map_rule_to_triangle(ref, tri)
        rules.append(QuadratureRule(r.points, sign * r.weights))
    return QuadratureRule.concatenate(rules)


def inclusion_exclusion_cut_rule(K, cutters, order):
    """Signed rule for K minus the union of the cutter triangles.

    A signed simplex list starts at {(+, K)}; each cutter appends the
    opposite-signed triangulated intersections with every current piece.
    Pieces below ``EPS_AREA_REL * area(K)`` are pruned, which also kills
    the cross terms between cutters of a common mesh (they only meet in
    zero-area sets).  A fully covered K yields weight sum ~ 0.
    """
    K = np.asarray(K, dtype=float)
    eps = EPS_AREA_REL * triangle_area(K)
    pieces = [(1, K, _tri_box(K))]
    for C in cutters:
        _extend_signed_pieces(pieces, np.asarray(C, dtype=float), eps)
    return _emit(pieces, order)


def overlap_rule(K, C, higher_cutters, order):
    """Signed rule for (K ∩ C) minus the union of higher-ranked cutters.

    Same incremental construction as the cut rule, seeded with the
    triangulated intersection K ∩ C.
    """
    K = np.asarray(K, dtype=float)
    C = np.asarray(C, dtype=float)
    eps = EPS_AREA_REL * triangle_area(K)
    poly = triangle_triangle_intersection(K, C)
    pieces = [
        (1, sub, _tri_box(sub))
        for sub in triangulate_convex_polygon(poly)
        if triangle_area(sub) > eps
    ]
    for H in higher_cutters:
        _extend_signed_pieces(pieces, np.asarray(H, dtype=float), eps)
    return _emit(pieces, order)


def dump_rule_csv(rule, path):
    """Debug dump of a rule as ``x,y,w`` rows."""
    with open(path, "w") as f:
        f.write("x,y,w\n")
        for (x, y), w in zip(rule.points, rule.weights):
            f.write(f"{x!r},{y!r},{w!r}\n")
