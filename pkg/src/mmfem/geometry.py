"""Planar geometric kernel.

Orientation decisions are exact: a floating-point filter with a static
error bound handles the generic case and an exact multi-term expansion
evaluation settles the near-degenerate one.  Constructed coordinates
(edge-edge intersection points) are ordinary doubles; only predicates
are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cmp_to_key

import numpy as np

# --------------------------------------------------------------------------
# Exact orientation predicate
# --------------------------------------------------------------------------
# Two-term arithmetic and expansion sums follow the classic construction of
# adaptive-precision predicates; every nonzero partial result below is an
# exact representation of the corresponding real quantity.


def _init_constants():
    every_other = True
    half = 0.5
    eps = 1.0
    splitter = 1.0
    check = 1.0
    while True:
        lastcheck = check
        eps *= half
        if every_other:
            splitter *= 2.0
        every_other = not every_other
        check = 1.0 + eps
        if check == 1.0 or check == lastcheck:
            break
    return eps, splitter + 1.0


_EPSILON, _SPLITTER = _init_constants()
_CCW_ERRBOUND = (3.0 + 16.0 * _EPSILON) * _EPSILON


def _fast_two_sum(a, b):
    # requires |a| >= |b|
    x = a + b
    return x, b - (x - a)


def _two_sum(a, b):
    x = a + b
    bvirt = x - a
    avirt = x - bvirt
    return x, (a - avirt) + (b - bvirt)


def _two_diff(a, b):
    x = a - b
    bvirt = a - x
    avirt = x + bvirt
    return x, (a - avirt) + (bvirt - b)


def _split(a):
    c = _SPLITTER * a
    abig = c - a
    ahi = c - abig
    return ahi, a - ahi


def _two_product(a, b):
    x = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err = x - ahi * bhi
    err -= alo * bhi
    err -= ahi * blo
    return x, alo * blo - err


def _two_one_diff(a1, a0, b):
    i, x0 = _two_diff(a0, b)
    x2, x1 = _two_sum(a1, i)
    return x2, x1, x0


def _two_two_diff(a1, a0, b1, b0):
    # (a1 + a0) - (b1 + b0) as a little-endian four-term expansion
    j, r0, x0 = _two_one_diff(a1, a0, b0)
    x3, x2, x1 = _two_one_diff(j, r0, b1)
    return [x0, x1, x2, x3]


def _expansion_sum_zeroelim(e, f):
    # sum of two little-endian nonoverlapping expansions, zeros removed
    elen, flen = len(e), len(f)
    enow, fnow = e[0], f[0]
    eindex = findex = 0
    if (fnow > enow) == (fnow > -enow):
        Q = enow
        eindex = 1
        enow = e[1] if elen > 1 else 0.0
    else:
        Q = fnow
        findex = 1
        fnow = f[1] if flen > 1 else 0.0
    h = []
    if eindex < elen and findex < flen:
        if (fnow > enow) == (fnow > -enow):
            Q, hh = _fast_two_sum(enow, Q)
            eindex += 1
            enow = e[eindex] if eindex < elen else 0.0
        else:
            Q, hh = _fast_two_sum(fnow, Q)
            findex += 1
            fnow = f[findex] if findex < flen else 0.0
        if hh != 0.0:
            h.append(hh)
        while eindex < elen and findex < flen:
            if (fnow > enow) == (fnow > -enow):
                Q, hh = _two_sum(Q, enow)
                eindex += 1
                enow = e[eindex] if eindex < elen else 0.0
            else:
                Q, hh = _two_sum(Q, fnow)
                findex += 1
                fnow = f[findex] if findex < flen else 0.0
            if hh != 0.0:
                h.append(hh)
    while eindex < elen:
        Q, hh = _two_sum(Q, enow)
        eindex += 1
        enow = e[eindex] if eindex < elen else 0.0
        if hh != 0.0:
            h.append(hh)
    while findex < flen:
        Q, hh = _two_sum(Q, fnow)
        findex += 1
        fnow = f[findex] if findex < flen else 0.0
        if hh != 0.0:
            h.append(hh)
    if Q != 0.0 or not h:
        h.append(Q)
    return h


def _orient2d_exact(ax, ay, bx, by, cx, cy):
    # sign of ax*by - ax*cy + bx*cy - bx*ay + cx*ay - cx*by, exactly
    axby1, axby0 = _two_product(ax, by)
    axcy1, axcy0 = _two_product(ax, cy)
    at = _two_two_diff(axby1, axby0, axcy1, axcy0)

    bxcy1, bxcy0 = _two_product(bx, cy)
    bxay1, bxay0 = _two_product(bx, ay)
    bt = _two_two_diff(bxcy1, bxcy0, bxay1, bxay0)

    cxay1, cxay0 = _two_product(cx, ay)
    cxby1, cxby0 = _two_product(cx, by)
    ct = _two_two_diff(cxay1, cxay0, cxby1, cxby0)

    w = _expansion_sum_zeroelim(_expansion_sum_zeroelim(at, bt), ct)
    d = w[-1]
    if d > 0.0:
        return 1
    if d < 0.0:
        return -1
    return 0


def orient2d(a, b, c):
    """Exact sign of the signed area of triangle (a, b, c).

    Returns +1 if the points are in counter-clockwise order, -1 if
    clockwise, 0 if collinear.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])

    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright

    if detleft > 0.0:
        if detright <= 0.0:
            return 1 if det > 0.0 else (-1 if det < 0.0 else 0)
        detsum = detleft + detright
    elif detleft < 0.0:
        if detright >= 0.0:
            return 1 if det > 0.0 else (-1 if det < 0.0 else 0)
        detsum = -detleft - detright
    else:
        return 1 if detright < 0.0 else (-1 if detright > 0.0 else 0)

    errbound = _CCW_ERRBOUND * detsum
    if det >= errbound or -det >= errbound:
        return 1 if det > 0.0 else -1
    return _orient2d_exact(ax, ay, bx, by, cx, cy)


# --------------------------------------------------------------------------
# Point/triangle containment
# --------------------------------------------------------------------------


class Containment(IntEnum):
    OUTSIDE = -1
    BOUNDARY = 0
    INSIDE = 1


def point_in_triangle(p, tri):
    """Classify point ``p`` against triangle ``tri`` (3 vertices).

    Uses exact orientation tests; points exactly on an edge or vertex are
    reported as BOUNDARY.
    """
    a, b, c = tri[0], tri[1], tri[2]
    o = orient2d(a, b, c)
    if o == 0:
        raise ValueError("degenerate triangle")
    if o < 0:
        b, c = c, b
    s1 = orient2d(a, b, p)
    if s1 < 0:
        return Containment.OUTSIDE
    s2 = orient2d(b, c, p)
    if s2 < 0:
        return Containment.OUTSIDE
    s3 = orient2d(c, a, p)
    if s3 < 0:
        return Containment.OUTSIDE
    if s1 > 0 and s2 > 0 and s3 > 0:
        return Containment.INSIDE
    return Containment.BOUNDARY


def triangle_area(tri):
    """Unsigned area of a triangle given as (3, 2) coordinates."""
    d1x = tri[1][0] - tri[0][0]
    d1y = tri[1][1] - tri[0][1]
    d2x = tri[2][0] - tri[0][0]
    d2y = tri[2][1] - tri[0][1]
    return abs(d1x * d2y - d1y * d2x) / 2.0


def triangle_diameter(tri):
    return max(
        math.dist(tri[0], tri[1]),
        math.dist(tri[1], tri[2]),
        math.dist(tri[2], tri[0]),
    )


def triangles_overlap(t1, t2):
    """Exact test whether two triangle *interiors* intersect.

    Separating-axis test over the six edge lines, decided with exact
    orientation signs.  Contact along a shared edge or vertex only does
    not count as overlap.
    """
    for (ta, tb) in ((t1, t2), (t2, t1)):
        o = orient2d(ta[0], ta[1], ta[2])
        for k in range(3):
            a, b = ta[k], ta[(k + 1) % 3]
            if o < 0:
                a, b = b, a
            # edge (a, b) with the triangle on the left; tb entirely on the
            # right (or touching the line) means the interiors are disjoint
            if all(orient2d(a, b, q) <= 0 for q in tb):
                return False
    return True


# --------------------------------------------------------------------------
# Axis-aligned bounding boxes and trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AABB:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError("inverted bounding box")

    def overlaps(self, other):
        return not (
            self.xmax < other.xmin
            or other.xmax < self.xmin
            or self.ymax < other.ymin
            or other.ymax < self.ymin
        )

    def contains_point(self, p):
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    @classmethod
    def of_points(cls, pts):
        pts = np.asarray(pts, dtype=float)
        return cls(pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())


class AABBTree:
    """Static binary AABB tree over a set of boxes (one per mesh cell).

    Built top-down by splitting at the median cell-center along the longer
    axis of the node's box; deterministic for identical input.
    """

    def __init__(self, boxes):
        boxes = np.asarray(boxes, dtype=float)
        if boxes.ndim != 2 or boxes.shape[1] != 4 or len(boxes) == 0:
            raise ValueError("boxes must be a nonempty (n, 4) array")
        n = len(boxes)
        centers = 0.5 * (boxes[:, :2] + boxes[:, 2:])
        max_nodes = 2 * n - 1
        self.node_box = np.empty((max_nodes, 4))
        self.node_left = np.full(max_nodes, -1, dtype=np.int64)
        self.node_right = np.full(max_nodes, -1, dtype=np.int64)
        self.node_item = np.full(max_nodes, -1, dtype=np.int64)
        self._count = 0
        self._build(np.arange(n), boxes, centers)

    def _build(self, idx, boxes, centers):
        node = self._count
        self._count += 1
        sub = boxes[idx]
        box = (
            sub[:, 0].min(),
            sub[:, 1].min(),
            sub[:, 2].max(),
            sub[:, 3].max(),
        )
        self.node_box[node] = box
        if len(idx) == 1:
            self.node_item[node] = idx[0]
            return node
        axis = 0 if (box[2] - box[0]) >= (box[3] - box[1]) else 1
        order = np.argsort(centers[idx, axis], kind="stable")
        half = len(idx) // 2
        left = self._build(idx[order[:half]], boxes, centers)
        right = self._build(idx[order[half:]], boxes, centers)
        self.node_left[node] = left
        self.node_right[node] = right
        return node

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.cell_boxes())

    @property
    def root_box(self):
        b = self.node_box[0]
        return AABB(b[0], b[1], b[2], b[3])

    def query_box(self, xmin, ymin, xmax, ymax):
        """Indices of all leaf items whose box overlaps the query box."""
        out = []
        stack = [0]
        nb = self.node_box
        while stack:
            node = stack.pop()
            b = nb[node]
            if b[2] < xmin or xmax < b[0] or b[3] < ymin or ymax < b[1]:
                continue
            item = self.node_item[node]
            if item >= 0:
                out.append(int(item))
            else:
                stack.append(int(self.node_left[node]))
                stack.append(int(self.node_right[node]))
        out.sort()
        return out

    def query_point(self, p):
        x, y = float(p[0]), float(p[1])
        return self.query_box(x, y, x, y)


def build_aabb_tree(mesh):
    """AABB tree over the cells of a mesh."""
    if mesh.num_cells == 0:
        raise ValueError("empty mesh")
    return AABBTree.from_mesh(mesh)


def tree_collide(ta, tb):
    """All (item_a, item_b) pairs whose leaf boxes overlap.

    A superset of the truly intersecting cell pairs: every pair with
    overlapping boxes is returned.
    """
    out = []
    stack = [(0, 0)]
    ba, bb = ta.node_box, tb.node_box
    while stack:
        na, nb = stack.pop()
        a, b = ba[na], bb[nb]
        if a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]:
            continue
        ia, ib = ta.node_item[na], tb.node_item[nb]
        if ia >= 0 and ib >= 0:
            out.append((int(ia), int(ib)))
        elif ia >= 0:
            stack.append((na, int(tb.node_left[nb])))
            stack.append((na, int(tb.node_right[nb])))
        else:
            stack.append((int(ta.node_left[na]), nb))
            stack.append((int(ta.node_right[na]), nb))
    out.sort()
    return out


def tree_point_query(tree, mesh, p):
    """All cells of ``mesh`` whose closed triangle contains ``p``."""
    cells = []
    for c in tree.query_point(p):
        if point_in_triangle(p, mesh.cell_coords(c)) != Containment.OUTSIDE:
            cells.append(c)
    return cells


# --------------------------------------------------------------------------
# Convex polygons, hulls and triangle intersection
# --------------------------------------------------------------------------


class ConvexPolygon:
    """Counter-clockwise convex vertex list.

    Fewer than 3 vertices represent a degenerate (zero-area) intersection:
    empty, a point, or a segment.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.vertices)

    @property
    def is_degenerate(self):
        return len(self.vertices) < 3

    def area(self):
        v = self.vertices
        if len(v) < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 2)))


def graham_scan(points):
    """Convex hull of a point set, counter-clockwise, collinear interior
    points removed.  Exact orientation tests drive all decisions."""
    pts = [(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("need at least one point")
    # exact duplicates removed up front (stable order)
    seen = set()
    uniq = []
    for p in pts:
        if p not in seen:
            seen.add(p)
            uniq.append(p)
    if len(uniq) == 1:
        return ConvexPolygon([uniq[0]])
    pivot = min(uniq, key=lambda p: (p[1], p[0]))
    rest = [p for p in uniq if p != pivot]

    def angle_cmp(p, q):
        o = orient2d(pivot, p, q)
        if o > 0:
            return -1
        if o < 0:
            return 1
        dp = (p[0] - pivot[0]) ** 2 + (p[1] - pivot[1]) ** 2
        dq = (q[0] - pivot[0]) ** 2 + (q[1] - pivot[1]) ** 2
        return -1 if dp < dq else (1 if dp > dq else 0)

    rest.sort(key=cmp_to_key(angle_cmp))
    hull = [pivot]
    for p in rest:
        while len(hull) >= 2 and orient2d(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return ConvexPolygon(hull)


def _proper_crossing(p, q, r, s):
    # strict interior crossing of segments (p,q) and (r,s); endpoint
    # contacts are covered by vertex-containment candidates
    o1 = orient2d(r, s, p)
    o2 = orient2d(r, s, q)
    if o1 == 0 or o2 == 0 or (o1 > 0) == (o2 > 0):
        return None
    o3 = orient2d(p, q, r)
    o4 = orient2d(p, q, s)
    if o3 == 0 or o4 == 0 or (o3 > 0) == (o4 > 0):
        return None
    d1x, d1y = q[0] - p[0], q[1] - p[1]
    d2x, d2y = s[0] - r[0], s[1] - r[1]
    denom = d1x * d2y - d1y * d2x
    if denom == 0.0:
        # exact tests guarantee a crossing; nearly parallel overlap can
        # still round the denominator to zero -- fall back to a midpoint
        return (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))
    t = ((r[0] - p[0]) * d2y - (r[1] - p[1]) * d2x) / denom
    t = min(max(t, 0.0), 1.0)
    return (p[0] + t * d1x, p[1] + t * d1y)


def _dedup_points(pts, tol):
    out = []
    for p in pts:
        if all((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 > tol * tol for q in out):
            out.append(p)
    return out


def triangle_triangle_intersection(t1, t2):
    """Convex polygon t1 ∩ t2.

    Candidate vertices are the corners of each triangle contained in the
    other (closed) plus proper edge-edge crossings; the hull of the
    deduplicated candidates is the intersection.  Zero-area contact
    (shared edge or vertex) yields a degenerate polygon.
    """
    t1 = tuple((float(v[0]), float(v[1])) for v in t1)
    t2 = tuple((float(v[0]), float(v[1])) for v in t2)
    cand = []
    for v in t1:
        if point_in_triangle(v, t2) != Containment.OUTSIDE:
            cand.append(v)
    for v in t2:
        if point_in_triangle(v, t1) != Containment.OUTSIDE:
            cand.append(v)
    for i in range(3):
        p, q = t1[i], t1[(i + 1) % 3]
        for j in range(3):
            r, s = t2[j], t2[(j + 1) % 3]
            x = _proper_crossing(p, q, r, s)
            if x is not None:
                cand.append(x)
    if not cand:
        return ConvexPolygon.empty()
    scale = max(triangle_diameter(t1), triangle_diameter(t2))
    cand = _dedup_points(cand, 1e-13 * scale)
    if len(cand) == 1:
        return ConvexPolygon([cand[0]])
    return graham_scan(cand)


def triangulate_convex_polygon(poly):
    """Fan triangulation of a convex polygon from its first vertex.

    Returns a list of (3, 2) coordinate arrays; degenerate polygons give
    an empty list.
    """
    v = poly.vertices
    if len(v) < 3:
        return []
    return [np.array([v[0], v[i], v[i + 1]]) for i in range(1, len(v) - 1)]


# --------------------------------------------------------------------------
# Segment clipping and interval arithmetic
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Parameter interval [t0, t1] within [0, 1] along a segment."""

    t0: float
    t1: float

    def __post_init__(self):
        if not (0.0 <= self.t0 <= self.t1 <= 1.0):
            raise ValueError(f"invalid interval [{self.t0}, {self.t1}]")

    @property
    def length(self):
        return self.t1 - self.t0


def clip_segment_against_triangle(a, b, tri):
    """Parameter interval of segment a + t(b - a), t in [0, 1], inside the
    closed triangle; ``None`` when the segment misses it."""
    o = orient2d(tri[0], tri[1], tri[2])
    if o == 0:
        raise ValueError("degenerate triangle")
    verts = tri if o > 0 else tri[::-1]
    t0, t1 = 0.0, 1.0
    for k in range(3):
        e0, e1 = verts[k], verts[(k + 1) % 3]
        ex, ey = e1[0] - e0[0], e1[1] - e0[1]
        f0 = ex * (a[1] - e0[1]) - ey * (a[0] - e0[0])
        f1 = ex * (b[1] - e0[1]) - ey * (b[0] - e0[0])
        if f0 < 0.0 and f1 < 0.0:
            return None
        if f0 < 0.0:
            t0 = max(t0, f0 / (f0 - f1))
        elif f1 < 0.0:
            t1 = min(t1, f0 / (f0 - f1))
    if t0 > t1:
        return None
    return Interval(t0, t1)


def merge_intervals(intervals):
    """Union of intervals as a minimal sorted disjoint list."""
    ivs = sorted((iv for iv in intervals if iv.length > 0.0), key=lambda iv: iv.t0)
    out = []
    for iv in ivs:
        if out and iv.t0 <= out[-1].t1:
            if iv.t1 > out[-1].t1:
                out[-1] = Interval(out[-1].t0, iv.t1)
        else:
            out.append(iv)
    return out


def interval_subtract(base, cut):
    """Set difference union(base) minus union(cut), as a minimal sorted
    disjoint interval list."""
    base = merge_intervals(base)
    cut = merge_intervals(cut)
    out = []
    for iv in base:
        lo = iv.t0
        for c in cut:
            if c.t1 <= lo or c.t0 >= iv.t1:
                continue
            if c.t0 > lo:
                out.append(Interval(lo, c.t0))
            lo = max(lo, c.t1)
            if lo >= iv.t1:
                break
        if lo < iv.t1:
            out.append(Interval(lo, iv.t1))
    return out
