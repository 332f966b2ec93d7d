"""Small computational-geometry toolbox shared by the pipeline stages.

Everything works on plain sequences of 3-vectors (or 2-vectors for the
planar helpers); nothing here imports the data model, so the functions
stay usable from tests and one-off scripts.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def newell_area_vector(loop) -> np.ndarray:
    """Area-weighted normal of a closed 3D loop (Newell's method).

    The result points along the loop's winding direction (right-hand
    rule) and its length equals the enclosed area for planar loops.
    """
    pts = np.asarray(loop, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    return 0.5 * np.cross(pts, nxt).sum(axis=0)


def ring_normal(loop) -> np.ndarray:
    """Unit normal of a planar loop; raises on degenerate (zero-area) input."""
    a = newell_area_vector(loop)
    n = float(np.linalg.norm(a))
    if n <= 0.0:
        raise ValueError("loop has zero area, normal undefined")
    return a / n


def enclosed_volume(loops) -> float:
    """Signed volume enclosed by a set of planar loops forming a closed surface.

    Each loop contributes (1/3) * v0 . area_vector, which is exact for
    planar polygons by the divergence theorem. Outward-oriented surfaces
    give positive volume; inner rings stored with opposite winding
    subtract their area automatically.
    """
    vol = 0.0
    for loop in loops:
        pts = np.asarray(loop, dtype=float)
        vol += float(pts[0] @ newell_area_vector(pts)) / 3.0
    return vol


def polygon_area_2d(poly) -> float:
    """Signed area of a 2D polygon (positive when counter-clockwise)."""
    pts = np.asarray(poly, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(x @ np.roll(y, -1) - y @ np.roll(x, -1))


def point_in_polygon_2d(pt, poly) -> bool:
    """Even-odd containment test. Points on an edge are not guaranteed
    either way; callers that care about the boundary must test distance
    separately."""
    x, y = float(pt[0]), float(pt[1])
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i][0], poly[i][1]
        x1, y1 = poly[(i + 1) % n][0], poly[(i + 1) % n][1]
        if (y0 > y) != (y1 > y):
            xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xi:
                inside = not inside
    return inside


def clip_polygon_halfplane_2d(poly, a: float, b: float, c: float):
    """Sutherland-Hodgman step: keep the region a*x + b*y <= c."""
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        dp = a * p[0] + b * p[1] - c
        dq = a * q[0] + b * q[1] - c
        if dp <= 0.0:
            out.append((float(p[0]), float(p[1])))
            if dq > 0.0:
                t = dp / (dp - dq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        elif dq <= 0.0:
            t = dp / (dp - dq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def clip_polygon_box_2d(poly, xmin: float, ymin: float, xmax: float, ymax: float):
    """Clip a polygon to an axis-aligned box; returns the clipped vertex list."""
    out = list(poly)
    for a, b, c in ((-1.0, 0.0, -xmin), (1.0, 0.0, xmax), (0.0, -1.0, -ymin), (0.0, 1.0, ymax)):
        if not out:
            return []
        out = clip_polygon_halfplane_2d(out, a, b, c)
    return out


def point_segment_distance_2d(p, a, b) -> float:
    px, py = p[0] - a[0], p[1] - a[1]
    dx, dy = b[0] - a[0], b[1] - a[1]
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return math.hypot(px, py)
    t = max(0.0, min(1.0, (px * dx + py * dy) / l2))
    return math.hypot(px - t * dx, py - t * dy)


def _orient_2d(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect_2d(a0, a1, b0, b1) -> bool:
    """True when the closed segments share at least one point."""
    d1 = _orient_2d(b0, b1, a0)
    d2 = _orient_2d(b0, b1, a1)
    d3 = _orient_2d(a0, a1, b0)
    d4 = _orient_2d(a0, a1, b1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on_seg(p, q, r):
        return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
                and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))

    if d1 == 0 and on_seg(b0, b1, a0):
        return True
    if d2 == 0 and on_seg(b0, b1, a1):
        return True
    if d3 == 0 and on_seg(a0, a1, b0):
        return True
    if d4 == 0 and on_seg(a0, a1, b1):
        return True
    return False


def segment_distance_2d(a0, a1, b0, b1) -> float:
    if segments_intersect_2d(a0, a1, b0, b1):
        return 0.0
    return min(
        point_segment_distance_2d(a0, b0, b1),
        point_segment_distance_2d(a1, b0, b1),
        point_segment_distance_2d(b0, a0, a1),
        point_segment_distance_2d(b1, a0, a1),
    )


# ---------------------------------------------------------------------------
# polygon triangulation (ear clipping with hole bridging)

def _point_in_triangle_2d(p, a, b, c) -> bool:
    # inclusive: boundary counts as inside
    d1 = _orient_2d(a, b, p)
    d2 = _orient_2d(b, c, p)
    d3 = _orient_2d(c, a, p)
    return d1 >= 0.0 and d2 >= 0.0 and d3 >= 0.0


def _locally_inside(ring: list, pos: int, pts: np.ndarray, q) -> bool:
    """Is the direction from ring vertex `pos` toward q inside the polygon?

    Needed to pick the right occurrence of a bridge vertex that already
    appears twice after an earlier hole merge.
    """
    n = len(ring)
    a = pts[ring[(pos - 1) % n]]
    b = pts[ring[pos]]
    c = pts[ring[(pos + 1) % n]]
    if _orient_2d(a, b, c) >= 0.0:
        return _orient_2d(a, b, q) > 0.0 and _orient_2d(b, c, q) > 0.0
    return _orient_2d(a, b, q) > 0.0 or _orient_2d(b, c, q) > 0.0


def _find_bridge(ring: list, hole_left: int, pts: np.ndarray) -> int | None:
    """Position in `ring` of a vertex visible from the hole's leftmost vertex.

    Leftward ray cast followed by the blocked-candidate refinement; `ring`
    already contains previously merged holes so hole-hole occlusion is
    respected.
    """
    hx, hy = pts[hole_left]
    qx = -math.inf
    mpos = None
    n = len(ring)
    for k in range(n):
        kn = (k + 1) % n
        yi, yj = pts[ring[k]][1], pts[ring[kn]][1]
        if yi >= hy >= yj and yj != yi:
            xi, xj = pts[ring[k]][0], pts[ring[kn]][0]
            x = xi + (hy - yi) * (xj - xi) / (yj - yi)
            if x <= hx and x > qx:
                qx = x
                mpos = k if xi < xj else kn
    if mpos is None:
        return None
    if qx == hx:
        return mpos
    # candidate bridge may be blocked: among ring vertices inside the
    # triangle spanned by the ray hit, pick the one with minimum slope
    # to the hole vertex (ties: rightmost)
    mx, my = pts[ring[mpos]]
    if my > hy:
        tri = ((hx, hy), (mx, my), (qx, hy))
    else:
        tri = ((qx, hy), (mx, my), (hx, hy))
    tan_min = math.inf
    best = mpos
    for p in range(n):
        px, py = pts[ring[p]]
        if px < mx or px >= hx:
            continue
        if not _point_in_triangle_2d((px, py), *tri):
            continue
        if not _locally_inside(ring, p, pts, (hx, hy)):
            continue
        tan = abs(hy - py) / (hx - px)
        if tan < tan_min or (tan == tan_min and px > pts[ring[best]][0]):
            tan_min = tan
            best = p
    return best


def _ear_clip(ring: list, pts: np.ndarray) -> list:
    tris = []
    idx = list(ring)
    while len(idx) > 3:
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _orient_2d(a, b, c) <= 0.0:
                continue
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if (p[0] == a[0] and p[1] == a[1]) or (p[0] == b[0] and p[1] == b[1]) \
                        or (p[0] == c[0] and p[1] == c[1]):
                    continue
                if _point_in_triangle_2d(p, a, b, c):
                    ok = False
                    break
            if ok:
                tris.append((i0, i1, i2))
                del idx[k]
                clipped = True
                break
        if not clipped:
            # numerically stuck ring: fan out what is left
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
            return tris
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def triangulate_polygon_2d(outer, holes=()) -> list:
    """Triangulate a simple 2D polygon with optional disjoint holes.

    Returns index triples into the concatenated vertex list (outer ring
    first, then each hole in order). Rings may wind either way; output
    triangles are counter-clockwise.
    """
    pts_list = [tuple(map(float, p)) for p in outer]
    outer_idx = list(range(len(outer)))
    if polygon_area_2d(outer) < 0.0:
        outer_idx.reverse()
    hole_entries = []
    for hole in holes:
        base = len(pts_list)
        pts_list.extend(tuple(map(float, p)) for p in hole)
        h_idx = list(range(base, base + len(hole)))
        if polygon_area_2d(hole) > 0.0:
            h_idx.reverse()
        hole_entries.append(h_idx)
    pts = np.asarray(pts_list, dtype=float)

    # merge holes left to right so the leftward ray sees earlier bridges
    hole_entries.sort(key=lambda h: min(pts[i][0] for i in h))
    ring = outer_idx
    for h_idx in hole_entries:
        left_pos = min(range(len(h_idx)),
                       key=lambda k: (pts[h_idx[k]][0], pts[h_idx[k]][1]))
        h = h_idx[left_pos:] + h_idx[:left_pos]
        at = _find_bridge(ring, h[0], pts)
        if at is None:
            raise ValueError("hole is not inside the outer ring")
        ring = ring[:at + 1] + h + [h[0], ring[at]] + ring[at + 1:]
    return _ear_clip(ring, pts)


def triangulate_loop_3d(loop, holes=()) -> list:
    """Triangulate a planar 3D polygon (with optional holes) by projecting
    onto its dominant plane. Returns index triples into the concatenated
    vertex list, oriented to match the outer ring's normal."""
    n = newell_area_vector(loop)
    k = int(np.argmax(np.abs(n)))
    i, j = (k + 1) % 3, (k + 2) % 3
    to2d = lambda ring: [(p[i], p[j]) for p in ring]
    tris = triangulate_polygon_2d(to2d(loop), [to2d(h) for h in holes])
    pts = [tuple(map(float, p)) for p in loop]
    for h in holes:
        pts.extend(tuple(map(float, p)) for p in h)
    pts = np.asarray(pts, dtype=float)
    out = []
    for (t0, t1, t2) in tris:
        tn = np.cross(pts[t1] - pts[t0], pts[t2] - pts[t0])
        if float(tn @ n) < 0.0:
            out.append((t0, t2, t1))
        else:
            out.append((t0, t1, t2))
    return out


# ---------------------------------------------------------------------------
# triangle / cube overlap (separating axis test, strict)

def tri_box_overlap_strict(tri, centers, half: float) -> np.ndarray:
    """Strict SAT overlap between one triangle and many axis-aligned cubes.

    `centers` is (N, 3), `half` the cube half-width. Touching contact
    (shared plane, edge, or vertex with no interior overlap) counts as
    no overlap, so triangles lying exactly on a voxel face select
    neither neighbor. Every separation test carries a slack of 1e-9 of
    its own projection radius, so exact contacts that pick up a rounding
    residual still count as touching.
    """
    tri = np.asarray(tri, dtype=float)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    v0 = tri[0] - centers
    v1 = tri[1] - centers
    v2 = tri[2] - centers
    sep = np.zeros(len(centers), dtype=bool)
    rel = 1e-9

    # cube-axis tests
    slack = rel * half
    for ax in range(3):
        lo = np.minimum(np.minimum(v0[:, ax], v1[:, ax]), v2[:, ax])
        hi = np.maximum(np.maximum(v0[:, ax], v1[:, ax]), v2[:, ax])
        sep |= (lo >= half - slack) | (hi <= -half + slack)

    # triangle plane test
    nrm = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    r = half * np.abs(nrm).sum()
    sep |= np.abs(v0 @ nrm) >= r - rel * r

    # nine edge cross-axis tests
    edges = (tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2])
    verts = (v0, v1, v2)
    for e in edges:
        for ax in range(3):
            a = np.zeros(3)
            a[(ax + 1) % 3] = -e[(ax + 2) % 3]
            a[(ax + 2) % 3] = e[(ax + 1) % 3]
            r = half * np.abs(a).sum()
            if r == 0.0:
                continue
            p0 = verts[0] @ a
            p1 = verts[1] @ a
            p2 = verts[2] @ a
            lo = np.minimum(np.minimum(p0, p1), p2)
            hi = np.maximum(np.maximum(p0, p1), p2)
            sep |= (lo >= r - rel * r) | (hi <= -r + rel * r)
    return ~sep


# ---------------------------------------------------------------------------
# distances and sampling

def points_segment_distance(points, a, b) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    l2 = float(d @ d)
    if l2 == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ d / l2, 0.0, 1.0)
    return np.linalg.norm(pts - a - t[:, None] * d, axis=1)


def points_triangle_distance(points, tri) -> np.ndarray:
    """Euclidean distance from each point to a (possibly degenerate) triangle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a, b, c = (np.asarray(v, dtype=float) for v in tri)
    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    nn = float(n @ n)
    edge_min = np.minimum(
        points_segment_distance(pts, a, b),
        np.minimum(points_segment_distance(pts, b, c),
                   points_segment_distance(pts, c, a)))
    if nn == 0.0:
        return edge_min
    ap = pts - a
    # barycentric coordinates of the in-plane projection
    d00 = float(ab @ ab)
    d01 = float(ab @ ac)
    d11 = float(ac @ ac)
    d20 = ap @ ab
    d21 = ap @ ac
    denom = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    inside = (v >= 0.0) & (w >= 0.0) & (v + w <= 1.0)
    plane = np.abs(ap @ n) / math.sqrt(nn)
    return np.where(inside, plane, edge_min)


def closed_surface_violations(loops, weld: float = 1e-6) -> list:
    """Manifold check over a loop soup (polygon rings and triangles alike).

    Vertices are welded on a `weld` grid; a closed orientable surface has
    every directed edge exactly once and its reverse exactly once.
    Returns human-readable violation strings, empty when watertight.
    """
    counts: dict = {}

    def key(p):
        return (round(p[0] / weld), round(p[1] / weld), round(p[2] / weld))

    violations = []
    for loop in loops:
        ks = [key(p) for p in loop]
        for i, u in enumerate(ks):
            v = ks[(i + 1) % len(ks)]
            if u == v:
                violations.append(f"degenerate edge at {tuple(loop[i])}")
                continue
            counts[(u, v)] = counts.get((u, v), 0) + 1
    for (u, v), c in counts.items():
        if c > 1:
            violations.append(f"directed edge repeated {c} times: {u}->{v}")
        if counts.get((v, u), 0) != c:
            violations.append(f"unmatched edge {u}->{v}")
    return violations


def triangle_areas(tris) -> np.ndarray:
    t = np.asarray(tris, dtype=float)
    return 0.5 * np.linalg.norm(
        np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)


def sample_on_triangles(rng: np.random.Generator, tris, count: int) -> np.ndarray:
    """Uniform surface samples over a triangle soup, area-weighted."""
    t = np.asarray(tris, dtype=float)
    areas = triangle_areas(t)
    total = float(areas.sum())
    if total <= 0.0 or count <= 0:
        return np.zeros((0, 3))
    which = rng.choice(len(t), size=count, p=areas / total)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    a, b, c = t[which, 0], t[which, 1], t[which, 2]
    return (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c
