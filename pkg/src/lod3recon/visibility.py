"""Weighing measured occupancy against the building prior.

Every voxel lying on a prior face is scored from the ray evidence it
collected: hits close to the face plane confirm the modelled surface,
rays shooting through with endpoints far behind contradict it. The
scores are projected into a per-facade conflict raster with three
states (conflicted, confirmed, unknown).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom, rasters
from .errors import DomainError
from .occupancy import OccupancyTree, grid_index


@dataclass(frozen=True)
class UncertaintyConfig:
    sigma_position: float = 3.0   # spread of surface-position agreement, voxel units
    sigma_state: float = 2.85     # spread of per-voxel state evidence, voxel units
    sigma_in_meters: bool = False
    aggregate: str = "max"        # per-pixel conflict aggregation: max or mean

    def __post_init__(self):
        if self.sigma_position <= 0.0 or self.sigma_state <= 0.0:
            raise DomainError("sigmas must be positive")
        if self.aggregate not in ("max", "mean"):
            raise DomainError("aggregate must be 'max' or 'mean'")

    def sigmas(self, voxel_size: float):
        if self.sigma_in_meters:
            return self.sigma_position / voxel_size, self.sigma_state / voxel_size
        return self.sigma_position, self.sigma_state


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def positioning_probability(dist: float, sigma: float, voxel_size: float) -> float:
    """Probability mass a Gaussian surface estimate puts on a voxel-wide
    slab centered `dist` away from its mean. `sigma` is in voxel units."""
    if sigma <= 0.0 or voxel_size <= 0.0:
        raise DomainError("sigma and voxel_size must be positive")
    s = sigma * voxel_size
    half = 0.5 * voxel_size
    return _phi((dist + half) / s) - _phi((dist - half) / s)


def positioning_confidence(dist: float, sigma: float, voxel_size: float) -> float:
    """Slab mass normalized against a perfectly centered estimate, so a
    zero-distance match scores 1.

    The centered slab holds the maximum mass, so the ratio can pass 1
    only through rounding in erf; clamp to keep a valid probability.
    """
    ratio = (positioning_probability(dist, sigma, voxel_size)
             / positioning_probability(0.0, sigma, voxel_size))
    return min(ratio, 1.0)


def joint_state_probability(p_position: float, p_state: float):
    """(p_confirmed, p_conflicted) from the two independent confidences."""
    if not (0.0 <= p_position <= 1.0 and 0.0 <= p_state <= 1.0):
        raise DomainError("confidences must lie in [0, 1]")
    p_conf = p_position * p_state
    return p_conf, 1.0 - p_conf


# ---------------------------------------------------------------------------
# surface voxels

def _aligned_layer(face, vs: float):
    """(axis, layer, i, j) when the face lies exactly on a grid plane with
    an axis-parallel normal, else None. `layer` is the voxel index on the
    negative side of the face normal."""
    n, d = face.plane()
    ax = int(np.argmax(np.abs(n)))
    if abs(abs(float(n[ax])) - 1.0) > 1e-9:
        return None
    plane_coord = d / float(n[ax])
    rel = plane_coord / vs
    k = round(rel)
    if abs(rel - k) > 1e-9:
        return None
    layer = k - 1 if n[ax] > 0 else k
    i, j = [a for a in range(3) if a != ax]
    return ax, int(layer), i, j


def surface_voxels(face, voxel_size: float) -> list:
    """Voxel keys carrying the face: strict triangle overlap in general,
    or, for faces lying exactly in a grid plane, the covered cells of the
    voxel layer on the inner (negative normal) side. Hole rings remove
    their footprint."""
    vs = float(voxel_size)
    aligned = _aligned_layer(face, vs)
    if aligned is not None:
        ax, layer, i, j = aligned
        outer2d = [(p[i], p[j]) for p in face.outer.points]
        holes2d = [[(p[i], p[j]) for p in r.points] for r in face.inner]
        eps = 1e-9 * vs * vs
        xs = [p[0] for p in outer2d]
        ys = [p[1] for p in outer2d]
        keys = []
        for a in range(grid_index(min(xs), vs), grid_index(max(xs), vs) + 1):
            for b in range(grid_index(min(ys), vs), grid_index(max(ys), vs) + 1):
                box = (a * vs, b * vs, (a + 1) * vs, (b + 1) * vs)
                covered = abs(geom.polygon_area_2d(
                    geom.clip_polygon_box_2d(outer2d, *box)))
                for h in holes2d:
                    covered -= abs(geom.polygon_area_2d(
                        geom.clip_polygon_box_2d(h, *box)))
                if covered > eps:
                    key = [0, 0, 0]
                    key[ax] = layer
                    key[i] = a
                    key[j] = b
                    keys.append(tuple(key))
        return sorted(keys)

    pts = [tuple(map(float, p)) for p in face.outer.points]
    for r in face.inner:
        pts.extend(tuple(map(float, p)) for p in r.points)
    pts = np.asarray(pts, dtype=float)
    tris = geom.triangulate_loop_3d(face.outer.points,
                                    [r.points for r in face.inner])
    keys = set()
    half = 0.5 * vs
    for (t0, t1, t2) in tris:
        tri = pts[[t0, t1, t2]]
        if geom.triangle_areas([tri])[0] < 1e-14:
            continue
        lo = [grid_index(float(tri[:, a].min()), vs) for a in range(3)]
        hi = [grid_index(float(tri[:, a].max()), vs) for a in range(3)]
        axes = [np.arange(lo[a], hi[a] + 1) for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        cand = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        centers = (cand + 0.5) * vs
        hitmask = geom.tri_box_overlap_strict(tri, centers, half)
        for k in cand[hitmask]:
            keys.add(tuple(int(v) for v in k))
    return sorted(keys)


# ---------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class SurfaceVoxel:
    key: tuple
    state: str            # occupied, empty, or unknown
    p_confirmed: float
    p_conflicted: float


def classify_surface_voxels(tree: OccupancyTree, face,
                            config: UncertaintyConfig | None = None) -> list:
    """Score every surface voxel of `face` against the ray evidence.

    Occupied voxels are judged by their nearest contributing hit (plane
    agreement and distance to the voxel center); empty voxels by the
    closest passing ray's endpoint (how far behind the face it landed).
    Voxels without usable evidence come back as unknown.
    """
    cfg = config or UncertaintyConfig()
    vs = tree.config.voxel_size
    s_pos, s_state = cfg.sigmas(vs)
    n, d = face.plane()
    out = []
    for key in surface_voxels(face, vs):
        cell = tree.cells.get(key)
        state = tree.state(key)
        point = None
        if state == "occupied" and cell[2] is not None:
            point, d_state = cell[2], cell[1]
        elif state == "empty" and cell is not None and cell[4] is not None:
            point, d_state = cell[4], cell[3]
        if point is None:
            out.append(SurfaceVoxel(key, "unknown", 0.0, 0.0))
            continue
        d_pos = abs(float(np.asarray(point) @ n) - d)
        p_pos = positioning_confidence(d_pos, s_pos, vs)
        p_state = positioning_confidence(d_state, s_state, vs)
        p_conf, p_confl = joint_state_probability(p_pos, p_state)
        out.append(SurfaceVoxel(key, state, p_conf, p_confl))
    return out


def project_conflict_map(tree: OccupancyTree, face,
                         config: UncertaintyConfig | None = None,
                         frame: rasters.FacadeFrame | None = None) -> rasters.FacadeRaster:
    """Three-channel facade raster (conflicted, confirmed, unknown).

    Pixels without any measured surface voxel stay fully unknown. With
    the default max aggregation a pixel takes the scores of its most
    conflicted voxel; mean aggregation averages all measured voxels.
    """
    cfg = config or UncertaintyConfig()
    vs = tree.config.voxel_size
    if frame is None:
        frame = rasters.facade_frame(face, vs)
    raster = rasters.FacadeRaster.zeros(frame, rasters.CONFLICT_CHANNELS)
    raster.data[:, :, 2] = 1.0
    voxels = classify_surface_voxels(tree, face, cfg)
    measured = [sv for sv in voxels if sv.state != "unknown"]
    if not measured:
        return raster
    centers = (np.asarray([sv.key for sv in measured], dtype=float) + 0.5) * vs
    rows, cols, inside = frame.to_pixels(centers)
    agg: dict = {}
    for sv, r, c, ok in zip(measured, rows, cols, inside):
        if not ok:
            continue
        agg.setdefault((int(r), int(c)), []).append(sv)
    for (r, c), svs in agg.items():
        if cfg.aggregate == "max":
            best = max(svs, key=lambda sv: sv.p_conflicted)
            confl, conf = best.p_conflicted, best.p_confirmed
        else:
            confl = float(np.mean([sv.p_conflicted for sv in svs]))
            conf = float(np.mean([sv.p_confirmed for sv in svs]))
        raster.data[r, c] = (confl, conf, 0.0)
    return raster
