"""Facade-aligned rasters and the projections that fill them.

All per-facade evidence (conflicts, point-cloud class probabilities,
rectified texture scores) is accumulated on the same pixel grid. The
grid is defined by a FacadeFrame built once per face; every raster for
that face shares it bit for bit, which is what makes later per-pixel
fusion legitimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import (DegenerateCorrespondence, DomainError, FrameMismatch,
                     IoError, ParseError)

POINT_LABELS = ("arch", "column", "molding", "floor", "door", "window",
                "wall", "other")

CONFLICT_CHANNELS = ("conflicted", "confirmed", "unknown")


@dataclass(frozen=True)
class FacadeFrame:
    """Orthonormal facade chart: origin at the lower-left ring corner,
    u along the facade, v up the facade, normal = u x v pointing out of
    the building. Row 0 of a raster is the bottom pixel row."""
    origin: tuple
    u_axis: tuple
    v_axis: tuple
    cell: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "u_axis", tuple(float(x) for x in self.u_axis))
        object.__setattr__(self, "v_axis", tuple(float(x) for x in self.v_axis))
        if self.cell <= 0.0:
            raise DomainError("cell size must be positive")
        if self.width < 1 or self.height < 1:
            raise DomainError("raster dimensions must be at least 1x1")

    @property
    def normal(self) -> tuple:
        n = np.cross(self.u_axis, self.v_axis)
        return tuple(float(x) for x in n)

    def to_uv(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.origin)
        return np.stack([pts @ np.asarray(self.u_axis),
                         pts @ np.asarray(self.v_axis)], axis=1)

    def plane_distance(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.origin)
        return pts @ np.asarray(self.normal)

    def to_pixels(self, points, band: float | None = None):
        """(rows, cols, inside) for world points; `inside` is False outside
        the raster bounds or farther than `band` from the facade plane
        (default band: three cells)."""
        if band is None:
            band = 3.0 * self.cell
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        uv = self.to_uv(pts)
        dist = self.plane_distance(pts)
        cols = np.floor(uv[:, 0] / self.cell).astype(int)
        rows = np.floor(uv[:, 1] / self.cell).astype(int)
        inside = ((np.abs(dist) <= band)
                  & (cols >= 0) & (cols < self.width)
                  & (rows >= 0) & (rows < self.height))
        return rows, cols, inside

    def world_to_pixel(self, point, band: float | None = None):
        rows, cols, inside = self.to_pixels([point], band)
        if not inside[0]:
            return None
        return int(rows[0]), int(cols[0])

    def pixel_center_uv(self) -> np.ndarray:
        """(height, width, 2) array of pixel-center facade coordinates."""
        us = (np.arange(self.width) + 0.5) * self.cell
        vs = (np.arange(self.height) + 0.5) * self.cell
        uu, vv = np.meshgrid(us, vs)
        return np.stack([uu, vv], axis=2)

    def matches(self, other: "FacadeFrame", tol: float = 1e-9) -> bool:
        if (self.width, self.height) != (other.width, other.height):
            return False
        if self.cell != other.cell:
            return False
        for a, b in ((self.origin, other.origin), (self.u_axis, other.u_axis),
                     (self.v_axis, other.v_axis)):
            if max(abs(x - y) for x, y in zip(a, b)) > tol:
                return False
        return True


def _cover(extent: float, cell: float) -> int:
    x = extent / cell
    r = round(x)
    if abs(x - r) < 1e-6:
        return max(1, int(r))
    return max(1, int(math.ceil(x)))


def facade_frame(face, cell: float) -> FacadeFrame:
    """The one shared frame constructor for a face.

    v is the up direction projected into the face plane (falling back to
    world y for near-horizontal faces), u completes the right-handed
    triad with u x v equal to the outward face normal.
    """
    n = geom.ring_normal(face.outer.points)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(n[2])) >= 0.99:
        up = np.array([0.0, 1.0, 0.0])
    v = up - float(up @ n) * n
    v = v / np.linalg.norm(v)
    u = np.cross(v, n)
    pts = face.outer.as_array()
    rel = pts - pts[0]
    us = rel @ u
    vs = rel @ v
    origin = pts[0] + float(us.min()) * u + float(vs.min()) * v
    width = _cover(float(us.max() - us.min()), cell)
    height = _cover(float(vs.max() - vs.min()), cell)
    return FacadeFrame(tuple(origin), tuple(u), tuple(v), float(cell), width, height)


@dataclass
class FacadeRaster:
    frame: FacadeFrame
    channels: tuple
    data: np.ndarray  # (height, width, len(channels)) float32

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.data = np.asarray(self.data, dtype=np.float32)
        expect = (self.frame.height, self.frame.width, len(self.channels))
        if self.data.shape != expect:
            raise DomainError(f"raster data shape {self.data.shape} != {expect}")

    @classmethod
    def zeros(cls, frame: FacadeFrame, channels) -> "FacadeRaster":
        channels = tuple(channels)
        data = np.zeros((frame.height, frame.width, len(channels)), dtype=np.float32)
        return cls(frame, channels, data)

    def channel(self, name: str) -> np.ndarray:
        try:
            idx = self.channels.index(name)
        except ValueError:
            raise KeyError(name) from None
        return self.data[:, :, idx]


def require_same_frame(*rasters) -> None:
    base = rasters[0].frame
    for r in rasters[1:]:
        if not base.matches(r.frame):
            raise FrameMismatch("rasters do not share one facade frame")


# ---------------------------------------------------------------------------
# point-cloud probability projection

def project_point_probabilities(points, probs, frame: FacadeFrame,
                                band: float | None = None) -> FacadeRaster:
    """Max-aggregate per-point class probabilities onto the facade grid.

    Points outside the distance band or the raster bounds are dropped;
    untouched pixels keep zero in every channel.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] != len(POINT_LABELS):
        raise DomainError(f"probs must be (N, {len(POINT_LABELS)})")
    raster = FacadeRaster.zeros(frame, POINT_LABELS)
    if len(probs) == 0:
        return raster
    rows, cols, inside = frame.to_pixels(points, band)
    rows, cols, probs = rows[inside], cols[inside], probs[inside]
    flat = raster.data.reshape(-1, len(POINT_LABELS))
    np.maximum.at(flat, rows * frame.width + cols, probs.astype(np.float32))
    return raster


def read_labeled_points(path):
    """x y z followed by one probability per point label (11 columns)."""
    pts = []
    probs = []
    want = 3 + len(POINT_LABELS)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for no, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                tok = text.split()
                if len(tok) != want:
                    raise ParseError(f"{path}:{no}: expected {want} columns")
                try:
                    vals = [float(t) for t in tok]
                except ValueError as exc:
                    raise ParseError(f"{path}:{no}: bad number") from exc
                pts.append(vals[:3])
                probs.append(vals[3:])
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return np.asarray(pts, dtype=float).reshape(-1, 3), \
        np.asarray(probs, dtype=float).reshape(-1, len(POINT_LABELS))


def write_labeled_points(points, probs, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# x y z " + " ".join(f"p_{l}" for l in POINT_LABELS) + "\n")
            for p, pr in zip(np.asarray(points, float), np.asarray(probs, float)):
                fh.write(" ".join(repr(float(v)) for v in (*p, *pr)) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# image probability projection via a plane homography

def estimate_homography(correspondences) -> np.ndarray:
    """DLT homography mapping facade (u, v) to image (x, y).

    Needs at least four correspondences in general position; raises
    DegenerateCorrespondence otherwise.
    """
    pairs = [((float(u), float(v)), (float(x), float(y)))
             for (u, v), (x, y) in correspondences]
    if len(pairs) < 4:
        raise DegenerateCorrespondence("need at least 4 correspondences")
    rows = []
    for (u, v), (x, y) in pairs:
        rows.append([u, v, 1, 0, 0, 0, -x * u, -x * v, -x])
        rows.append([0, 0, 0, u, v, 1, -y * u, -y * v, -y])
    a = np.asarray(rows, dtype=float)
    _, s, vt = np.linalg.svd(a)
    if s[7] <= 1e-10 * s[0]:
        raise DegenerateCorrespondence(
            "correspondences are degenerate (collinear or repeated points)")
    h = vt[-1].reshape(3, 3)
    return h / h[2, 2] if abs(h[2, 2]) > 1e-12 else h


def apply_homography(h: np.ndarray, uv) -> np.ndarray:
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    ones = np.ones((len(uv), 1))
    xyw = np.hstack([uv, ones]) @ np.asarray(h, dtype=float).T
    return xyw[:, :2] / xyw[:, 2:3]


def project_image_probabilities(image: np.ndarray, channels,
                                homography: np.ndarray,
                                frame: FacadeFrame) -> FacadeRaster:
    """Sample an image-space probability grid onto the facade raster.

    Nearest-neighbour lookup; facade pixels mapping outside the image get
    zero. Image row 0 is the top scanline (y grows downward).
    """
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != len(tuple(channels)):
        raise DomainError("image must be (H, W, C) matching the channel list")
    uv = frame.pixel_center_uv().reshape(-1, 2)
    xy = apply_homography(homography, uv)
    cols = np.floor(xy[:, 0]).astype(int)
    rows = np.floor(xy[:, 1]).astype(int)
    h, w = image.shape[:2]
    inside = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    out = np.zeros((frame.height * frame.width, image.shape[2]), dtype=np.float32)
    out[inside] = image[rows[inside], cols[inside]]
    return FacadeRaster(frame, tuple(channels),
                        out.reshape(frame.height, frame.width, image.shape[2]))


# ---------------------------------------------------------------------------
# file formats

def write_raster(raster: FacadeRaster, path) -> None:
    f = raster.frame
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"facade_raster cell={f.cell!r} width={f.width} height={f.height}\n")
            fh.write("origin " + " ".join(repr(v) for v in f.origin) + "\n")
            fh.write("u " + " ".join(repr(v) for v in f.u_axis) + "\n")
            fh.write("v " + " ".join(repr(v) for v in f.v_axis) + "\n")
            fh.write("channels " + " ".join(raster.channels) + "\n")
            for px in raster.data.reshape(-1, len(raster.channels)):
                fh.write(" ".join(repr(float(v)) for v in px) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _header_fields(text: str, keys, path, no):
    tok = text.split()
    if len(tok) != len(keys) + 1:
        raise ParseError(f"{path}:{no}: expected {' '.join(keys)} fields")
    vals = []
    for t, k in zip(tok[1:], keys):
        if not t.startswith(k + "="):
            raise ParseError(f"{path}:{no}: expected {k}=..., got {t!r}")
        vals.append(t[len(k) + 1:])
    return vals


def read_raster(path) -> FacadeRaster:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = [(no, ln) for no, ln in enumerate(lines, start=1) if ln]
    if len(lines) < 5:
        raise ParseError(f"{path}: truncated raster file")
    no, head = lines[0]
    if not head.startswith("facade_raster"):
        raise ParseError(f"{path}:{no}: expected 'facade_raster' header")
    cell_s, w_s, h_s = _header_fields(head, ("cell", "width", "height"), path, no)
    try:
        cell, width, height = float(cell_s), int(w_s), int(h_s)
    except ValueError as exc:
        raise ParseError(f"{path}:{no}: bad header numbers") from exc
    vecs = {}
    for (no, text), key in zip(lines[1:4], ("origin", "u", "v")):
        tok = text.split()
        if len(tok) != 4 or tok[0] != key:
            raise ParseError(f"{path}:{no}: expected '{key} x y z'")
        try:
            vecs[key] = tuple(float(t) for t in tok[1:])
        except ValueError as exc:
            raise ParseError(f"{path}:{no}: bad number") from exc
    no, text = lines[4]
    tok = text.split()
    if tok[0] != "channels" or len(tok) < 2:
        raise ParseError(f"{path}:{no}: expected channel list")
    channels = tuple(tok[1:])
    frame = FacadeFrame(vecs["origin"], vecs["u"], vecs["v"], cell, width, height)
    body = lines[5:]
    if len(body) != width * height:
        raise ParseError(f"{path}: expected {width * height} pixel lines, "
                         f"got {len(body)}")
    data = np.zeros((width * height, len(channels)), dtype=np.float32)
    for i, (no, text) in enumerate(body):
        tok = text.split()
        if len(tok) != len(channels):
            raise ParseError(f"{path}:{no}: expected {len(channels)} values")
        try:
            data[i] = [float(t) for t in tok]
        except ValueError as exc:
            raise ParseError(f"{path}:{no}: bad number") from exc
    return FacadeRaster(frame, channels, data.reshape(height, width, len(channels)))


def write_pixel_grid(data: np.ndarray, channels, path) -> None:
    """Plain image-space probability grid (no facade geometry)."""
    data = np.asarray(data, dtype=np.float32)
    channels = tuple(channels)
    if data.ndim != 3 or data.shape[2] != len(channels):
        raise DomainError("grid must be (H, W, C) matching the channel list")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"pixel_grid width={data.shape[1]} height={data.shape[0]}\n")
            fh.write("channels " + " ".join(channels) + "\n")
            for px in data.reshape(-1, len(channels)):
                fh.write(" ".join(repr(float(v)) for v in px) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_pixel_grid(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = [(no, ln) for no, ln in enumerate(lines, start=1) if ln]
    if len(lines) < 2:
        raise ParseError(f"{path}: truncated grid file")
    no, head = lines[0]
    if not head.startswith("pixel_grid"):
        raise ParseError(f"{path}:{no}: expected 'pixel_grid' header")
    w_s, h_s = _header_fields(head, ("width", "height"), path, no)
    try:
        width, height = int(w_s), int(h_s)
    except ValueError as exc:
        raise ParseError(f"{path}:{no}: bad header numbers") from exc
    no, text = lines[1]
    tok = text.split()
    if tok[0] != "channels" or len(tok) < 2:
        raise ParseError(f"{path}:{no}: expected channel list")
    channels = tuple(tok[1:])
    body = lines[2:]
    if len(body) != width * height:
        raise ParseError(f"{path}: expected {width * height} pixel lines, "
                         f"got {len(body)}")
    data = np.zeros((width * height, len(channels)), dtype=np.float32)
    for i, (no, text) in enumerate(body):
        tok = text.split()
        if len(tok) != len(channels):
            raise ParseError(f"{path}:{no}: expected {len(channels)} values")
        try:
            data[i] = [float(t) for t in tok]
        except ValueError as exc:
            raise ParseError(f"{path}:{no}: bad number") from exc
    return data.reshape(height, width, len(channels)), channels

def write_correspondences(correspondences, path) -> None:
    """One `u v x y` line per facade-to-image correspondence."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# u v  x y\n")
            for (u, v), (x, y) in correspondences:
                fh.write(f"{float(u)!r} {float(v)!r} {float(x)!r} {float(y)!r}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_correspondences(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    pairs = []
    for no, text in enumerate(lines, start=1):
        if not text:
            continue
        tok = text.split()
        if len(tok) != 4:
            raise ParseError(f"{path}:{no}: expected 'u v x y'")
        try:
            u, v, x, y = (float(t) for t in tok)
        except ValueError as exc:
            raise ParseError(f"{path}:{no}: bad number") from exc
        pairs.append(((u, v), (x, y)))
    return pairs
