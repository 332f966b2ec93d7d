"""Building solids, opening templates, and their text file formats.

A solid is a closed shell of labeled planar faces. Faces may carry inner
rings (holes); inner rings wind opposite to the outer ring so signed
areas and volumes work out without special cases. The file formats are
small line-oriented text formats documented in the README.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import geom
from .errors import IoError, ParseError, ValidationError

PRIOR_LABELS = ("wall", "roof", "ground", "closure")
OPENING_LABELS = ("window", "door")
FACE_LABELS = PRIOR_LABELS + OPENING_LABELS

# anchor rectangle every opening template is modelled against: unit square
# in the z=0 plane, counter-clockwise seen from +z
TEMPLATE_ANCHOR = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 1.0, 0.0), (0.0, 1.0, 0.0))


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Ring:
    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points",
                           tuple(Point3(float(p[0]), float(p[1]), float(p[2]))
                                 for p in self.points))
        if len(self.points) < 3:
            raise ValidationError("ring needs at least 3 points")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def reversed(self) -> "Ring":
        return Ring(tuple(reversed(self.points)))


@dataclass(frozen=True)
class Face:
    face_id: str
    label: str
    outer: Ring
    inner: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inner", tuple(self.inner))

    def plane(self):
        """Unit normal n and offset d with n . x = d on the face plane."""
        n = geom.ring_normal(self.outer.points)
        return n, float(n @ self.outer.as_array()[0])

    def loops(self):
        yield self.outer.points
        for ring in self.inner:
            yield ring.points


@dataclass(frozen=True)
class BuildingSolid:
    solid_id: str
    lod: int
    faces: tuple

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))

    def face(self, face_id: str) -> Face:
        for f in self.faces:
            if f.face_id == face_id:
                return f
        raise KeyError(face_id)

    def loops(self):
        for f in self.faces:
            yield from f.loops()

    def volume(self) -> float:
        return geom.enclosed_volume(self.loops())


@dataclass(frozen=True)
class OpeningTemplate:
    """Opening geometry modelled against the unit anchor rectangle.

    `triangles` must close against the reversed anchor ring, so that a
    placed template seals the hole it is fitted into. `depth` is the
    canonical body extent along +z (0 for flat panels); placement scales
    it to the actual recess depth.
    """
    name: str
    label: str
    depth: float
    triangles: tuple

    def __post_init__(self):
        if self.label not in OPENING_LABELS:
            raise ValidationError(f"template label {self.label!r} not in {OPENING_LABELS}")
        if self.depth < 0.0:
            raise ValidationError("template depth must be >= 0")
        tris = tuple(tuple(Point3(float(p[0]), float(p[1]), float(p[2])) for p in t)
                     for t in self.triangles)
        object.__setattr__(self, "triangles", tris)
        loops = list(tris)
        loops.append(tuple(reversed(TEMPLATE_ANCHOR)))
        bad = geom.closed_surface_violations(loops)
        if bad:
            raise ValidationError(
                f"template {self.name!r} does not close against its anchor: {bad[0]}")


def default_template_library() -> dict:
    """Built-in templates: a flat door panel and a recessed window pane."""
    a0, a1, a2, a3 = TEMPLATE_ANCHOR
    door = OpeningTemplate("flat_panel", "door", 0.0, ((a0, a1, a2), (a0, a2, a3)))

    h = 0.05
    anchor = TEMPLATE_ANCHOR
    pane = tuple((p[0], p[1], h) for p in anchor)
    tris = []
    for i in range(4):
        j = (i + 1) % 4
        tris.append((anchor[i], anchor[j], pane[j]))
        tris.append((anchor[i], pane[j], pane[i]))
    tris.append((pane[0], pane[1], pane[2]))
    tris.append((pane[0], pane[2], pane[3]))
    window = OpeningTemplate("mid_pane", "window", 0.1, tuple(tris))
    return {door.name: door, window.name: window}


# ---------------------------------------------------------------------------
# validation

def validate_solid(solid: BuildingSolid, tol: float = 1e-6) -> list:
    """Structural checks; returns violation strings (empty when clean)."""
    violations = []
    seen = set()
    for f in solid.faces:
        if f.face_id in seen:
            violations.append(f"duplicate face id {f.face_id!r}")
        seen.add(f.face_id)
        if f.label not in FACE_LABELS:
            violations.append(f"face {f.face_id}: unknown label {f.label!r}")
        try:
            n, d = f.plane()
        except ValueError:
            violations.append(f"face {f.face_id}: outer ring has zero area")
            continue
        for which, ring in (("outer", f.outer), *(("inner", r) for r in f.inner)):
            pts = ring.as_array()
            off = pts @ n - d
            if float(np.abs(off).max()) > tol:
                violations.append(
                    f"face {f.face_id}: {which} ring off-plane by {float(np.abs(off).max()):.2e}")
        for ring in f.inner:
            a = geom.newell_area_vector(ring.points)
            if float(a @ n) >= 0.0:
                violations.append(
                    f"face {f.face_id}: inner ring must wind opposite to outer")
    violations.extend(geom.closed_surface_violations(solid.loops()))
    if not violations:
        vol = solid.volume()
        if vol <= 0.0:
            violations.append(f"enclosed volume is {vol:.6g}, shell faces inward")
    return violations


# ---------------------------------------------------------------------------
# file formats

def _content_lines(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    out = []
    for no, line in enumerate(raw, start=1):
        text = line.split("#", 1)[0].strip()
        if text:
            out.append((no, text))
    return out


def _parse_floats(tokens, path, no):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"{path}:{no}: bad number in {' '.join(tokens)!r}") from exc


def _parse_ring(tokens, path, no) -> Ring:
    vals = _parse_floats(tokens, path, no)
    if len(vals) < 9 or len(vals) % 3 != 0:
        raise ParseError(f"{path}:{no}: ring needs 3*k coordinates, k >= 3")
    pts = [tuple(vals[i:i + 3]) for i in range(0, len(vals), 3)]
    return Ring(tuple(pts))


def _kv(token: str, key: str, path, no) -> str:
    if not token.startswith(key + "="):
        raise ParseError(f"{path}:{no}: expected {key}=..., got {token!r}")
    return token[len(key) + 1:]


def _parse_solid(lines, path):
    """Consume one `solid ... end` block from (line_no, text) pairs.

    Returns the solid and the index of the first unconsumed line, so a
    composite file can carry more sections after the block.
    """
    if not lines:
        raise ParseError(f"{path}: empty file")
    no, head = lines[0]
    tok = head.split()
    if len(tok) != 3 or tok[0] != "solid":
        raise ParseError(f"{path}:{no}: expected 'solid <id> lod=<n>'")
    solid_id = tok[1]
    try:
        lod = int(_kv(tok[2], "lod", path, no))
    except ValueError as exc:
        raise ParseError(f"{path}:{no}: lod must be an integer") from exc

    faces = []
    face_id = None
    label = None
    outer = None
    inner = []
    consumed = len(lines)
    closed = False
    for at in range(1, len(lines)):
        no, text = lines[at]
        tok = text.split()
        if tok[0] == "face":
            if face_id is not None:
                raise ParseError(f"{path}:{no}: face without closing 'end'")
            if len(tok) != 3:
                raise ParseError(f"{path}:{no}: expected 'face <id> label=<label>'")
            face_id = tok[1]
            label = _kv(tok[2], "label", path, no)
            outer = None
            inner = []
        elif tok[0] == "outer":
            if face_id is None or outer is not None:
                raise ParseError(f"{path}:{no}: misplaced 'outer'")
            outer = _parse_ring(tok[1:], path, no)
        elif tok[0] == "inner":
            if face_id is None or outer is None:
                raise ParseError(f"{path}:{no}: misplaced 'inner'")
            inner.append(_parse_ring(tok[1:], path, no))
        elif tok[0] == "end":
            if face_id is None:
                closed = True
                consumed = at + 1
                break
            if outer is None:
                raise ParseError(f"{path}:{no}: face {face_id} has no outer ring")
            faces.append(Face(face_id, label, outer, tuple(inner)))
            face_id = None
        else:
            raise ParseError(f"{path}:{no}: unknown keyword {tok[0]!r}")
    if face_id is not None:
        raise ParseError(f"{path}: face {face_id} not closed by 'end'")
    if not closed:
        raise ParseError(f"{path}: missing final 'end'")
    if not faces:
        raise ParseError(f"{path}: solid has no faces")
    return BuildingSolid(solid_id, lod, tuple(faces)), consumed


def read_solid(path) -> BuildingSolid:
    """Parse a solid file (see README for the format)."""
    solid, _ = _parse_solid(_content_lines(path), path)
    return solid


def _ring_text(ring: Ring) -> str:
    return "  ".join(f"{p.x!r} {p.y!r} {p.z!r}" for p in ring.points)


def write_solid(solid: BuildingSolid, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"solid {solid.solid_id} lod={solid.lod}\n")
            for f in solid.faces:
                fh.write(f"face {f.face_id} label={f.label}\n")
                fh.write(f"outer {_ring_text(f.outer)}\n")
                for ring in f.inner:
                    fh.write(f"inner {_ring_text(ring)}\n")
                fh.write("end\n")
            fh.write("end\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_template_library(path) -> dict:
    """Parse opening templates keyed by name; validates anchor closure."""
    lines = _content_lines(path)
    templates = {}
    name = None
    label = None
    depth = 0.0
    tris = []
    for no, text in lines:
        tok = text.split()
        if tok[0] == "template":
            if name is not None:
                raise ParseError(f"{path}:{no}: template without closing 'end'")
            if len(tok) != 4:
                raise ParseError(
                    f"{path}:{no}: expected 'template <name> label=<l> depth=<d>'")
            name = tok[1]
            label = _kv(tok[2], "label", path, no)
            depth = _parse_floats([_kv(tok[3], "depth", path, no)], path, no)[0]
            tris = []
        elif tok[0] == "tri":
            if name is None:
                raise ParseError(f"{path}:{no}: 'tri' outside template block")
            vals = _parse_floats(tok[1:], path, no)
            if len(vals) != 9:
                raise ParseError(f"{path}:{no}: triangle needs 9 coordinates")
            tris.append(tuple(tuple(vals[i:i + 3]) for i in (0, 3, 6)))
        elif tok[0] == "end":
            if name is None:
                raise ParseError(f"{path}:{no}: stray 'end'")
            if name in templates:
                raise ParseError(f"{path}:{no}: duplicate template {name!r}")
            templates[name] = OpeningTemplate(name, label, depth, tuple(tris))
            name = None
        else:
            raise ParseError(f"{path}:{no}: unknown keyword {tok[0]!r}")
    if name is not None:
        raise ParseError(f"{path}: template {name} not closed by 'end'")
    if not templates:
        raise ParseError(f"{path}: no templates found")
    return templates


def write_template_library(templates: dict, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for t in templates.values():
                fh.write(f"template {t.name} label={t.label} depth={t.depth!r}\n")
                for a, b, c in t.triangles:
                    fh.write("tri " + "  ".join(
                        f"{p.x!r} {p.y!r} {p.z!r}" for p in (a, b, c)) + "\n")
                fh.write("end\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# convenience constructors

def box_solid(solid_id: str, origin, size, lod: int = 2) -> BuildingSolid:
    """Axis-aligned box with conventional labels: walls around, roof up,
    ground down. Handy prior for tests and synthetic scenes."""
    ox, oy, oz = (float(v) for v in origin)
    sx, sy, sz = (float(v) for v in size)
    if min(sx, sy, sz) <= 0.0:
        raise ValidationError("box size must be positive")
    x1, y1, z1 = ox + sx, oy + sy, oz + sz
    p = {
        "000": (ox, oy, oz), "100": (x1, oy, oz), "110": (x1, y1, oz), "010": (ox, y1, oz),
        "001": (ox, oy, z1), "101": (x1, oy, z1), "111": (x1, y1, z1), "011": (ox, y1, z1),
    }
    def ring(*keys):
        return Ring(tuple(p[k] for k in keys))
    faces = (
        Face("wall_front", "wall", ring("000", "100", "101", "001")),   # -y
        Face("wall_right", "wall", ring("100", "110", "111", "101")),   # +x
        Face("wall_back", "wall", ring("110", "010", "011", "111")),    # +y
        Face("wall_left", "wall", ring("010", "000", "001", "011")),    # -x
        Face("roof", "roof", ring("001", "101", "111", "011")),         # +z
        Face("ground", "ground", ring("000", "010", "110", "100")),     # -z
    )
    return BuildingSolid(solid_id, lod, faces)
