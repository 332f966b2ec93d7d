"""Synthetic box-building scenes with known openings.

The generator emits every input the pipeline consumes: a prior solid, a
simulated scan with per-point label probabilities, an image-space
probability grid with facade correspondences, and the ground-truth
opening instances. Everything derives from one seed, so rerunning a spec
reproduces the files byte for byte.

The front wall lies in the y = 0 plane facing -y, so facade (u, v)
coordinates coincide with world (x, z). Scan targets sit on a regular
grid across the wall; each ray comes from the nearest of a row of
stations in front of the building. Rays into an opening usually pass
through and reflect at the interior backplane, except when they clip the
frame, and covered openings return from the facade plane like the wall
while keeping window/door semantics.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .extraction import OpeningInstance, write_instances
from .model_io import OPENING_LABELS, BuildingSolid, box_solid, write_solid
from .occupancy import Ray, write_rays
from .rasters import (POINT_LABELS, write_correspondences,
                      write_labeled_points, write_pixel_grid)

FRONT_FACE = "wall_front"
IMAGE_CHANNELS = ("window", "door")


@dataclass(frozen=True)
class SynthOpening:
    rect: tuple
    label: str
    covered: bool = False

    def __post_init__(self):
        rect = tuple(float(x) for x in self.rect)
        object.__setattr__(self, "rect", rect)
        if len(rect) != 4 or not (rect[0] < rect[2] and rect[1] < rect[3]):
            raise SpecError(f"degenerate opening rect {rect}")
        if self.label not in OPENING_LABELS:
            raise SpecError(f"opening label {self.label!r} must be one of "
                            f"{OPENING_LABELS}")


def _coerce_opening(o) -> "SynthOpening":
    """Accept SynthOpening, ((rect), label[, covered]), or a flat tuple."""
    if isinstance(o, SynthOpening):
        return o
    o = tuple(o)
    if len(o) >= 5 and not isinstance(o[0], (tuple, list)):
        return SynthOpening(o[:4], *o[4:])
    return SynthOpening(*o)


def default_openings() -> tuple:
    return (SynthOpening((2.0, 2.0, 3.2, 3.0), "window"),
            SynthOpening((6.0, 2.0, 7.2, 3.0), "window"),
            SynthOpening((4.5, 0.2, 5.7, 2.6), "door"))


@dataclass(frozen=True)
class SceneSpec:
    width: float = 10.0
    height: float = 4.0
    depth: float = 5.0
    openings: tuple = field(default_factory=default_openings)
    pitch: float = 0.05
    noise_sigma: float = 0.02
    seed: int = 0
    frame_fraction: float = 0.15
    opening_prob: float = 0.95
    wall_prob: float = 0.9
    image_cell: float = 0.05
    station_height: float = 1.7
    station_distance: float = 5.0
    station_spacing: float = 2.0

    def __post_init__(self):
        for name in ("width", "height", "depth", "pitch", "image_cell",
                     "station_distance", "station_spacing"):
            if getattr(self, name) <= 0.0:
                raise SpecError(f"{name} must be positive")
        if self.noise_sigma < 0.0:
            raise SpecError("noise_sigma must be non-negative")
        if not 0.0 <= self.frame_fraction <= 1.0:
            raise SpecError("frame_fraction must lie in [0, 1]")
        for name in ("opening_prob", "wall_prob"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise SpecError(f"{name} must lie in (0, 1]")
        openings = tuple(_coerce_opening(o) for o in self.openings)
        object.__setattr__(self, "openings", openings)
        for o in openings:
            u0, v0, u1, v1 = o.rect
            if u0 <= 0.0 or v0 <= 0.0 or u1 >= self.width or v1 >= self.height:
                raise SpecError(f"opening {o.rect} leaves the wall interior")
        for i in range(len(openings)):
            for j in range(i + 1, len(openings)):
                a, b = openings[i].rect, openings[j].rect
                if (a[0] <= b[2] and b[0] <= a[2]
                        and a[1] <= b[3] and b[1] <= a[3]):
                    raise SpecError(f"openings {a} and {b} overlap")


def scene_solid(spec: SceneSpec) -> BuildingSolid:
    return box_solid("building", (0.0, 0.0, 0.0),
                     (spec.width, spec.depth, spec.height))


def stations(spec: SceneSpec) -> list:
    xs = []
    x = spec.station_spacing / 2.0
    while x < spec.width:
        xs.append(x)
        x += spec.station_spacing
    return xs


def ground_truth_instances(spec: SceneSpec) -> list:
    return [OpeningInstance(FRONT_FACE, o.rect, o.label, 1.0)
            for o in spec.openings]


def measured_instances(spec: SceneSpec) -> list:
    return [OpeningInstance(FRONT_FACE, o.rect, o.label, 1.0)
            for o in spec.openings if not o.covered]


def _label_probs(label: str, p: float) -> list:
    rest = (1.0 - p) / (len(POINT_LABELS) - 1)
    return [p if name == label else rest for name in POINT_LABELS]


def _opening_at(spec: SceneSpec, u: float, v: float):
    for o in spec.openings:
        if o.rect[0] < u < o.rect[2] and o.rect[1] < v < o.rect[3]:
            return o
    return None


def generate_scan(spec: SceneSpec):
    """(rays, points, probs) of the simulated facade sweep.

    Targets form a pitch grid over the wall; every ray is a hit. Noise
    perturbs the return distance along the ray, so a ray's traversal line
    never moves, only its endpoint.
    """
    rng = np.random.default_rng(spec.seed)
    sts = stations(spec)
    nx = int(round(spec.width / spec.pitch))
    nz = int(round(spec.height / spec.pitch))
    rays = []
    points = []
    probs = []
    for ix in range(nx):
        u = (ix + 0.5) * spec.pitch
        sx = min(sts, key=lambda s: (abs(s - u), s))
        origin = np.asarray((sx, -spec.station_distance, spec.station_height))
        for iz in range(nz):
            v = (iz + 0.5) * spec.pitch
            noise = rng.normal(0.0, spec.noise_sigma)
            gate = rng.uniform()
            target = np.asarray((u, 0.0, v))
            span = target - origin
            dist = float(np.linalg.norm(span))
            direction = span / dist
            opening = _opening_at(spec, u, v)
            if opening is None or opening.covered or gate < spec.frame_fraction:
                endpoint = origin + (dist + noise) * direction
                if opening is None:
                    prob = _label_probs("wall", spec.wall_prob)
                else:
                    prob = _label_probs(opening.label, spec.opening_prob)
            else:
                # through the opening, return from the backplane y = depth
                back = dist * (spec.station_distance + spec.depth) \
                    / spec.station_distance
                endpoint = origin + (back + noise) * direction
                prob = _label_probs("other", spec.wall_prob)
            rays.append(Ray(tuple(origin), tuple(endpoint), True))
            points.append(tuple(endpoint))
            probs.append(prob)
    return rays, np.asarray(points), np.asarray(probs)


def generate_image(spec: SceneSpec) -> np.ndarray:
    """(rows, cols, 2) window/door probability grid, row 0 at the top."""
    cols = int(round(spec.width / spec.image_cell))
    rows = int(round(spec.height / spec.image_cell))
    image = np.zeros((rows, cols, len(IMAGE_CHANNELS)), dtype=np.float32)
    us = (np.arange(cols) + 0.5) * spec.image_cell
    vs = spec.height - (np.arange(rows) + 0.5) * spec.image_cell
    for o in spec.openings:
        channel = IMAGE_CHANNELS.index(o.label)
        in_u = (us > o.rect[0]) & (us < o.rect[2])
        in_v = (vs > o.rect[1]) & (vs < o.rect[3])
        image[np.ix_(in_v, in_u, [channel])] = spec.opening_prob
    return image


def image_correspondences(spec: SceneSpec) -> list:
    cols = round(spec.width / spec.image_cell)
    rows = round(spec.height / spec.image_cell)
    return [((0.0, 0.0), (0.0, float(rows))),
            ((spec.width, 0.0), (float(cols), float(rows))),
            ((spec.width, spec.height), (float(cols), 0.0)),
            ((0.0, spec.height), (0.0, 0.0))]


def synth_scene(spec: SceneSpec, out_dir) -> dict:
    """Write the full scene file set into `out_dir`; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {key: os.path.join(out_dir, name) for key, name in (
        ("solid", "solid.txt"),
        ("rays", "rays.txt"),
        ("points", "points.txt"),
        ("image", "image.txt"),
        ("correspondences", "correspondences.txt"),
        ("gt_instances", "gt_instances.txt"),
        ("gt_measured", "gt_measured.txt"),
    )}
    write_solid(scene_solid(spec), paths["solid"])
    rays, points, probs = generate_scan(spec)
    write_rays(rays, paths["rays"])
    write_labeled_points(points, probs, paths["points"])
    write_pixel_grid(generate_image(spec), IMAGE_CHANNELS, paths["image"])
    write_correspondences(image_correspondences(spec), paths["correspondences"])
    write_instances(ground_truth_instances(spec), paths["gt_instances"])
    write_instances(measured_instances(spec), paths["gt_measured"])
    return paths
