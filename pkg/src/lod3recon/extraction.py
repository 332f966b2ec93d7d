"""Opening instances from the fused posterior raster.

Pipeline: threshold at p_high, morphological opening to kill speckle and
thin bridges, 8-connected clustering, small-cluster and rectangularity
percentile rejection, then per-cluster bounding rectangles with a mean
confidence and a majority window/door label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import fusion
from .errors import DomainError, IoError, ParseError, ValidationError
from .model_io import OPENING_LABELS
from .rasters import FacadeRaster

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ExtractionConfig:
    p_high: float = 0.7
    kernel: int = 3            # square structuring element side, pixels
    pe_lo: float = 5.0
    pe_up: float = 95.0
    min_pixels: int = 4

    def __post_init__(self):
        if not 0.0 < self.p_high < 1.0:
            raise ValidationError("p_high must be in (0, 1)")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValidationError("kernel must be odd and >= 1")
        if not 0.0 <= self.pe_lo < self.pe_up <= 100.0:
            raise ValidationError("need 0 <= pe_lo < pe_up <= 100")
        if self.min_pixels < 1:
            raise ValidationError("min_pixels must be >= 1")


@dataclass(frozen=True)
class OpeningInstance:
    """One detected opening on a facade.

    `rect` is (u_min, v_min, u_max, v_max) in facade meters and is the
    exact pixel bounding box scaled by the cell size. `pixels` keeps the
    member (row, col) pairs; instances read back from a file carry an
    empty tuple there.
    """
    face_id: str
    rect: tuple
    label: str
    confidence: float
    pixels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rect", tuple(float(x) for x in self.rect))
        object.__setattr__(self, "pixels",
                           tuple((int(r), int(c)) for r, c in self.pixels))
        u0, v0, u1, v1 = self.rect
        if not (u0 < u1 and v0 < v1):
            raise ValidationError(f"degenerate opening rect {self.rect}")
        if self.label not in OPENING_LABELS:
            raise ValidationError(f"label {self.label!r} not in {OPENING_LABELS}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError("confidence must be in [0, 1]")

    def area(self) -> float:
        u0, v0, u1, v1 = self.rect
        return (u1 - u0) * (v1 - v0)


def threshold_clusters(posterior: np.ndarray, p_high: float) -> list:
    """8-connected components of {posterior > p_high}.

    Each cluster is an (n, 2) int array of (row, col) pairs in row-major
    order; clusters are sorted by (min row, min col).
    """
    mask = np.asarray(posterior, dtype=float) > p_high
    return mask_clusters(mask)


def mask_clusters(mask: np.ndarray) -> list:
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    out = []
    for k in range(1, count + 1):
        rows, cols = np.nonzero(labels == k)
        out.append(np.stack([rows, cols], axis=1))
    out.sort(key=lambda px: (int(px[:, 0].min()), int(px[:, 1].min())))
    return out


def morphological_opening(mask: np.ndarray, kernel: int) -> np.ndarray:
    """Erosion then dilation with a kernel x kernel square element.

    Everything outside the raster counts as background, so shapes hugging
    the border erode like any others.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValidationError("kernel must be odd and >= 1")
    mask = np.asarray(mask, dtype=bool)
    if kernel == 1:
        return mask.copy()
    element = np.ones((kernel, kernel), dtype=bool)
    return ndimage.binary_opening(mask, structure=element)


def rectangularity(cluster) -> float:
    """Member-pixel count over bounding-box area, in (0, 1]."""
    px = np.asarray(cluster, dtype=int)
    if len(px) == 0:
        raise DomainError("empty cluster has no rectangularity")
    h = int(px[:, 0].max() - px[:, 0].min()) + 1
    w = int(px[:, 1].max() - px[:, 1].min()) + 1
    return len(px) / float(h * w)


def filter_instances(clusters, config: ExtractionConfig) -> list:
    """Drop runts, then clusters outside the rectangularity percentile band.

    With two or fewer survivors the percentile band is meaningless and
    everything is kept.
    """
    big = [c for c in clusters if len(c) >= config.min_pixels]
    if len(big) <= 2:
        return big
    idx = np.array([rectangularity(c) for c in big])
    lo = np.percentile(idx, config.pe_lo)
    up = np.percentile(idx, config.pe_up)
    return [c for c, r in zip(big, idx) if lo <= r <= up]


def instance_confidence(cluster, posterior: np.ndarray) -> float:
    px = np.asarray(cluster, dtype=int)
    post = np.asarray(posterior, dtype=float)
    return float(post[px[:, 0], px[:, 1]].mean())


def cluster_label(cluster, pointcloud: FacadeRaster | None,
                  texture: FacadeRaster | None) -> str:
    """Majority window/door vote over member pixels; ties go to window."""
    votes = {"window": 0, "door": 0}
    for r, c in np.asarray(cluster, dtype=int):
        votes[fusion.disambiguate_label(pointcloud, texture, (r, c))] += 1
    return "door" if votes["door"] > votes["window"] else "window"


def cluster_to_opening(cluster, frame, label: str, confidence: float,
                       face_id: str) -> OpeningInstance:
    px = np.asarray(cluster, dtype=int)
    cell = frame.cell
    rect = (px[:, 1].min() * cell, px[:, 0].min() * cell,
            (px[:, 1].max() + 1) * cell, (px[:, 0].max() + 1) * cell)
    return OpeningInstance(face_id, rect, label, confidence,
                           tuple(map(tuple, px)))


def extract_openings(posterior: FacadeRaster, config: ExtractionConfig,
                     pointcloud: FacadeRaster | None = None,
                     texture: FacadeRaster | None = None,
                     face_id: str = "") -> list:
    """Full extraction pass over one facade's posterior raster."""
    post = posterior.channel("opening").astype(float)
    mask = post > config.p_high
    mask = morphological_opening(mask, config.kernel)
    clusters = filter_instances(mask_clusters(mask), config)
    out = []
    for cluster in clusters:
        label = cluster_label(cluster, pointcloud, texture)
        conf = instance_confidence(cluster, post)
        out.append(cluster_to_opening(cluster, posterior.frame, label,
                                      conf, face_id))
    return out


# ---------------------------------------------------------------------------
# file format

def write_instances(instances, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# opening face=<id> label=<window|door> conf=<p> "
                     "rect=<umin vmin umax vmax>\n")
            for inst in instances:
                u0, v0, u1, v1 = inst.rect
                fh.write(f"opening face={inst.face_id} label={inst.label} "
                         f"conf={inst.confidence!r} "
                         f"rect={u0!r} {v0!r} {u1!r} {v1!r}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_instances(path) -> list:
    out = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for no, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                tok = text.split()
                if len(tok) != 8 or tok[0] != "opening":
                    raise ParseError(f"{path}:{no}: expected 'opening face=... "
                                     "label=... conf=... rect=u v u v'")
                fields = {}
                for t, key in zip(tok[1:4], ("face", "label", "conf")):
                    if not t.startswith(key + "="):
                        raise ParseError(f"{path}:{no}: expected {key}=..., got {t!r}")
                    fields[key] = t[len(key) + 1:]
                if not tok[4].startswith("rect="):
                    raise ParseError(f"{path}:{no}: expected rect=..., got {tok[4]!r}")
                try:
                    rect = (float(tok[4][5:]), float(tok[5]),
                            float(tok[6]), float(tok[7]))
                    conf = float(fields["conf"])
                except ValueError as exc:
                    raise ParseError(f"{path}:{no}: bad number") from exc
                try:
                    out.append(OpeningInstance(fields["face"], rect,
                                               fields["label"], conf))
                except ValidationError as exc:
                    raise ParseError(f"{path}:{no}: {exc}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return out
