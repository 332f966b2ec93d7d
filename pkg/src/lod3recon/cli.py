"""Command line front end: per-stage subcommands plus a batch pipeline.

Every stage reads and writes the documented text formats, so any stage
can be re-run in isolation on the artifacts of a previous run. The
`pipeline` subcommand chains them from a `key = value` config file and
drops every intermediate into the output directory.

Exit codes: 0 success, 2 for input and configuration problems (bad
config, unreadable or malformed files), 1 for any other pipeline error.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from dataclasses import dataclass, field, fields

from .errors import (ConfigError, IoError, Lod3Error, ParseError, SpecError)
from .evaluate import (DetectionCounts, detection_rates, format_report,
                       match_instances, median_instance_iou, mesh_deviation,
                       sample_model_points, triangulate_model, watertight,
                       write_metrics)
from .extraction import ExtractionConfig, extract_openings, read_instances, \
    write_instances
from .fusion import default_cpt, fuse_maps, read_cpt
from .model_io import (default_template_library, read_solid,
                       read_template_library)
from .occupancy import (OccupancyConfig, build_occupancy, read_rays,
                        read_tree, write_tree)
from .rasters import (estimate_homography, facade_frame, read_correspondences,
                      read_labeled_points, read_pixel_grid, read_raster,
                      write_raster)
from .reconstruct import (read_model, reconstruct_model, write_citygml,
                          write_model)
from .synth import SceneSpec, SynthOpening, synth_scene
from .visibility import UncertaintyConfig, project_conflict_map
from .rasters import project_image_probabilities, project_point_probabilities


@dataclass(frozen=True)
class PipelineConfig:
    """Typed view of a pipeline config file.

    Required: rays, solid, out_dir. Optional evidence inputs (points,
    image + correspondences) and ground truth enable the corresponding
    stages; numeric blocks reuse each module's own config type.
    """
    rays: str
    solid: str
    out_dir: str
    points: str | None = None
    image: str | None = None
    correspondences: str | None = None
    templates: str | None = None
    cpt: str | None = None
    gt_instances: str | None = None
    gt_measured: str | None = None
    gt_model: str | None = None
    faces: tuple = ()
    occupancy: OccupancyConfig = field(default_factory=OccupancyConfig)
    uncertainty: UncertaintyConfig = field(default_factory=UncertaintyConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    cell: float | None = None
    band: float | None = None
    depth: float = 0.1
    margin: float | None = None
    iou_min: float = 0.5
    samples: int = 2000
    sample_seed: int = 0

    def __post_init__(self):
        for name in ("rays", "solid", "out_dir"):
            if not getattr(self, name):
                raise ConfigError(f"config key {name!r} is required")
        if (self.image is None) != (self.correspondences is None):
            raise ConfigError("image and correspondences must be given together")
        if self.depth <= 0.0:
            raise ConfigError("depth must be positive")
        if not 0.0 < self.iou_min <= 1.0:
            raise ConfigError("iou_min must lie in (0, 1]")
        if self.cell is not None and self.cell <= 0.0:
            raise ConfigError("cell must be positive")
        if self.band is not None and self.band <= 0.0:
            raise ConfigError("band must be positive")
        if self.margin is not None and self.margin < 0.0:
            raise ConfigError("margin must be non-negative")
        if self.samples < 1:
            raise ConfigError("samples must be positive")
        object.__setattr__(self, "faces", tuple(self.faces))

    @property
    def raster_cell(self) -> float:
        return self.cell if self.cell is not None else self.occupancy.voxel_size

    @property
    def cut_margin(self) -> float:
        return self.margin if self.margin is not None else self.raster_cell


_PATH_KEYS = ("rays", "solid", "out_dir", "points", "image", "correspondences",
              "templates", "cpt", "gt_instances", "gt_measured", "gt_model")
_OCCUPANCY_KEYS = {"voxel_size": float, "log_odds_hit": float,
                   "log_odds_miss": float, "log_odds_min": float,
                   "log_odds_max": float, "occupied_threshold": float,
                   "max_range": float}
_UNCERTAINTY_KEYS = {"sigma_position": float, "sigma_state": float,
                     "sigma_in_meters": bool, "aggregate": str}
_EXTRACTION_KEYS = {"p_high": float, "kernel": int, "pe_lo": float,
                    "pe_up": float, "min_pixels": int}
_TOP_KEYS = {"cell": float, "band": float, "depth": float, "margin": float,
             "iou_min": float, "samples": int, "sample_seed": int}


def read_config_file(path) -> dict:
    """Raw `key = value` pairs; duplicate keys are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    raw = {}
    for no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParseError(f"{path}:{no}: expected 'key = value'")
        key, _, value = (part.strip() for part in text.partition("="))
        if not key:
            raise ParseError(f"{path}:{no}: empty key")
        if key in raw:
            raise ParseError(f"{path}:{no}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _convert(key: str, text: str, kind):
    if kind is bool:
        if text in ("true", "false"):
            return text == "true"
        raise ConfigError(f"{key} must be true or false, got {text!r}")
    if kind is str:
        return text
    try:
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def build_config(raw: dict, base_dir: str = ".") -> PipelineConfig:
    """Typed config from raw strings; paths resolve against `base_dir`."""
    raw = dict(raw)
    top: dict = {}
    occ: dict = {}
    unc: dict = {}
    ext: dict = {}
    for key, value in raw.items():
        if key in _PATH_KEYS:
            top[key] = os.path.normpath(os.path.join(base_dir, value))
        elif key == "faces":
            top[key] = tuple(value.split())
        elif key in _OCCUPANCY_KEYS:
            occ[key] = _convert(key, value, _OCCUPANCY_KEYS[key])
        elif key in _UNCERTAINTY_KEYS:
            unc[key] = _convert(key, value, _UNCERTAINTY_KEYS[key])
        elif key in _EXTRACTION_KEYS:
            ext[key] = _convert(key, value, _EXTRACTION_KEYS[key])
        elif key in _TOP_KEYS:
            top[key] = _convert(key, value, _TOP_KEYS[key])
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return PipelineConfig(occupancy=OccupancyConfig(**occ),
                              uncertainty=UncertaintyConfig(**unc),
                              extraction=ExtractionConfig(**ext),
                              **top)
    except TypeError as exc:
        raise ConfigError(f"incomplete config: {exc}") from exc
    except Lod3Error as exc:
        raise ConfigError(str(exc)) from exc


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except Lod3Error as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute every stage, writing each intermediate to the output dir.

    Returns the artifact paths plus the in-memory metrics dict (empty
    when no ground truth was configured).
    """
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    artifacts: dict = {"out_dir": out, "metrics": {}}

    with _stage("raycast"):
        rays = read_rays(config.rays)
        tree = build_occupancy(rays, config.occupancy)
        artifacts["tree"] = os.path.join(out, "tree.txt")
        write_tree(tree, artifacts["tree"])
    with _stage("prior"):
        solid = read_solid(config.solid)
    face_ids = config.faces or tuple(
        f.face_id for f in solid.faces if f.label == "wall")
    points = probs = None
    if config.points:
        with _stage("project-points"):
            points, probs = read_labeled_points(config.points)
    image = image_channels = homography = None
    if config.image:
        with _stage("project-image"):
            image, image_channels = read_pixel_grid(config.image)
            homography = estimate_homography(
                read_correspondences(config.correspondences))
    with _stage("fuse"):
        cpt = read_cpt(config.cpt) if config.cpt else default_cpt()
    with _stage("reconstruct"):
        templates = (read_template_library(config.templates)
                     if config.templates else default_template_library())

    instances = []
    for face_id in face_ids:
        try:
            face = solid.face(face_id)
        except KeyError:
            raise ConfigError(f"faces: solid has no face {face_id!r}")
        frame = facade_frame(face, config.raster_cell)
        with _stage("conflicts"):
            conflict = project_conflict_map(tree, face, config.uncertainty,
                                            frame)
            path = os.path.join(out, f"conflict_{face_id}.txt")
            write_raster(conflict, path)
            artifacts[f"conflict_{face_id}"] = path
        pc = tex = None
        if points is not None:
            with _stage("project-points"):
                pc = project_point_probabilities(points, probs, frame,
                                                 band=config.band)
                path = os.path.join(out, f"points_{face_id}.txt")
                write_raster(pc, path)
                artifacts[f"points_{face_id}"] = path
        if image is not None:
            with _stage("project-image"):
                tex = project_image_probabilities(image, image_channels,
                                                  homography, frame)
                path = os.path.join(out, f"texture_{face_id}.txt")
                write_raster(tex, path)
                artifacts[f"texture_{face_id}"] = path
        with _stage("fuse"):
            posterior = fuse_maps(conflict, pc, tex, cpt)
            path = os.path.join(out, f"posterior_{face_id}.txt")
            write_raster(posterior, path)
            artifacts[f"posterior_{face_id}"] = path
        with _stage("extract"):
            instances.extend(extract_openings(posterior, config.extraction,
                                              pc, tex, face_id=face_id))
    with _stage("extract"):
        artifacts["instances"] = os.path.join(out, "instances.txt")
        write_instances(instances, artifacts["instances"])

    with _stage("reconstruct"):
        model = reconstruct_model(solid, instances, templates,
                                  depth=config.depth,
                                  margin=config.cut_margin)
        artifacts["model"] = os.path.join(out, "model.txt")
        write_model(model, artifacts["model"])
        artifacts["citygml"] = os.path.join(out, "model.gml")
        write_citygml(model, artifacts["citygml"])

    if config.gt_instances:
        with _stage("evaluate"):
            metrics = _evaluate_against_gt(config, solid, instances, model,
                                           templates)
            artifacts["metrics"] = metrics
            artifacts["metrics_file"] = os.path.join(out, "metrics.txt")
            write_metrics(metrics, artifacts["metrics_file"])
            artifacts["report"] = os.path.join(out, "report.txt")
            try:
                with open(artifacts["report"], "w", encoding="utf-8") as fh:
                    fh.write(format_report(metrics))
            except OSError as exc:
                raise IoError(f"cannot write {artifacts['report']}: {exc}") \
                    from exc
    return artifacts


def _evaluate_against_gt(config, solid, instances, model, templates) -> dict:
    gt = read_instances(config.gt_instances)
    mo = (len(read_instances(config.gt_measured))
          if config.gt_measured else len(gt))
    tp, fp, fn, matches = match_instances(instances, gt, config.iou_min)
    counts = DetectionCounts.from_matching(len(gt), mo, tp, fp)
    da, fa, dm = detection_rates(counts)
    metrics = {"AO": counts.AO, "MO": counts.MO, "D": counts.D,
               "TP": counts.TP, "FP": counts.FP, "FN": counts.FN,
               "DA": da, "FA": fa, "DM": dm,
               "median_iou": median_instance_iou(instances, gt, matches)}
    if matches:
        metrics["median_iou_matched"] = median_instance_iou(
            instances, gt, matches, matched_only=True)
    if config.gt_model:
        gt_model = read_model(config.gt_model)
    else:
        # ground truth is exact; the boundary margin only guards detections
        gt_model = reconstruct_model(solid, gt, templates,
                                     depth=config.depth, margin=0.0)
    samples = sample_model_points(gt_model, config.samples,
                                  seed=config.sample_seed)
    mean, rms = mesh_deviation(samples, triangulate_model(model))
    metrics["mean_deviation"] = mean
    metrics["rms_deviation"] = rms
    metrics["watertight"] = watertight(model.loops())
    return metrics


# ---------------------------------------------------------------------------
# subcommands

def _cmd_raycast(args) -> int:
    config = OccupancyConfig(voxel_size=args.vs, log_odds_hit=args.l_hit,
                             log_odds_miss=args.l_miss, log_odds_min=args.l_min,
                             log_odds_max=args.l_max,
                             occupied_threshold=args.occupied_threshold,
                             max_range=args.max_range)
    tree = build_occupancy(read_rays(args.rays), config)
    write_tree(tree, args.out)
    print(f"wrote {args.out} ({len(tree.cells)} voxels)")
    return 0


def _face_frame(solid_path, face_id, cell):
    solid = read_solid(solid_path)
    try:
        face = solid.face(face_id)
    except KeyError:
        raise ConfigError(f"solid has no face {face_id!r}")
    return face, facade_frame(face, cell)


def _cmd_conflicts(args) -> int:
    tree = read_tree(args.tree)
    face, frame = _face_frame(args.solid, args.face, args.cell)
    config = UncertaintyConfig(sigma_position=args.sigma_position,
                               sigma_state=args.sigma_state,
                               aggregate=args.aggregate)
    write_raster(project_conflict_map(tree, face, config, frame), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_project_points(args) -> int:
    points, probs = read_labeled_points(args.points)
    _, frame = _face_frame(args.solid, args.face, args.cell)
    raster = project_point_probabilities(points, probs, frame, band=args.band)
    write_raster(raster, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_project_image(args) -> int:
    image, channels = read_pixel_grid(args.image)
    homography = estimate_homography(read_correspondences(args.correspondences))
    _, frame = _face_frame(args.solid, args.face, args.cell)
    raster = project_image_probabilities(image, channels, homography, frame)
    write_raster(raster, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_fuse(args) -> int:
    conflict = read_raster(args.conflict) if args.conflict else None
    pc = read_raster(args.pc) if args.pc else None
    tex = read_raster(args.tex) if args.tex else None
    cpt = read_cpt(args.cpt) if args.cpt else None
    write_raster(fuse_maps(conflict, pc, tex, cpt), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_extract(args) -> int:
    posterior = read_raster(args.posterior)
    pc = read_raster(args.pc) if args.pc else None
    tex = read_raster(args.tex) if args.tex else None
    config = ExtractionConfig(p_high=args.p_high, kernel=args.kernel,
                              pe_lo=args.pe_lo, pe_up=args.pe_up,
                              min_pixels=args.min_pixels)
    instances = extract_openings(posterior, config, pc, tex, face_id=args.face)
    write_instances(instances, args.out)
    print(f"wrote {args.out} ({len(instances)} instances)")
    return 0


def _cmd_reconstruct(args) -> int:
    solid = read_solid(args.solid)
    instances = read_instances(args.instances)
    templates = (read_template_library(args.templates)
                 if args.templates else default_template_library())
    model = reconstruct_model(solid, instances, templates, depth=args.depth,
                              margin=args.margin)
    write_model(model, args.out_model)
    write_citygml(model, args.out_gml)
    print(f"wrote {args.out_model} and {args.out_gml} "
          f"({len(model.placements)} openings, volume {model.volume():.6f})")
    return 0


def _cmd_evaluate(args) -> int:
    pred = read_instances(args.pred)
    gt = read_instances(args.gt)
    mo = len(read_instances(args.measured)) if args.measured else len(gt)
    tp, fp, fn, matches = match_instances(pred, gt, args.iou_min)
    counts = DetectionCounts.from_matching(len(gt), mo, tp, fp)
    da, fa, dm = detection_rates(counts)
    metrics = {"AO": counts.AO, "MO": counts.MO, "D": counts.D,
               "TP": counts.TP, "FP": counts.FP, "FN": counts.FN,
               "DA": da, "FA": fa, "DM": dm,
               "median_iou": median_instance_iou(pred, gt, matches)}
    if matches:
        metrics["median_iou_matched"] = median_instance_iou(
            pred, gt, matches, matched_only=True)
    if args.model and args.gt_model:
        model = read_model(args.model)
        gt_model = read_model(args.gt_model)
        samples = sample_model_points(gt_model, args.samples, seed=args.seed)
        mean, rms = mesh_deviation(samples, triangulate_model(model))
        metrics["mean_deviation"] = mean
        metrics["rms_deviation"] = rms
        metrics["watertight"] = watertight(model.loops())
    if args.out:
        write_metrics(metrics, args.out)
    sys.stdout.write(format_report(metrics))
    return 0


def _parse_opening(text: str) -> SynthOpening:
    tok = text.replace(",", " ").split()
    if len(tok) not in (5, 6):
        raise ConfigError(
            f"opening must be 'u0 v0 u1 v1 label [covered]', got {text!r}")
    try:
        rect = tuple(float(t) for t in tok[:4])
    except ValueError as exc:
        raise ConfigError(f"bad opening rect in {text!r}") from exc
    covered = False
    if len(tok) == 6:
        if tok[5] != "covered":
            raise ConfigError(f"trailing token must be 'covered' in {text!r}")
        covered = True
    return SynthOpening(rect, tok[4], covered)


def _cmd_synth(args) -> int:
    kwargs = dict(width=args.width, height=args.height, depth=args.depth,
                  pitch=args.pitch, noise_sigma=args.noise, seed=args.seed,
                  image_cell=args.image_cell)
    if args.opening:
        kwargs["openings"] = tuple(_parse_opening(o) for o in args.opening)
    spec = SceneSpec(**kwargs)
    paths = synth_scene(spec, args.out)
    config_path = os.path.join(args.out, "scene.cfg")
    _write_scene_config(spec, paths, args.out, config_path)
    print(f"wrote scene into {args.out}")
    return 0


def _write_scene_config(spec: SceneSpec, paths: dict, out_dir, path) -> None:
    lines = [
        "# pipeline configuration for the generated scene",
        f"rays = {os.path.basename(paths['rays'])}",
        f"solid = {os.path.basename(paths['solid'])}",
        f"points = {os.path.basename(paths['points'])}",
        f"image = {os.path.basename(paths['image'])}",
        f"correspondences = {os.path.basename(paths['correspondences'])}",
        f"gt_instances = {os.path.basename(paths['gt_instances'])}",
        f"gt_measured = {os.path.basename(paths['gt_measured'])}",
        "faces = wall_front",
        "out_dir = artifacts",
    ]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _cmd_pipeline(args) -> int:
    raw = read_config_file(args.config)
    overrides = {"voxel_size": args.vs, "p_high": args.p_high,
                 "pe_up": args.pe_up, "pe_lo": args.pe_lo, "cpt": args.cpt,
                 "depth": args.depth, "iou_min": args.iou_min}
    for key, value in overrides.items():
        if value is not None:
            raw[key] = str(value)
    env_out = os.environ.get("LOD3_OUT_DIR")
    config = build_config(raw, os.path.dirname(os.path.abspath(args.config)))
    if env_out:
        config = _replace_out_dir(config, env_out)
    artifacts = run_pipeline(config)
    print(f"pipeline complete: {artifacts['out_dir']}")
    if artifacts["metrics"]:
        sys.stdout.write(format_report(artifacts["metrics"]))
    return 0


def _replace_out_dir(config: PipelineConfig, out_dir: str) -> PipelineConfig:
    values = {f.name: getattr(config, f.name) for f in fields(config)}
    values["out_dir"] = out_dir
    return PipelineConfig(**values)


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lod3recon",
        description="Reconstruct semantic LoD3 building models from laser "
                    "rays, an LoD2 prior, and semantic probability maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("raycast", help="integrate rays into an occupancy grid")
    p.add_argument("--rays", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vs", type=float, default=0.1, help="voxel size in meters")
    p.add_argument("--l-hit", type=float, default=0.85)
    p.add_argument("--l-miss", type=float, default=-0.4)
    p.add_argument("--l-min", type=float, default=-2.0)
    p.add_argument("--l-max", type=float, default=3.5)
    p.add_argument("--occupied-threshold", type=float, default=0.5)
    p.add_argument("--max-range", type=float, default=100.0)
    p.set_defaults(func=_cmd_raycast)

    p = sub.add_parser("conflicts",
                       help="project voxel states onto a facade raster")
    p.add_argument("--tree", required=True)
    p.add_argument("--solid", required=True)
    p.add_argument("--face", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cell", type=float, default=0.1)
    p.add_argument("--sigma-position", type=float, default=3.0)
    p.add_argument("--sigma-state", type=float, default=2.85)
    p.add_argument("--aggregate", choices=("max", "mean"), default="max")
    p.set_defaults(func=_cmd_conflicts)

    p = sub.add_parser("project-points",
                       help="project labeled scan points onto a facade raster")
    p.add_argument("--points", required=True)
    p.add_argument("--solid", required=True)
    p.add_argument("--face", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cell", type=float, default=0.1)
    p.add_argument("--band", type=float, default=None)
    p.set_defaults(func=_cmd_project_points)

    p = sub.add_parser("project-image",
                       help="warp an image probability grid onto a facade")
    p.add_argument("--image", required=True)
    p.add_argument("--correspondences", required=True)
    p.add_argument("--solid", required=True)
    p.add_argument("--face", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cell", type=float, default=0.1)
    p.set_defaults(func=_cmd_project_image)

    p = sub.add_parser("fuse", help="fuse evidence rasters into a posterior")
    p.add_argument("--conflict")
    p.add_argument("--pc", help="point cloud probability raster")
    p.add_argument("--tex", help="texture probability raster")
    p.add_argument("--cpt", help="conditional probability table file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("extract",
                       help="extract opening instances from a posterior")
    p.add_argument("--posterior", required=True)
    p.add_argument("--pc")
    p.add_argument("--tex")
    p.add_argument("--face", default="")
    p.add_argument("--out", required=True)
    p.add_argument("--p-high", type=float, default=0.7)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--pe-lo", type=float, default=5.0)
    p.add_argument("--pe-up", type=float, default=95.0)
    p.add_argument("--min-pixels", type=int, default=4)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("reconstruct",
                       help="cut openings and emit the LoD3 model")
    p.add_argument("--solid", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--templates")
    p.add_argument("--depth", type=float, default=0.1)
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-gml", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--measured", help="laser-measured subset of the ground truth")
    p.add_argument("--iou-min", type=float, default=0.5)
    p.add_argument("--model", help="predicted model file for surface metrics")
    p.add_argument("--gt-model", help="ground-truth model file")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="metrics key-value file")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--vs", type=float, help="override voxel_size")
    p.add_argument("--p-high", type=float, help="override p_high")
    p.add_argument("--pe-up", type=float, help="override pe_up")
    p.add_argument("--pe-lo", type=float, help="override pe_lo")
    p.add_argument("--cpt", help="override cpt path")
    p.add_argument("--depth", type=float, help="override cut depth")
    p.add_argument("--iou-min", type=float, help="override matching threshold")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("synth", help="generate a synthetic test scene")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=float, default=10.0)
    p.add_argument("--height", type=float, default=4.0)
    p.add_argument("--depth", type=float, default=5.0)
    p.add_argument("--pitch", type=float, default=0.05)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-cell", type=float, default=0.05)
    p.add_argument("--opening", action="append",
                   help="'u0 v0 u1 v1 label [covered]'; repeatable")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IoError, ParseError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Lod3Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
