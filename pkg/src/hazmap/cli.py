"""Command-line pipeline: one subcommand per toolkit stage.

Every command validates inputs, writes outputs atomically, and exits nonzero
with a one-line JSON error on stderr when a stage fails (0 ok, 2 bad input,
3 numerical/domain error, 4 I/O). ``--threads 1`` is bitwise deterministic;
per-cell and per-pixel kernels give identical bits at any thread count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .camera import CameraFrame, project_labels, save_labels
from .config import EvaluateConfig, PipelineConfig
from .dem import load_dem, rasterize_dem, save_dem
from .errors import HazmapError, IoError, StructuralError
from .gravity import GravityParams, PolyhedronGravity, build_local_frame
from .hazard import SafetyConfig, evaluate_dem, load_hazard, roughness_only_map, save_hazard
from .io_utils import atomic_write_bytes, load_json, load_npy, save_json, save_npy
from .mesh import TriangleMesh, closest_surface_point, load_obj, save_obj
from .metrics import MetricsReport, accumulate, bin_report, binned_csv, compute_metrics
from .raycast import TriangleRaycaster
from .synth import generate_scene, make_orbit_cameras, render_image
from .camera import ImageMeta
from .uncertainty import (
    UncertaintyThreshold,
    apply_threshold,
    compute_threshold,
    load_stack,
    predictive_entropy,
)


def _set_threads(n: int) -> None:
    import numba

    numba.set_num_threads(max(1, n))


def _load_mesh(path: str) -> TriangleMesh:
    p = Path(path)
    if not p.exists():
        raise IoError(f"mesh file not found: {p}")
    return load_obj(p)


def cmd_gravity(args) -> None:
    mesh = _load_mesh(args.mesh)
    params = GravityParams(density=args.density)
    points = load_npy(args.points, ndim=2).astype(np.float64)
    if points.shape[1] != 3:
        raise StructuralError("points file must be an (N, 3) array")
    model = PolyhedronGravity(mesh)
    acc, _ = model.acceleration(params, points)
    save_npy(args.out, acc)


def cmd_dem(args) -> None:
    mesh = _load_mesh(args.mesh)
    params = GravityParams(density=args.density)
    surface_point = np.asarray([float(v) for v in args.surface_point.split(",")])
    if surface_point.size != 3:
        raise StructuralError("surface point must be x,y,z")
    frame = build_local_frame(mesh, params, surface_point)
    dem = rasterize_dem(mesh, frame, args.cell_size, args.width, args.height)
    save_dem(args.out, dem)


def cmd_hazard(args) -> None:
    dem = load_dem(args.dem)
    config = SafetyConfig(
        lander_diameter=args.lander_diameter,
        slope_threshold=args.slope_threshold,
        roughness_threshold=args.roughness_threshold,
        orientation_samples=args.orientation_samples,
    )
    hazard = evaluate_dem(dem, config)
    if args.roughness_only:
        hazard = roughness_only_map(hazard)
    save_hazard(args.out, hazard)


def cmd_label(args) -> None:
    mesh = _load_mesh(args.mesh)
    dem = load_dem(args.dem)
    hazard = load_hazard(args.hazard)
    camera = CameraFrame.from_dict(load_json(args.camera))
    label_map = project_labels(hazard, dem, camera, mesh)
    save_labels(args.out, label_map, camera)


def _write_png(path: Path, image: np.ndarray) -> None:
    from PIL import Image

    arr = np.clip(image * 255.0, 0.0, 255.0).astype(np.uint8)
    import io as _io

    buf = _io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def _synth_scene(config: PipelineConfig, out: Path, png: bool):
    """Generate the mesh, cameras, and rendered images; returns the pieces."""
    mesh = generate_scene(config.scene)
    save_obj(out / "scene.obj", mesh)
    save_json(out / "scene.json", config.scene.to_dict())

    site_probe = np.asarray(config.site_direction, dtype=np.float64)
    site_probe = site_probe / np.linalg.norm(site_probe) * (2.0 * mesh.bounding_radius())
    site, _ = closest_surface_point(mesh, site_probe)

    up = site / np.linalg.norm(site)
    cams = make_orbit_cameras(
        site=site,
        up=up,
        count=config.cameras.count,
        distance=config.cameras.distance,
        cone_deg=config.cameras.cone_deg,
        fx=config.cameras.fx,
        width=config.cameras.width,
        height=config.cameras.height,
        sun_direction=np.asarray(config.scene.sun_direction, dtype=np.float64),
        seed=config.scene.seed,
    )
    save_json(out / "cameras.json", [c.to_dict() for c in cams])

    caster = TriangleRaycaster(mesh)
    images = []
    for k, cam in enumerate(cams):
        img, _ = render_image(mesh, cam, config.scene.sun_direction, caster=caster)
        name = f"img{k:03d}"
        save_npy(out / f"{name}_image.npy", img.astype(np.float32))
        if png:
            _write_png(out / f"{name}_image.png", img)
        images.append((name, cam))
    return mesh, site, cams, images, caster


def cmd_synth(args) -> None:
    config = PipelineConfig.from_json(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _synth_scene(config, out, args.png)


def cmd_entropy(args) -> None:
    stack = load_stack(args.stack)
    valid = None
    if args.truth_labels:
        truth = load_npy(args.truth_labels, dtype=np.uint8, ndim=2)
        valid = truth != 255
    umap = predictive_entropy(stack, valid=valid)
    out = Path(args.out)
    save_npy(out.parent / f"{out.name}_entropy.npy", umap.entropy.astype(np.float32))
    if args.threshold is not None:
        thr = UncertaintyThreshold(value=args.threshold, provenance="cli flag")
    elif args.threshold_json:
        meta = load_json(args.threshold_json)
        thr = UncertaintyThreshold(
            value=float(meta["value"]), provenance=str(meta.get("provenance", ""))
        )
    else:
        thr = None
    if thr is not None:
        screened = apply_threshold(umap, thr)
        labels = screened.labels
        info = {
            "image_id": stack.image_id,
            "screening_rate": screened.screening_rate,
            "mean_entropy": screened.mean_entropy,
            "threshold": screened.threshold,
        }
    else:
        labels = np.where(umap.valid, umap.argmax_labels, np.uint8(255)).astype(np.uint8)
        n_valid = int(umap.valid.sum())
        info = {
            "image_id": stack.image_id,
            "screening_rate": 0.0,
            "mean_entropy": float(umap.entropy[umap.valid].mean()) if n_valid else None,
            "threshold": None,
        }
    save_npy(out.parent / f"{out.name}_pred.npy", labels)
    save_json(out.parent / f"{out.name}_pred.json", info)


def _stack_prefixes(stack_dir: Path) -> list[Path]:
    return sorted(
        p.parent / p.name[: -len("_stack.npy")]
        for p in stack_dir.glob("*_stack.npy")
    )


def cmd_threshold(args) -> None:
    stack_dir = Path(args.stack_dir)
    prefixes = _stack_prefixes(stack_dir)
    if not prefixes:
        raise IoError(f"no *_stack.npy files under {stack_dir}")
    maps = [predictive_entropy(load_stack(p)) for p in prefixes]
    thr = compute_threshold(maps, per_image=args.per_image)
    save_json(args.out, {"value": thr.value, "provenance": thr.provenance})


def cmd_evaluate(args) -> None:
    pred_dir = Path(args.pred_dir)
    truth_dir = Path(args.truth_dir)
    rows = []
    pred_files = sorted(pred_dir.glob("*_pred.npy"))
    if not pred_files:
        raise IoError(f"no *_pred.npy files under {pred_dir}")
    for pred_path in pred_files:
        name = pred_path.name[: -len("_pred.npy")]
        truth_prefix = truth_dir / name
        labels_path = truth_dir / f"{name}_labels.npy"
        if not labels_path.exists():
            raise IoError(f"no truth labels for {name} under {truth_dir}")
        truth_labels = load_npy(labels_path, dtype=np.uint8, ndim=2)
        shadow_path = truth_dir / f"{name}_shadow.npy"
        truth_shadow = (
            load_npy(shadow_path, dtype=np.uint8, ndim=2) if shadow_path.exists() else None
        )
        pred = load_npy(pred_path, dtype=np.uint8, ndim=2)
        counts = accumulate(
            pred,
            truth_labels,
            truth_shadow,
            with_uncertainty=args.uncertainty,
            ignore_shadows=args.ignore_shadows,
        )
        meta = None
        meta_path = truth_dir / f"{name}_meta.json"
        if meta_path.exists():
            m = load_json(meta_path).get("image_meta")
            meta = ImageMeta.from_dict(m) if m else None
        mean_entropy = None
        info_path = pred_dir / f"{name}_pred.json"
        if info_path.exists():
            mean_entropy = load_json(info_path).get("mean_entropy")
        rows.append(
            compute_metrics(
                counts,
                image_id=name,
                with_uncertainty=args.uncertainty,
                ignore_shadows=args.ignore_shadows,
                meta=meta,
                mean_entropy=mean_entropy,
            )
        )
    report = MetricsReport.from_rows(rows)
    report.save(args.out)
    if args.bin_axis:
        if not args.bin_edges:
            raise StructuralError("--bin-axis requires --bin-edges")
        edges = [float(v) for v in args.bin_edges.split(",")]
        table = bin_report(rows, args.bin_axis, edges)
        out = Path(args.out)
        atomic_write_bytes(
            out.parent / f"{out.name}_binned.csv", binned_csv(table).encode("utf-8")
        )


_MANIFEST_SUFFIXES = {".npy", ".json", ".obj", ".csv"}


def _write_manifest(out: Path) -> None:
    entries = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.suffix in _MANIFEST_SUFFIXES and p.name != "manifest.json":
            entries[str(p.relative_to(out))] = hashlib.sha256(p.read_bytes()).hexdigest()
    save_json(out / "manifest.json", {"artifacts": entries})


def cmd_e2e(args) -> None:
    config = PipelineConfig.from_json(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    mesh, site, cams, images, caster = _synth_scene(config, out, args.png)

    params = GravityParams(density=config.scene.density)
    model = PolyhedronGravity(mesh)
    frame = build_local_frame(mesh, params, site, gravity_model=model)
    dem = rasterize_dem(mesh, frame, config.dem.cell_size, config.dem.width, config.dem.height)
    save_dem(out / "dem", dem)

    hazard = evaluate_dem(dem, config.safety)
    save_hazard(out / "hazard", hazard)

    for name, cam in images:
        label_map = project_labels(hazard, dem, cam, mesh, caster=caster)
        save_labels(out / name, label_map, cam)

    if config.predictions_dir:
        ev = config.evaluate or EvaluateConfig()
        pred_src = Path(config.predictions_dir)
        prefixes = _stack_prefixes(pred_src)
        if not prefixes:
            raise IoError(f"no prediction stacks under {pred_src}")
        maps = {p.name: predictive_entropy(load_stack(p)) for p in prefixes}
        if ev.threshold is not None:
            thr = UncertaintyThreshold(value=ev.threshold, provenance="config")
        else:
            thr = compute_threshold(maps.values())
        pred_out = out / "predictions"
        pred_out.mkdir(exist_ok=True)
        rows = []
        for name, umap in sorted(maps.items()):
            truth_labels = load_npy(out / f"{name}_labels.npy", dtype=np.uint8, ndim=2)
            truth_shadow = load_npy(out / f"{name}_shadow.npy", dtype=np.uint8, ndim=2)
            if ev.with_uncertainty:
                screened = apply_threshold(umap, thr)
                pred = screened.labels
                mean_entropy = screened.mean_entropy
            else:
                pred = np.where(umap.valid, umap.argmax_labels, np.uint8(255)).astype(np.uint8)
                mean_entropy = float(umap.entropy[umap.valid].mean())
            save_npy(pred_out / f"{name}_pred.npy", pred)
            meta_d = load_json(out / f"{name}_meta.json").get("image_meta")
            counts = accumulate(
                pred,
                truth_labels,
                truth_shadow,
                with_uncertainty=ev.with_uncertainty,
                ignore_shadows=ev.ignore_shadows,
            )
            rows.append(
                compute_metrics(
                    counts,
                    image_id=name,
                    with_uncertainty=ev.with_uncertainty,
                    ignore_shadows=ev.ignore_shadows,
                    meta=ImageMeta.from_dict(meta_d) if meta_d else None,
                    mean_entropy=mean_entropy,
                )
            )
        report = MetricsReport.from_rows(rows)
        report.save(out / "metrics")
        if ev.bin_axis:
            table = bin_report(rows, ev.bin_axis, list(ev.bin_edges))
            atomic_write_bytes(out / "metrics_binned.csv", binned_csv(table).encode("utf-8"))

    _write_manifest(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hazmap",
        description="Small-body landing-safety labeling and evaluation pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="worker threads for the numeric kernels (1 = fully sequential)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gravity", help="evaluate polyhedron gravity at points")
    p.add_argument("--mesh", required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--points", required=True, help="NPY (N,3) body-fixed points")
    p.add_argument("--out", required=True, help="NPY (N,3) accelerations")
    p.set_defaults(func=cmd_gravity)

    p = sub.add_parser("dem", help="rasterize a gravity-aligned DEM")
    p.add_argument("--mesh", required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--surface-point", required=True, help="x,y,z near the surface")
    p.add_argument("--cell-size", type=float, default=0.05)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_dem)

    p = sub.add_parser("hazard", help="worst-case slope/roughness safety map")
    p.add_argument("--dem", required=True, help="DEM prefix")
    p.add_argument("--lander-diameter", type=float, default=0.35)
    p.add_argument("--slope-threshold", type=float, default=30.0)
    p.add_argument("--roughness-threshold", type=float, default=0.035)
    p.add_argument("--orientation-samples", type=int, default=30)
    p.add_argument("--roughness-only", action="store_true")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_hazard)

    p = sub.add_parser("label", help="project hazard verdicts into an image")
    p.add_argument("--hazard", required=True, help="hazard prefix")
    p.add_argument("--dem", required=True, help="DEM prefix")
    p.add_argument("--camera", required=True, help="camera JSON")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("synth", help="generate a synthetic scene and images")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--png", action="store_true", help="also write PNG previews")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("entropy", help="predictive entropy and screened labels")
    p.add_argument("--stack", required=True, help="prediction stack prefix")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--threshold-json", default=None)
    p.add_argument("--truth-labels", default=None, help="optional truth labels NPY for validity")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("threshold", help="mean training entropy threshold")
    p.add_argument("--stack-dir", required=True)
    p.add_argument("--per-image", action="store_true", help="average per-image means")
    p.add_argument("--out", required=True, help="output JSON")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("evaluate", help="confusion metrics report")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--uncertainty", action="store_true")
    p.add_argument("--ignore-shadows", action="store_true")
    p.add_argument("--bin-axis", choices=["gsd", "viewing_angle", "visibility_ratio"])
    p.add_argument("--bin-edges", help="comma-separated bin edges")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("e2e", help="full synthetic pipeline run")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=cmd_e2e)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    try:
        args.func(args)
    except HazmapError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return exc.exit_code
    except FileNotFoundError as exc:
        print(json.dumps({"error": "IoError", "message": str(exc)}), file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
