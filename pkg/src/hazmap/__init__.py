"""Landing-safety ground truth generation and uncertainty-aware evaluation
for small-body terrain."""

__version__ = "0.1.0"

from .camera import CameraFrame, ImageMeta, PixelLabelMap, project_labels
from .dem import Dem, bilinear_sample, rasterize_dem
from .gravity import (
    GravityParams,
    LocalFrame,
    PolyhedronGravity,
    build_local_frame,
    polyhedron_gravity,
)
from .hazard import HazardMap, SafetyConfig, evaluate_cell, evaluate_dem, roughness_only_map
from .mesh import TriangleMesh, load_obj, mesh_volume, save_obj
from .metrics import ConfusionCounts, MetricsReport, accumulate, bin_report, compute_metrics
from .synth import SceneSpec, generate_scene, render_image
from .uncertainty import (
    PredictionStack,
    UncertaintyMap,
    UncertaintyThreshold,
    apply_threshold,
    compute_threshold,
    predictive_entropy,
)

__all__ = [
    "CameraFrame",
    "ConfusionCounts",
    "Dem",
    "GravityParams",
    "HazardMap",
    "ImageMeta",
    "LocalFrame",
    "MetricsReport",
    "PixelLabelMap",
    "PolyhedronGravity",
    "PredictionStack",
    "SafetyConfig",
    "SceneSpec",
    "TriangleMesh",
    "UncertaintyMap",
    "UncertaintyThreshold",
    "accumulate",
    "apply_threshold",
    "bilinear_sample",
    "bin_report",
    "build_local_frame",
    "compute_metrics",
    "compute_threshold",
    "evaluate_cell",
    "evaluate_dem",
    "generate_scene",
    "load_obj",
    "mesh_volume",
    "polyhedron_gravity",
    "predictive_entropy",
    "project_labels",
    "rasterize_dem",
    "render_image",
    "roughness_only_map",
    "save_obj",
]
