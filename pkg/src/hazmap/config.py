"""Schema-versioned pipeline configuration for the end-to-end command."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import StructuralError
from .hazard import SafetyConfig
from .io_utils import load_json
from .synth import SceneSpec

SCHEMA_VERSION = 1


def _require_keys(d: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise StructuralError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise StructuralError(f"{where}: missing keys {sorted(missing)}")


@dataclass(frozen=True)
class DemConfig:
    cell_size: float = 0.05
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if self.cell_size <= 0 or self.width < 1 or self.height < 1:
            raise StructuralError("bad DEM grid configuration")


@dataclass(frozen=True)
class CameraSetConfig:
    count: int = 2
    distance: float = 4.0
    cone_deg: float = 20.0
    fx: float = 600.0
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if self.count < 1 or self.distance <= 0 or self.fx <= 0:
            raise StructuralError("bad camera set configuration")


@dataclass(frozen=True)
class EvaluateConfig:
    with_uncertainty: bool = True
    ignore_shadows: bool = False
    threshold: float | None = None  # None: pixel-weighted mean of the stacks
    bin_axis: str | None = None
    bin_edges: tuple[float, ...] = ()


@dataclass
class PipelineConfig:
    scene: SceneSpec
    site_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    dem: DemConfig = field(default_factory=DemConfig)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    cameras: CameraSetConfig = field(default_factory=CameraSetConfig)
    predictions_dir: str | None = None
    evaluate: EvaluateConfig | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        _require_keys(
            raw,
            allowed={
                "schema_version", "scene", "site_direction", "dem", "safety",
                "cameras", "predictions_dir", "evaluate",
            },
            required={"schema_version", "scene"},
            where="pipeline config",
        )
        if int(raw["schema_version"]) != SCHEMA_VERSION:
            raise StructuralError(
                f"unsupported schema_version {raw['schema_version']}; expected {SCHEMA_VERSION}"
            )
        scene_d = dict(raw["scene"])
        _require_keys(
            scene_d,
            allowed=set(SceneSpec(seed=0).to_dict()),
            required={"seed"},
            where="scene",
        )
        scene = SceneSpec.from_dict(scene_d)

        dem_d = dict(raw.get("dem", {}))
        _require_keys(dem_d, {"cell_size", "width", "height"}, set(), "dem")
        dem_cfg = DemConfig(**dem_d)

        safety_d = dict(raw.get("safety", {}))
        _require_keys(
            safety_d,
            {
                "lander_diameter", "slope_threshold", "roughness_threshold",
                "orientation_samples", "pad_count",
            },
            set(),
            "safety",
        )
        safety = SafetyConfig(**safety_d)

        cam_d = dict(raw.get("cameras", {}))
        _require_keys(
            cam_d, {"count", "distance", "cone_deg", "fx", "width", "height"}, set(), "cameras"
        )
        cameras = CameraSetConfig(**cam_d)

        ev = None
        if raw.get("evaluate") is not None:
            ev_d = dict(raw["evaluate"])
            _require_keys(
                ev_d,
                {"with_uncertainty", "ignore_shadows", "threshold", "bin_axis", "bin_edges"},
                set(),
                "evaluate",
            )
            ev_d["bin_edges"] = tuple(ev_d.get("bin_edges", ()))
            ev = EvaluateConfig(**ev_d)

        site = tuple(float(v) for v in raw.get("site_direction", (1.0, 0.0, 0.0)))
        if len(site) != 3 or all(v == 0.0 for v in site):
            raise StructuralError("site_direction must be a nonzero 3-vector")

        return cls(
            scene=scene,
            site_direction=site,
            dem=dem_cfg,
            safety=safety,
            cameras=cameras,
            predictions_dir=raw.get("predictions_dir"),
            evaluate=ev,
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(load_json(path))
