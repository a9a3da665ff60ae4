"""Pipeline configuration: JSON load/dump with the baseline sensor embedded."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .augment import AugmentSpec, BUILTIN_TEXTURES, builtin_texture, load_texture
from .elastomer import DeformParams
from .illumination import BASELINE_LIGHTS, IlluminationConfig, LightSource
from .imagecore import read_rgb
from .scenegen import SceneSpec, scene_from_dict, scene_to_dict

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "PipelineConfig",
    "default_config",
    "load_config",
    "dump_config",
    "config_from_dict",
    "config_to_dict",
    "illumination_from_dict",
    "illumination_to_dict",
    "augment_from_dict",
    "augment_to_dict",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable configuration document."""


@dataclass(frozen=True)
class PipelineConfig:
    deform: DeformParams = DeformParams()
    illumination: IlluminationConfig = IlluminationConfig()
    scene: SceneSpec = SceneSpec()
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    compare: dict = field(default_factory=lambda: {"alignment": "none", "annotations": None})
    schema_version: int = SCHEMA_VERSION


def default_config() -> PipelineConfig:
    """Baseline sensor: four coloured LEDs, k_a 0.8, 21x21 kernel, sigma 7, T = 6, d_max 3 cm."""
    return PipelineConfig()


def _take(data, allowed, where, strict):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        msg = f"unknown keys in {where}: {', '.join(unknown)}"
        if strict:
            raise ConfigError(msg)
        warnings.warn(msg, stacklevel=3)
    return {k: v for k, v in data.items() if k in allowed}


def illumination_from_dict(data, base_dir=None, strict=True) -> IlluminationConfig:
    data = _take(
        dict(data), ("lights", "ambient", "k_a", "alpha", "pixel_to_meter"), "illumination", strict
    )
    kw = {}
    if "lights" in data:
        lights = []
        for i, entry in enumerate(data["lights"]):
            entry = _take(dict(entry), ("name", "direction", "color", "k_d", "k_s"), f"lights[{i}]", strict)
            lights.append(LightSource(**entry))
        kw["lights"] = tuple(lights)
    amb = data.get("ambient")
    if isinstance(amb, dict):
        amb = _take(amb, ("image",), "ambient", strict)
        path = Path(amb["image"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        kw["ambient"] = read_rgb(path)
        kw["ambient_source"] = str(amb["image"])
    elif amb is not None:
        kw["ambient"] = tuple(amb)
    for key in ("k_a", "alpha", "pixel_to_meter"):
        if key in data:
            kw[key] = float(data[key])
    return IlluminationConfig(**kw)


def illumination_to_dict(cfg: IlluminationConfig) -> dict:
    if cfg.has_background_image:
        if cfg.ambient_source is None:
            raise ConfigError("cannot serialise a background image that has no source path")
        ambient = {"image": cfg.ambient_source}
    else:
        ambient = list(cfg.ambient)
    return {
        "lights": [
            {"name": l.name, "direction": list(l.direction), "color": list(l.color), "k_d": l.k_d, "k_s": l.k_s}
            for l in cfg.lights
        ],
        "ambient": ambient,
        "k_a": cfg.k_a,
        "alpha": cfg.alpha,
        "pixel_to_meter": cfg.pixel_to_meter,
    }


_AUG_KEYS = (
    "textures", "amplitude_range", "distort", "translate_px", "rotate_deg",
    "scale_range", "elastic_px", "elastic_sigma", "seed",
)


def augment_from_dict(data, base_dir=None, strict=True) -> AugmentSpec:
    """Texture entries are ``"builtin"`` (all twelve), ``"builtin:<name>"`` or a PNG path."""
    data = _take(dict(data), _AUG_KEYS, "augment", strict)
    kw = {k: v for k, v in data.items() if k != "textures"}
    for key in ("amplitude_range", "scale_range"):
        if key in kw:
            kw[key] = tuple(kw[key])
    entries = data.get("textures", ["builtin"])
    if isinstance(entries, str):
        entries = [entries]
    textures = []
    for entry in entries:
        if entry == "builtin":
            textures.extend(builtin_texture(n) for n in BUILTIN_TEXTURES)
        elif entry.startswith("builtin:"):
            textures.append(builtin_texture(entry.split(":", 1)[1]))
        else:
            path = Path(entry)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            textures.append(load_texture(path))
    return AugmentSpec(textures=tuple(textures), **kw)


def augment_to_dict(spec: AugmentSpec) -> dict:
    names = [t.name for t in spec.textures]
    if names == list(BUILTIN_TEXTURES):
        textures = ["builtin"]
    else:
        textures = [f"builtin:{n}" if n in BUILTIN_TEXTURES else n for n in names]
    return {
        "textures": textures,
        "amplitude_range": list(spec.amplitude_range),
        "distort": spec.distort,
        "translate_px": spec.translate_px,
        "rotate_deg": spec.rotate_deg,
        "scale_range": list(spec.scale_range),
        "elastic_px": spec.elastic_px,
        "elastic_sigma": spec.elastic_sigma,
        "seed": spec.seed,
    }


def config_from_dict(data, base_dir=None, strict=True) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    data = _take(data, ("schema_version", "deform", "illumination", "scene", "augment", "compare"), "config", strict)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {version} (expected {SCHEMA_VERSION})")
    kw = {}
    try:
        if "deform" in data:
            deform = _take(dict(data["deform"]), DeformParams.__dataclass_fields__, "deform", strict)
            kw["deform"] = DeformParams(**deform)
        if "illumination" in data:
            kw["illumination"] = illumination_from_dict(data["illumination"], base_dir, strict)
        if "scene" in data:
            kw["scene"] = scene_from_dict(data["scene"])
        if "augment" in data:
            kw["augment"] = augment_from_dict(data["augment"], base_dir, strict)
        if "compare" in data:
            cmp = _take(dict(data["compare"]), ("alignment", "annotations"), "compare", strict)
            kw["compare"] = {"alignment": "none", "annotations": None, **cmp}
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return PipelineConfig(**kw)


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "schema_version": cfg.schema_version,
        "deform": cfg.deform.to_dict(),
        "illumination": illumination_to_dict(cfg.illumination),
        "scene": scene_to_dict(cfg.scene),
        "augment": augment_to_dict(cfg.augment),
        "compare": dict(cfg.compare),
    }


def load_config(path, strict=True) -> PipelineConfig:
    """Load a JSON config; missing sections fall back to the baseline.

    With ``strict=False`` unknown keys only warn.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, base_dir=path.parent, strict=strict)


def dump_config(cfg: PipelineConfig, path=None) -> str:
    text = json.dumps(config_to_dict(cfg), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
