"""Tactile image simulation for GelSight-style optical sensors.

Depth map in, RGB tactile image out: the depth is thresholded into an
elevation map, smoothed into an elastomer heightmap, converted to surface
normals and Phong-shaded under the sensor's coloured LEDs.
"""
from .augment import AugmentSpec, TextureMap, augment_batch, builtin_textures, perturb_depth
from .config import PipelineConfig, default_config, dump_config, load_config
from .elastomer import DeformParams, dog_heightmap, elastomer_heightmap, smooth_heightmap, threshold_depth
from .estimators import DepthTextureAugmenter, ElastomerDeformer, TactileRenderer
from .evaluate import AlignmentTransform, compare, constrained_affine, dataset_report, ssim, warp_and_crop
from .illumination import (
    BASELINE_LIGHTS,
    IlluminationConfig,
    LightSource,
    calibrate_pixel_to_meter,
    phong_render,
    render_tactile,
    surface_normals,
)
from .imagecore import ImageFormatError, read_depth, read_rgb, write_depth, write_rgb
from .scenegen import Camera, Pose, Primitive, SceneSpec, grid_poses, render_depth

__version__ = "0.1.0"
