"""Golden render fixtures: one scene per geometry with pinned configs."""
import os
from pathlib import Path

import numpy as np

from thurston import Camera, LightingConfig, MarchConfig, load_scene, render_frame

ROOT = Path(__file__).resolve().parent.parent
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

# name -> (scene file, fov, max_dist, max_steps)
GOLDEN_SCENES = {
    "e3": ("scenes/e3_torus.json", 95.0, 9.0, 64),
    "s3": ("scenes/s3_q8.json", 95.0, 9.0, 64),
    "h3": ("scenes/h3_balls.json", 95.0, 9.0, 64),
    "s2e": ("scenes/s2e_wraps.json", 95.0, 9.0, 64),
    "h2e": ("scenes/h2e_tiles.json", 95.0, 9.0, 64),
    "nil": ("scenes/nil_lattice.json", 95.0, 6.0, 64),
    "sl2": ("scenes/sl2_fiber_balls.json", 95.0, 8.0, 64),
    "sol": ("scenes/sol_lattice.json", 95.0, 6.0, 64),
}

SIZE = 64


def golden_configs(name):
    path, fov, dist, steps = GOLDEN_SCENES[name]
    scene = load_scene(str(ROOT / path))
    camera = Camera(scene.camera, fov=fov, width=SIZE, height=SIZE)
    march_cfg = MarchConfig(max_steps=steps, max_dist=dist)
    light_cfg = LightingConfig(
        intensity_mode="exact", fog="exp", fog_k=0.22,
        fog_color=np.array([0.02, 0.02, 0.04]), light_translates="none",
        max_geodesics=2)
    return scene, camera, light_cfg, march_cfg


def render_golden(name, threads=1):
    scene, camera, light_cfg, march_cfg = golden_configs(name)
    return render_frame(camera, scene, light_cfg, march_cfg, threads=threads)


def golden_path(name) -> Path:
    return GOLDEN_DIR / f"{name}.ppm"


def regen_requested() -> bool:
    return os.environ.get("THURSTON_REGEN_GOLDEN", "") == "1"
