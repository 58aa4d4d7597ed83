"""Ray-marching renderer and geodesic toolkit for the eight Thurston
geometries: exact flows, signed distance scenes, quotient manifolds,
physically based lighting, and an integrator accuracy benchmark."""

from .kernel import (
    DegenerateConfigurationError,
    FlowResult,
    GeometryError,
    GeometryId,
    GeometryPoint,
    InvalidPointError,
    Isometry,
    Pose,
    PreconditionError,
    SolverFailureError,
    TangentVector,
    TeleportDivergenceError,
    apply_move,
    distance,
    flow,
    flow_origin,
    identity_pose,
    metric_dot,
    origin,
    rotate_pose,
)
from .lighting import LightingConfig, LightingPair
from .quotient import QuotientStructure, teleport
from .render import Camera, Image, MarchConfig, march, render_frame
from .scene import Scene, SceneFormatError, load_scene

__all__ = [
    "Camera", "DegenerateConfigurationError", "FlowResult", "GeometryError",
    "GeometryId", "GeometryPoint", "Image", "InvalidPointError", "Isometry",
    "LightingConfig", "LightingPair", "MarchConfig", "Pose",
    "PreconditionError", "QuotientStructure", "Scene", "SceneFormatError",
    "SolverFailureError", "TangentVector", "TeleportDivergenceError",
    "apply_move", "distance", "flow", "flow_origin", "identity_pose",
    "load_scene", "march", "metric_dot", "origin", "render_frame",
    "rotate_pose", "teleport",
]

__version__ = "0.1.0"
