"""Scene model: CSG trees over geometry-specific signed distance primitives,
materials, lights, quotient lattices, and the scene-file loader.

Scene files are strict JSON; unknown keys are rejected with the offending
path so authoring errors surface immediately.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import isotropic, nil, product, sl2, sol
from .kernel import (
    GeometryId,
    GeometryPoint,
    Isometry,
    Pose,
    TangentVector,
    gram_schmidt,
    identity_isometry,
    origin,
    renormalize,
)
from .quotient import Halfspace, QuotientStructure


class SceneFormatError(ValueError):
    """Scene file rejected; message carries the JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.json_path = path


@dataclass(eq=False)
class Material:
    id: str
    color: np.ndarray
    k_amb: float = 0.3
    k_diff: float = 0.5
    k_spec: float = 0.2
    shininess: float = 16.0
    reflectivity: float = 0.0
    texture: str | None = None

    def validate(self, path: str = "material"):
        s = self.k_amb + self.k_diff + self.k_spec
        if abs(s - 1.0) > 1e-6:
            raise SceneFormatError(path, f"k_amb + k_diff + k_spec must be 1, got {s}")
        if not (0.0 <= self.reflectivity <= 1.0):
            raise SceneFormatError(path, "reflectivity must lie in [0, 1]")


@dataclass(eq=False)
class Light:
    position: GeometryPoint
    color: np.ndarray
    intensity: float
    marker_radius: float = 0.0


@dataclass(eq=False)
class SceneNode:
    kind: str                   # primitive | union | intersection | complement
    children: list = field(default_factory=list)
    prim_kind: str | None = None
    params: dict = field(default_factory=dict)
    placement: Isometry | None = None
    placement_inv: Isometry | None = None
    material_id: str | None = None
    cast_shadow: bool = True


@dataclass(eq=False)
class Scene:
    geometry: GeometryId
    camera: Pose
    materials: dict
    lights: list
    root: SceneNode
    quotient: QuotientStructure | None = None
    sdf_mode: str = "neighbors"      # basic | neighbors
    creep: str = "binary"            # none | binary | march | trace

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("_compiled", None)     # closures are rebuilt per process
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


# --- primitive evaluation ------------------------------------------------------

def _prim_sdf(g: GeometryId, kind: str, params: dict, p: GeometryPoint) -> float:
    if g in (GeometryId.E3, GeometryId.S3, GeometryId.H3):
        if kind == "ball":
            return isotropic.sdf_ball(g, params["radius"], p)
        if kind == "cylinder":
            return isotropic.sdf_cylinder(g, params["radius"], p)
        if kind == "half_space":
            return isotropic.sdf_half_space(g, p)
    elif g in (GeometryId.S2E, GeometryId.H2E):
        if kind == "ball":
            return product.sdf_ball(g, params["radius"], p)
        if kind == "vertical_cylinder":
            return product.sdf_vertical_cylinder(g, params["radius"], p)
        if kind == "vertical_half_space":
            return product.sdf_vertical_half_space(g, p)
        if kind == "horizontal_half_space":
            return product.sdf_horizontal_half_space(g, p, params.get("level", 0.0))
    elif g is GeometryId.NIL:
        if kind == "ball":
            return nil.sdf_ball(params["radius"], params.get("eta", 0.5), p)
        if kind == "vertical_cylinder":
            return nil.sdf_vertical_cylinder(params["radius"], p)
        if kind == "vertical_half_space":
            return nil.sdf_vertical_half_space(p)
    elif g is GeometryId.SL2:
        if kind == "ball":
            return sl2.sdf_ball(params["radius"], params.get("eta", 0.5), p)
        if kind == "vertical_cylinder":
            return sl2.sdf_vertical_cylinder(params["radius"], p)
        if kind == "vertical_half_space":
            return sl2.sdf_vertical_half_space(p)
    elif g is GeometryId.SOL:
        if kind == "z_half_space":
            return sol.sdf_z_half_space(params.get("level", 0.0),
                                        params.get("sign", -1), p)
        if kind == "x_half_space":
            return sol.sdf_x_half_space(params.get("level", 0.0),
                                        params.get("sign", -1), p)
        if kind == "y_half_space":
            return sol.sdf_y_half_space(params.get("level", 0.0),
                                        params.get("sign", -1), p)
        if kind == "cylinder_x":
            return sol.sdf_cylinder_x(params["radius"], p)
        if kind == "cylinder_y":
            return sol.sdf_cylinder_y(params["radius"], p)
        if kind == "pseudo_ball":
            return sol.sdf_pseudo_ball(params["level"], p)
        if kind == "pseudo_cylinder_diag":
            return sol.sdf_pseudo_cylinder_diag(params["radius"],
                                                params.get("sign", 1), p)
    raise ValueError(f"unknown primitive {kind!r} for geometry {g.value}")


PRIMITIVE_KINDS = {
    "e3": {"ball", "cylinder", "half_space"},
    "s3": {"ball", "cylinder", "half_space"},
    "h3": {"ball", "cylinder", "half_space"},
    "s2e": {"ball", "vertical_cylinder", "vertical_half_space",
            "horizontal_half_space"},
    "h2e": {"ball", "vertical_cylinder", "vertical_half_space",
            "horizontal_half_space"},
    "nil": {"ball", "vertical_cylinder", "vertical_half_space"},
    "sl2": {"ball", "vertical_cylinder", "vertical_half_space"},
    "sol": {"z_half_space", "x_half_space", "y_half_space", "cylinder_x",
            "cylinder_y", "pseudo_ball", "pseudo_cylinder_diag"},
}


def scene_sdf(scene: Scene, node: SceneNode, p: GeometryPoint,
              for_shadow: bool = False, translates=None):
    """Evaluate the CSG tree; returns (signed distance, attributed leaf).

    With a translate set, every primitive becomes the union of its images
    under the translates before the CSG combines.  Accumulating at the leaves
    (rather than taking a minimum over whole-scene evaluations) keeps
    complements of primitives, such as deleted-ball tiles, correct."""
    if node.kind == "primitive":
        if for_shadow and not node.cast_shadow:
            return math.inf, None
        points = [p]
        if translates is not None:
            points += [a.apply_point(p) for a in translates]
        best = math.inf
        for q in points:
            if node.placement_inv is not None:
                q = node.placement_inv.apply_point(q)
            best = min(best, _prim_sdf(scene.geometry, node.prim_kind,
                                       node.params, q))
        return best, node
    if node.kind == "complement":
        val, leaf = scene_sdf(scene, node.children[0], p, for_shadow, translates)
        return -val, leaf
    best = None
    best_leaf = None
    for child in node.children:
        val, leaf = scene_sdf(scene, child, p, for_shadow, translates)
        if best is None:
            best, best_leaf = val, leaf
        elif node.kind == "union" and val < best:
            best, best_leaf = val, leaf
        elif node.kind == "intersection" and val > best:
            best, best_leaf = val, leaf
    if best is None:
        return math.inf, None
    return best, best_leaf


def quotient_sdf(scene: Scene, p: GeometryPoint, mode: str | None = None,
                 for_shadow: bool = False):
    """Scene distance in the quotient: the plain in-cell value, or with the
    face-pairing translates folded into every primitive."""
    mode = mode or scene.sdf_mode
    if scene.quotient is None or mode == "basic":
        return scene_sdf(scene, scene.root, p, for_shadow)
    return scene_sdf(scene, scene.root, p, for_shadow,
                     scene.quotient.neighbor_set())


def _scalar_sdf(g: GeometryId, kind: str, params: dict):
    """Closure evaluating a standard-position primitive on raw coordinates."""
    if g in (GeometryId.E3, GeometryId.S3, GeometryId.H3):
        if kind == "ball":
            r = params["radius"]
            if g is GeometryId.E3:
                return lambda x, y, z, w, f=0.0: math.sqrt(x*x + y*y + z*z) - r
            if g is GeometryId.S3:
                return lambda x, y, z, w, f=0.0: \
                    math.acos(min(1.0, max(-1.0, w))) - r
            return lambda x, y, z, w, f=0.0: math.acosh(max(1.0, w)) - r
        if kind == "cylinder":
            r = params["radius"]
            if g is GeometryId.E3:
                return lambda x, y, z, w, f=0.0: math.hypot(x, y) - r
            if g is GeometryId.S3:
                return lambda x, y, z, w, f=0.0: \
                    math.acos(min(1.0, math.hypot(w, z))) - r
            return lambda x, y, z, w, f=0.0: \
                math.acosh(max(1.0, math.sqrt(max(w*w - z*z, 1.0)))) - r
        if kind == "half_space":
            if g is GeometryId.E3:
                return lambda x, y, z, w, f=0.0: z
            if g is GeometryId.S3:
                return lambda x, y, z, w, f=0.0: math.asin(min(1.0, max(-1.0, z)))
            return lambda x, y, z, w, f=0.0: math.asinh(z)
    if g in (GeometryId.S2E, GeometryId.H2E):
        sphere = g is GeometryId.S2E
        if kind == "ball":
            r = params["radius"]
            if sphere:
                return lambda x, y, z, w, f=0.0: math.hypot(
                    math.acos(min(1.0, max(-1.0, z))), w) - r
            return lambda x, y, z, w, f=0.0: math.hypot(
                math.acosh(max(1.0, z)), w) - r
        if kind == "vertical_cylinder":
            r = params["radius"]
            if sphere:
                return lambda x, y, z, w, f=0.0: \
                    math.acos(min(1.0, max(-1.0, z))) - r
            return lambda x, y, z, w, f=0.0: math.acosh(max(1.0, z)) - r
        if kind == "vertical_half_space":
            if sphere:
                return lambda x, y, z, w, f=0.0: math.asin(min(1.0, max(-1.0, y)))
            return lambda x, y, z, w, f=0.0: math.asinh(y)
        if kind == "horizontal_half_space":
            lvl = params.get("level", 0.0)
            return lambda x, y, z, w, f=0.0: w - lvl
    if g is GeometryId.NIL:
        if kind == "ball":
            r, eta = params["radius"], params.get("eta", 0.5)
            return lambda x, y, z, w, f=0.0: nil.sdf_ball_scalar(r, eta, x, y, z)
        if kind == "vertical_cylinder":
            r = params["radius"]
            return lambda x, y, z, w, f=0.0: math.hypot(x, y) - r
        if kind == "vertical_half_space":
            return lambda x, y, z, w, f=0.0: x
    if g is GeometryId.SL2:
        if kind == "ball":
            r, eta = params["radius"], params.get("eta", 0.5)
            def sl2_ball(x, y, z, w, f=0.0, r=r, eta=eta):
                return sl2.sdf_ball(r, eta, GeometryPoint(
                    g, np.array([x, y, z, w]), f))
            return sl2_ball
        if kind == "vertical_cylinder":
            r = params["radius"]
            return lambda x, y, z, w, f=0.0: \
                2.0 * math.asinh(math.sqrt(max(z*z + w*w, 0.0))) - r
        if kind == "vertical_half_space":
            def sl2_half(x, y, z, w, f=0.0):
                return sl2.sdf_vertical_half_space(GeometryPoint(
                    GeometryId.SL2, np.array([x, y, z, w]), f))
            return sl2_half
    if g is GeometryId.SOL:
        lvl = params.get("level", 0.0)
        sign = params.get("sign", -1)
        if kind == "z_half_space":
            return (lambda x, y, z, w, f=0.0: z - lvl) if sign < 0 else \
                (lambda x, y, z, w, f=0.0: lvl - z)
        if kind == "x_half_space":
            s = 1.0 if sign > 0 else -1.0
            return lambda x, y, z, w, f=0.0: s * math.asinh((lvl - x) * math.exp(-z))
        if kind == "y_half_space":
            s = 1.0 if sign > 0 else -1.0
            return lambda x, y, z, w, f=0.0: s * math.asinh((lvl - y) * math.exp(z))
        if kind == "cylinder_x":
            r = params["radius"]
            return lambda x, y, z, w, f=0.0: \
                math.acosh(math.cosh(z) + 0.5 * math.exp(z) * y * y) - r
        if kind == "cylinder_y":
            r = params["radius"]
            return lambda x, y, z, w, f=0.0: \
                math.acosh(math.cosh(z) + 0.5 * math.exp(-z) * x * x) - r
        if kind == "pseudo_ball":
            lv = params["level"]
            return lambda x, y, z, w, f=0.0: math.sqrt(
                math.exp(-2.0*z)*x*x + math.exp(2.0*z)*y*y + z*z) - lv
        if kind == "pseudo_cylinder_diag":
            r = params["radius"]
            sg = params.get("sign", 1)
            return lambda x, y, z, w, f=0.0: \
                math.hypot((x - sg * y) / math.sqrt(2.0), z) - r
    raise ValueError(f"unknown primitive {kind!r} for geometry {g.value}")


class CompiledSdf:
    """Flattened CSG evaluator with the translate and placement isometries
    fused into one matrix per (translate, leaf) row."""

    def __init__(self, scene: Scene, for_shadow: bool):
        g = scene.geometry
        self.geometry = g
        self.leaves = []
        self.tree = self._build_tree(scene.root, for_shadow)
        translates = [None]
        if scene.quotient is not None and scene.sdf_mode == "neighbors":
            translates += scene.quotient.neighbor_set()
        self.n_translates = len(translates)
        mats = []
        shifts = []
        self.fns = []
        self.needs_fiber = g is GeometryId.SL2
        for a in translates:
            for (node, fn) in self.leaves:
                comp = None
                if a is not None and node.placement_inv is not None:
                    comp = node.placement_inv.compose(a)
                elif a is not None:
                    comp = a
                elif node.placement_inv is not None:
                    comp = node.placement_inv
                if comp is None:
                    mats.append(np.eye(4))
                    shifts.append(0.0)
                else:
                    mats.append(comp.matrix)
                    shifts.append(comp.fiber_shift)
                self.fns.append(fn)
        self.mats = np.stack(mats) if mats else np.zeros((0, 4, 4))
        self.shifts = shifts
        self.product_like = g in (GeometryId.S2E, GeometryId.H2E)

    def _build_tree(self, node: SceneNode, for_shadow: bool):
        if node.kind == "primitive":
            if for_shadow and not node.cast_shadow:
                return ("inf",)
            idx = len(self.leaves)
            self.leaves.append((node, _scalar_sdf(self.geometry,
                                                  node.prim_kind, node.params)))
            return ("leaf", idx, node)
        if node.kind == "complement":
            return ("neg", self._build_tree(node.children[0], for_shadow))
        subs = [self._build_tree(c, for_shadow) for c in node.children]
        return ("union" if node.kind == "union" else "inter", subs)

    def value(self, p: GeometryPoint):
        coords = p.coords
        pts = (self.mats @ coords).tolist()
        fns = self.fns
        n_leaves = len(self.leaves)
        # fold the translates into each primitive, then combine once
        vals = [math.inf] * n_leaves
        for a in range(self.n_translates):
            off = a * n_leaves
            for i in range(n_leaves):
                row = pts[off + i]
                if self.product_like:
                    row = (row[0], row[1], row[2], row[3] + self.shifts[off + i])
                if self.needs_fiber:
                    f = _lifted_fiber(row, self.shifts[off + i], p.fiber)
                    v = fns[off + i](row[0], row[1], row[2], row[3], f)
                else:
                    v = fns[off + i](row[0], row[1], row[2], row[3])
                if v < vals[i]:
                    vals[i] = v
        return _tree_eval(self.tree, vals)


def _lifted_fiber(row, shift: float, fiber: float) -> float:
    mod4 = 2.0 * math.atan2(row[1], row[0])
    return shift + fiber + math.remainder(mod4 - shift - fiber, 2.0 * math.pi)


def _tree_eval(tree, vals):
    kind = tree[0]
    if kind == "leaf":
        return vals[tree[1]], tree[2]
    if kind == "inf":
        return math.inf, None
    if kind == "neg":
        v, leaf = _tree_eval(tree[1], vals)
        return -v, leaf
    best = None
    best_leaf = None
    for sub in tree[1]:
        v, leaf = _tree_eval(sub, vals)
        if best is None or (kind == "union" and v < best) or \
                (kind == "inter" and v > best):
            best, best_leaf = v, leaf
    return best, best_leaf


def effective_sdf(scene: Scene, p: GeometryPoint, for_shadow: bool = False):
    cache = getattr(scene, "_compiled", None)
    if cache is None:
        cache = {}
        scene._compiled = cache
    key = bool(for_shadow)
    compiled = cache.get(key)
    if compiled is None:
        compiled = CompiledSdf(scene, for_shadow)
        cache[key] = compiled
    return compiled.value(p)


# --- placements ------------------------------------------------------------------

def translation_to(g: GeometryId, q: GeometryPoint) -> Isometry:
    """An isometry taking the origin to q (a left translation where the model
    is a group, the obvious orbit isometry otherwise)."""
    if g in (GeometryId.NIL, GeometryId.SOL):
        mod = nil if g is GeometryId.NIL else sol
        return mod.left_isometry(q)
    if g is GeometryId.SL2:
        return sl2.left_isometry(q)
    o = origin(g)
    if g is GeometryId.E3:
        m = np.eye(4)
        m[:3, 3] = q.coords[:3]
        return Isometry(g, m)
    if g in (GeometryId.S3, GeometryId.H3):
        d = isotropic.distance(o, q)
        if d < 1e-14:
            return identity_isometry(g)
        if g is GeometryId.S3:
            v = (q.coords - math.cos(d) * o.coords) / math.sin(d)
        else:
            v = (q.coords - math.cosh(d) * o.coords) / math.sinh(d)
        return isotropic._orbit_isometry(g, o.coords, v, d)
    # products: factor rotation/boost plus fiber shift
    oy = o.coords[:3]
    qy = q.coords[:3]
    dy = (product.s2_distance if g is GeometryId.S2E else product.h2_distance)(oy, qy)
    m = np.eye(4)
    if dy > 1e-14:
        vy = (product.s2_direction if g is GeometryId.S2E
              else product.h2_direction)(oy, qy)
        m[:3, :3] = product._factor_rotation(g, oy, vy, dy)
    return Isometry(g, m, float(q.coords[3]))


# --- named lattices ----------------------------------------------------------------

def _cubic_wall_sdf(p: GeometryPoint) -> float:
    c = p.coords
    return min(0.5 - abs(c[0]), 0.5 - abs(c[1]), 0.5 - abs(c[2]))


def cubic_lattice() -> QuotientStructure:
    """Unit cubic torus in euclidean space."""
    g = GeometryId.E3

    def tr(x, y, z):
        m = np.eye(4)
        m[:3, 3] = [x, y, z]
        return Isometry(g, m)

    gens = [tr(1, 0, 0), tr(-1, 0, 0), tr(0, 1, 0), tr(0, -1, 0),
            tr(0, 0, 1), tr(0, 0, -1)]
    halfspaces = [
        Halfspace(np.array([1.0, 0.0, 0.0, -0.5]), 1),
        Halfspace(np.array([-1.0, 0.0, 0.0, -0.5]), 0),
        Halfspace(np.array([0.0, 1.0, 0.0, -0.5]), 3),
        Halfspace(np.array([0.0, -1.0, 0.0, -0.5]), 2),
        Halfspace(np.array([0.0, 0.0, 1.0, -0.5]), 5),
        Halfspace(np.array([0.0, 0.0, -1.0, -0.5]), 4),
    ]
    return QuotientStructure(g, gens, halfspaces,
                             phases=[[0, 1, 2, 3, 4, 5]], wall_sdf=_cubic_wall_sdf)


def _quaternion_matrices():
    # left multiplication by i, j, k on (x, y, z, w) quaternion coordinates
    mi = np.array([[0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
                  dtype=float)
    mj = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]],
                  dtype=float)
    mk = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]],
                  dtype=float)
    return mi, mj, mk


def q8_lattice() -> QuotientStructure:
    """Quotient of the three-sphere by the eight-element quaternion group."""
    g = GeometryId.S3
    mi, mj, mk = _quaternion_matrices()
    # the inverse of left multiplication by i is left multiplication by -i
    gens = [Isometry(g, mi), Isometry(g, -mi),
            Isometry(g, mj), Isometry(g, -mj),
            Isometry(g, mk), Isometry(g, -mk)]
    halfspaces = [
        Halfspace(np.array([1.0, 0.0, 0.0, -1.0]), 1),   # x > w  -> mult by -i
        Halfspace(np.array([-1.0, 0.0, 0.0, -1.0]), 0),
        Halfspace(np.array([0.0, 1.0, 0.0, -1.0]), 3),
        Halfspace(np.array([0.0, -1.0, 0.0, -1.0]), 2),
        Halfspace(np.array([0.0, 0.0, 1.0, -1.0]), 5),
        Halfspace(np.array([0.0, 0.0, -1.0, -1.0]), 4),
    ]
    return QuotientStructure(g, gens, halfspaces, phases=[[0, 1, 2, 3, 4, 5]])


NAMED_LATTICES = {
    "cubic": (GeometryId.E3, cubic_lattice),
    "q8": (GeometryId.S3, q8_lattice),
    "heisenberg": (GeometryId.NIL, nil.heisenberg_lattice),
    "genus2": (GeometryId.SL2, sl2.genus_two_lattice),
    "anosov": (GeometryId.SOL, sol.anosov_lattice),
}


# --- scene file loading --------------------------------------------------------------

def _expect_keys(obj: dict, path: str, required: set, optional: set = frozenset()):
    if not isinstance(obj, dict):
        raise SceneFormatError(path, "expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise SceneFormatError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in obj:
            raise SceneFormatError(path, f"missing required key {key!r}")


def _vector(obj, path: str, n: int) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != n or \
            not all(isinstance(v, (int, float)) for v in obj):
        raise SceneFormatError(path, f"expected a list of {n} numbers")
    return np.array(obj, dtype=float)


def _point(g: GeometryId, obj, path: str) -> GeometryPoint:
    if g is GeometryId.SL2:
        if isinstance(obj, list) and len(obj) == 3:
            # cylindrical [radial, angle, fiber]
            rho, theta, wf = (float(v) for v in obj)
            h = np.array([math.sinh(rho) * math.cos(theta),
                          math.sinh(rho) * math.sin(theta), math.cosh(rho)])
            return sl2.point_from_h2_fiber(h, wf)
        if isinstance(obj, list) and len(obj) == 5:
            coords = _vector(obj[:4], path, 4)
            p = renormalize(GeometryPoint(g, coords, float(obj[4])))
            # rebuild so the stored pair is consistent with the given fiber
            return sl2.point_from_h2_fiber(sl2.h2_point(p), p.fiber)
        coords = _vector(obj, path, 4)
        p = GeometryPoint(g, coords)
        p.fiber = sl2.fiber_mod(coords)
        return renormalize(p)
    coords = _vector(obj, path, 4)
    return renormalize(GeometryPoint(g, coords))


def _load_node(g: GeometryId, obj, path: str, materials: dict) -> SceneNode:
    if not isinstance(obj, dict):
        raise SceneFormatError(path, "expected an object")
    if "op" in obj:
        _expect_keys(obj, path, {"op", "children"})
        op = obj["op"]
        if op not in ("union", "intersection", "complement"):
            raise SceneFormatError(f"{path}.op", f"unknown op {op!r}")
        children = obj["children"]
        if not isinstance(children, list) or not children:
            raise SceneFormatError(f"{path}.children", "expected a non-empty list")
        if op == "complement" and len(children) != 1:
            raise SceneFormatError(f"{path}.children",
                                   "complement takes exactly one child")
        nodes = [_load_node(g, c, f"{path}.children[{i}]", materials)
                 for i, c in enumerate(children)]
        return SceneNode(op, children=nodes)
    _expect_keys(obj, path, {"primitive"},
                 {"radius", "level", "sign", "eta", "material", "at", "matrix",
                  "fiber_shift", "cast_shadow"})
    kind = obj["primitive"]
    if kind not in PRIMITIVE_KINDS[g.value]:
        raise SceneFormatError(f"{path}.primitive",
                               f"unknown primitive {kind!r} for {g.value}")
    params = {}
    for key in ("radius", "level", "sign", "eta"):
        if key in obj:
            if not isinstance(obj[key], (int, float)):
                raise SceneFormatError(f"{path}.{key}", "expected a number")
            params[key] = float(obj[key]) if key != "sign" else int(obj[key])
    placement = None
    if "at" in obj and "matrix" in obj:
        raise SceneFormatError(path, "give either 'at' or 'matrix', not both")
    if "at" in obj:
        at = obj["at"]
        if g is GeometryId.SL2 and isinstance(at, list) and len(at) == 3:
            # cylindrical [radial, angle, fiber] placement
            rho, theta, wf = (float(x) for x in at)
            h = np.array([math.sinh(rho) * math.cos(theta),
                          math.sinh(rho) * math.sin(theta), math.cosh(rho)])
            placement = translation_to(g, sl2.point_from_h2_fiber(h, wf))
        else:
            placement = translation_to(g, _point(g, at, f"{path}.at"))
    elif "matrix" in obj:
        m = _vector(obj["matrix"], f"{path}.matrix", 16).reshape(4, 4)
        placement = Isometry(g, m, float(obj.get("fiber_shift", 0.0)))
    material_id = obj.get("material")
    if material_id is not None and material_id not in materials:
        raise SceneFormatError(f"{path}.material",
                               f"unknown material {material_id!r}")
    node = SceneNode("primitive", prim_kind=kind, params=params,
                     placement=placement,
                     placement_inv=placement.inverse() if placement else None,
                     material_id=material_id,
                     cast_shadow=bool(obj.get("cast_shadow", True)))
    return node


def _load_quotient(g: GeometryId, obj, path: str) -> QuotientStructure:
    if isinstance(obj, str):
        if obj not in NAMED_LATTICES:
            raise SceneFormatError(path, f"unknown lattice {obj!r}")
        lat_g, ctor = NAMED_LATTICES[obj]
        if lat_g is not g:
            raise SceneFormatError(path,
                                   f"lattice {obj!r} belongs to {lat_g.value}")
        return ctor()
    _expect_keys(obj, path, {"generators", "halfspaces"}, {"phases", "fiber_shifts"})
    gens_raw = obj["generators"]
    if not isinstance(gens_raw, list) or not gens_raw:
        raise SceneFormatError(f"{path}.generators", "expected a non-empty list")
    shifts = obj.get("fiber_shifts", [0.0] * len(gens_raw))
    gens = []
    for i, m in enumerate(gens_raw):
        mat = _vector(m, f"{path}.generators[{i}]", 16).reshape(4, 4)
        gens.append(Isometry(g, mat, float(shifts[i])))
    hs_raw = obj["halfspaces"]
    halfspaces = []
    for i, h in enumerate(hs_raw):
        hp = f"{path}.halfspaces[{i}]"
        _expect_keys(h, hp, {"coeffs", "apply"})
        coeffs = _vector(h["coeffs"], f"{hp}.coeffs", 4)
        gi = h["apply"]
        if not isinstance(gi, int) or not (0 <= gi < len(gens)):
            raise SceneFormatError(f"{hp}.apply", "generator index out of range")
        halfspaces.append(Halfspace(coeffs, gi))
    phases = obj.get("phases", [list(range(len(halfspaces)))])
    return QuotientStructure(g, gens, halfspaces, phases=phases)


def load_scene(source) -> Scene:
    """Load and validate a scene from a path, a JSON string, or a dict."""
    if isinstance(source, dict):
        data = source
    elif isinstance(source, (str, bytes)) and str(source).lstrip().startswith("{"):
        data = json.loads(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    _expect_keys(data, "$", {"geometry", "camera", "materials", "lights",
                             "objects"}, {"quotient"})
    try:
        g = GeometryId.parse(data["geometry"])
    except ValueError as exc:
        raise SceneFormatError("$.geometry", str(exc)) from None
    cam = data["camera"]
    _expect_keys(cam, "$.camera", {"position", "facing"}, {"fiber"})
    cpos = _point(g, cam["position"] if "fiber" not in cam
                  else list(cam["position"]) + [cam["fiber"]], "$.camera.position")
    m = _vector(cam["facing"], "$.camera.facing", 9).reshape(3, 3)
    camera = Pose(g, translation_to(g, cpos), gram_schmidt(m))
    materials = {}
    if not isinstance(data["materials"], list):
        raise SceneFormatError("$.materials", "expected a list")
    for i, mraw in enumerate(data["materials"]):
        mp = f"$.materials[{i}]"
        _expect_keys(mraw, mp, {"id"},
                     {"color", "k_amb", "k_diff", "k_spec", "shininess",
                      "reflectivity", "texture"})
        color = _vector(mraw.get("color", [0.8, 0.8, 0.8]), f"{mp}.color", 3)
        mat = Material(mraw["id"], color,
                       k_amb=float(mraw.get("k_amb", 0.3)),
                       k_diff=float(mraw.get("k_diff", 0.5)),
                       k_spec=float(mraw.get("k_spec", 0.2)),
                       shininess=float(mraw.get("shininess", 16.0)),
                       reflectivity=float(mraw.get("reflectivity", 0.0)),
                       texture=mraw.get("texture"))
        mat.validate(mp)
        materials[mat.id] = mat
    lights = []
    if not isinstance(data["lights"], list):
        raise SceneFormatError("$.lights", "expected a list")
    for i, lraw in enumerate(data["lights"]):
        lp = f"$.lights[{i}]"
        _expect_keys(lraw, lp, {"position"},
                     {"color", "intensity", "marker_radius"})
        pos = _point(g, lraw["position"], f"{lp}.position")
        intensity = float(lraw.get("intensity", 1.0))
        if intensity <= 0.0:
            raise SceneFormatError(f"{lp}.intensity", "intensity must be > 0")
        lights.append(Light(pos, _vector(lraw.get("color", [1, 1, 1]),
                                         f"{lp}.color", 3),
                            intensity, float(lraw.get("marker_radius", 0.0))))
    root = _load_node(g, data["objects"], "$.objects", materials)
    quotient = None
    sdf_mode = "neighbors"
    creep = "binary"
    if "quotient" in data:
        qraw = data["quotient"]
        if isinstance(qraw, dict) and "lattice" in qraw:
            _expect_keys(qraw, "$.quotient", {"lattice"}, {"sdf_mode", "creep"})
            quotient = _load_quotient(g, qraw["lattice"], "$.quotient.lattice")
            sdf_mode = qraw.get("sdf_mode", "neighbors")
            creep = qraw.get("creep", "binary")
        else:
            quotient = _load_quotient(g, qraw, "$.quotient")
        if sdf_mode not in ("basic", "neighbors"):
            raise SceneFormatError("$.quotient.sdf_mode", f"unknown mode {sdf_mode!r}")
        if creep not in ("none", "binary", "march", "trace"):
            raise SceneFormatError("$.quotient.creep", f"unknown mode {creep!r}")
    scene = Scene(g, camera, materials, lights, root, quotient, sdf_mode, creep)
    _attach_light_markers(scene)
    return scene


DEFAULT_MATERIAL = Material("__default", np.array([0.8, 0.8, 0.8]))


def _attach_light_markers(scene: Scene) -> None:
    """Light marker balls: visible, glowing, and excluded from shadow tests."""
    g = scene.geometry
    marked = []
    for i, light in enumerate(scene.lights):
        if light.marker_radius <= 0.0:
            continue
        mat = Material(f"__light_{i}", np.clip(light.color, 0.0, 1.0),
                       k_amb=1.0, k_diff=0.0, k_spec=0.0)
        scene.materials[mat.id] = mat
        placement = translation_to(g, light.position)
        if g is GeometryId.SOL:
            kind, params = "pseudo_ball", {"level": light.marker_radius}
        else:
            kind, params = "ball", {"radius": light.marker_radius}
        marked.append(SceneNode("primitive", prim_kind=kind, params=params,
                                placement=placement,
                                placement_inv=placement.inverse(),
                                material_id=mat.id, cast_shadow=False))
    if marked:
        scene.root = SceneNode("union", children=[scene.root] + marked)


def material_of(scene: Scene, node: SceneNode | None) -> Material:
    if node is None or node.material_id is None:
        return DEFAULT_MATERIAL
    return scene.materials[node.material_id]


def base_color(scene: Scene, node: SceneNode | None, p: GeometryPoint) -> np.ndarray:
    mat = material_of(scene, node)
    if mat.texture != "earth":
        return mat.color
    q = node.placement_inv.apply_point(p) if node.placement_inv is not None else p
    c = q.coords
    lon = math.atan2(c[1], c[0])
    lat = math.atan2(c[2], math.hypot(c[0], c[1]))
    land = math.sin(2.0 * lat) * math.cos(3.0 * lon) + 0.4 * math.sin(5.0 * lon)
    if land > 0.2:
        return np.array([0.25, 0.55, 0.2])
    return np.array([0.1, 0.25, 0.6])
