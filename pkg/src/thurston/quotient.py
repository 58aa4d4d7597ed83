"""Quotient manifolds: fundamental domains cut out by half-space functionals,
with teleportation by face-pairing generators.

A half-space test is affine in geometry-adapted coordinates (the model
coordinates for the affine and linear models, Klein-disk coordinates plus the
fiber for the universal cover of SL(2,R)).  A point is inside the domain when
every functional is <= 0; a violated functional names the generator that
moves the point back toward the domain.  Teleportation runs in phases whose
order matters for the twisted lattices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import (
    GeometryId,
    GeometryPoint,
    Isometry,
    TeleportDivergenceError,
    identity_isometry,
)

TELEPORT_MAX_STEPS = 1024
FUNCTIONAL_SLACK = 1e-12


@dataclass(eq=False)
class Halfspace:
    """Affine functional; violated when coeffs . test_coords(p) > 0."""

    coeffs: np.ndarray          # shape (4,)
    generator: int              # index of the generator restoring the point


@dataclass(eq=False)
class QuotientStructure:
    geometry: GeometryId
    generators: list            # list of Isometry
    halfspaces: list            # list of Halfspace
    phases: list                # list of lists of halfspace indices
    wall_sdf: object = None     # optional callable p -> distance bound to walls

    def __post_init__(self):
        self._coeffs = np.stack([h.coeffs for h in self.halfspaces])

    def test_coords(self, p: GeometryPoint) -> np.ndarray:
        if self.geometry is GeometryId.SL2:
            from . import sl2
            k1, k2 = sl2.klein_coords(p)
            return np.array([k1, k2, p.fiber, 1.0])
        return p.coords

    def violated(self, p: GeometryPoint, indices=None) -> int | None:
        """Index of a violated halfspace (the worst one), or None."""
        vals = self._coeffs @ self.test_coords(p)
        if indices is None:
            i = int(np.argmax(vals))
        else:
            i = indices[int(np.argmax(vals[indices]))]
        return i if vals[i] > FUNCTIONAL_SLACK else None

    def inside(self, p: GeometryPoint) -> bool:
        vals = self._coeffs @ self.test_coords(p)
        return vals.max() <= FUNCTIONAL_SLACK

    def neighbor_set(self) -> list:
        return list(self.generators)


def teleport(qs: QuotientStructure, p: GeometryPoint):
    """Move p into the fundamental domain.

    Returns the moved point and the accumulated isometry mapping the input to
    the output.  Raises TeleportDivergenceError when the iteration cap is hit
    (which signals an inconsistent lattice definition).
    """
    acc = identity_isometry(qs.geometry)
    moved = p
    steps = 0
    for phase in qs.phases:
        while True:
            i = qs.violated(moved, phase)
            if i is None:
                break
            gen = qs.generators[qs.halfspaces[i].generator]
            moved = gen.apply_point(moved)
            acc = gen.compose(acc)
            steps += 1
            if steps > TELEPORT_MAX_STEPS:
                raise TeleportDivergenceError(
                    "teleportation did not reach the fundamental domain")
    return moved, acc
