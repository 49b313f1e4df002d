"""Finite screw displacements: decomposition, application and transport.

Any rigid displacement is a rotation ``theta`` about a unique line plus a
translation ``d`` along that line.  A screw is stored canonically with
``theta`` in [0, pi]; for a pure translation (``theta == 0``) the line runs
through the origin along the motion with ``d >= 0``, and a no-motion step
carries the conventional +z axis.
"""

import math

import numpy as np

from .geom3d import Pose, PluckerLine, Rotation, transform_line, unit

# Below this rotation angle a displacement is treated as translation-only.
ROTATION_EPS = 1e-8
# Below this translation norm a rotation-free displacement is a rigid step.
TRANSLATION_EPS = 1e-12

_Z_AXIS_LINE = PluckerLine((0.0, 0.0, 1.0), (0.0, 0.0, 0.0))


class ScrewDisplacement:
    """A rigid displacement as (axis line, rotation theta, slide d)."""

    __slots__ = ("axis", "theta", "d")

    def __init__(self, axis, theta, d):
        if not isinstance(axis, PluckerLine):
            raise TypeError("axis must be a PluckerLine")
        self.axis = axis
        self.theta = float(theta)
        self.d = float(d)

    def is_degenerate(self):
        """True for the zero-motion step (no axis information)."""
        return self.theta == 0.0 and self.d == 0.0

    def __repr__(self):
        return (f"ScrewDisplacement(l={self.axis.direction.tolist()}, "
                f"m={self.axis.moment.tolist()}, theta={self.theta}, d={self.d})")


def screw_from_relative_pose(pose):
    """Decompose a relative pose into its screw displacement.

    The axis is the unique line about which the pose is a rotation by
    ``theta`` plus a slide ``d``.  Degenerate inputs fall back to the
    canonical conventions: a pure translation yields the origin line along
    the motion with ``theta = 0``, and an identity pose yields the +z origin
    line with ``theta = d = 0``.
    """
    w = pose.rotation.q[0]
    v = pose.rotation.q[1:]
    sin_half = np.linalg.norm(v)
    theta = 2.0 * np.arctan2(sin_half, w)
    t = pose.translation

    if theta < ROTATION_EPS:
        tn = np.linalg.norm(t)
        if tn < TRANSLATION_EPS:
            return ScrewDisplacement(_Z_AXIS_LINE, 0.0, 0.0)
        return ScrewDisplacement(PluckerLine(t / tn, np.zeros(3)), 0.0, float(tn))

    l = v / sin_half
    d = float(t @ l)
    t_perp = t - d * l
    # Point on the axis: solve (I - R) p0 = t_perp in the plane normal to l.
    half = 0.5 * theta
    p0 = 0.5 * (t_perp + (np.cos(half) / np.sin(half)) * np.cross(l, t_perp))
    return ScrewDisplacement(PluckerLine(l, np.cross(p0, l)), float(theta), d)


def apply_screw(screw):
    """Pose realizing a screw: rotate about the axis, then slide along it."""
    l = screw.axis.direction
    R = Rotation.from_axis_angle(l, screw.theta)
    p0 = screw.axis.point_closest_to_origin()
    t = screw.d * l + p0 - R.apply(p0)
    return Pose(R, t)


def pitch(screw):
    """Slide-per-radian ``d / theta`` of a screw.

    Returns ``math.inf`` for a pure translation and ``math.nan`` for a
    zero-motion step, where the ratio is undefined.
    """
    if abs(screw.theta) > ROTATION_EPS:
        return screw.d / screw.theta
    if abs(screw.d) > 0.0:
        return math.inf
    return math.nan


def transform_screw(screw, D):
    """Re-express a screw in another frame via a line motion matrix.

    Only the axis moves; the scalar configuration (theta, d) is untouched.
    Canonical degenerate forms survive the transport: a zero-motion screw is
    frame-free and returned unchanged, and a pure translation keeps its
    through-the-origin representative (the direction rotates, the moment
    stays zero), which encodes the identical displacement.
    """
    if screw.theta == 0.0:
        if screw.d == 0.0:
            return screw
        direction = D[:3, :3] @ screw.axis.direction
        return ScrewDisplacement(PluckerLine(direction, np.zeros(3)), 0.0, screw.d)
    return ScrewDisplacement(transform_line(D, screw.axis), screw.theta, screw.d)


def random_screw(rng, theta_range=(1e-4, math.pi - 1e-4), d_range=(-1.0, 1.0), box=1.0):
    """A random canonical screw; axis point uniform in [-box, box]^3."""
    direction = unit(rng.normal(size=3))
    point = rng.uniform(-box, box, size=3)
    axis = PluckerLine(direction, np.cross(point, direction))
    theta = rng.uniform(*theta_range)
    d = rng.uniform(*d_range)
    return ScrewDisplacement(axis, theta, d)
