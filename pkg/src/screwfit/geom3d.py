"""Rotations, rigid poses and directed 3D lines in Pluecker coordinates.

A line is stored as a (direction, moment) pair with ``norm(direction) == 1``
and ``dot(direction, moment) == 0``, which pins the line down to its four
effective degrees of freedom.  The moment of a line through a point ``p``
with unit direction ``l`` is ``m = p x l``.

All lengths are in meters and all angles in radians.  Values are immutable
by convention; every operation returns a new object.
"""

import numpy as np

# Branch tolerances for the three-case line distance.  Lines are treated as
# parallel below PARALLEL_TOL on the direction cross product, and as
# intersecting below INTERSECT_TOL on the reciprocal product.  Both sit well
# under the noise of any realistic pose data.
PARALLEL_TOL = 1e-8
INTERSECT_TOL = 1e-9

_CONSTRUCT_TOL = 1e-6


def unit(v):
    """Return ``v`` scaled to unit length; raises on (near-)zero input."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n <= 1e-12:
        raise ValueError("cannot normalize a zero-length vector")
    return v / n


def skew(v):
    """3x3 cross-product matrix: ``skew(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


class Rotation:
    """An element of SO(3), stored canonically as a unit quaternion.

    The quaternion is ordered ``(w, x, y, z)`` and normalized with a
    non-negative scalar part, resolving the quaternion double cover.
    """

    __slots__ = ("q", "_mat")

    def __init__(self, q):
        q = np.array(q, dtype=float)
        if q.shape != (4,):
            raise ValueError("quaternion must have four components (w, x, y, z)")
        n = np.linalg.norm(q)
        if n <= 1e-12:
            raise ValueError("zero quaternion does not define a rotation")
        q = q / n
        if q[0] < 0.0:
            q = -q
        elif q[0] == 0.0:
            # Half-turn: w vanishes and both signs of the vector part encode
            # the same rotation.  Pick the sign deterministically.
            for c in q[1:]:
                if c != 0.0:
                    if c < 0.0:
                        q = -q
                    break
        self.q = q
        self._mat = None

    @classmethod
    def identity(cls):
        return cls((1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_axis_angle(cls, axis, angle):
        """Rotation by ``angle`` (rad) about the (not necessarily unit) ``axis``."""
        a = unit(axis)
        half = 0.5 * float(angle)
        s = np.sin(half)
        return cls((np.cos(half), s * a[0], s * a[1], s * a[2]))

    @classmethod
    def from_matrix(cls, R):
        """Build from an orthonormal 3x3 matrix.

        Uses the largest-pivot quaternion extraction, which stays accurate
        for angles near pi where trace-based formulas lose precision.
        """
        R = np.asarray(R, dtype=float)
        t = np.trace(R)
        if t > 0.0:
            s = 2.0 * np.sqrt(t + 1.0)
            q = (0.25 * s,
                 (R[2, 1] - R[1, 2]) / s,
                 (R[0, 2] - R[2, 0]) / s,
                 (R[1, 0] - R[0, 1]) / s)
        elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
            s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
            q = ((R[2, 1] - R[1, 2]) / s,
                 0.25 * s,
                 (R[0, 1] + R[1, 0]) / s,
                 (R[0, 2] + R[2, 0]) / s)
        elif R[1, 1] > R[2, 2]:
            s = 2.0 * np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
            q = ((R[0, 2] - R[2, 0]) / s,
                 (R[0, 1] + R[1, 0]) / s,
                 0.25 * s,
                 (R[1, 2] + R[2, 1]) / s)
        else:
            s = 2.0 * np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
            q = ((R[1, 0] - R[0, 1]) / s,
                 (R[0, 2] + R[2, 0]) / s,
                 (R[1, 2] + R[2, 1]) / s,
                 0.25 * s)
        return cls(q)

    @classmethod
    def random(cls, rng):
        """Rotation drawn uniformly from SO(3)."""
        return cls(rng.normal(size=4))

    def as_matrix(self):
        """The 3x3 rotation matrix (cached; treat as read-only)."""
        if self._mat is None:
            w, x, y, z = self.q
            xx, yy, zz = x * x, y * y, z * z
            xy, xz, yz = x * y, x * z, y * z
            wx, wy, wz = w * x, w * y, w * z
            self._mat = np.array([
                [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
                [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
                [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
            ])
        return self._mat

    def apply(self, v):
        """Rotate a 3-vector or an (N, 3) stack of vectors."""
        v = np.asarray(v, dtype=float)
        return v @ self.as_matrix().T

    def __matmul__(self, other):
        """Composition: ``(a @ b).apply(v) == a.apply(b.apply(v))``."""
        w1, x1, y1, z1 = self.q
        w2, x2, y2, z2 = other.q
        return Rotation((
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ))

    def inverse(self):
        w, x, y, z = self.q
        return Rotation((w, -x, -y, -z))

    def axis_angle(self):
        """Return ``(axis, angle)`` with angle in [0, pi].

        The zero rotation reports the conventional +z axis.
        """
        w = self.q[0]
        v = self.q[1:]
        s = np.linalg.norm(v)
        angle = 2.0 * np.arctan2(s, w)
        if s <= 1e-12:
            return np.array([0.0, 0.0, 1.0]), 0.0
        return v / s, angle

    @property
    def angle(self):
        return 2.0 * np.arctan2(np.linalg.norm(self.q[1:]), self.q[0])

    def __repr__(self):
        return f"Rotation(q={self.q.tolist()})"


class Pose:
    """A rigid transform of 3-space: rotation followed by translation."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation, translation):
        if not isinstance(rotation, Rotation):
            raise TypeError("rotation must be a Rotation")
        t = np.array(translation, dtype=float)
        if t.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        self.rotation = rotation
        self.translation = t

    @classmethod
    def identity(cls):
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def random(cls, rng, box=1.0):
        """Uniform random orientation, translation uniform in [-box, box]^3."""
        return cls(Rotation.random(rng), rng.uniform(-box, box, size=3))

    def apply(self, p):
        """Map a point (or (N, 3) stack of points) through the transform."""
        return self.rotation.apply(p) + self.translation

    def __matmul__(self, other):
        return Pose(self.rotation @ other.rotation,
                    self.rotation.apply(other.translation) + self.translation)

    def inverse(self):
        rinv = self.rotation.inverse()
        return Pose(rinv, -rinv.apply(self.translation))

    def __repr__(self):
        return f"Pose(q={self.rotation.q.tolist()}, t={self.translation.tolist()})"


class PluckerLine:
    """A directed line with unit direction and origin-moment ``m = p x l``."""

    __slots__ = ("direction", "moment")

    def __init__(self, direction, moment):
        d = np.array(direction, dtype=float)
        m = np.array(moment, dtype=float)
        if d.shape != (3,) or m.shape != (3,):
            raise ValueError("direction and moment must be 3-vectors")
        n = np.linalg.norm(d)
        if abs(n - 1.0) > _CONSTRUCT_TOL:
            raise ValueError(f"line direction must be unit length, got norm {n!r}")
        dm = float(d @ m)
        if abs(dm) > _CONSTRUCT_TOL * max(1.0, np.linalg.norm(m)):
            raise ValueError(f"line moment must be orthogonal to direction, got <l, m> = {dm!r}")
        self.direction = d
        self.moment = m

    def point_closest_to_origin(self):
        """``l x m``, the point of the line nearest the origin."""
        return np.cross(self.direction, self.moment)

    def point_at(self, s):
        """Point at signed arc length ``s`` from the closest-to-origin point."""
        return self.point_closest_to_origin() + s * self.direction

    def reversed(self):
        """Same geometric line, opposite direction."""
        return PluckerLine(-self.direction, -self.moment)

    def __repr__(self):
        return f"PluckerLine(l={self.direction.tolist()}, m={self.moment.tolist()})"


def line_from_point_direction(p, direction):
    """Line through point ``p`` along ``direction`` (need not be unit).

    Raises ValueError for a zero-length direction.
    """
    l = unit(direction)
    p = np.asarray(p, dtype=float)
    return PluckerLine(l, np.cross(p, l))


def line_distance(l1, l2):
    """Shortest distance between two lines.

    Three cases: zero when the lines intersect, the perpendicular gap when
    they are parallel, and the reciprocal product ``|l1.m2 + l2.m1|`` scaled
    by ``1 / norm(l1 x l2)`` when they are skew.  Anti-parallel inputs are
    sign-aligned before the parallel case so the gap is measured between
    consistently oriented lines.
    """
    d1, m1 = l1.direction, l1.moment
    d2, m2 = l2.direction, l2.moment
    c = np.cross(d1, d2)
    nc = np.linalg.norm(c)
    if nc < PARALLEL_TOL:
        if d1 @ d2 < 0.0:
            d2, m2 = -d2, -m2
        return float(np.linalg.norm(np.cross(d1, m1 - m2)))
    recip = abs(float(d1 @ m2) + float(d2 @ m1))
    if recip < INTERSECT_TOL:
        return 0.0
    return recip / nc


def line_motion_matrix(rotation, translation):
    """6x6 operator transporting line coordinates between frames.

    For a transform ``(R, t)`` taking coordinates of frame A to frame B, the
    block matrix ``[[R, 0], [skew(t) @ R, R]]`` maps the stacked
    ``(direction, moment)`` of a line from frame A to frame B.
    """
    R = rotation.as_matrix()
    t = np.asarray(translation, dtype=float)
    D = np.zeros((6, 6))
    D[:3, :3] = R
    D[3:, 3:] = R
    D[3:, :3] = skew(t) @ R
    return D


def pose_motion_matrix(pose):
    """Line motion matrix of a pose (shorthand for its rotation/translation)."""
    return line_motion_matrix(pose.rotation, pose.translation)


def transform_line(D, line):
    """Apply a 6x6 line motion matrix to a line."""
    x = D @ np.concatenate([line.direction, line.moment])
    return PluckerLine(x[:3], x[3:])


def axis_angle_between(u, v):
    """Angle in [0, pi] between two unit vectors.

    Evaluated as ``atan2(norm(u x v), <u, v>)``, which equals the arccos of
    the clamped dot product but keeps full precision for nearly (anti-)
    parallel inputs.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), u @ v))
