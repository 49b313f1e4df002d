"""Articulation model categories, the category decision tree, and model
construction from screw sequences.

A 1-DoF articulation model is a category, a shared screw axis, and one
(theta, d) configuration per observed displacement.  The four categories are
special cases of screw motion about the shared axis: a rigid pair never
moves, a revolute joint only rotates, a prismatic joint only slides, and a
helical joint couples both through a fixed pitch.
"""

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geom3d import PluckerLine, axis_angle_between, line_distance
from .screws import _Z_AXIS_LINE

# Motion-magnitude weights trade radians against meters at this length
# scale when aggregating per-step axes.
MOTION_LENGTH_SCALE = 0.1


class ModelCategory(enum.Enum):
    RIGID = "rigid"
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    HELICAL = "helical"

    def __str__(self):
        return self.value


class Configuration(NamedTuple):
    """Scalar joint state of one displacement: rotation and slide."""
    theta: float
    d: float


@dataclass(frozen=True)
class CategoryThresholds:
    """Decision boundaries separating real joint motion from noise.

    ``eps_theta`` (rad) decides whether a sequence rotates at all and
    ``eps_d`` (m) whether it translates; ``helical_pitch_tol`` is the
    relative slack allowed on the pitch coupling when validating a helical
    model.  The defaults were tuned on jittered synthetic trajectories
    (rotation noise up to ~0.5 deg and translation noise up to ~2 mm per
    pose) and sit well below ordinary joint motion.
    """

    eps_theta: float = 0.035
    eps_d: float = 0.015
    helical_pitch_tol: float = 0.05

    def __post_init__(self):
        if self.eps_theta <= 0 or self.eps_d <= 0 or self.helical_pitch_tol <= 0:
            raise ValueError("thresholds must be positive")


class ModelInconsistencyError(ValueError):
    """The screw sequence is not explained by a single 1-DoF model."""


@dataclass(frozen=True)
class ArticulationModel:
    """Category, shared axis, and per-step configurations of one joint."""

    category: ModelCategory
    axis: PluckerLine
    configs: tuple

    def __post_init__(self):
        object.__setattr__(self, "configs",
                           tuple(Configuration(float(t), float(d)) for t, d in self.configs))

    @property
    def thetas(self):
        return np.array([c.theta for c in self.configs])

    @property
    def ds(self):
        return np.array([c.d for c in self.configs])

    def pitch_fit(self):
        """Least-squares pitch coupling d = h * theta over the configs."""
        th = self.thetas
        denom = float(th @ th)
        if denom == 0.0:
            return 0.0
        return float(th @ self.ds) / denom


def _pitch_coupling(thetas, ds):
    """Slope of the least-squares line d = h * theta (+ offset).

    The offset soaks up any common-mode slide shared by all steps (with a
    single step the plain ratio is used), so the slope only responds to
    slide that actually grows with rotation.
    """
    if thetas.size < 2:
        denom = float(thetas @ thetas)
        return float(thetas @ ds) / denom if denom > 0.0 else 0.0
    t_mean = float(np.mean(thetas))
    d_mean = float(np.mean(ds))
    denom = float(np.sum((thetas - t_mean) ** 2))
    if denom <= 0.0:
        return 0.0
    return float(np.sum((thetas - t_mean) * (ds - d_mean))) / denom


def _classify_configs(thetas, ds, th):
    thetas = np.asarray(thetas, dtype=float)
    ds = np.asarray(ds, dtype=float)
    if thetas.size == 0:
        raise ValueError("cannot classify an empty sequence")
    rotating = float(np.max(np.abs(thetas))) > th.eps_theta
    if rotating:
        # Slide that merely rattles around a constant is noise; genuine
        # helical motion shows up as slide coupled to the rotation.
        h = _pitch_coupling(thetas, ds)
        coupled_slide = abs(h) * float(np.max(np.abs(thetas)))
        if coupled_slide > th.eps_d:
            return ModelCategory.HELICAL
        return ModelCategory.REVOLUTE
    # Median-centering makes the slide test blind to the constant offset a
    # noisy reference frame imprints on every step (a single step offers
    # nothing to center against).
    if thetas.size >= 2:
        slide = float(np.mean(np.abs(ds - np.median(ds))))
    else:
        slide = float(np.mean(np.abs(ds)))
    if slide > th.eps_d:
        return ModelCategory.PRISMATIC
    return ModelCategory.RIGID


def classify(screws, thresholds=None):
    """Deduce the model category of a screw-displacement sequence.

    The tree first decides whether the sequence rotates (any step above
    ``eps_theta``).  Rotating sequences are helical when the pitch-coupled
    slide ``|h| * max|theta|`` exceeds ``eps_d`` and revolute otherwise;
    non-rotating sequences are prismatic when the mean slide exceeds
    ``eps_d`` and rigid otherwise.  Raises ValueError on an empty sequence.
    """
    th = thresholds or CategoryThresholds()
    screws = list(screws)
    if not screws:
        raise ValueError("cannot classify an empty sequence")
    return _classify_configs([s.theta for s in screws], [s.d for s in screws], th)


def _axis_weights(screws):
    """Inverse-variance-style reliability of each step's axis.

    The direction error of an extracted screw axis scales like
    ``noise / tan(theta / 2)`` for rotation-dominated steps and like
    ``noise / |d|`` for slides, so weights proportional to
    ``4 tan^2(theta/2) + (d / L)^2`` weight each axis by how well the step
    pins it down (``4 tan^2(theta/2)`` reduces to ``theta^2`` for small
    angles, keeping the two terms commensurate through the length scale L).
    """
    w = np.empty(len(screws))
    for i, s in enumerate(screws):
        half = min(abs(s.theta), np.pi - 1e-9) / 2.0
        w[i] = 4.0 * np.tan(half) ** 2 + (s.d / MOTION_LENGTH_SCALE) ** 2
    return w


def aggregate_axes(screws, weights=None):
    """Sign-aligned weighted mean line of the screws' axes.

    Steps are weighted by how reliably they pin the axis down (see
    ``_axis_weights``); barely-moving steps carry poorly conditioned axes
    and contribute almost nothing.  Directions are sign-aligned to the
    weighted principal direction before averaging (a line and its reverse
    are the same axis), and the mean moment is re-orthogonalized against
    the mean direction.  Returns ``(line, signs)``; the conventional +z
    origin line with empty signs when no step carries any motion.
    """
    screws = list(screws)
    w = _axis_weights(screws) if weights is None else np.asarray(weights, dtype=float)
    if float(np.sum(w)) <= 1e-12:
        return _Z_AXIS_LINE, np.zeros(len(screws))

    dirs = np.array([s.axis.direction for s in screws])
    moms = np.array([s.axis.moment for s in screws])
    # Principal direction of the weighted outer-product sum is sign-free and
    # permutation-invariant; it anchors the orientation of the mean.
    M = (dirs * w[:, None]).T @ dirs
    _, vecs = np.linalg.eigh(M)
    principal = vecs[:, -1]
    ref = float(np.sum(w * (dirs @ principal)))
    if ref < 0.0 or (ref == 0.0 and principal[np.nonzero(principal)[0][0]] < 0.0):
        principal = -principal

    signs = np.sign(dirs @ principal)
    signs[signs == 0.0] = 1.0
    wt = w * signs
    mean_dir = (dirs * wt[:, None]).sum(axis=0)
    n = np.linalg.norm(mean_dir)
    if n <= 1e-12:
        return _Z_AXIS_LINE, np.zeros(len(screws))
    mean_dir = mean_dir / n
    mean_mom = (moms * wt[:, None]).sum(axis=0) / float(np.sum(w))
    mean_mom = mean_mom - (mean_dir @ mean_mom) * mean_dir
    return PluckerLine(mean_dir, mean_mom), signs


def axis_spread(screws, axis, weights=None):
    """Worst orientation (rad) and position (m) deviation from ``axis``.

    Only steps carrying meaningful motion are counted; a near-degenerate
    step has no trustworthy axis of its own.
    """
    screws = list(screws)
    w = _axis_weights(screws) if weights is None else np.asarray(weights, dtype=float)
    cutoff = 1e-6 * max(1.0, float(np.max(w, initial=0.0)))
    max_ang = 0.0
    max_dist = 0.0
    for s, wi in zip(screws, w):
        if wi <= cutoff:
            continue
        ang = axis_angle_between(s.axis.direction, axis.direction)
        max_ang = max(max_ang, min(ang, np.pi - ang))
        max_dist = max(max_dist, line_distance(s.axis, axis))
    return max_ang, max_dist


# A shared axis may disagree by at most this much across steps before the
# single-model assumption is considered violated.
AXIS_SPREAD_MAX_RAD = np.deg2rad(5.0)


def model_from_screws(screws, thresholds=None):
    """Build an articulation model from screws sharing one axis.

    Configurations are the per-step (theta, d), sign-adjusted so every step
    refers to the aggregated axis direction.  Raises
    ModelInconsistencyError when the per-step axes of a moving sequence
    spread more than 5 degrees in orientation or ``eps_d`` in position,
    which signals motion not explained by a single 1-DoF model.
    """
    th = thresholds or CategoryThresholds()
    screws = list(screws)
    if not screws:
        raise ValueError("cannot build a model from an empty sequence")
    category = classify(screws, th)

    if category is ModelCategory.RIGID:
        return ArticulationModel(category, _Z_AXIS_LINE,
                                 [(s.theta, s.d) for s in screws])

    axis, signs = aggregate_axes(screws)
    ang, dist = axis_spread(screws, axis)
    if ang > AXIS_SPREAD_MAX_RAD or dist > th.eps_d:
        raise ModelInconsistencyError(
            f"per-step axes spread {np.rad2deg(ang):.2f} deg / {dist:.4f} m; "
            "sequence is not a single 1-DoF motion")
    configs = [(si * s.theta, si * s.d) for s, si in zip(screws, signs)]
    return ArticulationModel(category, axis, configs)
